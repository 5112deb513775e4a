#pragma once

#include <stdexcept>
#include <string>

namespace beamlearn {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeMismatch : Error {
  using Error::Error;
};
struct SingularMatrix : Error {
  using Error::Error;
};
struct RankDeficient : SingularMatrix {
  using SingularMatrix::SingularMatrix;
};
struct NotScalar : Error {
  using Error::Error;
};
struct NotRealTensor : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct DivisionByZero : Error {
  using Error::Error;
};
struct GeometryError : Error {
  using Error::Error;
};
struct NoConvergence : Error {
  using Error::Error;
};
struct NonMonotone : Error {
  using Error::Error;
};
struct DegenerateTraining : Error {
  using Error::Error;
};
struct MissingLabels : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};
struct SchemaError : Error {
  using Error::Error;
};
struct MissingCheckpoint : Error {
  using Error::Error;
};

}  // namespace beamlearn
