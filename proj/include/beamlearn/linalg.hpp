#pragma once

#include <vector>

#include "beamlearn/rng.hpp"
#include "beamlearn/tensor.hpp"

namespace beamlearn::la {

// Batched matrix product over the last two dimensions; leading dimensions
// broadcast numpy-style.
CTensor matmul(const CTensor& a, const CTensor& b);

CTensor transpose_last2(const CTensor& a);
CTensor adjoint(const CTensor& a);  // conjugate transpose, batched
CTensor conj(const CTensor& a);
CTensor scale(const CTensor& a, cplx s);
CTensor add(const CTensor& a, const CTensor& b);
CTensor sub(const CTensor& a, const CTensor& b);

struct LuInverse {
  CTensor inv;
  double rcond;  // min |pivot| / max |entry|, a cheap conditioning estimate
};

// Inverse of a square matrix via LU with partial pivoting. Throws
// SingularMatrix when a pivot falls below 1e-12 times the matrix
// max-magnitude.
LuInverse lu_inverse(const CTensor& a);

// Batched inverse over the leading dimensions. Reports the worst rcond seen.
CTensor batched_inverse(const CTensor& a, double* min_rcond = nullptr);

struct HermitianEig {
  CTensor u;                   // unitary, columns are eigenvectors
  std::vector<double> lambda;  // descending
};

// Cyclic complex Jacobi rotations; intended for K <= 64.
HermitianEig hermitian_eig(const CTensor& a);

// Haar-distributed unitary via Householder QR of a complex Gaussian matrix
// with the R-diagonal phase correction.
CTensor haar_unitary(std::size_t n, Rng& rng);

double fro_norm2(const CTensor& a);
double fro_norm(const CTensor& a);

CTensor column(const CTensor& m, std::size_t j);  // shape [rows, 1]
void set_column(CTensor& m, std::size_t j, const CTensor& v);
cplx vdot(const CTensor& a, const CTensor& b);  // sum conj(a_i) * b_i

}  // namespace beamlearn::la
