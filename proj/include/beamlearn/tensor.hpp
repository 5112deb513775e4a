#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "beamlearn/errors.hpp"

namespace beamlearn {

using cplx = std::complex<double>;
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);
bool shapes_equal(const Shape& a, const Shape& b);
Shape broadcast_shape(const Shape& a, const Shape& b);  // throws ShapeMismatch

// Dense tensor of complex doubles, row-major, last index fastest.
// Rank 0 is a scalar with one element. Matrix operations treat the last two
// dimensions as (rows, cols) and everything in front as a batch.
class CTensor {
 public:
  CTensor() = default;
  explicit CTensor(Shape shape);
  CTensor(Shape shape, cplx fill);

  static CTensor zeros(Shape shape) { return CTensor(std::move(shape)); }
  static CTensor full(Shape shape, cplx v) { return CTensor(std::move(shape), v); }
  static CTensor scalar(cplx v);
  static CTensor scalar(double v) { return scalar(cplx(v, 0.0)); }
  static CTensor eye(std::size_t n);
  static CTensor from_real(const std::vector<double>& v, Shape shape);
  static CTensor from_complex(std::vector<cplx> v, Shape shape);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  bool empty() const { return data_.empty(); }

  cplx* data() { return data_.data(); }
  const cplx* data() const { return data_.data(); }
  cplx& at(std::size_t i) { return data_[i]; }
  cplx at(std::size_t i) const { return data_[i]; }
  cplx& operator()(std::size_t r, std::size_t c);
  cplx operator()(std::size_t r, std::size_t c) const;

  std::size_t rows() const;   // second-to-last dim
  std::size_t cols() const;   // last dim
  std::size_t batch() const;  // product of leading dims

  bool same_shape(const CTensor& o) const { return shapes_equal(shape_, o.shape_); }
  bool is_real(double tol = 0.0) const;
  double max_imag_abs() const;
  bool all_finite() const;
  double max_abs() const;

  CTensor reshaped(Shape s) const;  // throws on element-count change
  std::vector<double> to_real_vector() const;

 private:
  Shape shape_;
  std::vector<cplx> data_;
};

bool bitwise_equal(const CTensor& a, const CTensor& b);

// Elementwise binary op with numpy-style broadcasting (dims equal or 1,
// aligned from the trailing side).
CTensor broadcast_binary(const CTensor& a, const CTensor& b,
                         const std::function<cplx(cplx, cplx)>& f);

// Adjoint of broadcasting: sum g over the axes that were expanded to reach
// g.shape() from `target`.
CTensor reduce_to_shape(const CTensor& g, const Shape& target);

}  // namespace beamlearn
