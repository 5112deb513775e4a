#include "beamlearn/tensor.hpp"

#include <cmath>
#include <sstream>

namespace beamlearn {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

bool shapes_equal(const Shape& a, const Shape& b) { return a == b; }

Shape broadcast_shape(const Shape& a, const Shape& b) {
  std::size_t ra = a.size(), rb = b.size();
  std::size_t r = std::max(ra, rb);
  Shape out(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    std::size_t da = i < ra ? a[ra - 1 - i] : 1;
    std::size_t db = i < rb ? b[rb - 1 - i] : 1;
    if (da != db && da != 1 && db != 1) {
      throw ShapeMismatch("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    out[r - 1 - i] = std::max(da, db);
  }
  return out;
}

CTensor::CTensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_)) {}

CTensor::CTensor(Shape shape, cplx fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

CTensor CTensor::scalar(cplx v) {
  CTensor t{Shape{}};
  t.data_[0] = v;
  return t;
}

CTensor CTensor::eye(std::size_t n) {
  CTensor t{Shape{n, n}};
  for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
  return t;
}

CTensor CTensor::from_real(const std::vector<double>& v, Shape shape) {
  if (v.size() != shape_numel(shape)) {
    throw ShapeMismatch("from_real: " + std::to_string(v.size()) + " values vs " +
                        shape_str(shape));
  }
  CTensor t{std::move(shape)};
  for (std::size_t i = 0; i < v.size(); ++i) t.data_[i] = v[i];
  return t;
}

CTensor CTensor::from_complex(std::vector<cplx> v, Shape shape) {
  if (v.size() != shape_numel(shape)) {
    throw ShapeMismatch("from_complex: " + std::to_string(v.size()) + " values vs " +
                        shape_str(shape));
  }
  CTensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(v);
  return t;
}

cplx& CTensor::operator()(std::size_t r, std::size_t c) {
  return data_[r * cols() + c];
}

cplx CTensor::operator()(std::size_t r, std::size_t c) const {
  return data_[r * cols() + c];
}

std::size_t CTensor::rows() const {
  if (rank() < 2) throw ShapeMismatch("rows(): tensor rank < 2: " + shape_str(shape_));
  return shape_[rank() - 2];
}

std::size_t CTensor::cols() const {
  if (rank() < 1) throw ShapeMismatch("cols(): tensor rank < 1");
  return shape_[rank() - 1];
}

std::size_t CTensor::batch() const {
  if (rank() < 2) throw ShapeMismatch("batch(): tensor rank < 2");
  std::size_t n = 1;
  for (std::size_t i = 0; i + 2 < rank(); ++i) n *= shape_[i];
  return n;
}

bool CTensor::is_real(double tol) const { return max_imag_abs() <= tol; }

double CTensor::max_imag_abs() const {
  double m = 0.0;
  for (const cplx& z : data_) m = std::max(m, std::abs(z.imag()));
  return m;
}

bool CTensor::all_finite() const {
  for (const cplx& z : data_) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

double CTensor::max_abs() const {
  double m = 0.0;
  for (const cplx& z : data_) m = std::max(m, std::abs(z));
  return m;
}

CTensor CTensor::reshaped(Shape s) const {
  if (shape_numel(s) != numel()) {
    throw ShapeMismatch("reshape " + shape_str(shape_) + " to " + shape_str(s));
  }
  CTensor t = *this;
  t.shape_ = std::move(s);
  return t;
}

std::vector<double> CTensor::to_real_vector() const {
  std::vector<double> v(numel());
  for (std::size_t i = 0; i < numel(); ++i) v[i] = data_[i].real();
  return v;
}

bool bitwise_equal(const CTensor& a, const CTensor& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (a.at(i).real() != b.at(i).real() || a.at(i).imag() != b.at(i).imag()) return false;
  }
  return true;
}

namespace {

// Row-major strides, with zero stride on broadcast dimensions once the shape
// is right-aligned against `out`.
std::vector<std::size_t> aligned_strides(const Shape& shape, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t r = shape.size();
  std::size_t acc = 1;
  for (std::size_t i = 0; i < r; ++i) {
    std::size_t d = shape[r - 1 - i];
    std::size_t pos = out.size() - 1 - i;
    strides[pos] = (d == 1) ? 0 : acc;
    acc *= d;
  }
  return strides;
}

}  // namespace

CTensor broadcast_binary(const CTensor& a, const CTensor& b,
                         const std::function<cplx(cplx, cplx)>& f) {
  if (a.same_shape(b)) {
    CTensor out{a.shape()};
    for (std::size_t i = 0; i < a.numel(); ++i) out.at(i) = f(a.at(i), b.at(i));
    return out;
  }
  Shape os = broadcast_shape(a.shape(), b.shape());
  CTensor out{os};
  auto sa = aligned_strides(a.shape(), os);
  auto sb = aligned_strides(b.shape(), os);
  std::vector<std::size_t> idx(os.size(), 0);
  std::size_t n = out.numel();
  for (std::size_t lin = 0; lin < n; ++lin) {
    std::size_t oa = 0, ob = 0;
    for (std::size_t d = 0; d < os.size(); ++d) {
      oa += idx[d] * sa[d];
      ob += idx[d] * sb[d];
    }
    out.at(lin) = f(a.at(oa), b.at(ob));
    for (std::size_t d = os.size(); d-- > 0;) {
      if (++idx[d] < os[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

CTensor reduce_to_shape(const CTensor& g, const Shape& target) {
  if (shapes_equal(g.shape(), target)) return g;
  const Shape& os = g.shape();
  CTensor out{target};
  auto st = aligned_strides(target, os);
  std::vector<std::size_t> idx(os.size(), 0);
  std::size_t n = g.numel();
  for (std::size_t lin = 0; lin < n; ++lin) {
    std::size_t ot = 0;
    for (std::size_t d = 0; d < os.size(); ++d) ot += idx[d] * st[d];
    out.at(ot) += g.at(lin);
    for (std::size_t d = os.size(); d-- > 0;) {
      if (++idx[d] < os[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

}  // namespace beamlearn
