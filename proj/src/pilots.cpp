#include "beamlearn/pilots.hpp"

#include <cmath>

#include "beamlearn/errors.hpp"
#include "beamlearn/linalg.hpp"
#include "beamlearn/params.hpp"

namespace beamlearn {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
}

CTensor make_dft_pilots(std::size_t k_total, std::size_t len, double power) {
  if (k_total < 1 || len < 1) throw ConfigError("pilot dimensions must be >= 1");
  if (!(power > 0.0)) throw ConfigError("pilot power must be positive");
  std::size_t m = std::max(k_total, len);
  double amp = std::sqrt(power);
  CTensor x{Shape{k_total, len}};
  for (std::size_t r = 0; r < k_total; ++r) {
    for (std::size_t c = 0; c < len; ++c) {
      double ph = -2.0 * kPi * static_cast<double>(r * c) / static_cast<double>(m);
      x(r, c) = amp * cplx(std::cos(ph), std::sin(ph));
    }
  }
  return x;
}

CTensor receive_pilots(const CTensor& h_up, const CTensor& x, double sigma2, Rng& rng) {
  if (h_up.cols() != x.rows()) {
    throw ShapeMismatch("receive_pilots: H " + shape_str(h_up.shape()) + " vs X " +
                        shape_str(x.shape()));
  }
  CTensor y = la::matmul(h_up, x);
  if (sigma2 > 0.0) {
    for (std::size_t i = 0; i < y.numel(); ++i) y.at(i) += rng.cgauss(sigma2);
  }
  return y;
}

CTensor ls_preprocess(const CTensor& y, const CTensor& x, double power) {
  if (y.cols() != x.cols()) {
    throw ShapeMismatch("ls_preprocess: Y " + shape_str(y.shape()) + " vs X " +
                        shape_str(x.shape()));
  }
  double lp = static_cast<double>(x.cols()) * power;
  return la::scale(la::matmul(y, la::adjoint(x)), 1.0 / lp);
}

LmmseEstimator LmmseEstimator::fit(const std::vector<CTensor>& train_h, const CTensor& x,
                                   double sigma2) {
  if (train_h.size() < 2) throw DegenerateTraining("lmmse fit needs at least 2 channels");
  const Shape& s0 = train_h[0].shape();
  for (const CTensor& h : train_h) {
    if (!shapes_equal(h.shape(), s0)) throw ShapeMismatch("lmmse fit: mixed channel shapes");
  }
  bool all_same = true;
  for (std::size_t t = 1; t < train_h.size() && all_same; ++t) {
    all_same = bitwise_equal(train_h[t], train_h[0]);
  }
  if (all_same) throw DegenerateTraining("all training channels identical");

  std::size_t n_t = train_h[0].rows();
  CTensor mean{s0};
  for (const CTensor& h : train_h) {
    for (std::size_t i = 0; i < mean.numel(); ++i) mean.at(i) += h.at(i);
  }
  double inv_t = 1.0 / static_cast<double>(train_h.size());
  for (std::size_t i = 0; i < mean.numel(); ++i) mean.at(i) *= inv_t;

  std::size_t k = train_h[0].cols();
  CTensor q{Shape{k, k}};
  for (const CTensor& h : train_h) {
    CTensor d = la::sub(h, mean);
    CTensor dq = la::matmul(la::adjoint(d), d);
    for (std::size_t i = 0; i < q.numel(); ++i) q.at(i) += dq.at(i);
  }
  for (std::size_t i = 0; i < q.numel(); ++i) q.at(i) *= inv_t;
  // Hermitian scrub
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i; j < k; ++j) {
      cplx v = 0.5 * (q(i, j) + std::conj(q(j, i)));
      q(i, j) = v;
      q(j, i) = std::conj(v);
    }
  return from_moments(mean, q, x, sigma2, n_t);
}

LmmseEstimator LmmseEstimator::from_moments(const CTensor& h_mean, const CTensor& q,
                                            const CTensor& x, double sigma2, std::size_t n_t) {
  std::size_t k = x.rows(), len = x.cols();
  if (q.rows() != k || q.cols() != k) throw ShapeMismatch("lmmse: Q vs X user count");
  LmmseEstimator e;
  e.h_mean = h_mean;
  e.q = q;
  e.x = x;
  e.sigma2 = sigma2;
  // A = X^H Q X + N_t sigma^2 I  (L x L)
  CTensor a = la::matmul(la::matmul(la::adjoint(x), q), x);
  double ridge = static_cast<double>(n_t) * sigma2;
  if (ridge <= 0.0) ridge = 1e-12 * std::max(1.0, a.max_abs());  // degenerate noiseless corner
  for (std::size_t i = 0; i < len; ++i) a(i, i) += ridge;
  CTensor a_inv = la::lu_inverse(a).inv;
  e.r = la::matmul(a_inv, la::matmul(la::adjoint(x), q));  // [L, K]
  // B = -Hbar (X R - I)
  CTensor xr = la::matmul(x, e.r);  // [K, K]
  CTensor xr_minus_i = la::sub(xr, CTensor::eye(k));
  e.b = la::scale(la::matmul(h_mean, xr_minus_i), -1.0);
  return e;
}

CTensor LmmseEstimator::estimate(const CTensor& y) const {
  return la::add(la::matmul(y, r), b);
}

double LmmseEstimator::expected_mse(const CTensor& r_in, const CTensor& b_in) const {
  std::size_t k = x.rows();
  std::size_t n_t = h_mean.rows();
  CTensor xr_minus_i = la::sub(la::matmul(x, r_in), CTensor::eye(k));
  // tr[(XR-I)^H Q (XR-I)]
  CTensor m1 = la::matmul(la::matmul(la::adjoint(xr_minus_i), q), xr_minus_i);
  double t1 = 0.0;
  for (std::size_t i = 0; i < k; ++i) t1 += m1(i, i).real();
  // N_t sigma^2 tr(R^H R)
  double t2 = static_cast<double>(n_t) * sigma2 * la::fro_norm2(r_in);
  // || B + Hbar (XR - I) ||^2
  CTensor bias = la::add(b_in, la::matmul(h_mean, xr_minus_i));
  double t3 = la::fro_norm2(bias);
  return t1 + t2 + t3;
}

void LmmseEstimator::save(const std::string& path) const {
  Params p;
  p.create("lmmse.r", r, false);
  p.create("lmmse.b", b, false);
  p.create("lmmse.h_mean", h_mean, false);
  p.create("lmmse.q", q, false);
  p.create("lmmse.x", x, false);
  save_checkpoint(p, path, {{"sigma2", std::to_string(sigma2)}});
}

LmmseEstimator LmmseEstimator::load(const std::string& path) {
  std::map<std::string, std::string> meta;
  Params p = load_checkpoint(path, &meta);
  LmmseEstimator e;
  e.r = p.value("lmmse.r");
  e.b = p.value("lmmse.b");
  e.h_mean = p.value("lmmse.h_mean");
  e.q = p.value("lmmse.q");
  e.x = p.value("lmmse.x");
  e.sigma2 = std::stod(meta.at("sigma2"));
  return e;
}

}  // namespace beamlearn
