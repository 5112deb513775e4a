#include "beamlearn/beamforming.hpp"

#include <cmath>

#include "beamlearn/errors.hpp"
#include "beamlearn/linalg.hpp"

namespace beamlearn {

namespace {
constexpr double kLog2e = 1.4426950408889634073599246810019;  // 1/ln 2

double log2_1p(double x) { return std::log1p(x) * kLog2e; }
}  // namespace

double sinr(const CTensor& h_dn, const CTensor& w, double n0, std::size_t k) {
  if (!(n0 > 0.0)) throw DomainError("sinr: noise power must be positive");
  if (h_dn.rows() != w.rows() || h_dn.cols() != w.cols()) {
    throw ShapeMismatch("sinr: H " + shape_str(h_dn.shape()) + " vs W " + shape_str(w.shape()));
  }
  std::size_t users = h_dn.cols();
  CTensor hk = la::column(h_dn, k);
  double sig = 0.0, intf = 0.0;
  for (std::size_t j = 0; j < users; ++j) {
    cplx ip = la::vdot(hk, la::column(w, j));
    if (j == k) {
      sig = std::norm(ip);
    } else {
      intf += std::norm(ip);
    }
  }
  return sig / (intf + n0);
}

double sum_rate(const CTensor& h_dn, const CTensor& w, double n0) {
  double r = 0.0;
  for (std::size_t k = 0; k < h_dn.cols(); ++k) r += log2_1p(sinr(h_dn, w, n0, k));
  return r;
}

CTensor reconstruct(const CTensor& h_dn, const CTensor& p, const CTensor& q, double n0) {
  std::size_t n = h_dn.rows(), users = h_dn.cols();
  if (p.numel() != users || q.numel() != users) {
    throw ShapeMismatch("reconstruct: power vectors vs user count");
  }
  if (!(n0 > 0.0)) throw DomainError("reconstruct: noise power must be positive");
  // Shared regularized matrix M = I + sum_j (q_j / N0) h_j h_j^H. Only this
  // per-j weighting closes the duality loop: extract_pq(wmmse) feeds back to
  // the WMMSE rate, which the per-k weighting misses by a wide margin.
  CTensor m = CTensor::eye(n);
  for (std::size_t j = 0; j < users; ++j) {
    double qj = q.at(j).real();
    if (qj < 0.0) throw DomainError("reconstruct: negative virtual power");
    CTensor hj = la::column(h_dn, j);
    double c = qj / n0;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t cc = 0; cc < n; ++cc) m(r, cc) += c * hj.at(r) * std::conj(hj.at(cc));
  }
  CTensor minv = la::lu_inverse(m).inv;
  CTensor w{Shape{n, users}};
  for (std::size_t k = 0; k < users; ++k) {
    CTensor dir = la::matmul(minv, la::column(h_dn, k));
    double nn = la::fro_norm(dir);
    if (nn == 0.0) throw SingularMatrix("reconstruct: zero direction");
    double s = std::sqrt(std::max(0.0, p.at(k).real())) / nn;
    for (std::size_t i = 0; i < n; ++i) w(i, k) = s * dir.at(i);
  }
  return w;
}

CTensor zf_beamformer(const CTensor& h_dn, double power) {
  std::size_t users = h_dn.cols();
  if (h_dn.rows() < users) throw RankDeficient("zf: more users than antennas");
  CTensor gram = la::matmul(la::adjoint(h_dn), h_dn);  // [K, K]
  auto eig = la::hermitian_eig(gram);
  // tolerance on singular values of H, which are sqrt of the Gram eigenvalues
  if (eig.lambda.front() <= 0.0 || eig.lambda.back() <= 0.0 ||
      std::sqrt(eig.lambda.back()) < 1e-10 * std::sqrt(eig.lambda.front())) {
    throw RankDeficient("zf: rank-deficient channel");
  }
  CTensor raw = la::matmul(h_dn, la::lu_inverse(gram).inv);
  double nrm2 = la::fro_norm2(raw);
  CTensor w = la::scale(raw, std::sqrt(power / nrm2));
  return w;
}

CTensor ReducedChannel::lift_apply(const CTensor& v) const { return la::matmul(lift, v); }

ReducedChannel reduce_dimension(const CTensor& h_dn) {
  std::size_t users = h_dn.cols();
  if (h_dn.rows() < users) throw RankDeficient("reduce_dimension: more users than antennas");
  CTensor gram = la::matmul(la::adjoint(h_dn), h_dn);
  auto eig = la::hermitian_eig(gram);
  if (eig.lambda.front() <= 0.0 || eig.lambda.back() <= 0.0 ||
      std::sqrt(eig.lambda.back()) < 1e-10 * std::sqrt(eig.lambda.front())) {
    throw RankDeficient("reduce_dimension: singular value below tolerance");
  }
  ReducedChannel rc;
  rc.u = eig.u;
  rc.lambda = eig.lambda;
  // G = Lambda^{1/2} U^H
  CTensor g{Shape{users, users}};
  for (std::size_t i = 0; i < users; ++i) {
    double s = std::sqrt(eig.lambda[i]);
    for (std::size_t j = 0; j < users; ++j) g(i, j) = s * std::conj(eig.u(j, i));
  }
  rc.g = std::move(g);
  // lift = H U Lambda^{-1/2}
  CTensor ul{Shape{users, users}};
  for (std::size_t i = 0; i < users; ++i) {
    double s = 1.0 / std::sqrt(eig.lambda[i]);
    for (std::size_t r = 0; r < users; ++r) ul(r, i) = eig.u(r, i) * s;
  }
  rc.lift = la::matmul(h_dn, ul);
  return rc;
}

double slnr(const CTensor& h_all, const CTensor& w, std::size_t k, double n0) {
  if (!(n0 > 0.0)) throw DomainError("slnr: noise power must be positive");
  if (h_all.rows() != w.numel()) throw ShapeMismatch("slnr: beam length vs antennas");
  std::size_t users = h_all.cols();
  double sig = 0.0, leak = 0.0;
  for (std::size_t u = 0; u < users; ++u) {
    double pw = std::norm(la::vdot(la::column(h_all, u), w));
    if (u == k) {
      sig = pw;
    } else {
      leak += pw;
    }
  }
  return sig / (leak + n0);
}

double slnr_rate(const CTensor& h_all, const CTensor& w, std::size_t k, double n0) {
  return log2_1p(slnr(h_all, w, k, n0));
}

CTensor slnr_beamformer(const CTensor& h_local, double p, std::size_t k, double n0) {
  if (p < 0.0) throw DomainError("slnr_beamformer: negative power");
  std::size_t n = h_local.rows();
  CTensor m = la::scale(la::matmul(h_local, la::adjoint(h_local)), p / n0);
  for (std::size_t i = 0; i < n; ++i) m(i, i) += 1.0;
  CTensor dir = la::matmul(la::lu_inverse(m).inv, la::column(h_local, k));
  double nn = la::fro_norm(dir);
  if (nn == 0.0) throw SingularMatrix("slnr_beamformer: zero direction");
  return la::scale(dir, std::sqrt(p) / nn);
}

double multicell_sinr(const std::vector<CTensor>& h_dn_per_bs,
                      const std::vector<CTensor>& beams_per_bs, std::size_t k_per_cell,
                      std::size_t user, double n0) {
  if (!(n0 > 0.0)) throw DomainError("multicell_sinr: noise power must be positive");
  std::size_t cells = h_dn_per_bs.size();
  if (beams_per_bs.size() != cells) throw ShapeMismatch("multicell_sinr: beams vs cells");
  std::size_t serving = user / k_per_cell;
  std::size_t local = user % k_per_cell;
  cplx sig_ip = la::vdot(la::column(h_dn_per_bs[serving], user),
                         la::column(beams_per_bs[serving], local));
  double sig = std::norm(sig_ip);
  double intf = 0.0;
  for (std::size_t j = 0; j < cells; ++j) {
    for (std::size_t v = 0; v < k_per_cell; ++v) {
      if (j == serving && v == local) continue;
      intf += std::norm(
          la::vdot(la::column(h_dn_per_bs[j], user), la::column(beams_per_bs[j], v)));
    }
  }
  return sig / (intf + n0);
}

double multicell_sum_rate(const std::vector<CTensor>& h_dn_per_bs,
                          const std::vector<CTensor>& beams_per_bs, std::size_t k_per_cell,
                          double n0) {
  std::size_t users = h_dn_per_bs.size() * k_per_cell;
  double r = 0.0;
  for (std::size_t u = 0; u < users; ++u) {
    r += log2_1p(multicell_sinr(h_dn_per_bs, beams_per_bs, k_per_cell, u, n0));
  }
  return r;
}

}  // namespace beamlearn
