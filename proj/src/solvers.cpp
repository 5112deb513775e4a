#include "beamlearn/solvers.hpp"

#include <cmath>
#include <fstream>

#include "beamlearn/beamforming.hpp"
#include "beamlearn/errors.hpp"
#include "beamlearn/linalg.hpp"

namespace beamlearn {

namespace {

struct MmseStats {
  std::vector<cplx> u;
  std::vector<double> lambda;
};

// Scalar MMSE receivers and rate weights for the current beams.
MmseStats receiver_step(const CTensor& h_dn, const CTensor& w, double n0) {
  std::size_t users = h_dn.cols();
  MmseStats st;
  st.u.resize(users);
  st.lambda.resize(users);
  for (std::size_t k = 0; k < users; ++k) {
    CTensor hk = la::column(h_dn, k);
    cplx a{};
    double d = n0;
    for (std::size_t j = 0; j < users; ++j) {
      cplx ip = la::vdot(hk, la::column(w, j));
      d += std::norm(ip);
      if (j == k) a = ip;
    }
    st.u[k] = a / d;
    double e = 1.0 - std::norm(a) / d;  // in (0, 1]
    st.lambda[k] = 1.0 / e;
  }
  return st;
}

// Beams for a given power multiplier mu; also reports the total power used.
CTensor transmit_for_mu(const CTensor& h_dn, const MmseStats& st, const CTensor& gram_w,
                        double mu, double* total_power) {
  std::size_t n = h_dn.rows(), users = h_dn.cols();
  CTensor a = gram_w;
  for (std::size_t i = 0; i < n; ++i) a(i, i) += mu;
  CTensor inv = la::lu_inverse(a).inv;
  CTensor w{Shape{n, users}};
  double total = 0.0;
  for (std::size_t k = 0; k < users; ++k) {
    CTensor dir = la::matmul(inv, la::column(h_dn, k));
    cplx scale = st.lambda[k] * st.u[k];
    for (std::size_t i = 0; i < n; ++i) w(i, k) = scale * dir.at(i);
    total += la::fro_norm2(la::column(w, k));
  }
  *total_power = total;
  return w;
}

}  // namespace

WmmseResult wmmse(const CTensor& h_dn, double power, double n0, const WmmseConfig& cfg) {
  if (!(cfg.tol > 0.0) || !(cfg.power_tol > 0.0)) throw ConfigError("wmmse: tolerances > 0");
  if (!(power > 0.0) || !(n0 > 0.0)) throw DomainError("wmmse: power and noise must be positive");
  std::size_t n = h_dn.rows(), users = h_dn.cols();

  // matched-filter equal-power start
  CTensor w{Shape{n, users}};
  for (std::size_t k = 0; k < users; ++k) {
    CTensor hk = la::column(h_dn, k);
    double nn = la::fro_norm(hk);
    if (nn == 0.0) throw DomainError("wmmse: zero channel column");
    double s = std::sqrt(power / static_cast<double>(users)) / nn;
    for (std::size_t i = 0; i < n; ++i) w(i, k) = s * hk.at(i);
  }

  WmmseResult res;
  double prev_rate = -1.0;
  for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
    MmseStats st = receiver_step(h_dn, w, n0);
    // A = sum_j lambda_j |u_j|^2 h_j h_j^H
    CTensor gram{Shape{n, n}};
    for (std::size_t j = 0; j < users; ++j) {
      CTensor hj = la::column(h_dn, j);
      double c = st.lambda[j] * std::norm(st.u[j]);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t cidx = 0; cidx < n; ++cidx)
          gram(r, cidx) += c * hj.at(r) * std::conj(hj.at(cidx));
    }

    double total = 0.0;
    CTensor w_new;
    bool mu_zero_ok = false;
    try {
      w_new = transmit_for_mu(h_dn, st, gram, 0.0, &total);
      mu_zero_ok = total <= power;
    } catch (const SingularMatrix&) {
      mu_zero_ok = false;
    }
    if (!mu_zero_ok) {
      // f(mu) = total power is decreasing; bracket then bisect, converging
      // from below so the final scale-up never shrinks the beams.
      double lo = 0.0, hi = 1.0;
      double total_hi = 0.0;
      for (int grow = 0; grow < 200; ++grow) {
        transmit_for_mu(h_dn, st, gram, hi, &total_hi);
        if (total_hi <= power) break;
        lo = hi;
        hi *= 2.0;
      }
      for (int it = 0; it < 300; ++it) {
        double mid = 0.5 * (lo + hi);
        double tmid = 0.0;
        transmit_for_mu(h_dn, st, gram, mid, &tmid);
        if (tmid > power) {
          lo = mid;
        } else {
          hi = mid;
          total_hi = tmid;
        }
        if (total_hi >= power * (1.0 - cfg.power_tol)) break;
      }
      w_new = transmit_for_mu(h_dn, st, gram, hi, &total);
      if (total > power * (1.0 + 1e-12) || total < power * (1.0 - 10.0 * cfg.power_tol)) {
        throw NoConvergence("wmmse: power bisection failed, total " + std::to_string(total));
      }
    }
    // scale up to the exact budget; common positive scaling cannot reduce rate
    double up = std::sqrt(power / total);
    w = la::scale(w_new, up);

    double rate = sum_rate(h_dn, w, n0);
    if (!res.trace.empty() && rate < prev_rate - 1e-9) {
      throw NonMonotone("wmmse objective decreased from " + std::to_string(prev_rate) + " to " +
                        std::to_string(rate));
    }
    res.trace.push_back(rate);
    if (!res.trace.empty() && iter > 0 && std::abs(rate - prev_rate) < cfg.tol) {
      prev_rate = rate;
      break;
    }
    prev_rate = rate;
  }
  res.w = w;
  return res;
}

PqPair extract_pq(const CTensor& h_dn, const CTensor& w, double n0, double power) {
  std::size_t n = h_dn.rows(), users = h_dn.cols();
  PqPair out;
  out.p = CTensor{Shape{users}};
  double psum = 0.0;
  for (std::size_t k = 0; k < users; ++k) {
    double pk = la::fro_norm2(la::column(w, k));
    out.p.at(k) = pk;
    psum += pk;
  }
  if (psum <= 0.0) throw DomainError("extract_pq: zero beamformer");
  for (std::size_t k = 0; k < users; ++k) out.p.at(k) *= power / psum;

  std::vector<double> gamma(users);
  for (std::size_t k = 0; k < users; ++k) gamma[k] = sinr(h_dn, w, n0, k);

  std::vector<double> q(users);
  for (std::size_t k = 0; k < users; ++k) q[k] = out.p.at(k).real();
  std::vector<double> q_new(users);
  bool converged = false;
  for (std::size_t iter = 0; iter < 10000; ++iter) {
    for (std::size_t k = 0; k < users; ++k) {
      CTensor m{Shape{n, n}};
      for (std::size_t i = 0; i < n; ++i) m(i, i) = n0;
      for (std::size_t j = 0; j < users; ++j) {
        if (j == k) continue;
        CTensor hj = la::column(h_dn, j);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < n; ++c) m(r, c) += q[j] * hj.at(r) * std::conj(hj.at(c));
      }
      CTensor hk = la::column(h_dn, k);
      CTensor sol = la::matmul(la::lu_inverse(m).inv, hk);
      double quad = la::vdot(hk, sol).real();
      if (!(quad > 0.0)) throw DomainError("extract_pq: non-positive quadratic form");
      q_new[k] = gamma[k] / quad;
    }
    double delta = 0.0;
    for (std::size_t k = 0; k < users; ++k) {
      delta = std::max(delta, std::abs(q_new[k] - q[k]) / std::max(q[k], 1e-300));
    }
    q = q_new;
    if (delta < 1e-8) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NoConvergence("extract_pq: fixed point did not converge");
  double qsum = 0.0;
  for (double v : q) qsum += v;
  out.q = CTensor{Shape{users}};
  for (std::size_t k = 0; k < users; ++k) out.q.at(k) = q[k] * power / qsum;
  return out;
}

double gp_objective(const CTensor& a, const CTensor& b, const CTensor& p, bool plus_one) {
  double logsum = 0.0;
  for (std::size_t k = 0; k < a.numel(); ++k) {
    double factor = a.at(k).real() / p.at(k).real() + b.at(k).real();
    logsum += std::log(factor);
    if (plus_one) logsum -= std::log(factor + 1.0);
  }
  return std::exp(logsum);
}

CTensor gp_power(const CTensor& a, const CTensor& b, double power, const GpConfig& cfg) {
  std::size_t k = a.numel();
  if (b.numel() != k) throw ShapeMismatch("gp_power: coefficient sizes");
  for (std::size_t i = 0; i < k; ++i) {
    if (!(a.at(i).real() > 0.0)) throw DomainError("gp_power: a_k must be positive");
    if (b.at(i).real() < 0.0) throw DomainError("gp_power: b_k must be nonnegative");
  }
  if (!(power > 0.0)) throw DomainError("gp_power: power must be positive");

  // Log-domain objective over p = P softmax(z); any stationary point of the
  // composition is a KKT point of the convex program with the (always
  // active) budget constraint.
  std::vector<double> z(k, 0.0);
  auto softmax_p = [&](const std::vector<double>& zz, std::vector<double>& p) {
    double mx = zz[0];
    for (double v : zz) mx = std::max(mx, v);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      p[i] = std::exp(zz[i] - mx);
      sum += p[i];
    }
    for (std::size_t i = 0; i < k; ++i) p[i] = power * p[i] / sum;
  };
  auto objective = [&](const std::vector<double>& p) {
    double f = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      double factor = a.at(i).real() / p[i] + b.at(i).real();
      f += std::log(factor);
      if (cfg.plus_one) f -= std::log(factor + 1.0);
    }
    return f;
  };

  std::vector<double> p(k), grad_z(k), gp(k), z_try(k), p_try(k);
  softmax_p(z, p);
  double f = objective(p);
  bool converged = false;
  double t_warm = 1.0;
  int stalled = 0;
  for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
    // dF/dp then chain through the simplex parameterization
    double dot = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      double ai = a.at(i).real(), bi = b.at(i).real();
      double factor = ai / p[i] + bi;
      double d = -(ai / (p[i] * p[i])) / factor;
      if (cfg.plus_one) d += (ai / (p[i] * p[i])) / (factor + 1.0);
      gp[i] = d;
      dot += d * p[i];
    }
    double gnorm = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      grad_z[i] = gp[i] * p[i] - p[i] * dot / power;
      gnorm = std::max(gnorm, std::abs(grad_z[i]));
    }
    if (gnorm <= cfg.grad_tol) {
      converged = true;
      break;
    }
    double g2 = 0.0;
    for (double v : grad_z) g2 += v * v;
    double t = std::min(t_warm / cfg.backtrack_beta, 1e6);
    bool accepted = false;
    for (int bt = 0; bt < 200; ++bt) {
      for (std::size_t i = 0; i < k; ++i) z_try[i] = z[i] - t * grad_z[i];
      softmax_p(z_try, p_try);
      double f_try = objective(p_try);
      if (f_try <= f - cfg.armijo_c * t * g2) {
        double gain = f - f_try;
        z = z_try;
        p = p_try;
        f = f_try;
        accepted = true;
        t_warm = t;
        stalled = (gain <= 1e-15 * std::max(1.0, std::abs(f))) ? stalled + 1 : 0;
        break;
      }
      t *= cfg.backtrack_beta;
    }
    if (!accepted || stalled >= 50) {
      // no measurable progress left in double precision
      converged = true;
      break;
    }
  }
  if (!converged) throw NoConvergence("gp_power: gradient descent did not converge");
  CTensor out{Shape{k}};
  for (std::size_t i = 0; i < k; ++i) out.at(i) = p[i];
  return out;
}

MulticellAoResult multicell_ao(const CTensor& h_local, std::size_t serve_begin,
                               std::size_t k_local, double power, double n0,
                               const MulticellAoConfig& cfg) {
  std::size_t n = h_local.rows();
  if (serve_begin + k_local > h_local.cols()) throw ShapeMismatch("multicell_ao: serving range");
  CTensor p{Shape{k_local}, cplx(power / static_cast<double>(k_local), 0.0)};
  CTensor a{Shape{k_local}}, b{Shape{k_local}};
  std::vector<CTensor> dirs(k_local);

  MulticellAoResult res;
  double prev = 0.0;
  bool converged = false;
  for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
    // direction step; the inverse includes every reachable user, which only
    // rescales the served column (Sherman-Morrison), not its direction
    for (std::size_t k = 0; k < k_local; ++k) {
      CTensor beam = slnr_beamformer(h_local, p.at(k).real(), serve_begin + k, n0);
      double nn = la::fro_norm(beam);
      dirs[k] = la::scale(beam, 1.0 / nn);  // unit direction
    }
    // posynomial coefficients for the power step
    for (std::size_t k = 0; k < k_local; ++k) {
      std::size_t col = serve_begin + k;
      double sig = std::norm(la::vdot(la::column(h_local, col), dirs[k]));
      if (!(sig > 0.0)) throw DomainError("multicell_ao: zero served gain");
      double leak = 0.0;
      for (std::size_t u = 0; u < h_local.cols(); ++u) {
        if (u == col) continue;
        leak += std::norm(la::vdot(la::column(h_local, u), dirs[k]));
      }
      a.at(k) = n0 / sig;
      b.at(k) = leak / sig;
    }
    p = gp_power(a, b, power, cfg.gp);
    double obj = gp_objective(a, b, p, cfg.gp.plus_one);
    res.trace.push_back(obj);
    if (iter > 0 && std::abs(obj - prev) <= cfg.tol * std::max(1.0, std::abs(prev))) {
      prev = obj;
      converged = true;
      break;
    }
    prev = obj;
  }
  if (!converged) {
    throw NoConvergence("multicell_ao: objective still moving after max iterations");
  }
  res.w = CTensor{Shape{n, k_local}};
  for (std::size_t k = 0; k < k_local; ++k) {
    double s = std::sqrt(p.at(k).real());
    for (std::size_t i = 0; i < n; ++i) res.w(i, k) = s * dirs[k].at(i);
  }
  res.p = p;
  return res;
}

std::vector<CTensor> multicell_wmmse(const std::vector<CTensor>& h_dn_per_bs,
                                     std::size_t k_per_cell, double power, double n0,
                                     const WmmseConfig& cfg) {
  std::size_t cells = h_dn_per_bs.size();
  std::size_t n = h_dn_per_bs[0].rows();
  std::size_t users = cells * k_per_cell;

  std::vector<CTensor> w(cells, CTensor{Shape{n, k_per_cell}});
  for (std::size_t c = 0; c < cells; ++c) {
    for (std::size_t k = 0; k < k_per_cell; ++k) {
      CTensor h = la::column(h_dn_per_bs[c], c * k_per_cell + k);
      double nn = la::fro_norm(h);
      double s = std::sqrt(power / static_cast<double>(k_per_cell)) / nn;
      for (std::size_t i = 0; i < n; ++i) w[c](i, k) = s * h.at(i);
    }
  }

  double prev_rate = -1.0;
  for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
    std::vector<cplx> u(users);
    std::vector<double> lam(users);
    for (std::size_t uu = 0; uu < users; ++uu) {
      std::size_t sc = uu / k_per_cell, sk = uu % k_per_cell;
      cplx aip = la::vdot(la::column(h_dn_per_bs[sc], uu), la::column(w[sc], sk));
      double d = n0;
      for (std::size_t c = 0; c < cells; ++c)
        for (std::size_t k = 0; k < k_per_cell; ++k)
          d += std::norm(la::vdot(la::column(h_dn_per_bs[c], uu), la::column(w[c], k)));
      u[uu] = aip / d;
      lam[uu] = 1.0 / (1.0 - std::norm(aip) / d);
    }
    for (std::size_t c = 0; c < cells; ++c) {
      CTensor gram{Shape{n, n}};
      for (std::size_t uu = 0; uu < users; ++uu) {
        CTensor h = la::column(h_dn_per_bs[c], uu);
        double cc = lam[uu] * std::norm(u[uu]);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t cl = 0; cl < n; ++cl) gram(r, cl) += cc * h.at(r) * std::conj(h.at(cl));
      }
      auto beams_for = [&](double mu, double* total) {
        CTensor a = gram;
        for (std::size_t i = 0; i < n; ++i) a(i, i) += mu;
        CTensor inv = la::lu_inverse(a).inv;
        CTensor wc{Shape{n, k_per_cell}};
        double tt = 0.0;
        for (std::size_t k = 0; k < k_per_cell; ++k) {
          std::size_t uu = c * k_per_cell + k;
          CTensor dir = la::matmul(inv, la::column(h_dn_per_bs[c], uu));
          cplx s = lam[uu] * u[uu];
          for (std::size_t i = 0; i < n; ++i) wc(i, k) = s * dir.at(i);
        }
        tt = la::fro_norm2(wc);
        *total = tt;
        return wc;
      };
      double total = 0.0;
      bool ok0 = false;
      CTensor wc;
      try {
        wc = beams_for(0.0, &total);
        ok0 = total <= power;
      } catch (const SingularMatrix&) {
        ok0 = false;
      }
      if (!ok0) {
        double lo = 0.0, hi = 1.0, th = 0.0;
        for (int grow = 0; grow < 200; ++grow) {
          beams_for(hi, &th);
          if (th <= power) break;
          lo = hi;
          hi *= 2.0;
        }
        for (int it = 0; it < 200; ++it) {
          double mid = 0.5 * (lo + hi);
          double tm = 0.0;
          beams_for(mid, &tm);
          if (tm > power) {
            lo = mid;
          } else {
            hi = mid;
            th = tm;
          }
          if (th >= power * (1.0 - cfg.power_tol)) break;
        }
        wc = beams_for(hi, &total);
      }
      w[c] = wc;
    }
    double rate = multicell_sum_rate(h_dn_per_bs, w, k_per_cell, n0);
    if (iter > 0 && std::abs(rate - prev_rate) < cfg.tol) break;
    prev_rate = rate;
  }
  return w;
}

void write_trace_csv(const std::string& path, const std::vector<double>& trace) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write trace: " + path);
  f << "iter,objective\n";
  for (std::size_t i = 0; i < trace.size(); ++i) f << i << "," << trace[i] << "\n";
}

}  // namespace beamlearn
