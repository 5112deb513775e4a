#include "beamlearn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace beamlearn::la {

namespace {

Shape leading_dims(const Shape& s) {
  return Shape(s.begin(), s.end() - 2);
}

void require_matrix(const CTensor& a, const char* who) {
  if (a.rank() < 2) throw ShapeMismatch(std::string(who) + ": rank < 2 tensor " + shape_str(a.shape()));
}

}  // namespace

CTensor matmul(const CTensor& a, const CTensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  std::size_t m = a.rows(), ka = a.cols();
  std::size_t kb = b.rows(), n = b.cols();
  if (ka != kb) {
    throw ShapeMismatch("matmul inner dims: " + shape_str(a.shape()) + " x " +
                        shape_str(b.shape()));
  }
  Shape la = leading_dims(a.shape());
  Shape lb = leading_dims(b.shape());
  Shape lead = broadcast_shape(la, lb);
  Shape os = lead;
  os.push_back(m);
  os.push_back(n);
  CTensor out{os};

  std::size_t nbatch = shape_numel(lead);
  // Per-batch offsets with zero stride on broadcast dims.
  std::vector<std::size_t> stra(lead.size(), 0), strb(lead.size(), 0);
  {
    std::size_t acc = 1;
    for (std::size_t i = 0; i < la.size(); ++i) {
      std::size_t d = la[la.size() - 1 - i];
      stra[lead.size() - 1 - i] = (d == 1) ? 0 : acc;
      acc *= d;
    }
    acc = 1;
    for (std::size_t i = 0; i < lb.size(); ++i) {
      std::size_t d = lb[lb.size() - 1 - i];
      strb[lead.size() - 1 - i] = (d == 1) ? 0 : acc;
      acc *= d;
    }
  }
  std::vector<std::size_t> idx(lead.size(), 0);
  const cplx* pa = a.data();
  const cplx* pb = b.data();
  cplx* po = out.data();
  for (std::size_t bi = 0; bi < nbatch; ++bi) {
    std::size_t oa = 0, ob = 0;
    for (std::size_t d = 0; d < lead.size(); ++d) {
      oa += idx[d] * stra[d];
      ob += idx[d] * strb[d];
    }
    const cplx* A = pa + oa * m * ka;
    const cplx* B = pb + ob * kb * n;
    cplx* O = po + bi * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < ka; ++k) {
        cplx av = A[i * ka + k];
        if (av == cplx{}) continue;
        const cplx* Bk = B + k * n;
        cplx* Oi = O + i * n;
        for (std::size_t j = 0; j < n; ++j) Oi[j] += av * Bk[j];
      }
    }
    for (std::size_t d = lead.size(); d-- > 0;) {
      if (++idx[d] < lead[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

CTensor transpose_last2(const CTensor& a) {
  require_matrix(a, "transpose");
  std::size_t m = a.rows(), n = a.cols();
  Shape os = a.shape();
  std::swap(os[os.size() - 1], os[os.size() - 2]);
  CTensor out{os};
  std::size_t nb = a.batch();
  for (std::size_t b = 0; b < nb; ++b) {
    const cplx* A = a.data() + b * m * n;
    cplx* O = out.data() + b * m * n;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) O[j * m + i] = A[i * n + j];
  }
  return out;
}

CTensor adjoint(const CTensor& a) {
  CTensor t = transpose_last2(a);
  for (std::size_t i = 0; i < t.numel(); ++i) t.at(i) = std::conj(t.at(i));
  return t;
}

CTensor conj(const CTensor& a) {
  CTensor t = a;
  for (std::size_t i = 0; i < t.numel(); ++i) t.at(i) = std::conj(t.at(i));
  return t;
}

CTensor scale(const CTensor& a, cplx s) {
  CTensor t = a;
  for (std::size_t i = 0; i < t.numel(); ++i) t.at(i) *= s;
  return t;
}

CTensor add(const CTensor& a, const CTensor& b) {
  return broadcast_binary(a, b, [](cplx x, cplx y) { return x + y; });
}

CTensor sub(const CTensor& a, const CTensor& b) {
  return broadcast_binary(a, b, [](cplx x, cplx y) { return x - y; });
}

namespace {

// LU with partial pivoting on a copy of one n x n matrix, then solves for the
// identity columns. `amax` is the max magnitude of the input entries.
void lu_inverse_block(const cplx* A, std::size_t n, cplx* out, double& min_piv, double amax) {
  std::vector<cplx> lu(A, A + n * n);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  min_piv = amax;
  const double piv_floor = 1e-12 * amax;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t best = k;
    double bestmag = std::abs(lu[k * n + k]);
    for (std::size_t i = k + 1; i < n; ++i) {
      double m = std::abs(lu[i * n + k]);
      if (m > bestmag) {
        bestmag = m;
        best = i;
      }
    }
    if (bestmag <= piv_floor || bestmag == 0.0) {
      throw SingularMatrix("pivot " + std::to_string(bestmag) + " below threshold " +
                           std::to_string(piv_floor) + " at step " + std::to_string(k));
    }
    if (best != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu[k * n + j], lu[best * n + j]);
      std::swap(perm[k], perm[best]);
    }
    min_piv = std::min(min_piv, bestmag);
    cplx piv = lu[k * n + k];
    for (std::size_t i = k + 1; i < n; ++i) {
      cplx f = lu[i * n + k] / piv;
      lu[i * n + k] = f;
      if (f == cplx{}) continue;
      for (std::size_t j = k + 1; j < n; ++j) lu[i * n + j] -= f * lu[k * n + j];
    }
  }
  // Solve A x = e_c for each unit column.
  std::vector<cplx> y(n);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t i = 0; i < n; ++i) y[i] = (perm[i] == c) ? cplx{1.0, 0.0} : cplx{};
    for (std::size_t i = 1; i < n; ++i) {
      cplx s = y[i];
      for (std::size_t j = 0; j < i; ++j) s -= lu[i * n + j] * y[j];
      y[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
      cplx s = y[i];
      for (std::size_t j = i + 1; j < n; ++j) s -= lu[i * n + j] * y[j];
      y[i] = s / lu[i * n + i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i * n + c] = y[i];
  }
}

}  // namespace

LuInverse lu_inverse(const CTensor& a) {
  require_matrix(a, "lu_inverse");
  if (a.rank() != 2 || a.rows() != a.cols()) {
    throw ShapeMismatch("lu_inverse: want square 2-D matrix, got " + shape_str(a.shape()));
  }
  std::size_t n = a.rows();
  double amax = a.max_abs();
  if (amax == 0.0) throw SingularMatrix("lu_inverse: zero matrix");
  LuInverse r;
  r.inv = CTensor{Shape{n, n}};
  double min_piv = 0.0;
  lu_inverse_block(a.data(), n, r.inv.data(), min_piv, amax);
  r.rcond = min_piv / amax;
  if (!r.inv.all_finite()) throw SingularMatrix("lu_inverse: non-finite result");
  return r;
}

CTensor batched_inverse(const CTensor& a, double* min_rcond) {
  require_matrix(a, "batched_inverse");
  if (a.rows() != a.cols()) {
    throw ShapeMismatch("batched_inverse: want square matrices, got " + shape_str(a.shape()));
  }
  std::size_t n = a.rows();
  std::size_t nb = a.batch();
  CTensor out{a.shape()};
  double worst = 1.0;
  for (std::size_t b = 0; b < nb; ++b) {
    const cplx* A = a.data() + b * n * n;
    double amax = 0.0;
    for (std::size_t i = 0; i < n * n; ++i) amax = std::max(amax, std::abs(A[i]));
    if (amax == 0.0) throw SingularMatrix("batched_inverse: zero matrix in batch");
    double min_piv = 0.0;
    lu_inverse_block(A, n, out.data() + b * n * n, min_piv, amax);
    worst = std::min(worst, min_piv / amax);
  }
  if (!out.all_finite()) throw SingularMatrix("batched_inverse: non-finite result");
  if (min_rcond) *min_rcond = worst;
  return out;
}

HermitianEig hermitian_eig(const CTensor& a) {
  require_matrix(a, "hermitian_eig");
  if (a.rank() != 2 || a.rows() != a.cols()) {
    throw ShapeMismatch("hermitian_eig: want square 2-D matrix, got " + shape_str(a.shape()));
  }
  std::size_t n = a.rows();
  // Work on the Hermitian average to scrub roundoff asymmetry.
  std::vector<cplx> w(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      w[i * n + j] = 0.5 * (a(i, j) + std::conj(a(j, i)));

  std::vector<cplx> v(n * n);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  double scale0 = 0.0;
  for (const cplx& z : w) scale0 = std::max(scale0, std::abs(z));
  if (scale0 == 0.0) scale0 = 1.0;
  const double tol = 1e-14 * scale0;
  const int max_sweeps = 100;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::abs(w[p * n + q]));
    if (off <= tol) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        cplx apq = w[p * n + q];
        double mag = std::abs(apq);
        if (mag <= tol * 1e-2) continue;
        double app = w[p * n + p].real();
        double aqq = w[q * n + q].real();
        cplx phase = apq / mag;
        double tau = (aqq - app) / (2.0 * mag);
        // smaller-magnitude root of t^2 - 2 tau t - 1 = 0 for this rotation
        // convention
        double t = (tau >= 0 ? -1.0 : 1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = t * c;
        cplx spq = s * phase;          // J[p][q] = -s e^{i phi}
        // Column update: A <- A J.
        for (std::size_t i = 0; i < n; ++i) {
          cplx aip = w[i * n + p], aiq = w[i * n + q];
          w[i * n + p] = c * aip + std::conj(spq) * aiq;
          w[i * n + q] = -spq * aip + c * aiq;
        }
        // Row update: A <- J^H A.
        for (std::size_t j = 0; j < n; ++j) {
          cplx apj = w[p * n + j], aqj = w[q * n + j];
          w[p * n + j] = c * apj + spq * aqj;
          w[q * n + j] = -std::conj(spq) * apj + c * aqj;
        }
        w[p * n + q] = 0.0;
        w[q * n + p] = 0.0;
        w[p * n + p] = cplx(w[p * n + p].real(), 0.0);
        w[q * n + q] = cplx(w[q * n + q].real(), 0.0);
        // Eigenvector accumulation: V <- V J.
        for (std::size_t i = 0; i < n; ++i) {
          cplx vip = v[i * n + p], viq = v[i * n + q];
          v[i * n + p] = c * vip + std::conj(spq) * viq;
          v[i * n + q] = -spq * vip + c * viq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> lam(n);
  for (std::size_t i = 0; i < n; ++i) lam[i] = w[i * n + i].real();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return lam[x] > lam[y]; });

  HermitianEig r;
  r.u = CTensor{Shape{n, n}};
  r.lambda.resize(n);
  for (std::size_t jj = 0; jj < n; ++jj) {
    std::size_t src = order[jj];
    r.lambda[jj] = lam[src];
    for (std::size_t i = 0; i < n; ++i) r.u(i, jj) = v[i * n + src];
  }
  return r;
}

CTensor haar_unitary(std::size_t n, Rng& rng) {
  // Householder QR of a complex Gaussian matrix.
  std::vector<cplx> a(n * n);
  for (cplx& z : a) z = rng.cgauss(1.0);
  CTensor q = CTensor::eye(n);
  for (std::size_t k = 0; k < n; ++k) {
    double norm2 = 0.0;
    for (std::size_t i = k; i < n; ++i) norm2 += std::norm(a[i * n + k]);
    double norm = std::sqrt(norm2);
    if (norm == 0.0) continue;
    cplx x0 = a[k * n + k];
    cplx phase = (std::abs(x0) > 0) ? x0 / std::abs(x0) : cplx{1.0, 0.0};
    cplx alpha = -phase * norm;
    std::vector<cplx> vv(n - k);
    vv[0] = x0 - alpha;
    for (std::size_t i = k + 1; i < n; ++i) vv[i - k] = a[i * n + k];
    double vn2 = 0.0;
    for (const cplx& z : vv) vn2 += std::norm(z);
    if (vn2 == 0.0) continue;
    double inv = 1.0 / std::sqrt(vn2);
    for (cplx& z : vv) z *= inv;
    // A[k:, k:] -= 2 v (v^H A[k:, k:])
    for (std::size_t j = k; j < n; ++j) {
      cplx dot{};
      for (std::size_t i = k; i < n; ++i) dot += std::conj(vv[i - k]) * a[i * n + j];
      dot *= 2.0;
      for (std::size_t i = k; i < n; ++i) a[i * n + j] -= vv[i - k] * dot;
    }
    // Q[:, k:] -= 2 (Q[:, k:] v) v^H
    for (std::size_t i = 0; i < n; ++i) {
      cplx dot{};
      for (std::size_t j = k; j < n; ++j) dot += q(i, j) * vv[j - k];
      dot *= 2.0;
      for (std::size_t j = k; j < n; ++j) q(i, j) -= dot * std::conj(vv[j - k]);
    }
  }
  // Phase correction so the distribution is Haar.
  for (std::size_t j = 0; j < n; ++j) {
    cplx rjj = a[j * n + j];
    cplx d = (std::abs(rjj) > 0) ? rjj / std::abs(rjj) : cplx{1.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) q(i, j) *= d;
  }
  return q;
}

double fro_norm2(const CTensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += std::norm(a.at(i));
  return s;
}

double fro_norm(const CTensor& a) { return std::sqrt(fro_norm2(a)); }

CTensor column(const CTensor& m, std::size_t j) {
  if (m.rank() != 2) throw ShapeMismatch("column: want 2-D, got " + shape_str(m.shape()));
  std::size_t r = m.rows();
  CTensor v{Shape{r, 1}};
  for (std::size_t i = 0; i < r; ++i) v.at(i) = m(i, j);
  return v;
}

void set_column(CTensor& m, std::size_t j, const CTensor& v) {
  std::size_t r = m.rows();
  if (v.numel() != r) throw ShapeMismatch("set_column: size mismatch");
  for (std::size_t i = 0; i < r; ++i) m(i, j) = v.at(i);
}

cplx vdot(const CTensor& a, const CTensor& b) {
  if (a.numel() != b.numel()) throw ShapeMismatch("vdot: size mismatch");
  cplx s{};
  for (std::size_t i = 0; i < a.numel(); ++i) s += std::conj(a.at(i)) * b.at(i);
  return s;
}

}  // namespace beamlearn::la
