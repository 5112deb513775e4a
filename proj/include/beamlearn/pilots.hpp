#pragma once

#include <string>
#include <vector>

#include "beamlearn/rng.hpp"
#include "beamlearn/tensor.hpp"

namespace beamlearn {

// Pilot matrix: sqrt(power) times the first k_total rows and first len
// columns of the max(k_total, len)-point unnormalized DFT matrix. Rows are
// orthogonal whenever len >= k_total.
CTensor make_dft_pilots(std::size_t k_total, std::size_t len, double power);

// Y = H X + N with i.i.d. complex Gaussian noise entries of variance sigma2.
CTensor receive_pilots(const CTensor& h_up, const CTensor& x, double sigma2, Rng& rng);

// Least-squares preprocessing Y X^H / (L P). Pilot contamination for
// len < k_total is retained, not corrected.
CTensor ls_preprocess(const CTensor& y, const CTensor& x, double power);

// Linear MMSE channel estimator H_hat = Y R + B with moments estimated from
// training channels. The closed form is the dimension-consistent stationary
// point of the expected MSE:
//   R* = (X^H Q X + N_t sigma^2 I_L)^-1 X^H Q,  B* = -Hbar (X R - I).
class LmmseEstimator {
 public:
  CTensor r;       // [L, K]
  CTensor b;       // [N_t, K]
  CTensor h_mean;  // [N_t, K]
  CTensor q;       // [K, K] second moment of column perturbations
  CTensor x;       // [K, L] pilots used for the fit
  double sigma2 = 0.0;

  static LmmseEstimator fit(const std::vector<CTensor>& train_h, const CTensor& x,
                            double sigma2);
  static LmmseEstimator from_moments(const CTensor& h_mean, const CTensor& q, const CTensor& x,
                                     double sigma2, std::size_t n_t);

  CTensor estimate(const CTensor& y) const;

  // Expected MSE of an arbitrary linear estimator (Y R + B) under the fitted
  // moments; the fitted (r, b) minimize this quadratic.
  double expected_mse(const CTensor& r_in, const CTensor& b_in) const;
  double expected_mse() const { return expected_mse(r, b); }

  void save(const std::string& path) const;
  static LmmseEstimator load(const std::string& path);
};

}  // namespace beamlearn
