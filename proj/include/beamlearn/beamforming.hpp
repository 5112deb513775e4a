#pragma once

#include <vector>

#include "beamlearn/tensor.hpp"

namespace beamlearn {

// All channel matrices are [N_t, K] with one user per column. Beamforming
// matrices share that layout. Functions here are pure; each has a
// graph-differentiable twin in the recovery layer, checked to 1e-10.

double sinr(const CTensor& h_dn, const CTensor& w, double n0, std::size_t k);
double sum_rate(const CTensor& h_dn, const CTensor& w, double n0);

// Sum-rate-optimal structure: w_k = sqrt(p_k) * normalized
// (I + sum_j (q_j / N0) h_j h_j^H)^-1 h_k, with the virtual uplink powers
// weighting the sum per term.
CTensor reconstruct(const CTensor& h_dn, const CTensor& p, const CTensor& q, double n0);

// W = d * H (H^H H)^-1 with d setting ||W||_F^2 = P.
CTensor zf_beamformer(const CTensor& h_dn, double power);

struct ReducedChannel {
  CTensor g;             // [K, K], columns g_k = Lambda^{1/2} U^H e_k
  CTensor lift;          // [N_t, K] map: w = lift * v
  CTensor u;             // eigenvectors of H^H H
  std::vector<double> lambda;

  CTensor lift_apply(const CTensor& v) const;  // [K, K] beams -> [N_t, K]
};

// Eigen-split of H^H H; throws RankDeficient when a singular value falls
// below 1e-10 of the largest.
ReducedChannel reduce_dimension(const CTensor& h_dn);

// SLNR of beam w serving (global) user k against every other user the
// observing BS reaches. h_all holds that BS's channels to all users.
double slnr(const CTensor& h_all, const CTensor& w, std::size_t k, double n0);
double slnr_rate(const CTensor& h_all, const CTensor& w, std::size_t k, double n0);

// Distributed SLNR direction: only the local BS channels enter.
// w = sqrt(p) * normalized (I + (p / N0) * sum_u h_u h_u^H)^-1 h_k.
CTensor slnr_beamformer(const CTensor& h_local, double p, std::size_t k, double n0);

// Multicell: h_dn_per_bs[j] is BS j's downlink channel to every user
// (cell-major global ordering, `k_per_cell` users per cell); beams_per_bs[j]
// holds BS j's beams for its own users.
double multicell_sinr(const std::vector<CTensor>& h_dn_per_bs,
                      const std::vector<CTensor>& beams_per_bs, std::size_t k_per_cell,
                      std::size_t user, double n0);
double multicell_sum_rate(const std::vector<CTensor>& h_dn_per_bs,
                          const std::vector<CTensor>& beams_per_bs, std::size_t k_per_cell,
                          double n0);

}  // namespace beamlearn
