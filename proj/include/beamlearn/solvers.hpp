#pragma once

#include <string>
#include <vector>

#include "beamlearn/tensor.hpp"

namespace beamlearn {

struct WmmseConfig {
  std::size_t max_iters = 200;
  double tol = 1e-6;        // stop when the sum-rate delta falls below this
  double power_tol = 1e-7;  // bisection accuracy relative to the budget
};

struct WmmseResult {
  CTensor w;                  // [N_t, K]
  std::vector<double> trace;  // sum rate after each iteration
};

// Weighted-MMSE block-coordinate ascent for the MISO sum rate. Matched-filter
// equal-power initialization; the power multiplier is found by bisection and
// the beams are scaled up to the full budget (a common positive scaling never
// decreases the sum rate). Throws NonMonotone if the trace ever drops by more
// than 1e-9, which would indicate an implementation bug.
WmmseResult wmmse(const CTensor& h_dn, double power, double n0, const WmmseConfig& cfg = {});

struct PqPair {
  CTensor p;  // [K] real
  CTensor q;  // [K] real
};

// p_k = ||w_k||^2 rescaled to the budget; q from the virtual-uplink fixed
// point q_k <- gamma_k / (h_k^H (N0 I + sum_{j!=k} q_j h_j h_j^H)^-1 h_k),
// then rescaled to the budget.
PqPair extract_pq(const CTensor& h_dn, const CTensor& w, double n0, double power);

struct GpConfig {
  std::size_t max_iters = 50000;
  double grad_tol = 1e-9;
  double backtrack_beta = 0.5;
  double armijo_c = 1e-4;
  bool plus_one = false;  // keep the +1 inside the rate terms (non-posynomial)
};

// Minimize prod_k (a_k / p_k + b_k) subject to sum p <= P, a_k > 0, b_k >= 0.
// Solved in the log domain over the power simplex; the budget constraint is
// always active because the objective decreases in every p_k.
CTensor gp_power(const CTensor& a, const CTensor& b, double power, const GpConfig& cfg = {});

double gp_objective(const CTensor& a, const CTensor& b, const CTensor& p, bool plus_one = false);

struct MulticellAoConfig {
  std::size_t max_iters = 100;
  double tol = 1e-8;
  GpConfig gp;
};

struct MulticellAoResult {
  CTensor w;                  // [N_t, K_local] beams for the serving BS
  CTensor p;                  // [K_local]
  std::vector<double> trace;  // product-form objective after each round
};

// Alternating SLNR directions and geometric-programming powers for one cell.
// Uses only the observing BS's channels (columns serve_begin .. +k_local are
// the served users), so the optimization is distributed by construction.
MulticellAoResult multicell_ao(const CTensor& h_local, std::size_t serve_begin,
                               std::size_t k_local, double power, double n0,
                               const MulticellAoConfig& cfg = {});

// Centralized multicell WMMSE with a per-BS power budget; evaluation upper
// bound for the multicell schemes.
std::vector<CTensor> multicell_wmmse(const std::vector<CTensor>& h_dn_per_bs,
                                     std::size_t k_per_cell, double power, double n0,
                                     const WmmseConfig& cfg = {});

void write_trace_csv(const std::string& path, const std::vector<double>& trace);

}  // namespace beamlearn
