#pragma once

#include "beamlearn/params.hpp"

namespace beamlearn {

struct SgdConfig {
  double lr = 1e-2;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Both steps treat the real and imaginary components of each parameter as
// independent scalars and are deterministic given identical inputs.
void sgd_step(Params& params, const SgdConfig& cfg);
void adam_step(Params& params, const AdamConfig& cfg);

}  // namespace beamlearn
