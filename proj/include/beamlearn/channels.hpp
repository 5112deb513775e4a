#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "beamlearn/rng.hpp"
#include "beamlearn/tensor.hpp"

namespace beamlearn {

enum class ScenarioKind { kToySquare, kSmallTdd, kMassiveFdd, kMulticell };

std::string scenario_kind_name(ScenarioKind k);
ScenarioKind scenario_kind_from_name(const std::string& s);

// Powers are linear throughout; dB conversion happens at the CLI boundary.
struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::kSmallTdd;
  std::size_t n_t = 4;   // BS antennas
  std::size_t k = 4;     // users per cell
  std::size_t n_c = 1;   // cells
  double power = 100.0;  // total transmit power per BS
  double noise = 1.0;    // receiver noise power
  std::size_t paths = 3;                // multipath count (massive/multicell)
  double f_up = 2.5e9, f_dn = 2.4e9;    // carrier frequencies, Hz
  double spacing_wl = 0.5;              // antenna spacing in downlink wavelengths
  bool use_pilots = false;
  std::size_t pilot_len = 0;
  double pilot_power = 0.0;  // 0 -> defaults to `power`
  double pilot_noise = 0.0;  // 0 -> defaults to `noise`
  double cell_radius_m = 200.0;
  double min_bs_dist_m = 10.0;
  std::uint64_t seed = 1;

  std::size_t users_total() const { return k * n_c; }
  double pilot_power_eff() const { return pilot_power > 0.0 ? pilot_power : power; }
  double pilot_noise_eff() const { return pilot_noise > 0.0 ? pilot_noise : noise; }
  void validate() const;  // throws ConfigError
};

// Fixed per-scenario front-end mismatch: one unitary and one complex scalar
// per user column, drawn once and reused for every sample so the
// uplink-to-downlink map stays deterministic.
struct MappingState {
  std::vector<CTensor> phi;  // [N,N] unitary per user
  std::vector<cplx> c;
};

struct PathSet {
  std::vector<cplx> alpha;
  std::vector<double> theta;  // AoA/AoD
  std::vector<double> tau;    // seconds
  std::vector<double> phase;
};

struct MulticellTopology {
  std::vector<double> bs_x, bs_y;      // size n_c
  std::vector<double> user_x, user_y;  // size k*n_c, cell-major
  CTensor gain_up;                     // [n_c, users] linear power gains
  CTensor gain_dn;
};

struct Sample {
  std::vector<CTensor> h_up;     // per observing BS, [N, users_total]
  std::vector<CTensor> h_dn;
  std::vector<CTensor> input;    // uplink CSI or LS-preprocessed pilots
  std::vector<CTensor> y_pilot;  // raw received pilots (pilot mode only)
  CTensor p, q;                  // [n_c, K] real labels; empty when unlabeled
  bool labeled() const { return !p.empty(); }
};

CTensor gen_uplink_rayleigh(std::size_t n_t, std::size_t k, Rng& rng);

// ULA response at angle theta. The spacing is given in downlink wavelengths,
// so an uplink response at f carries the ratio f/f_dn in its phase.
CTensor ula_response(std::size_t n_t, double theta, double freq, double f_dn,
                     double spacing_wl);

PathSet draw_paths(std::size_t l_p, Rng& rng);

CTensor channel_from_paths(const PathSet& ps, double freq, double f_dn, double spacing_wl,
                           std::size_t n_t, bool square_gains);

// Elementwise maps for the toy and small-scale TDD scenarios.
CTensor map_downlink(const CTensor& h_up, const MappingState& ms, ScenarioKind kind);
// Massive mapping: rebuild the multipath sum with squared path gains at the
// downlink frequency, then apply the fixed per-user c*Phi.
CTensor map_downlink_from_paths(const std::vector<PathSet>& per_user, const MappingState& ms,
                                const ScenarioConfig& cfg);

double pathloss_db_up(double d_km);
double pathloss_db_dn(double d_km);
MulticellTopology gen_topology(const ScenarioConfig& cfg, Rng& rng);

double nmse(const CTensor& estimate, const CTensor& truth);

class Scenario {
 public:
  explicit Scenario(ScenarioConfig cfg);
  const ScenarioConfig& config() const { return cfg_; }
  const MappingState& mapping(std::size_t bs = 0) const { return maps_.at(bs); }
  const CTensor& pilot_matrix() const { return pilot_x_; }

  // Deterministic function of (config.seed, index); labels not included.
  Sample draw(std::uint64_t index) const;

 private:
  ScenarioConfig cfg_;
  std::vector<MappingState> maps_;
  CTensor pilot_x_;
};

struct Dataset {
  ScenarioConfig config;
  std::string labeler_name;  // "wmmse", "slnr_ao", "none"
  std::vector<Sample> samples;
};

using Labeler = std::function<void(const ScenarioConfig&, Sample&)>;

Dataset build_dataset(const ScenarioConfig& cfg, std::size_t count, const Labeler& labeler,
                      const std::string& labeler_name, std::size_t threads = 1);

}  // namespace beamlearn
