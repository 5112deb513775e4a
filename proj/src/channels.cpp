#include "beamlearn/channels.hpp"

#include <cmath>

#include "beamlearn/errors.hpp"
#include "beamlearn/linalg.hpp"
#include "beamlearn/pilots.hpp"
#include "beamlearn/util.hpp"

namespace beamlearn {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
}

std::string scenario_kind_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::kToySquare: return "toy_square";
    case ScenarioKind::kSmallTdd: return "small_tdd";
    case ScenarioKind::kMassiveFdd: return "massive_fdd";
    case ScenarioKind::kMulticell: return "multicell";
  }
  return "?";
}

ScenarioKind scenario_kind_from_name(const std::string& s) {
  if (s == "toy_square") return ScenarioKind::kToySquare;
  if (s == "small_tdd") return ScenarioKind::kSmallTdd;
  if (s == "massive_fdd") return ScenarioKind::kMassiveFdd;
  if (s == "multicell") return ScenarioKind::kMulticell;
  throw ConfigError("unknown scenario kind: " + s);
}

void ScenarioConfig::validate() const {
  if (n_t < 1) throw ConfigError("n_t must be >= 1");
  if (k < 1) throw ConfigError("k must be >= 1");
  if (n_c < 1) throw ConfigError("n_c must be >= 1");
  if (!(power > 0.0)) throw ConfigError("power must be positive");
  if (!(noise > 0.0)) throw ConfigError("noise must be positive");
  if (kind == ScenarioKind::kMulticell && n_c < 1) throw ConfigError("multicell needs n_c >= 1");
  if (kind != ScenarioKind::kMulticell && n_c != 1) {
    throw ConfigError("n_c > 1 requires the multicell scenario");
  }
  if ((kind == ScenarioKind::kMassiveFdd || kind == ScenarioKind::kMulticell) && paths < 1) {
    throw ConfigError("paths must be >= 1 for multipath scenarios");
  }
  if (use_pilots && pilot_len < 1) throw ConfigError("pilot_len must be >= 1 when pilots are on");
  if (f_up <= 0 || f_dn <= 0) throw ConfigError("carrier frequencies must be positive");
  if (spacing_wl <= 0) throw ConfigError("antenna spacing must be positive");
  if (kind == ScenarioKind::kMulticell) {
    if (cell_radius_m <= min_bs_dist_m) throw ConfigError("cell radius must exceed min BS distance");
  }
}

CTensor gen_uplink_rayleigh(std::size_t n_t, std::size_t k, Rng& rng) {
  CTensor h{Shape{n_t, k}};
  for (std::size_t i = 0; i < h.numel(); ++i) h.at(i) = rng.cgauss(1.0);
  return h;
}

CTensor ula_response(std::size_t n_t, double theta, double freq, double f_dn,
                     double spacing_wl) {
  CTensor a{Shape{n_t, 1}};
  double step = -2.0 * kPi * spacing_wl * (freq / f_dn) * std::sin(theta);
  for (std::size_t m = 0; m < n_t; ++m) {
    double ph = step * static_cast<double>(m);
    a.at(m) = cplx(std::cos(ph), std::sin(ph));
  }
  return a;
}

PathSet draw_paths(std::size_t l_p, Rng& rng) {
  PathSet ps;
  double theta_bar = rng.uniform(-kPi / 3.0, kPi / 3.0);
  double dtheta = rng.uniform(-kPi / 6.0, kPi / 6.0);
  double lo = theta_bar - dtheta / 2.0, hi = theta_bar + dtheta / 2.0;
  if (lo > hi) std::swap(lo, hi);
  for (std::size_t l = 0; l < l_p; ++l) {
    ps.theta.push_back(rng.uniform(lo, hi));
    ps.tau.push_back(rng.uniform(0.0, 1e-4));
    ps.phase.push_back(rng.uniform(-kPi, kPi));
    ps.alpha.push_back(rng.cgauss(1.0));
  }
  return ps;
}

CTensor channel_from_paths(const PathSet& ps, double freq, double f_dn, double spacing_wl,
                           std::size_t n_t, bool square_gains) {
  CTensor h{Shape{n_t, 1}};
  for (std::size_t l = 0; l < ps.alpha.size(); ++l) {
    cplx gain = square_gains ? ps.alpha[l] * ps.alpha[l] : ps.alpha[l];
    double ph = -2.0 * kPi * freq * ps.tau[l] + ps.phase[l];
    cplx rot(std::cos(ph), std::sin(ph));
    CTensor a = ula_response(n_t, ps.theta[l], freq, f_dn, spacing_wl);
    for (std::size_t m = 0; m < n_t; ++m) h.at(m) += gain * rot * a.at(m);
  }
  return h;
}

CTensor map_downlink(const CTensor& h_up, const MappingState& ms, ScenarioKind kind) {
  if (kind == ScenarioKind::kToySquare) {
    CTensor h{h_up.shape()};
    for (std::size_t i = 0; i < h.numel(); ++i) h.at(i) = h_up.at(i) * h_up.at(i);
    return h;
  }
  if (kind != ScenarioKind::kSmallTdd) {
    throw ConfigError("map_downlink from a channel matrix applies to toy_square/small_tdd");
  }
  std::size_t n = h_up.rows(), k = h_up.cols();
  if (ms.phi.size() != k || ms.c.size() != k) throw ShapeMismatch("mapping state vs users");
  CTensor h{h_up.shape()};
  for (std::size_t u = 0; u < k; ++u) {
    CTensor col = la::matmul(ms.phi[u], la::column(h_up, u));
    for (std::size_t i = 0; i < n; ++i) h(i, u) = ms.c[u] * col.at(i);
  }
  return h;
}

CTensor map_downlink_from_paths(const std::vector<PathSet>& per_user, const MappingState& ms,
                                const ScenarioConfig& cfg) {
  std::size_t k = per_user.size();
  if (ms.phi.size() != k || ms.c.size() != k) throw ShapeMismatch("mapping state vs users");
  CTensor h{Shape{cfg.n_t, k}};
  for (std::size_t u = 0; u < k; ++u) {
    CTensor raw =
        channel_from_paths(per_user[u], cfg.f_dn, cfg.f_dn, cfg.spacing_wl, cfg.n_t, true);
    CTensor col = la::matmul(ms.phi[u], raw);
    for (std::size_t i = 0; i < cfg.n_t; ++i) h(i, u) = ms.c[u] * col.at(i);
  }
  return h;
}

double pathloss_db_up(double d_km) { return 127.0 + 30.0 * std::log10(d_km); }
double pathloss_db_dn(double d_km) { return 128.1 + 37.6 * std::log10(d_km); }

namespace {

// Hexagonal lattice centers in spiral ring order, inter-site distance
// sqrt(3) * radius.
void hex_layout(std::size_t n_c, double radius, std::vector<double>& xs,
                std::vector<double>& ys) {
  double d = std::sqrt(3.0) * radius;
  xs.clear();
  ys.clear();
  xs.push_back(0.0);
  ys.push_back(0.0);
  int ring = 1;
  while (xs.size() < n_c) {
    // axial walk around ring
    int q = ring, r = 0;
    const int dirs[6][2] = {{-1, 1}, {-1, 0}, {0, -1}, {1, -1}, {1, 0}, {0, 1}};
    for (int side = 0; side < 6 && xs.size() < n_c; ++side) {
      for (int stepi = 0; stepi < ring && xs.size() < n_c; ++stepi) {
        xs.push_back(d * (q + r / 2.0));
        ys.push_back(d * (std::sqrt(3.0) / 2.0) * r);
        q += dirs[side][0];
        r += dirs[side][1];
      }
    }
    ++ring;
  }
}

}  // namespace

MulticellTopology gen_topology(const ScenarioConfig& cfg, Rng& rng) {
  MulticellTopology topo;
  hex_layout(cfg.n_c, cfg.cell_radius_m, topo.bs_x, topo.bs_y);
  std::size_t users = cfg.users_total();
  topo.user_x.resize(users);
  topo.user_y.resize(users);
  for (std::size_t c = 0; c < cfg.n_c; ++c) {
    for (std::size_t j = 0; j < cfg.k; ++j) {
      std::size_t u = c * cfg.k + j;
      bool placed = false;
      for (int attempt = 0; attempt < 1000; ++attempt) {
        double rr = cfg.cell_radius_m * std::sqrt(rng.uniform());
        double ang = rng.uniform(0.0, 2.0 * kPi);
        if (rr < cfg.min_bs_dist_m) continue;
        topo.user_x[u] = topo.bs_x[c] + rr * std::cos(ang);
        topo.user_y[u] = topo.bs_y[c] + rr * std::sin(ang);
        placed = true;
        break;
      }
      if (!placed) throw GeometryError("could not place user after 1000 attempts");
    }
  }
  topo.gain_up = CTensor{Shape{cfg.n_c, users}};
  topo.gain_dn = CTensor{Shape{cfg.n_c, users}};
  for (std::size_t c = 0; c < cfg.n_c; ++c) {
    for (std::size_t u = 0; u < users; ++u) {
      double dx = topo.user_x[u] - topo.bs_x[c];
      double dy = topo.user_y[u] - topo.bs_y[c];
      double d_km = std::sqrt(dx * dx + dy * dy) / 1000.0;
      d_km = std::max(d_km, 1e-6);
      topo.gain_up(c, u) = std::pow(10.0, -pathloss_db_up(d_km) / 10.0);
      topo.gain_dn(c, u) = std::pow(10.0, -pathloss_db_dn(d_km) / 10.0);
    }
  }
  return topo;
}

double nmse(const CTensor& estimate, const CTensor& truth) {
  if (!estimate.same_shape(truth)) throw ShapeMismatch("nmse: shape mismatch");
  double den = la::fro_norm2(truth);
  if (den == 0.0) throw DivisionByZero("nmse: zero reference norm");
  double num = 0.0;
  for (std::size_t i = 0; i < truth.numel(); ++i) num += std::norm(estimate.at(i) - truth.at(i));
  return num / den;
}

Scenario::Scenario(ScenarioConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng map_rng(derive_seed(cfg_.seed, 0x6d617070ULL));  // fixed mapping stream
  std::size_t users = cfg_.users_total();
  std::size_t n_bs = (cfg_.kind == ScenarioKind::kMulticell) ? cfg_.n_c : 1;
  maps_.resize(n_bs);
  if (cfg_.kind != ScenarioKind::kToySquare) {
    for (std::size_t b = 0; b < n_bs; ++b) {
      for (std::size_t u = 0; u < users; ++u) {
        maps_[b].phi.push_back(la::haar_unitary(cfg_.n_t, map_rng));
        maps_[b].c.push_back(map_rng.cgauss(1.0));
      }
    }
  } else {
    maps_[0].phi.clear();
    maps_[0].c.clear();
  }
  if (cfg_.use_pilots) {
    pilot_x_ = make_dft_pilots(users, cfg_.pilot_len, cfg_.pilot_power_eff());
  }
}

Sample Scenario::draw(std::uint64_t index) const {
  Rng rng(derive_seed(cfg_.seed, index));
  Sample s;
  std::size_t users = cfg_.users_total();
  switch (cfg_.kind) {
    case ScenarioKind::kToySquare:
    case ScenarioKind::kSmallTdd: {
      CTensor up = gen_uplink_rayleigh(cfg_.n_t, cfg_.k, rng);
      CTensor dn = (cfg_.kind == ScenarioKind::kToySquare)
                       ? map_downlink(up, maps_[0], ScenarioKind::kToySquare)
                       : map_downlink(up, maps_[0], ScenarioKind::kSmallTdd);
      s.h_up.push_back(up);
      s.h_dn.push_back(std::move(dn));
      break;
    }
    case ScenarioKind::kMassiveFdd: {
      std::vector<PathSet> paths;
      CTensor up{Shape{cfg_.n_t, cfg_.k}};
      for (std::size_t u = 0; u < cfg_.k; ++u) {
        PathSet ps = draw_paths(cfg_.paths, rng);
        CTensor col =
            channel_from_paths(ps, cfg_.f_up, cfg_.f_dn, cfg_.spacing_wl, cfg_.n_t, false);
        la::set_column(up, u, col);
        paths.push_back(std::move(ps));
      }
      s.h_up.push_back(up);
      s.h_dn.push_back(map_downlink_from_paths(paths, maps_[0], cfg_));
      break;
    }
    case ScenarioKind::kMulticell: {
      MulticellTopology topo = gen_topology(cfg_, rng);
      // Per-link multipath, shared geometry between directions.
      for (std::size_t b = 0; b < cfg_.n_c; ++b) {
        CTensor up{Shape{cfg_.n_t, users}};
        std::vector<PathSet> paths;
        for (std::size_t u = 0; u < users; ++u) {
          PathSet ps = draw_paths(cfg_.paths, rng);
          CTensor col =
              channel_from_paths(ps, cfg_.f_up, cfg_.f_dn, cfg_.spacing_wl, cfg_.n_t, false);
          double g = std::sqrt(topo.gain_up(b, u).real());
          for (std::size_t i = 0; i < cfg_.n_t; ++i) up(i, u) = g * col.at(i);
          paths.push_back(std::move(ps));
        }
        CTensor dn = map_downlink_from_paths(paths, maps_[b], cfg_);
        for (std::size_t u = 0; u < users; ++u) {
          double g = std::sqrt(topo.gain_dn(b, u).real());
          for (std::size_t i = 0; i < cfg_.n_t; ++i) dn(i, u) *= g;
        }
        s.h_up.push_back(std::move(up));
        s.h_dn.push_back(std::move(dn));
      }
      break;
    }
  }
  if (cfg_.use_pilots) {
    for (const CTensor& up : s.h_up) {
      CTensor y = receive_pilots(up, pilot_x_, cfg_.pilot_noise_eff(), rng);
      s.input.push_back(ls_preprocess(y, pilot_x_, cfg_.pilot_power_eff()));
      s.y_pilot.push_back(std::move(y));
    }
  } else {
    s.input = s.h_up;
  }
  return s;
}

Dataset build_dataset(const ScenarioConfig& cfg, std::size_t count, const Labeler& labeler,
                      const std::string& labeler_name, std::size_t threads) {
  Scenario scenario(cfg);
  Dataset ds;
  ds.config = cfg;
  ds.labeler_name = labeler ? labeler_name : "none";
  ds.samples.resize(count);
  parallel_for(count, threads, [&](std::size_t i) {
    Sample s = scenario.draw(i);
    if (labeler) {
      try {
        labeler(cfg, s);
      } catch (const std::exception& ex) {
        throw Error("labeling sample " + std::to_string(i) + ": " + ex.what());
      }
    }
    ds.samples[i] = std::move(s);
  });
  return ds;
}

}  // namespace beamlearn
