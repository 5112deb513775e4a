#include "beamlearn/dataset_io.hpp"

#include <filesystem>
#include <fstream>

#include "beamlearn/errors.hpp"
#include "beamlearn/util.hpp"

namespace beamlearn {

namespace fs = std::filesystem;
using nlohmann::json;

json scenario_to_json(const ScenarioConfig& cfg) {
  json j;
  j["kind"] = scenario_kind_name(cfg.kind);
  j["n_t"] = cfg.n_t;
  j["k"] = cfg.k;
  j["n_c"] = cfg.n_c;
  j["power"] = cfg.power;
  j["noise"] = cfg.noise;
  j["paths"] = cfg.paths;
  j["f_up"] = cfg.f_up;
  j["f_dn"] = cfg.f_dn;
  j["spacing_wl"] = cfg.spacing_wl;
  j["use_pilots"] = cfg.use_pilots;
  j["pilot_len"] = cfg.pilot_len;
  j["pilot_power"] = cfg.pilot_power;
  j["pilot_noise"] = cfg.pilot_noise;
  j["cell_radius_m"] = cfg.cell_radius_m;
  j["min_bs_dist_m"] = cfg.min_bs_dist_m;
  j["seed"] = cfg.seed;
  return j;
}

ScenarioConfig scenario_from_json(const json& j) {
  static const char* known[] = {"kind",        "n_t",         "k",           "n_c",
                                "power",       "noise",       "paths",       "f_up",
                                "f_dn",        "spacing_wl",  "use_pilots",  "pilot_len",
                                "pilot_power", "pilot_noise", "cell_radius_m",
                                "min_bs_dist_m", "seed"};
  if (!j.is_object()) throw ConfigError("scenario: expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ConfigError("scenario: unknown key '" + it.key() + "'");
  }
  ScenarioConfig cfg;
  try {
    if (j.count("kind")) cfg.kind = scenario_kind_from_name(j.at("kind").get<std::string>());
    if (j.count("n_t")) cfg.n_t = j.at("n_t").get<std::size_t>();
    if (j.count("k")) cfg.k = j.at("k").get<std::size_t>();
    if (j.count("n_c")) cfg.n_c = j.at("n_c").get<std::size_t>();
    if (j.count("power")) cfg.power = j.at("power").get<double>();
    if (j.count("noise")) cfg.noise = j.at("noise").get<double>();
    if (j.count("paths")) cfg.paths = j.at("paths").get<std::size_t>();
    if (j.count("f_up")) cfg.f_up = j.at("f_up").get<double>();
    if (j.count("f_dn")) cfg.f_dn = j.at("f_dn").get<double>();
    if (j.count("spacing_wl")) cfg.spacing_wl = j.at("spacing_wl").get<double>();
    if (j.count("use_pilots")) cfg.use_pilots = j.at("use_pilots").get<bool>();
    if (j.count("pilot_len")) cfg.pilot_len = j.at("pilot_len").get<std::size_t>();
    if (j.count("pilot_power")) cfg.pilot_power = j.at("pilot_power").get<double>();
    if (j.count("pilot_noise")) cfg.pilot_noise = j.at("pilot_noise").get<double>();
    if (j.count("cell_radius_m")) cfg.cell_radius_m = j.at("cell_radius_m").get<double>();
    if (j.count("min_bs_dist_m")) cfg.min_bs_dist_m = j.at("min_bs_dist_m").get<double>();
    if (j.count("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("scenario: ") + ex.what());
  }
  cfg.validate();
  return cfg;
}

std::string dataset_config_hash(const ScenarioConfig& cfg, const std::string& labeler,
                                std::size_t count) {
  return fnv1a_hex(scenario_to_json(cfg).dump() + "|" + labeler + "|" + std::to_string(count));
}

namespace {

void write_blob(const fs::path& path, const CTensor& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(t.data()),
          static_cast<std::streamsize>(t.numel() * sizeof(cplx)));
  if (!f) throw IoError("short write to " + path.string());
}

CTensor read_blob(const fs::path& path, const Shape& shape) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  CTensor t{shape};
  f.read(reinterpret_cast<char*>(t.data()),
         static_cast<std::streamsize>(t.numel() * sizeof(cplx)));
  if (!f) throw IoError("blob truncated: " + path.string());
  return t;
}

// Stack a per-sample, per-BS field into [T, n_bs, rows, cols].
CTensor stack_field(const Dataset& ds, const std::vector<CTensor> Sample::* field) {
  const auto& first = ds.samples.front().*field;
  std::size_t n_bs = first.size();
  std::size_t r = first[0].rows(), c = first[0].cols();
  CTensor out{Shape{ds.samples.size(), n_bs, r, c}};
  std::size_t block = r * c;
  for (std::size_t t = 0; t < ds.samples.size(); ++t) {
    const auto& v = ds.samples[t].*field;
    if (v.size() != n_bs) throw ShapeMismatch("dataset: ragged per-BS field");
    for (std::size_t b = 0; b < n_bs; ++b) {
      if (v[b].rows() != r || v[b].cols() != c) throw ShapeMismatch("dataset: ragged tensors");
      for (std::size_t i = 0; i < block; ++i) out.at((t * n_bs + b) * block + i) = v[b].at(i);
    }
  }
  return out;
}

CTensor stack_labels(const Dataset& ds, const CTensor Sample::* field) {
  const CTensor& first = ds.samples.front().*field;
  std::size_t n = first.numel();
  CTensor out{Shape{ds.samples.size(), first.dim(0), first.dim(1)}};
  for (std::size_t t = 0; t < ds.samples.size(); ++t) {
    const CTensor& v = ds.samples[t].*field;
    if (v.numel() != n) throw ShapeMismatch("dataset: ragged labels");
    for (std::size_t i = 0; i < n; ++i) out.at(t * n + i) = v.at(i);
  }
  return out;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "beamlearn-dataset";
  manifest["version"] = 1;
  manifest["scenario"] = scenario_to_json(ds.config);
  manifest["labeler"] = ds.labeler_name;
  manifest["count"] = ds.samples.size();
  manifest["config_hash"] = dataset_config_hash(ds.config, ds.labeler_name, ds.samples.size());
  json tensors = json::array();

  auto emit = [&](const std::string& name, const CTensor& t) {
    std::string file = name + ".c64";
    write_blob(fs::path(dir) / file, t);
    json rec;
    rec["name"] = name;
    rec["shape"] = t.shape();
    rec["file"] = file;
    tensors.push_back(rec);
  };

  if (!ds.samples.empty()) {
    emit("input", stack_field(ds, &Sample::input));
    emit("h_up", stack_field(ds, &Sample::h_up));
    emit("h_dn", stack_field(ds, &Sample::h_dn));
    if (!ds.samples.front().y_pilot.empty()) emit("y_pilot", stack_field(ds, &Sample::y_pilot));
    if (ds.samples.front().labeled()) {
      emit("p", stack_labels(ds, &Sample::p));
      if (!ds.samples.front().q.empty()) emit("q", stack_labels(ds, &Sample::q));
    }
  }
  manifest["tensors"] = tensors;
  std::ofstream f(fs::path(dir) / "manifest.json");
  if (!f) throw IoError("cannot write manifest in " + dir);
  f << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "manifest.json");
  if (!f) throw IoError("cannot read manifest in " + dir);
  json manifest;
  try {
    f >> manifest;
  } catch (const json::exception& ex) {
    throw IoError(std::string("bad manifest: ") + ex.what());
  }
  if (manifest.value("format", "") != "beamlearn-dataset") {
    throw IoError("not a dataset directory: " + dir);
  }
  Dataset ds;
  ds.config = scenario_from_json(manifest.at("scenario"));
  ds.labeler_name = manifest.value("labeler", "none");
  std::size_t count = manifest.at("count").get<std::size_t>();
  ds.samples.resize(count);

  std::map<std::string, CTensor> loaded;
  for (const auto& rec : manifest.at("tensors")) {
    Shape shape = rec.at("shape").get<Shape>();
    loaded[rec.at("name").get<std::string>()] =
        read_blob(fs::path(dir) / rec.at("file").get<std::string>(), shape);
  }

  auto unstack = [&](const std::string& name, std::vector<CTensor> Sample::* field) {
    auto it = loaded.find(name);
    if (it == loaded.end()) return;
    const CTensor& t = it->second;
    std::size_t n_bs = t.dim(1), r = t.dim(2), c = t.dim(3);
    std::size_t block = r * c;
    for (std::size_t s = 0; s < count; ++s) {
      auto& v = ds.samples[s].*field;
      v.resize(n_bs, CTensor{Shape{r, c}});
      for (std::size_t b = 0; b < n_bs; ++b)
        for (std::size_t i = 0; i < block; ++i)
          v[b].at(i) = t.at((s * n_bs + b) * block + i);
    }
  };
  unstack("input", &Sample::input);
  unstack("h_up", &Sample::h_up);
  unstack("h_dn", &Sample::h_dn);
  unstack("y_pilot", &Sample::y_pilot);
  auto unstack_labels = [&](const std::string& name, CTensor Sample::* field) {
    auto it = loaded.find(name);
    if (it == loaded.end()) return;
    const CTensor& t = it->second;
    std::size_t n = t.dim(1) * t.dim(2);
    for (std::size_t s = 0; s < count; ++s) {
      CTensor v{Shape{t.dim(1), t.dim(2)}};
      for (std::size_t i = 0; i < n; ++i) v.at(i) = t.at(s * n + i);
      ds.samples[s].*field = std::move(v);
    }
  };
  unstack_labels("p", &Sample::p);
  unstack_labels("q", &Sample::q);
  return ds;
}

}  // namespace beamlearn
