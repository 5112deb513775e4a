#include "beamlearn/params.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "beamlearn/errors.hpp"

namespace beamlearn {

CTensor& Params::create(const std::string& name, CTensor init, bool trainable, bool real_only) {
  if (table_.count(name)) throw Error("parameter already exists: " + name);
  ParamEntry e;
  e.value = std::move(init);
  e.trainable = trainable;
  e.real_only = real_only;
  auto [it, ok] = table_.emplace(name, std::move(e));
  (void)ok;
  return it->second.value;
}

ParamEntry& Params::entry(const std::string& name) {
  auto it = table_.find(name);
  if (it == table_.end()) throw Error("unknown parameter: " + name);
  return it->second;
}

const ParamEntry& Params::entry(const std::string& name) const {
  auto it = table_.find(name);
  if (it == table_.end()) throw Error("unknown parameter: " + name);
  return it->second;
}

void Params::zero_grads() {
  for (auto& [name, e] : table_) {
    (void)name;
    if (e.grad.empty()) e.grad = CTensor{e.value.shape()};
    for (std::size_t i = 0; i < e.grad.numel(); ++i) e.grad.at(i) = 0.0;
  }
}

std::vector<std::string> Params::names() const {
  std::vector<std::string> out;
  out.reserve(table_.size());
  for (const auto& [name, e] : table_) {
    (void)e;
    out.push_back(name);
  }
  return out;
}

namespace {

void write_doubles(std::ofstream& f, const CTensor& t) {
  // Interleaved re/im pairs. Host is little-endian; the format is defined as
  // little-endian doubles.
  static_assert(sizeof(cplx) == 2 * sizeof(double));
  f.write(reinterpret_cast<const char*>(t.data()),
          static_cast<std::streamsize>(t.numel() * sizeof(cplx)));
}

void read_doubles(std::ifstream& f, CTensor& t) {
  f.read(reinterpret_cast<char*>(t.data()),
         static_cast<std::streamsize>(t.numel() * sizeof(cplx)));
  if (!f) throw IoError("checkpoint payload truncated");
}

}  // namespace

void save_checkpoint(const Params& params, const std::string& path,
                     const std::map<std::string, std::string>& meta) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint: " + path);
  std::ostringstream head;
  head << "beamlearn-checkpoint v1\n";
  head << "step " << params.step << "\n";
  for (const auto& [k, v] : meta) head << "meta " << k << " " << v << "\n";
  std::size_t offset = 0;  // in doubles
  for (const auto& [name, e] : params.table()) {
    bool has_adam = !e.adam_m.empty();
    head << "tensor " << name << " " << (e.trainable ? 1 : 0) << " " << (e.real_only ? 1 : 0)
         << " " << (has_adam ? 1 : 0) << " " << e.value.rank();
    for (std::size_t d : e.value.shape()) head << " " << d;
    head << " " << offset << "\n";
    offset += 2 * e.value.numel();
    if (has_adam) offset += 4 * e.value.numel();
  }
  head << "end\n";
  std::string h = head.str();
  f.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& [name, e] : params.table()) {
    (void)name;
    write_doubles(f, e.value);
    if (!e.adam_m.empty()) {
      write_doubles(f, e.adam_m);
      write_doubles(f, e.adam_v);
    }
  }
  if (!f) throw IoError("checkpoint write failed: " + path);
}

Params load_checkpoint(const std::string& path, std::map<std::string, std::string>* meta) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read checkpoint: " + path);
  std::string line;
  if (!std::getline(f, line) || line != "beamlearn-checkpoint v1") {
    throw IoError("bad checkpoint header in " + path);
  }
  Params params;
  struct Rec {
    std::string name;
    bool trainable, real_only, has_adam;
    Shape shape;
  };
  std::vector<Rec> recs;
  while (std::getline(f, line)) {
    if (line == "end") break;
    std::istringstream is(line);
    std::string tag;
    is >> tag;
    if (tag == "step") {
      is >> params.step;
    } else if (tag == "meta") {
      std::string k;
      is >> k;
      std::string v;
      std::getline(is, v);
      if (!v.empty() && v[0] == ' ') v.erase(0, 1);
      if (meta) (*meta)[k] = v;
    } else if (tag == "tensor") {
      Rec r;
      int tr = 0, ro = 0, ad = 0;
      std::size_t rank = 0;
      is >> r.name >> tr >> ro >> ad >> rank;
      r.trainable = tr != 0;
      r.real_only = ro != 0;
      r.has_adam = ad != 0;
      r.shape.resize(rank);
      for (std::size_t i = 0; i < rank; ++i) is >> r.shape[i];
      std::size_t off = 0;
      is >> off;
      if (!is) throw IoError("bad tensor record: " + line);
      recs.push_back(std::move(r));
    } else {
      throw IoError("unknown checkpoint record: " + line);
    }
  }
  for (const Rec& r : recs) {
    ParamEntry e;
    e.value = CTensor{r.shape};
    e.trainable = r.trainable;
    e.real_only = r.real_only;
    read_doubles(f, e.value);
    if (r.has_adam) {
      e.adam_m = CTensor{r.shape};
      e.adam_v = CTensor{r.shape};
      read_doubles(f, e.adam_m);
      read_doubles(f, e.adam_v);
    }
    params.table().emplace(r.name, std::move(e));
  }
  return params;
}

}  // namespace beamlearn
