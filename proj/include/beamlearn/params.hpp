#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "beamlearn/tensor.hpp"

namespace beamlearn {

struct ParamEntry {
  CTensor value;
  CTensor grad;      // empty until a backward pass touches it
  CTensor adam_m;    // optimizer state, lazily allocated
  CTensor adam_v;
  bool trainable = true;
  bool real_only = false;
};

// Named trainable tensors plus optimizer state. Iteration order is the
// sorted name order, which keeps updates and checkpoints deterministic.
class Params {
 public:
  CTensor& create(const std::string& name, CTensor init, bool trainable = true,
                  bool real_only = false);
  bool has(const std::string& name) const { return table_.count(name) > 0; }
  ParamEntry& entry(const std::string& name);
  const ParamEntry& entry(const std::string& name) const;
  CTensor& value(const std::string& name) { return entry(name).value; }
  const CTensor& value(const std::string& name) const { return entry(name).value; }

  void zero_grads();
  std::vector<std::string> names() const;
  std::size_t size() const { return table_.size(); }

  std::map<std::string, ParamEntry>& table() { return table_; }
  const std::map<std::string, ParamEntry>& table() const { return table_; }

  std::int64_t step = 0;  // adam step counter

 private:
  std::map<std::string, ParamEntry> table_;
};

// Checkpoint: text manifest (name, flags, shape, offset) followed by a raw
// little-endian float64 payload; round-trips bit-exactly.
void save_checkpoint(const Params& params, const std::string& path,
                     const std::map<std::string, std::string>& meta = {});
Params load_checkpoint(const std::string& path,
                       std::map<std::string, std::string>* meta = nullptr);

}  // namespace beamlearn
