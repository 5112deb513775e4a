#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace beamlearn {

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    auto d = std::chrono::steady_clock::now() - start_;
    return std::chrono::duration<double>(d).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::string fnv1a_hex(const std::string& bytes);

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t count = 0;
};

MeanStderr mean_stderr(const std::vector<double>& v);

// Static partition over [0, n); worker exceptions are captured and the one
// with the smallest index is rethrown after the join.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace beamlearn
