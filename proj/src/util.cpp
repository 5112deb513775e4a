#include "beamlearn/util.hpp"

#include <mutex>
#include <sstream>

#include "beamlearn/errors.hpp"

namespace beamlearn {

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

MeanStderr mean_stderr(const std::vector<double>& v) {
  MeanStderr r;
  r.count = v.size();
  if (v.empty()) return r;
  double s = 0.0;
  for (double x : v) s += x;
  r.mean = s / static_cast<double>(v.size());
  if (v.size() < 2) return r;
  double ss = 0.0;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  double var = ss / static_cast<double>(v.size() - 1);
  r.stderr_ = std::sqrt(var / static_cast<double>(v.size()));
  return r;
}

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (threads <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  threads = std::min(threads, n);
  std::mutex mu;
  std::size_t fail_index = n;
  std::string fail_msg;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t]() {
      std::size_t chunk = (n + threads - 1) / threads;
      std::size_t begin = t * chunk;
      std::size_t end = std::min(n, begin + chunk);
      for (std::size_t i = begin; i < end; ++i) {
        try {
          fn(i);
        } catch (const std::exception& ex) {
          std::lock_guard<std::mutex> lk(mu);
          if (i < fail_index) {
            fail_index = i;
            fail_msg = ex.what();
          }
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (fail_index < n) {
    throw Error("task " + std::to_string(fail_index) + " failed: " + fail_msg);
  }
}

}  // namespace beamlearn
