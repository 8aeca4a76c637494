#pragma once

// Brute-force placement reference used by the placement tests and the
// acceptance binary. Shares no code with the library.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace tpart::oracle {

struct Instance {
  std::vector<double> load;
  std::vector<std::vector<double>> traffic;
  uint32_t physical = 1;
  double alpha = 1.0;
  double beta = 0.001;
};

inline double cost(const Instance& in, const std::vector<uint32_t>& m) {
  std::vector<double> per(in.physical, 0.0);
  for (size_t i = 0; i < m.size(); ++i) per[m[i]] += in.load[i];
  double cross = 0.0;
  for (size_t i = 0; i < m.size(); ++i)
    for (size_t j = 0; j < m.size(); ++j)
      if (i < j && m[i] != m[j]) cross += in.traffic[i][j];
  return in.alpha * *std::max_element(per.begin(), per.end()) + in.beta * cross;
}

/// Minimum over all physical^n mappings, counted as base-`physical` numbers.
inline double min_cost(const Instance& in) {
  const size_t n = in.load.size();
  uint64_t total = 1;
  for (size_t i = 0; i < n; ++i) total *= in.physical;
  double best = std::numeric_limits<double>::infinity();
  std::vector<uint32_t> m(n);
  for (uint64_t code = 0; code < total; ++code) {
    uint64_t c = code;
    for (size_t i = 0; i < n; ++i) {
      m[i] = static_cast<uint32_t>(c % in.physical);
      c /= in.physical;
    }
    best = std::min(best, cost(in, m));
  }
  return best;
}

inline Instance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nd(1, 8), pd(1, 3), coin(0, 3);
  std::uniform_real_distribution<double> ld(0.0, 100.0), td(0.0, 500.0);
  const double betas[] = {0.0, 0.001, 0.1, 1.0};
  Instance in;
  const int n = nd(rng);
  in.physical = static_cast<uint32_t>(pd(rng));
  in.beta = betas[coin(rng)];
  in.load.resize(n);
  for (auto& l : in.load) l = ld(rng);
  in.traffic.assign(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) in.traffic[i][j] = in.traffic[j][i] = coin(rng) == 0 ? 0.0 : td(rng);
  return in;
}

inline std::string describe(const Instance& in) {
  std::ostringstream os;
  os.precision(17);
  os << "physical=" << in.physical << " alpha=" << in.alpha << " beta=" << in.beta << " load=[";
  for (size_t i = 0; i < in.load.size(); ++i) os << (i ? "," : "") << in.load[i];
  os << "] traffic=[";
  for (size_t i = 0; i < in.traffic.size(); ++i) {
    os << (i ? ";" : "");
    for (size_t j = 0; j < in.traffic[i].size(); ++j) os << (j ? "," : "") << in.traffic[i][j];
  }
  os << "]";
  return os.str();
}

}  // namespace tpart::oracle
