#include "tpart/placement.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "tpart/errors.hpp"

namespace tpart {

void WorkloadProfile::validate() const {
  const size_t n = load.size();
  if (traffic.size() != n) {
    throw EngineError(ErrorCode::kDimensionMismatch, "traffic has " + std::to_string(traffic.size()) +
                                                         " rows for " + std::to_string(n) + " partitions");
  }
  for (size_t i = 0; i < n; ++i) {
    if (traffic[i].size() != n) throw EngineError(ErrorCode::kDimensionMismatch, "traffic row " + std::to_string(i) + " has wrong width");
    if (!(load[i] >= 0.0)) throw EngineError(ErrorCode::kInvalidConfig, "negative load at " + std::to_string(i));
    for (size_t j = 0; j < n; ++j) {
      if (!(traffic[i][j] >= 0.0)) throw EngineError(ErrorCode::kInvalidConfig, "negative traffic entry");
    }
    if (traffic[i][i] != 0.0) throw EngineError(ErrorCode::kInvalidConfig, "traffic diagonal must be 0");
  }
}

SearchStrategy parse_strategy(std::string_view name) {
  if (name == "exhaustive") return SearchStrategy::kExhaustive;
  if (name == "greedy") return SearchStrategy::kGreedy;
  throw EngineError(ErrorCode::kInvalidConfig, "unknown strategy " + std::string(name));
}

const char* strategy_name(SearchStrategy s) { return s == SearchStrategy::kExhaustive ? "exhaustive" : "greedy"; }

namespace {

void check_weights(double alpha, double beta) {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw EngineError(ErrorCode::kInvalidConfig, "cost weights must be >= 0");
}

// Negative entries are unassigned and ignored.
double partial_cost(const WorkloadProfile& p, const std::vector<int64_t>& assign, double alpha, double beta) {
  std::map<int64_t, double> per_worker;
  double cross = 0.0;
  const size_t n = p.size();
  for (size_t i = 0; i < n; ++i) {
    if (assign[i] < 0) continue;
    per_worker[assign[i]] += p.load[i];
    for (size_t j = i + 1; j < n; ++j) {
      if (assign[j] >= 0 && assign[j] != assign[i]) cross += p.traffic[i][j];
    }
  }
  double peak = 0.0;
  for (const auto& [w, l] : per_worker) peak = std::max(peak, l);
  return alpha * peak + beta * cross;
}

bool better(double candidate, double best) {
  return candidate < best - 1e-12 * std::max(1.0, std::fabs(best));
}

}  // namespace

double estimate_cost(const WorkloadProfile& profile, const Mapping& mapping, double alpha, double beta) {
  profile.validate();
  check_weights(alpha, beta);
  if (mapping.size() != profile.size()) {
    throw EngineError(ErrorCode::kDimensionMismatch, "mapping covers " + std::to_string(mapping.size()) +
                                                         " partitions, profile has " + std::to_string(profile.size()));
  }
  std::vector<int64_t> assign(mapping.begin(), mapping.end());
  return partial_cost(profile, assign, alpha, beta);
}

Mapping advise_mapping(const WorkloadProfile& profile, uint32_t num_physical, double alpha, double beta,
                       SearchStrategy strategy) {
  profile.validate();
  check_weights(alpha, beta);
  if (num_physical == 0) throw EngineError(ErrorCode::kInvalidConfig, "num_physical must be >= 1");
  const size_t n = profile.size();
  if (n == 0) return {};

  if (strategy == SearchStrategy::kExhaustive) {
    if (n > kExhaustiveCap) {
      throw EngineError(ErrorCode::kSizeCap, "exhaustive search is limited to " + std::to_string(kExhaustiveCap) +
                                                 " logical partitions, got " + std::to_string(n));
    }
    // Cost is invariant under relabeling workers, and the first-appearance
    // relabeling of any mapping is lexicographically no larger, so walking
    // restricted growth strings in order finds the lexicographically first
    // optimum over all mappings.
    std::vector<int64_t> cur(n, 0);
    std::vector<int64_t> best;
    double best_cost = 0.0;
    auto rec = [&](auto& self, size_t i, uint32_t used) -> void {
      if (i == n) {
        double c = partial_cost(profile, cur, alpha, beta);
        if (best.empty() || better(c, best_cost)) {
          best = cur;
          best_cost = c;
        }
        return;
      }
      uint32_t limit = std::min(used + 1, num_physical);
      for (uint32_t w = 0; w < limit; ++w) {
        cur[i] = w;
        self(self, i + 1, std::max(used, w + 1));
      }
    };
    rec(rec, 0, 0);
    return Mapping(best.begin(), best.end());
  }

  // Greedy: place partitions heaviest first (load plus incident traffic,
  // weighted) on the worker with the lowest partial cost, then refine by
  // single-partition moves. The same refinement also runs from the
  // all-on-worker-0 start and the cheaper result wins.
  std::vector<double> weight(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    weight[i] = alpha * profile.load[i];
    for (size_t j = 0; j < n; ++j) weight[i] += beta * profile.traffic[i][j];
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return weight[a] > weight[b]; });
  std::vector<int64_t> assign(n, -1);
  for (size_t idx : order) {
    int64_t pick = 0;
    double pick_cost = 0.0;
    for (uint32_t w = 0; w < num_physical; ++w) {
      assign[idx] = w;
      double c = partial_cost(profile, assign, alpha, beta);
      if (w == 0 || better(c, pick_cost)) {
        pick = w;
        pick_cost = c;
      }
    }
    assign[idx] = pick;
  }

  auto refine = [&](std::vector<int64_t>& a) {
    double cur = partial_cost(profile, a, alpha, beta);
    for (size_t round = 0; round < 64 * n * num_physical; ++round) {
      bool moved = false;
      for (size_t i = 0; i < n; ++i) {
        const int64_t orig = a[i];
        for (uint32_t w = 0; w < num_physical; ++w) {
          if (w == orig) continue;
          a[i] = w;
          double c = partial_cost(profile, a, alpha, beta);
          if (better(c, cur)) {
            cur = c;
            moved = true;
            break;
          }
          a[i] = orig;
        }
      }
      if (!moved) break;
    }
    return cur;
  };
  double c1 = refine(assign);
  std::vector<int64_t> packed(n, 0);
  double c2 = refine(packed);
  if (better(c2, c1)) assign = packed;
  return Mapping(assign.begin(), assign.end());
}

std::string write_profile(const WorkloadProfile& profile) {
  profile.validate();
  std::ostringstream os;
  os << std::setprecision(17);
  os << profile.size() << "\n";
  for (size_t i = 0; i < profile.size(); ++i) os << (i ? " " : "") << profile.load[i];
  os << "\n";
  for (const auto& row : profile.traffic) {
    for (size_t j = 0; j < row.size(); ++j) os << (j ? " " : "") << row[j];
    os << "\n";
  }
  return os.str();
}

WorkloadProfile read_profile(std::string_view text) {
  std::istringstream in{std::string(text)};
  long long n = -1;
  if (!(in >> n) || n < 0) throw EngineError(ErrorCode::kDecode, "profile: missing partition count");
  WorkloadProfile p;
  p.load.resize(static_cast<size_t>(n));
  p.traffic.assign(static_cast<size_t>(n), std::vector<double>(static_cast<size_t>(n), 0.0));
  for (auto& l : p.load) {
    if (!(in >> l)) throw EngineError(ErrorCode::kDecode, "profile: truncated load vector");
  }
  for (auto& row : p.traffic) {
    for (auto& v : row) {
      if (!(in >> v)) throw EngineError(ErrorCode::kDecode, "profile: truncated traffic matrix");
    }
  }
  std::string extra;
  if (in >> extra) throw EngineError(ErrorCode::kDecode, "profile: trailing data");
  p.validate();
  return p;
}

std::string write_mapping(const Mapping& mapping) {
  std::string out;
  for (size_t i = 0; i < mapping.size(); ++i) out += std::to_string(i) + " " + std::to_string(mapping[i]) + "\n";
  return out;
}

Mapping read_mapping(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::map<long long, long long> pairs;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    long long l = 0, p = 0;
    if (!(ls >> l)) continue;
    if (!(ls >> p) || l < 0 || p < 0) throw EngineError(ErrorCode::kDecode, "mapping: bad line '" + line + "'");
    if (!pairs.emplace(l, p).second) throw EngineError(ErrorCode::kDecode, "mapping: logical " + std::to_string(l) + " repeated");
  }
  Mapping m;
  for (long long i = 0; pairs.count(i); ++i) m.push_back(static_cast<uint32_t>(pairs[i]));
  if (m.size() != pairs.size()) throw EngineError(ErrorCode::kDecode, "mapping: logical ids must be 0..n-1");
  return m;
}

}  // namespace tpart
