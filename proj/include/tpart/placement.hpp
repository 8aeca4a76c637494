#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tpart {

/// Per-logical-partition transaction rate plus symmetric inter-partition
/// message rates.
struct WorkloadProfile {
  std::vector<double> load;
  std::vector<std::vector<double>> traffic;

  size_t size() const { return load.size(); }
  /// Throws kDimensionMismatch or kInvalidConfig.
  void validate() const;
};

/// logical id -> physical worker id
using Mapping = std::vector<uint32_t>;

enum class SearchStrategy { kExhaustive, kGreedy };

SearchStrategy parse_strategy(std::string_view name);
const char* strategy_name(SearchStrategy s);

inline constexpr double kDefaultAlpha = 1.0;
inline constexpr double kDefaultBeta = 0.001;
inline constexpr size_t kExhaustiveCap = 10;

/// alpha * (max summed load over workers) + beta * (traffic between
/// partitions placed on different workers).
double estimate_cost(const WorkloadProfile& profile, const Mapping& mapping, double alpha = kDefaultAlpha,
                     double beta = kDefaultBeta);

/// Exhaustive returns the lexicographically first cost-minimal mapping and
/// refuses more than kExhaustiveCap logical partitions. Greedy places
/// partitions by descending load (ties by id) on the worker with the lowest
/// resulting partial cost (ties by worker id).
Mapping advise_mapping(const WorkloadProfile& profile, uint32_t num_physical, double alpha = kDefaultAlpha,
                       double beta = kDefaultBeta, SearchStrategy strategy = SearchStrategy::kExhaustive);

/// Text form: first line n; second line the n loads; then n traffic rows.
std::string write_profile(const WorkloadProfile& profile);
WorkloadProfile read_profile(std::string_view text);

/// One "logical physical" pair per line.
std::string write_mapping(const Mapping& mapping);
Mapping read_mapping(std::string_view text);

}  // namespace tpart
