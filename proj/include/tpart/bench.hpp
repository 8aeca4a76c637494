#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tpart/netsim.hpp"
#include "tpart/placement.hpp"
#include "tpart/tpcc.hpp"
#include "tpart/verify.hpp"

namespace tpart::bench {

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitConsistency = 3,
  kExitSerializability = 4,
  kExitRuntime = 5,
};

enum class ReportFormat { kJson, kCsv };

ReportFormat parse_format(std::string_view name);
const char* format_name(ReportFormat f);

struct BenchConfig {
  tpcc::Variant variant = tpcc::Variant::kV2;
  tpcc::Scale scale;
  uint32_t clients = 1;
  uint64_t txns = 200;
  double remote_prob = 0.1;
  uint64_t seed = 1;
  double net_latency_us = 100.0;
  double latency_jitter = 0.0;
  /// 0 selects one worker per warehouse (one for v1).
  uint32_t physical = 0;
  /// "auto" or the path of a mapping file.
  std::string mapping = "auto";
  /// Takes precedence over `mapping` when set.
  std::optional<Mapping> explicit_mapping;
  uint32_t retry_limit = 5;
  double alpha = kDefaultAlpha;
  double beta = kDefaultBeta;
  ReportFormat format = ReportFormat::kJson;
  bool trace = false;
  double max_sim_time_us = 3.6e9;
  CostModel cost;
  std::optional<std::pair<int64_t, int64_t>> hot_district;
  /// Replays this stream instead of generating one; txns is ignored.
  std::optional<std::vector<tpcc::NewOrderRequest>> stream;

  /// Throws EngineError(kInvalidConfig).
  void validate() const;
};

struct BenchResult {
  BenchConfig config;
  ClusterConfig cluster;
  MetricsReport metrics;
  tpcc::ConsistencyReport consistency;
  SerializabilityResult serializability;
  std::vector<tpcc::NewOrderRequest> requests;
  /// Final outcome per request, in stream order.
  std::vector<Outcome> outcomes;
  std::vector<std::string> warnings;
  std::string data_digest;
  std::string history;
  std::string trace;
  int exit_code = kExitOk;
};

/// Synthetic profile used by mapping=auto: unit load per warehouse partition
/// and remote_prob-weighted traffic between every pair of warehouses.
WorkloadProfile synthetic_profile(const BenchConfig& config);

/// Resolves the logical-to-physical mapping for `config`.
Mapping resolve_mapping(const BenchConfig& config);

/// Loads, drives `clients` outstanding roots to completion, audits. Throws
/// EngineError for invalid configs and livelock.
BenchResult run_benchmark(const BenchConfig& config);

/// Report text in the requested format; field order is fixed.
std::string emit_report(const BenchResult& result, ReportFormat format);

/// Runs and writes report.{json|csv}, mapping.txt, and with trace
/// history.log and trace.log into `out_dir`. Returns the exit code; config
/// and runtime failures are reported on stderr.
int run_to_directory(const BenchConfig& config, const std::string& out_dir);

}  // namespace tpart::bench
