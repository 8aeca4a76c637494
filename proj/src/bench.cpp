#include "tpart/bench.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "json.hpp"

namespace tpart::bench {

using ojson = nlohmann::ordered_json;

ReportFormat parse_format(std::string_view name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  throw EngineError(ErrorCode::kInvalidConfig, "unknown report format " + std::string(name));
}

const char* format_name(ReportFormat f) { return f == ReportFormat::kJson ? "json" : "csv"; }

void BenchConfig::validate() const {
  auto bad = [](const std::string& what) { throw EngineError(ErrorCode::kInvalidConfig, what); };
  scale.validate();
  if (clients < 1) bad("clients must be >= 1");
  if (!stream && txns < 1) bad("txns must be >= 1");
  if (stream && stream->empty()) bad("request stream is empty");
  if (!(remote_prob >= 0.0 && remote_prob <= 1.0)) bad("remote_prob must be in [0, 1]");
  if (!(net_latency_us >= 0.0)) bad("net_latency_us must be >= 0");
  if (!(latency_jitter >= 0.0 && latency_jitter < 1.0)) bad("latency_jitter must be in [0, 1)");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) bad("alpha and beta must be >= 0");
  if (mapping.empty()) bad("mapping must be 'auto' or a file path");
}

namespace {

uint32_t resolved_physical(const BenchConfig& c) {
  if (c.physical) return c.physical;
  return c.variant == tpcc::Variant::kV1 ? 1 : c.scale.warehouses;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EngineError(ErrorCode::kIo, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EngineError(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw EngineError(ErrorCode::kIo, "write failed for " + path.string());
}

ojson build_report(const BenchResult& r) {
  const BenchConfig& c = r.config;
  ojson cost = ojson::object();
  cost["message_ns"] = c.cost.message_ns;
  cost["txn_begin_ns"] = c.cost.txn_begin_ns;
  cost["storage_op_ns"] = c.cost.storage_op_ns;
  cost["send_ns"] = c.cost.send_ns;
  cost["validate_key_ns"] = c.cost.validate_key_ns;
  cost["apply_write_ns"] = c.cost.apply_write_ns;

  ojson cfg = ojson::object();
  cfg["variant"] = tpcc::variant_name(c.variant);
  cfg["warehouses"] = c.scale.warehouses;
  cfg["districts"] = c.scale.districts;
  cfg["items"] = c.scale.items;
  cfg["customers"] = c.scale.customers;
  cfg["clients"] = c.clients;
  cfg["txns"] = r.requests.size();
  cfg["remote_prob"] = c.remote_prob;
  cfg["seed"] = c.seed;
  cfg["net_latency_us"] = c.net_latency_us;
  cfg["latency_jitter"] = c.latency_jitter;
  cfg["logical"] = r.cluster.num_logical;
  cfg["physical"] = r.cluster.num_physical;
  cfg["mapping"] = c.explicit_mapping ? std::string("explicit") : c.mapping;
  cfg["resolved_mapping"] = r.cluster.mapping;
  cfg["retry_limit"] = c.retry_limit;
  cfg["alpha"] = c.alpha;
  cfg["beta"] = c.beta;
  cfg["format"] = format_name(c.format);
  cfg["trace"] = c.trace;
  cfg["max_sim_time_us"] = c.max_sim_time_us;
  cfg["hot_district"] =
      c.hot_district ? std::to_string(c.hot_district->first) + ":" + std::to_string(c.hot_district->second) : "";
  cfg["stream"] = c.stream.has_value();
  cfg["cost"] = cost;

  const MetricsReport& m = r.metrics;
  const uint64_t attempts = m.committed + m.aborts.total();
  ojson met = ojson::object();
  met["submitted"] = m.submitted;
  met["committed"] = m.committed;
  met["aborted"] = m.aborted;
  met["aborts_user_error"] = m.aborts.user_error;
  met["aborts_validation_conflict"] = m.aborts.validation_conflict;
  met["aborts_pending_overlap"] = m.aborts.pending_overlap;
  met["abort_rate"] = attempts ? static_cast<double>(m.aborts.total()) / static_cast<double>(attempts) : 0.0;
  met["makespan_us"] = m.makespan_us;
  met["throughput_tps"] = m.throughput_tps;
  met["latency_p50_us"] = m.latency_p50_us;
  met["latency_p95_us"] = m.latency_p95_us;
  met["latency_p99_us"] = m.latency_p99_us;
  met["body_latency_p50_us"] = m.body_latency_p50_us;
  met["messages"] = m.messages;
  met["local_messages"] = m.local_messages;
  met["messages_per_txn"] = m.messages_per_txn;
  met["remote_subtxns_per_txn"] = m.remote_subtxns_per_txn;
  met["child_result_bytes"] = m.child_result_bytes;
  ojson kinds = ojson::object();
  for (const char* k : {"invoke", "result", "validate", "vote", "decide", "broadcast"}) {
    auto it = m.messages_by_kind.find(k);
    kinds[k] = it == m.messages_by_kind.end() ? 0 : it->second;
  }
  met["messages_by_kind"] = kinds;
  met["worker_busy_fraction"] = m.worker_busy_fraction;

  ojson audits = ojson::object();
  audits["consistency_ok"] = r.consistency.ok();
  audits["consistency_violations"] = r.consistency.violations.size();
  audits["first_violation"] = r.consistency.ok() ? "" : r.consistency.violations.front();
  audits["serializable"] = r.serializability.ok;
  audits["replayed"] = r.serializability.replayed;
  audits["counterexample"] = r.serializability.counterexample;

  ojson out = ojson::object();
  out["schema_version"] = kSchemaVersion;
  out["config"] = cfg;
  out["metrics"] = met;
  out["audits"] = audits;
  out["data_digest"] = r.data_digest;
  out["warnings"] = r.warnings;
  out["exit_code"] = r.exit_code;
  return out;
}

void flatten(const ojson& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    return;
  }
  if (j.is_array()) {
    std::string joined;
    for (size_t i = 0; i < j.size(); ++i) joined += (i ? ";" : "") + (j[i].is_string() ? j[i].get<std::string>() : j[i].dump());
    out.emplace_back(prefix, joined);
    return;
  }
  out.emplace_back(prefix, j.is_string() ? j.get<std::string>() : j.dump());
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

}  // namespace

WorkloadProfile synthetic_profile(const BenchConfig& config) {
  const uint32_t n = tpcc::logical_partitions(config.variant, config.scale);
  WorkloadProfile p;
  p.load.assign(n, 0.0);
  p.traffic.assign(n, std::vector<double>(n, 0.0));
  if (config.variant == tpcc::Variant::kV1) {
    p.load[0] = 1.0;
    return p;
  }
  const uint32_t W = config.scale.warehouses;
  for (uint32_t w = 1; w <= W; ++w) {
    p.load[w] = 1.0;
    for (uint32_t v = 1; v <= W; ++v) {
      if (v != w) p.traffic[w][v] = config.remote_prob / static_cast<double>(W - 1);
    }
  }
  return p;
}

Mapping resolve_mapping(const BenchConfig& config) {
  const uint32_t physical = resolved_physical(config);
  if (config.explicit_mapping) return *config.explicit_mapping;
  if (config.mapping == "auto") {
    WorkloadProfile p = synthetic_profile(config);
    auto strategy = p.size() <= kExhaustiveCap ? SearchStrategy::kExhaustive : SearchStrategy::kGreedy;
    return advise_mapping(p, physical, config.alpha, config.beta, strategy);
  }
  Mapping m;
  try {
    m = read_mapping(read_file(config.mapping));
  } catch (const EngineError& e) {
    throw EngineError(ErrorCode::kInvalidConfig, "mapping file " + config.mapping + ": " + e.what());
  }
  return m;
}

BenchResult run_benchmark(const BenchConfig& config) {
  config.validate();
  BenchResult res;
  res.config = config;
  if (config.stream) {
    res.requests = *config.stream;
  } else {
    tpcc::WorkloadOptions wo;
    wo.seed = config.seed;
    wo.txns = config.txns;
    wo.remote_prob = config.remote_prob;
    wo.hot_district = config.hot_district;
    tpcc::Workload w = tpcc::gen_workload(config.scale, wo);
    res.requests = std::move(w.requests);
    res.warnings = std::move(w.warnings);
  }

  tpcc::DeploymentOptions d;
  d.variant = config.variant;
  d.scale = config.scale;
  d.seed = config.seed;
  d.num_physical = resolved_physical(config);
  d.mapping = resolve_mapping(config);
  d.net_latency_us = config.net_latency_us;
  d.latency_jitter = config.latency_jitter;
  d.retry_limit = config.retry_limit;
  d.max_sim_time_us = config.max_sim_time_us;
  d.cost = config.cost;
  d.trace = config.trace;
  tpcc::Deployment dep(d);
  dep.load();
  res.cluster = dep.cluster_config();

  const size_t n = res.requests.size();
  res.outcomes.resize(n);
  size_t next = 0;
  std::function<void()> launch = [&] {
    const size_t i = next++;
    dep.submit(res.requests[i], [&, i](const Outcome& o) {
      res.outcomes[i] = o;
      if (next < n) launch();
    });
  };
  for (size_t k = 0; k < std::min<size_t>(config.clients, n); ++k) launch();
  res.metrics = dep.cluster().run_until_quiescent();

  res.consistency = dep.check_consistency();
  res.serializability = dep.verify();
  res.data_digest = dep.data_digest().hex();
  res.history = dep.cluster().history().serialize(dep.cluster().catalog());
  if (config.trace) res.trace = dep.cluster().trace_text();
  if (!res.consistency.ok()) res.exit_code = kExitConsistency;
  else if (!res.serializability.ok) res.exit_code = kExitSerializability;
  return res;
}

std::string emit_report(const BenchResult& result, ReportFormat format) {
  ojson j = build_report(result);
  if (format == ReportFormat::kJson) return j.dump(2) + "\n";
  std::vector<std::pair<std::string, std::string>> cells;
  flatten(j, "", cells);
  std::string header, row;
  for (size_t i = 0; i < cells.size(); ++i) {
    header += (i ? "," : "") + csv_field(cells[i].first);
    row += (i ? "," : "") + csv_field(cells[i].second);
  }
  return header + "\n" + row + "\n";
}

int run_to_directory(const BenchConfig& config, const std::string& out_dir) {
  BenchResult res;
  try {
    res = run_benchmark(config);
  } catch (const EngineError& e) {
    std::cerr << "tpart: " << error_code_name(e.code()) << ": " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::kInvalidConfig:
      case ErrorCode::kDimensionMismatch:
      case ErrorCode::kSizeCap:
      case ErrorCode::kDecode:
      case ErrorCode::kIo: return kExitConfig;
      default: return kExitRuntime;
    }
  }
  try {
    std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    write_file(dir / (std::string("report.") + format_name(config.format)), emit_report(res, config.format));
    write_file(dir / "mapping.txt", write_mapping(res.cluster.mapping));
    if (config.trace) {
      write_file(dir / "history.log", res.history);
      write_file(dir / "trace.log", res.trace);
    }
  } catch (const std::exception& e) {
    std::cerr << "tpart: " << e.what() << "\n";
    return kExitConfig;
  }
  for (const auto& w : res.warnings) std::cerr << "tpart: warning: " << w << "\n";
  if (!res.consistency.ok()) std::cerr << "tpart: consistency violation: " << res.consistency.violations.front() << "\n";
  if (!res.serializability.ok) std::cerr << "tpart: not serializable: " << res.serializability.counterexample << "\n";
  std::cout << "variant=" << tpcc::variant_name(config.variant) << " committed=" << res.metrics.committed
            << " aborted=" << res.metrics.aborted << " throughput_tps=" << res.metrics.throughput_tps
            << " p50_us=" << res.metrics.latency_p50_us << " exit=" << res.exit_code << "\n";
  return res.exit_code;
}

}  // namespace tpart::bench
