// tpart command-line driver.
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tpart/bench.hpp"

using namespace tpart;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EngineError(ErrorCode::kIo, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EngineError(ErrorCode::kIo, "cannot write " + path);
  out << text;
}

bool has_key(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;
    auto e = line.find_first_of(" \t=", b);
    if (line.substr(b, e - b) == key) return true;
  }
  return false;
}

std::pair<int64_t, int64_t> parse_hot(const std::string& s) {
  auto colon = s.find(':');
  if (colon == std::string::npos) throw EngineError(ErrorCode::kInvalidConfig, "--hot expects w:d");
  try {
    return {std::stoll(s.substr(0, colon)), std::stoll(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw EngineError(ErrorCode::kInvalidConfig, "--hot expects w:d");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tpart: transactional-partitioning OLTP simulator"};
  app.require_subcommand(1);

  bench::BenchConfig cfg;
  std::string variant = "v2", format = "json", out_dir = "tpart-out", config_file, stream_file, hot;

  auto* b = app.add_subcommand("bench", "run the new_order benchmark and audit it");
  b->add_option("--variant", variant, "v1|v2|v3")->capture_default_str();
  b->add_option("--warehouses", cfg.scale.warehouses)->capture_default_str();
  b->add_option("--districts", cfg.scale.districts)->capture_default_str();
  b->add_option("--items", cfg.scale.items)->capture_default_str();
  b->add_option("--customers", cfg.scale.customers)->capture_default_str();
  b->add_option("--clients", cfg.clients, "outstanding roots")->capture_default_str();
  b->add_option("--txns", cfg.txns)->capture_default_str();
  b->add_option("--remote-prob", cfg.remote_prob)->capture_default_str();
  auto* seed = b->add_option("--seed", cfg.seed)->capture_default_str();
  auto* lat = b->add_option("--net-latency-us", cfg.net_latency_us)->capture_default_str();
  auto* jit = b->add_option("--jitter", cfg.latency_jitter, "relative latency jitter")->capture_default_str();
  auto* phys = b->add_option("--physical", cfg.physical, "workers; 0 means one per warehouse")->capture_default_str();
  auto* map = b->add_option("--mapping", cfg.mapping, "auto or mapping file")->capture_default_str();
  auto* retry = b->add_option("--retry-limit", cfg.retry_limit)->capture_default_str();
  b->add_option("--alpha", cfg.alpha)->capture_default_str();
  b->add_option("--beta", cfg.beta)->capture_default_str();
  b->add_option("--out", out_dir, "output directory")->capture_default_str();
  b->add_option("--format", format, "json|csv")->capture_default_str();
  auto* trace = b->add_flag("--trace", cfg.trace, "write history.log and trace.log");
  auto* maxt = b->add_option("--max-sim-time-us", cfg.max_sim_time_us)->capture_default_str();
  b->add_option("--config", config_file, "cluster key=value file");
  b->add_option("--stream", stream_file, "replay a request stream file");
  b->add_option("--hot", hot, "pin every request to district w:d");

  std::string profile_file, advise_out = "-", strategy = "exhaustive", mapping_file;
  uint32_t advise_physical = 1;
  double alpha = kDefaultAlpha, beta = kDefaultBeta;
  auto* a = app.add_subcommand("advise", "compute a placement for a workload profile");
  a->add_option("--profile", profile_file)->required();
  a->add_option("--physical", advise_physical)->capture_default_str();
  a->add_option("--strategy", strategy, "exhaustive|greedy")->capture_default_str();
  a->add_option("--alpha", alpha)->capture_default_str();
  a->add_option("--beta", beta)->capture_default_str();
  a->add_option("--out", advise_out)->capture_default_str();

  auto* c = app.add_subcommand("cost", "evaluate a mapping against a profile");
  c->add_option("--profile", profile_file)->required();
  c->add_option("--mapping", mapping_file)->required();
  c->add_option("--alpha", alpha)->capture_default_str();
  c->add_option("--beta", beta)->capture_default_str();

  tpcc::Scale sscale;
  tpcc::WorkloadOptions wopt;
  std::string stream_out = "-", stream_hot;
  auto* s = app.add_subcommand("stream", "write a generated request stream");
  s->add_option("--warehouses", sscale.warehouses)->capture_default_str();
  s->add_option("--districts", sscale.districts)->capture_default_str();
  s->add_option("--items", sscale.items)->capture_default_str();
  s->add_option("--customers", sscale.customers)->capture_default_str();
  s->add_option("--txns", wopt.txns)->capture_default_str();
  s->add_option("--remote-prob", wopt.remote_prob)->capture_default_str();
  s->add_option("--seed", wopt.seed)->capture_default_str();
  s->add_option("--hot", stream_hot);
  s->add_option("--out", stream_out)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*b) {
      cfg.variant = tpcc::parse_variant(variant);
      cfg.format = bench::parse_format(format);
      if (!hot.empty()) cfg.hot_district = parse_hot(hot);
      if (!stream_file.empty()) cfg.stream = tpcc::read_stream(slurp(stream_file));
      if (!config_file.empty()) {
        // File values apply unless the matching flag was given explicitly.
        const std::string text = slurp(config_file);
        ClusterConfig base;
        base.num_logical = tpcc::logical_partitions(cfg.variant, cfg.scale);
        base.num_physical = cfg.physical ? cfg.physical : (cfg.variant == tpcc::Variant::kV1 ? 1 : cfg.scale.warehouses);
        ClusterConfig kv = ClusterConfig::parse_kv(text, base);
        if (kv.num_logical != base.num_logical)
          throw EngineError(ErrorCode::kInvalidConfig, "config num_logical does not match the variant and scale");
        if (!phys->count() && has_key(text, "num_physical")) cfg.physical = kv.num_physical;
        if (!lat->count() && has_key(text, "net_latency_us")) cfg.net_latency_us = kv.net_latency_us;
        if (!jit->count() && has_key(text, "latency_jitter")) cfg.latency_jitter = kv.latency_jitter;
        if (!retry->count() && has_key(text, "retry_limit")) cfg.retry_limit = kv.retry_limit;
        if (!maxt->count() && has_key(text, "max_sim_time_us")) cfg.max_sim_time_us = kv.max_sim_time_us;
        if (!trace->count() && has_key(text, "trace")) cfg.trace = kv.trace;
        if (!map->count() && has_key(text, "mapping")) cfg.explicit_mapping = kv.mapping;
        if (!seed->count() && has_key(text, "seed")) cfg.seed = kv.seed;
      }
      return bench::run_to_directory(cfg, out_dir);
    }
    if (*a) {
      WorkloadProfile p = read_profile(slurp(profile_file));
      Mapping m = advise_mapping(p, advise_physical, alpha, beta, parse_strategy(strategy));
      spill(advise_out, write_mapping(m));
      std::cerr << "cost " << estimate_cost(p, m, alpha, beta) << "\n";
      return 0;
    }
    if (*c) {
      WorkloadProfile p = read_profile(slurp(profile_file));
      Mapping m = read_mapping(slurp(mapping_file));
      std::cout << estimate_cost(p, m, alpha, beta) << "\n";
      return 0;
    }
    if (*s) {
      if (!stream_hot.empty()) wopt.hot_district = parse_hot(stream_hot);
      tpcc::Workload w = tpcc::gen_workload(sscale, wopt);
      for (const auto& warn : w.warnings) std::cerr << "tpart: warning: " << warn << "\n";
      spill(stream_out, tpcc::dump_stream(w.requests));
      return 0;
    }
  } catch (const EngineError& e) {
    std::cerr << "tpart: " << error_code_name(e.code()) << ": " << e.what() << "\n";
    return e.code() == ErrorCode::kLivelock ? bench::kExitRuntime : bench::kExitConfig;
  }
  return 0;
}
