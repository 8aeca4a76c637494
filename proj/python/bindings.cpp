#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tpart/bench.hpp"

namespace py = pybind11;
using namespace tpart;

namespace {

using ItemTuple = std::tuple<int64_t, int64_t, int64_t>;
using RequestTuple = std::tuple<int64_t, int64_t, int64_t, std::vector<ItemTuple>>;

tpcc::NewOrderRequest to_request(const RequestTuple& t) {
  tpcc::NewOrderRequest r;
  r.w_id = std::get<0>(t);
  r.d_id = std::get<1>(t);
  r.c_id = std::get<2>(t);
  for (const auto& [i, s, q] : std::get<3>(t)) r.items.push_back({i, s, q});
  return r;
}

RequestTuple from_request(const tpcc::NewOrderRequest& r) {
  std::vector<ItemTuple> items;
  for (const auto& it : r.items) items.emplace_back(it.item_id, it.supplier_w_id, it.qty);
  return {r.w_id, r.d_id, r.c_id, items};
}

tpcc::Scale make_scale(uint32_t w, uint32_t d, uint32_t i, uint32_t c) {
  tpcc::Scale s{w, d, i, c};
  s.validate();
  return s;
}

py::dict metrics_dict(const MetricsReport& m) {
  py::dict d;
  d["submitted"] = m.submitted;
  d["committed"] = m.committed;
  d["aborted"] = m.aborted;
  d["aborts"] = m.aborts.total();
  d["makespan_us"] = m.makespan_us;
  d["throughput_tps"] = m.throughput_tps;
  d["latency_p50_us"] = m.latency_p50_us;
  d["latency_p95_us"] = m.latency_p95_us;
  d["latency_p99_us"] = m.latency_p99_us;
  d["messages"] = m.messages;
  d["messages_per_txn"] = m.messages_per_txn;
  d["worker_busy_fraction"] = m.worker_busy_fraction;
  return d;
}

class Session {
 public:
  Session(const std::string& variant, uint32_t warehouses, uint32_t districts, uint32_t items, uint32_t customers,
          uint32_t physical, double net_latency_us, uint64_t seed, uint32_t retry_limit) {
    tpcc::DeploymentOptions o;
    o.variant = tpcc::parse_variant(variant);
    o.scale = make_scale(warehouses, districts, items, customers);
    o.num_physical = physical ? physical : (o.variant == tpcc::Variant::kV1 ? 1 : warehouses);
    o.net_latency_us = net_latency_us;
    o.seed = seed;
    o.retry_limit = retry_limit;
    dep_ = std::make_unique<tpcc::Deployment>(o);
    dep_->load();
  }

  py::dict new_order(const RequestTuple& req) {
    Outcome o = dep_->run(to_request(req));
    py::dict d;
    d["committed"] = o.committed;
    d["total_pay"] = o.committed ? py::object(py::str(o.value.as_decimal().to_string())) : py::object(py::none());
    d["error"] = o.error;
    d["attempts"] = o.attempts;
    d["latency_us"] = o.latency_us();
    d["body_latency_us"] = o.body_latency_us();
    return d;
  }

  void submit(const RequestTuple& req) { dep_->submit(to_request(req)); }
  py::dict run_until_quiescent() { return metrics_dict(dep_->cluster().run_until_quiescent()); }
  py::dict metrics() const { return metrics_dict(dep_->cluster().metrics()); }
  // Audits drain outstanding work first.
  std::vector<std::string> check_consistency() {
    dep_->cluster().run_until_quiescent();
    return dep_->check_consistency().violations;
  }
  bool verify() {
    dep_->cluster().run_until_quiescent();
    return dep_->verify().ok;
  }
  std::string data_digest() {
    dep_->cluster().run_until_quiescent();
    return dep_->data_digest().hex();
  }
  double now_us() const { return dep_->cluster().now(); }
  std::vector<uint32_t> mapping() const { return dep_->cluster_config().mapping; }

 private:
  std::unique_ptr<tpcc::Deployment> dep_;
};

}  // namespace

PYBIND11_MODULE(_tpart, m) {
  m.doc() = "Transactional-partitioning OLTP simulator";
  py::register_exception<EngineError>(m, "EngineError", PyExc_RuntimeError);

  m.def(
      "run_benchmark",
      [](const std::string& variant, uint32_t warehouses, uint32_t districts, uint32_t items, uint32_t customers,
         uint32_t clients, uint64_t txns, double remote_prob, uint64_t seed, double net_latency_us, uint32_t physical,
         const std::string& mapping, uint32_t retry_limit, double alpha, double beta, const std::string& format,
         std::optional<std::pair<int64_t, int64_t>> hot_district) {
        bench::BenchConfig c;
        c.variant = tpcc::parse_variant(variant);
        c.scale = {warehouses, districts, items, customers};
        c.clients = clients;
        c.txns = txns;
        c.remote_prob = remote_prob;
        c.seed = seed;
        c.net_latency_us = net_latency_us;
        c.physical = physical;
        c.mapping = mapping;
        c.retry_limit = retry_limit;
        c.alpha = alpha;
        c.beta = beta;
        c.format = bench::parse_format(format);
        c.hot_district = hot_district;
        bench::BenchResult r;
        {
          py::gil_scoped_release release;
          r = bench::run_benchmark(c);
        }
        return bench::emit_report(r, c.format);
      },
      py::arg("variant") = "v2", py::arg("warehouses") = 4, py::arg("districts") = 2, py::arg("items") = 100,
      py::arg("customers") = 10, py::arg("clients") = 1, py::arg("txns") = 200, py::arg("remote_prob") = 0.1,
      py::arg("seed") = 1, py::arg("net_latency_us") = 100.0, py::arg("physical") = 0, py::arg("mapping") = "auto",
      py::arg("retry_limit") = 5, py::arg("alpha") = kDefaultAlpha, py::arg("beta") = kDefaultBeta,
      py::arg("format") = "json", py::arg("hot_district") = py::none(),
      "Runs the benchmark and returns the report text.");

  m.def(
      "gen_workload",
      [](uint32_t warehouses, uint32_t districts, uint32_t items, uint32_t customers, uint64_t txns,
         double remote_prob, uint64_t seed) {
        tpcc::WorkloadOptions o;
        o.txns = txns;
        o.remote_prob = remote_prob;
        o.seed = seed;
        auto w = tpcc::gen_workload(make_scale(warehouses, districts, items, customers), o);
        std::vector<RequestTuple> out;
        for (const auto& r : w.requests) out.push_back(from_request(r));
        return out;
      },
      py::arg("warehouses") = 4, py::arg("districts") = 2, py::arg("items") = 100, py::arg("customers") = 10,
      py::arg("txns") = 100, py::arg("remote_prob") = 0.1, py::arg("seed") = 1,
      "Seeded new_order stream as (w, d, c, [(item, supplier, qty), ...]) tuples.");

  m.def(
      "estimate_cost",
      [](std::vector<double> load, std::vector<std::vector<double>> traffic, Mapping mapping, double alpha,
         double beta) { return estimate_cost(WorkloadProfile{std::move(load), std::move(traffic)}, mapping, alpha, beta); },
      py::arg("load"), py::arg("traffic"), py::arg("mapping"), py::arg("alpha") = kDefaultAlpha,
      py::arg("beta") = kDefaultBeta);

  m.def(
      "advise_mapping",
      [](std::vector<double> load, std::vector<std::vector<double>> traffic, uint32_t physical, double alpha,
         double beta, const std::string& strategy) {
        return advise_mapping(WorkloadProfile{std::move(load), std::move(traffic)}, physical, alpha, beta,
                              parse_strategy(strategy));
      },
      py::arg("load"), py::arg("traffic"), py::arg("physical"), py::arg("alpha") = kDefaultAlpha,
      py::arg("beta") = kDefaultBeta, py::arg("strategy") = "exhaustive");

  py::class_<Session>(m, "Deployment")
      .def(py::init<const std::string&, uint32_t, uint32_t, uint32_t, uint32_t, uint32_t, double, uint64_t, uint32_t>(),
           py::arg("variant") = "v2", py::arg("warehouses") = 4, py::arg("districts") = 2, py::arg("items") = 100,
           py::arg("customers") = 10, py::arg("physical") = 0, py::arg("net_latency_us") = 100.0,
           py::arg("seed") = 1, py::arg("retry_limit") = 5)
      .def("new_order", &Session::new_order, py::arg("request"))
      .def("submit", &Session::submit, py::arg("request"))
      .def("run_until_quiescent", &Session::run_until_quiescent)
      .def("metrics", &Session::metrics)
      .def("check_consistency", &Session::check_consistency)
      .def("verify", &Session::verify)
      .def("data_digest", &Session::data_digest)
      .def("now_us", &Session::now_us)
      .def_property_readonly("mapping", &Session::mapping);
}
