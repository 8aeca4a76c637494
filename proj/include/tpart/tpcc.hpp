#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tpart/netsim.hpp"
#include "tpart/procmodel.hpp"
#include "tpart/storage.hpp"
#include "tpart/value.hpp"
#include "tpart/verify.hpp"

namespace tpart::tpcc {

struct Scale {
  uint32_t warehouses = 4;
  uint32_t districts = 2;
  uint32_t items = 100;
  uint32_t customers = 10;

  void validate() const;
};

enum class Variant { kV1, kV2, kV3 };

Variant parse_variant(std::string_view name);
const char* variant_name(Variant v);
/// Root procedure name for a variant, e.g. "new_order_v2".
std::string procedure_for(Variant v);

struct OrderItem {
  int64_t item_id = 0;
  int64_t supplier_w_id = 0;
  int64_t qty = 0;

  friend bool operator==(const OrderItem&, const OrderItem&) = default;
};

inline constexpr size_t kMaxItems = 15;

struct NewOrderRequest {
  int64_t w_id = 0;
  int64_t d_id = 0;
  int64_t c_id = 0;
  std::vector<OrderItem> items;

  /// [w, d, c, [[item, supplier, qty], ...]]
  Value to_value() const;
  static NewOrderRequest from_value(const Value& v);
  /// Number of distinct suppliers other than w_id.
  size_t remote_suppliers() const;

  friend bool operator==(const NewOrderRequest&, const NewOrderRequest&) = default;
};

// Deterministic seeded population.
Decimal warehouse_tax(uint64_t seed, int64_t w);
Decimal district_tax(uint64_t seed, int64_t w, int64_t d);
Decimal customer_discount(uint64_t seed, int64_t w, int64_t d, int64_t c);
Decimal item_price(uint64_t seed, int64_t i);
int64_t initial_stock_quantity(uint64_t seed, int64_t w, int64_t i);
/// "S-<w>-<i>-<d>"
std::string dist_info(int64_t w, int64_t i, int64_t d);
/// Column holding district d's dist_info in stock and stock_dist_info.
std::string dist_column(int64_t d);

/// TPC-C stock rule.
int64_t next_stock_quantity(int64_t qty, int64_t ordered);

/// Tables for `scale`; stock rows carry one dist column per district.
std::shared_ptr<Catalog> make_catalog(const Scale& scale);

struct ProcedureOptions {
  /// Fault injection for audit tests: gen_order skips the oorder insert.
  bool skip_oorder_insert = false;
};

/// Registers mapper "map" (warehouse w -> partition w, or everything -> 0
/// for v1), the loaders and every variant's procedures.
void register_procedures(Registry& registry, Variant variant, const Scale& scale, ProcedureOptions options = {});

/// Number of logical partitions a variant deploys over: 1 for v1, otherwise
/// one per warehouse plus partition 0, which holds only replicated tables.
uint32_t logical_partitions(Variant v, const Scale& scale);
/// Default placement: warehouse partition w on worker (w-1) mod physical.
std::vector<uint32_t> default_mapping(Variant v, const Scale& scale, uint32_t num_physical);

// Helpers shared by the procedure bodies. All run on the caller's partition.
struct OrderHeader {
  Record warehouse;
  Record district;
  Record customer;
  int64_t o_id = 0;
};
OrderHeader gen_order(TxnContext& ctx, const NewOrderRequest& req, const Scale& scale,
                      const ProcedureOptions& options = {});
Decimal get_amount(TxnContext& ctx, const OrderItem& item);
Record update_stock(TxnContext& ctx, const OrderItem& item, int64_t home_w_id);
std::string get_dist_info_stock(TxnContext& ctx, const OrderItem& item, int64_t d_id);
/// Replicated stock_dist_info lookup used by v3.
std::string get_dist_info_replicated(TxnContext& ctx, const OrderItem& item, int64_t d_id);
/// (1 + w_tax + d_tax) * total * (1 - discount)
Decimal total_pay(Decimal w_tax, Decimal d_tax, Decimal discount, Decimal total);

/// Runs the loaders on a fresh cluster and waits for them. Throws if any
/// partition already holds rows or a loader aborts.
void load_initial(Cluster& cluster, Variant variant, const Scale& scale, uint64_t seed);

struct WorkloadOptions {
  uint64_t seed = 1;
  uint64_t txns = 100;
  double remote_prob = 0.1;
  /// Pin every request to one (w, d).
  std::optional<std::pair<int64_t, int64_t>> hot_district;
};

struct Workload {
  std::vector<NewOrderRequest> requests;
  std::vector<std::string> warnings;
};

/// Uniform w, d, c; 5..15 distinct items (capped at the item count); qty
/// 1..10; each item remote with probability remote_prob, supplier uniform
/// over the other warehouses.
Workload gen_workload(const Scale& scale, const WorkloadOptions& options);

/// Line-delimited hex of each request's canonical encoding.
std::string dump_stream(const std::vector<NewOrderRequest>& requests);
std::vector<NewOrderRequest> read_stream(std::string_view text);

struct ConsistencyReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

struct CommittedOrder {
  NewOrderRequest request;
  uint64_t global_index = 0;
};

/// Audits a quiescent cluster against the committed requests: per (w, d)
/// order counters, oorder/new_order/order_line contents, stock totals, and
/// that no steady-state transaction in the history wrote stock_dist_info.
ConsistencyReport check_consistency(const Cluster& cluster, Variant variant, const Scale& scale, uint64_t seed,
                                    const std::vector<CommittedOrder>& committed);

struct DeploymentOptions {
  Variant variant = Variant::kV2;
  Scale scale;
  uint64_t seed = 1;
  uint32_t num_physical = 1;
  /// Empty selects default_mapping.
  std::vector<uint32_t> mapping;
  double net_latency_us = 0.0;
  double latency_jitter = 0.0;
  uint32_t retry_limit = 5;
  double max_sim_time_us = 3.6e9;
  CostModel cost;
  bool trace = false;
  ProcedureOptions procedures;
};

/// A loaded TPC-C cluster for one variant plus bookkeeping of committed
/// orders for the audits.
class Deployment {
 public:
  explicit Deployment(DeploymentOptions options);

  /// Loads data, snapshots it as the initial state and opens a fresh metrics
  /// window.
  void load();

  Ticket submit(const NewOrderRequest& req, std::function<void(const Outcome&)> on_done = nullptr);
  Outcome run(const NewOrderRequest& req);

  ConsistencyReport check_consistency() const;
  SerializabilityResult verify() const;
  /// Digest over every non-replicated table, summed across partitions.
  Digest data_digest() const;

  Cluster& cluster() { return *cluster_; }
  const Cluster& cluster() const { return *cluster_; }
  const DeploymentOptions& options() const { return options_; }
  const ClusterConfig& cluster_config() const { return cluster_->config(); }
  const std::vector<PartitionStore>& initial_state() const { return initial_; }
  const std::vector<CommittedOrder>& committed_orders() const { return committed_; }

 private:
  DeploymentOptions options_;
  std::shared_ptr<Catalog> catalog_;
  std::shared_ptr<Registry> registry_;
  std::unique_ptr<Cluster> cluster_;
  std::vector<PartitionStore> initial_;
  std::vector<CommittedOrder> committed_;
  bool loaded_ = false;
};

}  // namespace tpart::tpcc
