#include "tpart/tpcc.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <set>
#include <sstream>

namespace tpart::tpcc {

namespace {

uint64_t splitmix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum Kind : uint64_t { kWTax = 1, kDTax, kDiscount, kPrice, kStock, kCredit };

uint64_t seeded(uint64_t seed, Kind kind, int64_t a, int64_t b = 0, int64_t c = 0) {
  uint64_t h = splitmix(seed ^ (static_cast<uint64_t>(kind) * 0x100000001b3ULL));
  h = splitmix(h ^ static_cast<uint64_t>(a));
  h = splitmix(h ^ static_cast<uint64_t>(b));
  return splitmix(h ^ static_cast<uint64_t>(c));
}

// Uniform in [0, n) without modulo bias.
uint64_t uniform(std::mt19937_64& rng, uint64_t n) {
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

[[noreturn]] void reject(const std::string& why) { throw UserAbort("sanity check failed: " + why); }

void check_range(const char* what, int64_t v, int64_t hi) {
  if (v < 1 || v > hi) reject(std::string(what) + " " + std::to_string(v) + " outside [1, " + std::to_string(hi) + "]");
}

struct SupplierGroups {
  std::vector<int64_t> suppliers;            // first-appearance order
  std::vector<std::vector<size_t>> members;  // item indices per supplier
};

SupplierGroups group_by_supplier(const NewOrderRequest& req) {
  SupplierGroups g;
  for (size_t i = 0; i < req.items.size(); ++i) {
    auto it = std::find(g.suppliers.begin(), g.suppliers.end(), req.items[i].supplier_w_id);
    if (it == g.suppliers.end()) {
      g.suppliers.push_back(req.items[i].supplier_w_id);
      g.members.push_back({i});
    } else {
      g.members[static_cast<size_t>(it - g.suppliers.begin())].push_back(i);
    }
  }
  return g;
}

Value item_to_value(const OrderItem& it) { return Value::list({it.item_id, it.supplier_w_id, it.qty}); }

OrderItem item_from_value(const Value& v) { return OrderItem{v.at(0).as_int(), v.at(1).as_int(), v.at(2).as_int()}; }

// [supplier, d_id, home_w, [items]]
Value subset_args(const NewOrderRequest& req, int64_t supplier, const std::vector<size_t>& members) {
  Value::List items;
  for (size_t i : members) items.push_back(item_to_value(req.items[i]));
  return Value::list({supplier, req.d_id, req.w_id, Value(std::move(items))});
}

void add_order_line(TxnContext& ctx, const NewOrderRequest& req, int64_t o_id, size_t index, Decimal amount,
                    const std::string& info) {
  const OrderItem& it = req.items[index];
  ctx.add("order_line", Key{req.w_id, req.d_id, o_id, static_cast<int64_t>(index + 1)},
          {{"ol_i_id", it.item_id},
           {"ol_supply_w_id", it.supplier_w_id},
           {"ol_quantity", it.qty},
           {"ol_amount", amount},
           {"ol_dist_info", info}});
}

Value pay_value(const OrderHeader& h, Decimal total) {
  return Value(total_pay(h.warehouse.get_decimal("w_tax"), h.district.get_decimal("d_tax"),
                         h.customer.get_decimal("c_discount"), total));
}

// Procedure bodies. Scale and options arrive by value so no coroutine frame
// refers to a closure.

// [w, seed]
Task<Value> load_warehouse_body(TxnContext& ctx, Value args, Scale scale) {
  const int64_t w = args.at(0).as_int();
  const auto seed = static_cast<uint64_t>(args.at(1).as_int());
  ctx.add("warehouse", Key{w}, {{"w_tax", warehouse_tax(seed, w)}, {"w_name", "W" + std::to_string(w)}});
  for (int64_t d = 1; d <= scale.districts; ++d) {
    ctx.add("district", Key{w, d}, {{"d_tax", district_tax(seed, w, d)}, {"d_next_o_id", int64_t{1}}});
    for (int64_t c = 1; c <= scale.customers; ++c) {
      std::string credit = seeded(seed, kCredit, w, d, c) % 10 == 0 ? "BC" : "GC";
      ctx.add("customer", Key{w, d, c}, {{"c_discount", customer_discount(seed, w, d, c)}, {"c_credit", credit}});
    }
  }
  for (int64_t i = 1; i <= scale.items; ++i) {
    FieldValues row{{"s_quantity", initial_stock_quantity(seed, w, i)},
                    {"s_ytd", int64_t{0}},
                    {"s_order_cnt", int64_t{0}},
                    {"s_remote_cnt", int64_t{0}}};
    for (int64_t d = 1; d <= scale.districts; ++d) row.emplace_back(dist_column(d), dist_info(w, i, d));
    ctx.add("stock", Key{w, i}, row);
  }
  co_return Value();
}

// [seed]
Task<Value> load_items_body(TxnContext& ctx, Value args, Scale scale) {
  const auto seed = static_cast<uint64_t>(args.at(0).as_int());
  for (int64_t i = 1; i <= scale.items; ++i) {
    ctx.add("item", Key{i}, {{"i_price", item_price(seed, i)}, {"i_name", "item-" + std::to_string(i)}});
  }
  co_return Value();
}

Task<Value> load_stock_dist_info_body(TxnContext& ctx, Value, Scale scale) {
  for (int64_t w = 1; w <= scale.warehouses; ++w) {
    for (int64_t i = 1; i <= scale.items; ++i) {
      FieldValues row;
      for (int64_t d = 1; d <= scale.districts; ++d) row.emplace_back(dist_column(d), dist_info(w, i, d));
      ctx.add("stock_dist_info", Key{w, i}, row);
    }
  }
  co_return Value();
}

Task<Value> new_order_v1_body(TxnContext& ctx, Value args, Scale scale, ProcedureOptions options) {
  const NewOrderRequest req = NewOrderRequest::from_value(args);
  OrderHeader h = gen_order(ctx, req, scale, options);
  Decimal total;
  for (size_t i = 0; i < req.items.size(); ++i) {
    Decimal amount = get_amount(ctx, req.items[i]);
    std::string info = get_dist_info_stock(ctx, req.items[i], req.d_id);
    update_stock(ctx, req.items[i], req.w_id);
    add_order_line(ctx, req, h.o_id, i, amount, info);
    total += amount;
  }
  co_return pay_value(h, total);
}

Task<Value> update_stock_body(TxnContext& ctx, Value args) {
  const int64_t d_id = args.at(1).as_int();
  const int64_t home = args.at(2).as_int();
  Value::List out;
  for (const auto& v : args.at(3).as_list()) {
    OrderItem it = item_from_value(v);
    Decimal amount = get_amount(ctx, it);
    std::string info = get_dist_info_stock(ctx, it, d_id);
    update_stock(ctx, it, home);
    out.push_back(Value::list({std::move(info), amount}));
  }
  co_return Value(std::move(out));
}

Task<Value> update_stock_v3_body(TxnContext& ctx, Value args) {
  const int64_t home = args.at(2).as_int();
  for (const auto& v : args.at(3).as_list()) update_stock(ctx, item_from_value(v), home);
  co_return Value();
}

Task<Value> new_order_v2_body(TxnContext& ctx, Value args, Scale scale, ProcedureOptions options) {
  const NewOrderRequest req = NewOrderRequest::from_value(args);
  OrderHeader h = gen_order(ctx, req, scale, options);
  SupplierGroups g = group_by_supplier(req);
  std::vector<Value> results;
  for (size_t s = 0; s < g.suppliers.size(); ++s) {
    Value sub = subset_args(req, g.suppliers[s], g.members[s]);
    auto target = static_cast<PartitionId>(ctx.map_partition("map", sub));
    Value r = co_await ctx.exec_sub("new_order_update_stock", std::move(sub), target);
    results.push_back(std::move(r));
  }
  std::vector<const Value*> per_item(req.items.size());
  for (size_t s = 0; s < g.suppliers.size(); ++s) {
    for (size_t k = 0; k < g.members[s].size(); ++k) per_item[g.members[s][k]] = &results[s].at(k);
  }
  Decimal total;
  for (size_t i = 0; i < req.items.size(); ++i) {
    Decimal amount = per_item[i]->at(1).as_decimal();
    add_order_line(ctx, req, h.o_id, i, amount, per_item[i]->at(0).as_string());
    total += amount;
  }
  co_return pay_value(h, total);
}

Task<Value> new_order_v3_body(TxnContext& ctx, Value args, Scale scale, ProcedureOptions options) {
  const NewOrderRequest req = NewOrderRequest::from_value(args);
  OrderHeader h = gen_order(ctx, req, scale, options);
  SupplierGroups g = group_by_supplier(req);
  std::vector<Value> subs;
  std::vector<PartitionId> targets;
  for (size_t s = 0; s < g.suppliers.size(); ++s) {
    subs.push_back(subset_args(req, g.suppliers[s], g.members[s]));
    targets.push_back(static_cast<PartitionId>(ctx.map_partition("map", subs.back())));
  }
  co_await ctx.parallel_exec("new_order_update_stock_v3", std::move(subs), std::move(targets));
  Decimal total;
  for (size_t i = 0; i < req.items.size(); ++i) {
    Decimal amount = get_amount(ctx, req.items[i]);
    add_order_line(ctx, req, h.o_id, i, amount, get_dist_info_replicated(ctx, req.items[i], req.d_id));
    total += amount;
  }
  co_return pay_value(h, total);
}

std::string key_text(const Key& k) {
  std::string s = "(";
  for (size_t i = 0; i < k.size(); ++i) s += (i ? "," : "") + std::to_string(k[i]);
  return s + ")";
}

}  // namespace

void Scale::validate() const {
  if (warehouses < 1 || districts < 1 || items < 1 || customers < 1) {
    throw EngineError(ErrorCode::kInvalidConfig, "scale: warehouses, districts, items and customers must be >= 1");
  }
  if (districts > 99) throw EngineError(ErrorCode::kInvalidConfig, "scale: at most 99 districts");
}

Variant parse_variant(std::string_view name) {
  if (name == "v1") return Variant::kV1;
  if (name == "v2") return Variant::kV2;
  if (name == "v3") return Variant::kV3;
  throw EngineError(ErrorCode::kInvalidConfig, "unknown variant " + std::string(name));
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kV1: return "v1";
    case Variant::kV2: return "v2";
    case Variant::kV3: return "v3";
  }
  return "?";
}

std::string procedure_for(Variant v) { return std::string("new_order_") + variant_name(v); }

Value NewOrderRequest::to_value() const {
  Value::List list;
  for (const auto& it : items) list.push_back(item_to_value(it));
  return Value::list({w_id, d_id, c_id, Value(std::move(list))});
}

NewOrderRequest NewOrderRequest::from_value(const Value& v) {
  NewOrderRequest r;
  r.w_id = v.at(0).as_int();
  r.d_id = v.at(1).as_int();
  r.c_id = v.at(2).as_int();
  for (const auto& it : v.at(3).as_list()) r.items.push_back(item_from_value(it));
  return r;
}

size_t NewOrderRequest::remote_suppliers() const {
  std::set<int64_t> s;
  for (const auto& it : items) {
    if (it.supplier_w_id != w_id) s.insert(it.supplier_w_id);
  }
  return s.size();
}

Decimal warehouse_tax(uint64_t seed, int64_t w) {
  return Decimal::from_micros(static_cast<int64_t>(seeded(seed, kWTax, w) % 2001) * 100);
}

Decimal district_tax(uint64_t seed, int64_t w, int64_t d) {
  return Decimal::from_micros(static_cast<int64_t>(seeded(seed, kDTax, w, d) % 2001) * 100);
}

Decimal customer_discount(uint64_t seed, int64_t w, int64_t d, int64_t c) {
  return Decimal::from_micros(static_cast<int64_t>(seeded(seed, kDiscount, w, d, c) % 5001) * 100);
}

Decimal item_price(uint64_t seed, int64_t i) {
  return Decimal::from_micros((100 + static_cast<int64_t>(seeded(seed, kPrice, i) % 9901)) * 10'000);
}

int64_t initial_stock_quantity(uint64_t seed, int64_t w, int64_t i) {
  return 10 + static_cast<int64_t>(seeded(seed, kStock, w, i) % 91);
}

std::string dist_info(int64_t w, int64_t i, int64_t d) {
  return "S-" + std::to_string(w) + "-" + std::to_string(i) + "-" + std::to_string(d);
}

std::string dist_column(int64_t d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s_dist_%02lld", static_cast<long long>(d));
  return buf;
}

int64_t next_stock_quantity(int64_t qty, int64_t ordered) {
  int64_t left = qty - ordered;
  return left >= 10 ? left : left + 91;
}

Decimal total_pay(Decimal w_tax, Decimal d_tax, Decimal discount, Decimal total) {
  return (Decimal::from_int(1) + w_tax + d_tax) * total * (Decimal::from_int(1) - discount);
}

std::shared_ptr<Catalog> make_catalog(const Scale& scale) {
  scale.validate();
  auto cat = std::make_shared<Catalog>();
  std::vector<std::string> dist_cols;
  for (int64_t d = 1; d <= scale.districts; ++d) dist_cols.push_back(dist_column(d));
  std::vector<std::string> stock_cols{"s_quantity", "s_ytd", "s_order_cnt", "s_remote_cnt"};
  stock_cols.insert(stock_cols.end(), dist_cols.begin(), dist_cols.end());

  cat->define_table({"warehouse", 1, {"w_tax", "w_name"}, false});
  cat->define_table({"district", 2, {"d_tax", "d_next_o_id"}, false});
  cat->define_table({"customer", 3, {"c_discount", "c_credit"}, false});
  cat->define_table({"item", 1, {"i_price", "i_name"}, true});
  cat->define_table({"stock", 2, stock_cols, false});
  cat->define_table({"stock_dist_info", 2, dist_cols, true});
  cat->define_table({"new_order", 3, {}, false});
  cat->define_table({"oorder", 3, {"o_c_id", "o_ol_cnt", "o_all_local"}, false});
  cat->define_table(
      {"order_line", 4, {"ol_i_id", "ol_supply_w_id", "ol_quantity", "ol_amount", "ol_dist_info"}, false});
  return cat;
}

void register_procedures(Registry& registry, Variant variant, const Scale& scale, ProcedureOptions options) {
  scale.validate();
  if (variant == Variant::kV1) {
    registry.register_mapper("map", [](const Value&) { return int64_t{0}; });
  } else {
    registry.register_mapper("map", [](const Value& a) { return a.at(0).as_int(); });
  }
  registry.register_mapper("partition0", [](const Value&) { return int64_t{0}; });

  registry.register_procedure(
      "load_warehouse", [scale](TxnContext& ctx, Value a) { return load_warehouse_body(ctx, std::move(a), scale); },
      "map");
  registry.register_procedure(
      "load_items", [scale](TxnContext& ctx, Value a) { return load_items_body(ctx, std::move(a), scale); },
      "partition0");
  registry.register_procedure(
      "load_stock_dist_info",
      [scale](TxnContext& ctx, Value a) { return load_stock_dist_info_body(ctx, std::move(a), scale); }, "partition0");
  registry.register_procedure(
      "new_order_v1",
      [scale, options](TxnContext& ctx, Value a) { return new_order_v1_body(ctx, std::move(a), scale, options); },
      "map");
  registry.register_procedure(
      "new_order_v2",
      [scale, options](TxnContext& ctx, Value a) { return new_order_v2_body(ctx, std::move(a), scale, options); },
      "map");
  registry.register_procedure(
      "new_order_v3",
      [scale, options](TxnContext& ctx, Value a) { return new_order_v3_body(ctx, std::move(a), scale, options); },
      "map");
  registry.register_procedure("new_order_update_stock", update_stock_body, "map");
  registry.register_procedure("new_order_update_stock_v3", update_stock_v3_body, "map");
}

uint32_t logical_partitions(Variant v, const Scale& scale) { return v == Variant::kV1 ? 1 : scale.warehouses + 1; }

std::vector<uint32_t> default_mapping(Variant v, const Scale& scale, uint32_t num_physical) {
  if (num_physical == 0) throw EngineError(ErrorCode::kInvalidConfig, "num_physical must be >= 1");
  std::vector<uint32_t> m(logical_partitions(v, scale), 0);
  for (size_t p = 1; p < m.size(); ++p) m[p] = static_cast<uint32_t>((p - 1) % num_physical);
  return m;
}

OrderHeader gen_order(TxnContext& ctx, const NewOrderRequest& req, const Scale& scale, const ProcedureOptions& options) {
  check_range("warehouse", req.w_id, scale.warehouses);
  check_range("district", req.d_id, scale.districts);
  check_range("customer", req.c_id, scale.customers);
  if (req.items.empty() || req.items.size() > kMaxItems) {
    reject("order has " + std::to_string(req.items.size()) + " items");
  }
  bool all_local = true;
  for (const auto& it : req.items) {
    check_range("item", it.item_id, scale.items);
    check_range("supplier warehouse", it.supplier_w_id, scale.warehouses);
    if (it.qty < 1) reject("quantity " + std::to_string(it.qty));
    all_local = all_local && it.supplier_w_id == req.w_id;
  }

  OrderHeader h;
  h.warehouse = ctx.get_required("warehouse", Key{req.w_id});
  h.district = ctx.get_required("district", Key{req.w_id, req.d_id});
  h.customer = ctx.get_required("customer", Key{req.w_id, req.d_id, req.c_id});
  h.o_id = h.district.get_int("d_next_o_id");
  ctx.add("new_order", Key{req.w_id, req.d_id, h.o_id}, {});
  ctx.update("district", Key{req.w_id, req.d_id}, {{"d_next_o_id", h.o_id + 1}});
  if (!options.skip_oorder_insert) {
    ctx.add("oorder", Key{req.w_id, req.d_id, h.o_id},
            {{"o_c_id", req.c_id},
             {"o_ol_cnt", static_cast<int64_t>(req.items.size())},
             {"o_all_local", int64_t{all_local ? 1 : 0}}});
  }
  return h;
}

Decimal get_amount(TxnContext& ctx, const OrderItem& item) {
  return ctx.get_required("item", Key{item.item_id}).get_decimal("i_price") * item.qty;
}

Record update_stock(TxnContext& ctx, const OrderItem& item, int64_t home_w_id) {
  Key k{item.supplier_w_id, item.item_id};
  Record stock = ctx.get_required("stock", k);
  ctx.update("stock", k,
             {{"s_quantity", next_stock_quantity(stock.get_int("s_quantity"), item.qty)},
              {"s_ytd", stock.get_int("s_ytd") + item.qty},
              {"s_order_cnt", stock.get_int("s_order_cnt") + 1},
              {"s_remote_cnt", stock.get_int("s_remote_cnt") + (item.supplier_w_id != home_w_id ? 1 : 0)}});
  return stock;
}

std::string get_dist_info_stock(TxnContext& ctx, const OrderItem& item, int64_t d_id) {
  return ctx.get_required("stock", Key{item.supplier_w_id, item.item_id}).get_string(dist_column(d_id));
}

std::string get_dist_info_replicated(TxnContext& ctx, const OrderItem& item, int64_t d_id) {
  return ctx.get_required("stock_dist_info", Key{item.supplier_w_id, item.item_id}).get_string(dist_column(d_id));
}

void load_initial(Cluster& cluster, Variant variant, const Scale& scale, uint64_t seed) {
  scale.validate();
  if (cluster.num_partitions() != logical_partitions(variant, scale)) {
    throw EngineError(ErrorCode::kInvalidConfig, "cluster has " + std::to_string(cluster.num_partitions()) +
                                                     " logical partitions; variant " + variant_name(variant) +
                                                     " needs " + std::to_string(logical_partitions(variant, scale)));
  }
  const Catalog& cat = cluster.catalog();
  for (PartitionId p = 0; p < cluster.num_partitions(); ++p) {
    for (TableId t = 0; t < cat.size(); ++t) {
      if (cluster.store(p).row_count(t) != 0) {
        throw EngineError(ErrorCode::kDuplicateKey, "database is not empty: partition " + std::to_string(p) +
                                                        " holds " + cat.schema(t).name + " rows");
      }
    }
  }
  const auto seed_arg = static_cast<int64_t>(seed);
  std::vector<Ticket> tickets;
  for (int64_t w = 1; w <= scale.warehouses; ++w) tickets.push_back(cluster.submit("load_warehouse", Value::list({w, seed_arg})));
  tickets.push_back(cluster.submit_broadcast("load_items", Value::list({seed_arg})));
  if (variant == Variant::kV3) tickets.push_back(cluster.submit_broadcast("load_stock_dist_info", Value()));
  cluster.run_until_quiescent();
  for (Ticket t : tickets) {
    const Outcome& o = cluster.await(t);
    if (!o.committed) throw EngineError(ErrorCode::kInvalidConfig, "loader aborted: " + o.error);
  }
}

Workload gen_workload(const Scale& scale, const WorkloadOptions& options) {
  scale.validate();
  if (!(options.remote_prob >= 0.0 && options.remote_prob <= 1.0)) {
    throw EngineError(ErrorCode::kInvalidConfig, "remote_prob must be in [0, 1]");
  }
  if (options.hot_district) {
    auto [w, d] = *options.hot_district;
    if (w < 1 || w > scale.warehouses || d < 1 || d > scale.districts) {
      throw EngineError(ErrorCode::kInvalidConfig, "hot district outside the loaded scale");
    }
  }
  Workload out;
  if (scale.warehouses == 1 && options.remote_prob > 0.0) {
    out.warnings.push_back("one warehouse: remote items are coerced to local");
  }
  std::mt19937_64 rng(options.seed);
  const uint64_t W = scale.warehouses;
  out.requests.reserve(options.txns);
  for (uint64_t t = 0; t < options.txns; ++t) {
    NewOrderRequest r;
    r.w_id = 1 + static_cast<int64_t>(uniform(rng, W));
    r.d_id = 1 + static_cast<int64_t>(uniform(rng, scale.districts));
    r.c_id = 1 + static_cast<int64_t>(uniform(rng, scale.customers));
    if (options.hot_district) std::tie(r.w_id, r.d_id) = *options.hot_district;
    size_t n = std::min<size_t>(5 + uniform(rng, 11), scale.items);
    std::set<int64_t> used;
    while (r.items.size() < n) {
      OrderItem it;
      it.item_id = 1 + static_cast<int64_t>(uniform(rng, scale.items));
      if (!used.insert(it.item_id).second) continue;
      it.qty = 1 + static_cast<int64_t>(uniform(rng, 10));
      bool remote = unit(rng) < options.remote_prob;
      it.supplier_w_id = r.w_id;
      if (remote && W > 1) {
        auto other = 1 + static_cast<int64_t>(uniform(rng, W - 1));
        it.supplier_w_id = other >= r.w_id ? other + 1 : other;
      }
      r.items.push_back(it);
    }
    out.requests.push_back(std::move(r));
  }
  return out;
}

std::string dump_stream(const std::vector<NewOrderRequest>& requests) {
  std::string out;
  for (const auto& r : requests) out += to_hex(r.to_value().encode()) + "\n";
  return out;
}

std::vector<NewOrderRequest> read_stream(std::string_view text) {
  std::vector<NewOrderRequest> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    try {
      out.push_back(NewOrderRequest::from_value(Value::decode(from_hex(line))));
    } catch (const EngineError& e) {
      throw EngineError(ErrorCode::kDecode, "stream line " + std::to_string(out.size() + 1) + ": " + e.what());
    }
  }
  return out;
}

ConsistencyReport check_consistency(const Cluster& cluster, Variant variant, const Scale& scale, uint64_t seed,
                                    const std::vector<CommittedOrder>& committed) {
  if (!cluster.quiescent()) throw EngineError(ErrorCode::kInFlight, "check_consistency requires a quiescent cluster");
  ConsistencyReport rep;
  const Catalog& cat = cluster.catalog();
  auto fail = [&](std::string msg) { rep.violations.push_back(std::move(msg)); };
  auto part_of = [&](int64_t w) -> PartitionId { return variant == Variant::kV1 ? 0 : static_cast<PartitionId>(w); };
  auto col = [&](TableId t, const StoredRecord& r, std::string_view c) -> const Scalar& {
    return r.values[cat.column_index(t, c)];
  };
  auto as_int = [](const Scalar& s) { return std::get<int64_t>(s); };
  const TableId t_district = cat.id_of("district");
  const TableId t_new_order = cat.id_of("new_order");
  const TableId t_oorder = cat.id_of("oorder");
  const TableId t_order_line = cat.id_of("order_line");
  const TableId t_stock = cat.id_of("stock");
  const TableId t_item = cat.id_of("item");
  const TableId t_sdi = cat.id_of("stock_dist_info");

  auto count_prefix = [](const std::map<Key, StoredRecord>& rows, const Key& prefix) {
    size_t n = 0;
    for (auto it = rows.lower_bound(prefix); it != rows.end(); ++it) {
      if (!std::equal(prefix.begin(), prefix.end(), it->first.begin())) break;
      ++n;
    }
    return n;
  };

  std::map<std::pair<int64_t, int64_t>, std::vector<const CommittedOrder*>> by_district;
  for (const auto& c : committed) by_district[{c.request.w_id, c.request.d_id}].push_back(&c);
  for (auto& [wd, list] : by_district) {
    std::sort(list.begin(), list.end(), [](auto* a, auto* b) { return a->global_index < b->global_index; });
  }

  for (int64_t w = 1; w <= scale.warehouses; ++w) {
    const PartitionStore& store = cluster.store(part_of(w));
    for (int64_t d = 1; d <= scale.districts; ++d) {
      const std::string where = "district (" + std::to_string(w) + "," + std::to_string(d) + ")";
      const auto* drow = store.find(t_district, Key{w, d});
      if (!drow) {
        fail(where + " missing");
        continue;
      }
      const auto& orders = by_district[{w, d}];
      const int64_t n = static_cast<int64_t>(orders.size());
      const int64_t next = as_int(col(t_district, *drow, "d_next_o_id"));
      const auto n_oorder = static_cast<int64_t>(count_prefix(store.rows(t_oorder), Key{w, d}));
      const auto n_new = static_cast<int64_t>(count_prefix(store.rows(t_new_order), Key{w, d}));
      if (next - 1 != n) fail(where + ": next_o_id " + std::to_string(next) + " but " + std::to_string(n) + " committed orders");
      if (n_oorder != n) fail(where + ": " + std::to_string(n_oorder) + " oorder rows for " + std::to_string(n) + " orders");
      if (n_new != n) fail(where + ": " + std::to_string(n_new) + " new_order rows for " + std::to_string(n) + " orders");

      // Under a serial order the k-th committed order on (w, d) took o_id k.
      for (int64_t k = 1; k <= n; ++k) {
        const NewOrderRequest& req = orders[static_cast<size_t>(k - 1)]->request;
        const std::string order = "order (" + std::to_string(w) + "," + std::to_string(d) + "," + std::to_string(k) + ")";
        const auto* orow = store.find(t_oorder, Key{w, d, k});
        if (!orow) {
          fail(order + ": oorder row missing");
        } else {
          if (as_int(col(t_oorder, *orow, "o_c_id")) != req.c_id) fail(order + ": wrong customer");
          if (as_int(col(t_oorder, *orow, "o_ol_cnt")) != static_cast<int64_t>(req.items.size())) {
            fail(order + ": o_ol_cnt differs from the request's item count");
          }
        }
        const size_t lines = count_prefix(store.rows(t_order_line), Key{w, d, k});
        if (lines != req.items.size()) {
          fail(order + ": " + std::to_string(lines) + " order lines for " + std::to_string(req.items.size()) + " items");
        }
        for (size_t i = 0; i < req.items.size(); ++i) {
          const auto* line = store.find(t_order_line, Key{w, d, k, static_cast<int64_t>(i + 1)});
          if (!line) continue;
          const OrderItem& it = req.items[i];
          const Decimal expect_amount = item_price(seed, it.item_id) * it.qty;
          if (as_int(col(t_order_line, *line, "ol_i_id")) != it.item_id ||
              as_int(col(t_order_line, *line, "ol_supply_w_id")) != it.supplier_w_id ||
              as_int(col(t_order_line, *line, "ol_quantity")) != it.qty ||
              std::get<Decimal>(col(t_order_line, *line, "ol_amount")) != expect_amount ||
              std::get<std::string>(col(t_order_line, *line, "ol_dist_info")) != dist_info(it.supplier_w_id, it.item_id, d)) {
            fail(order + " line " + std::to_string(i + 1) + " does not match its request");
          }
        }
      }
      if (static_cast<int64_t>(count_prefix(store.rows(t_oorder), Key{w, d})) > n) {
        fail(where + ": oorder rows beyond the committed orders");
      }
    }
  }

  struct StockExpect {
    int64_t ytd = 0;
    int64_t count = 0;
    int64_t remote = 0;
  };
  std::map<std::pair<int64_t, int64_t>, StockExpect> expect;
  for (const auto& c : committed) {
    for (const auto& it : c.request.items) {
      auto& e = expect[{it.supplier_w_id, it.item_id}];
      e.ytd += it.qty;
      e.count += 1;
      e.remote += it.supplier_w_id != c.request.w_id ? 1 : 0;
    }
  }
  for (int64_t w = 1; w <= scale.warehouses; ++w) {
    const PartitionStore& store = cluster.store(part_of(w));
    for (int64_t i = 1; i <= scale.items; ++i) {
      const std::string where = "stock " + key_text(Key{w, i});
      const auto* s = store.find(t_stock, Key{w, i});
      if (!s) {
        fail(where + " missing");
        continue;
      }
      auto e = expect.count({w, i}) ? expect[{w, i}] : StockExpect{};
      const int64_t qty = as_int(col(t_stock, *s, "s_quantity"));
      const int64_t ytd = as_int(col(t_stock, *s, "s_ytd"));
      if (ytd != e.ytd) fail(where + ": s_ytd " + std::to_string(ytd) + " but ordered " + std::to_string(e.ytd));
      if (as_int(col(t_stock, *s, "s_order_cnt")) != e.count) fail(where + ": s_order_cnt mismatch");
      if (as_int(col(t_stock, *s, "s_remote_cnt")) != e.remote) fail(where + ": s_remote_cnt mismatch");
      const int64_t drift = initial_stock_quantity(seed, w, i) - e.ytd - qty;
      if (qty < 10 || qty > 100 || drift % 91 != 0) {
        fail(where + ": quantity " + std::to_string(qty) + " does not reconcile with " + std::to_string(e.ytd) +
             " units ordered");
      }
    }
  }

  // Replicated tables stay coherent and untouched by steady-state work.
  for (TableId t : {t_item, t_sdi}) {
    const Digest first = cluster.store(0).digest_tables([&](const TableSchema& s) { return &s == &cat.schema(t); });
    for (PartitionId p = 1; p < cluster.num_partitions(); ++p) {
      if (!(cluster.store(p).digest_tables([&](const TableSchema& s) { return &s == &cat.schema(t); }) == first)) {
        fail(cat.schema(t).name + " differs between partition 0 and " + std::to_string(p));
      }
    }
  }
  for (const auto& rec : cluster.history().records()) {
    if (!rec.committed) continue;
    for (const auto& [p, e] : rec.partitions) {
      for (const auto& [tk, v] : e.writes) {
        if (tk.table == t_sdi) {
          fail("root " + std::to_string(rec.root_id) + " (" + rec.txn_name + ") wrote stock_dist_info on partition " +
               std::to_string(p));
        }
      }
    }
  }
  return rep;
}

Deployment::Deployment(DeploymentOptions options) : options_(std::move(options)) {
  options_.scale.validate();
  catalog_ = make_catalog(options_.scale);
  registry_ = std::make_shared<Registry>();
  register_procedures(*registry_, options_.variant, options_.scale, options_.procedures);
  catalog_->freeze();
  registry_->freeze();

  ClusterConfig c;
  c.num_logical = logical_partitions(options_.variant, options_.scale);
  c.num_physical = options_.num_physical;
  c.mapping = options_.mapping.empty() ? default_mapping(options_.variant, options_.scale, options_.num_physical)
                                       : options_.mapping;
  c.net_latency_us = options_.net_latency_us;
  c.seed = options_.seed;
  c.latency_jitter = options_.latency_jitter;
  c.retry_limit = options_.retry_limit;
  c.max_sim_time_us = options_.max_sim_time_us;
  c.cost = options_.cost;
  c.trace = options_.trace;
  cluster_ = std::make_unique<Cluster>(std::move(c), catalog_, registry_);
}

void Deployment::load() {
  if (loaded_) throw EngineError(ErrorCode::kDuplicateKey, "deployment already loaded");
  load_initial(*cluster_, options_.variant, options_.scale, options_.seed);
  initial_ = cluster_->snapshot();
  cluster_->reset_metrics();
  loaded_ = true;
}

Ticket Deployment::submit(const NewOrderRequest& req, std::function<void(const Outcome&)> on_done) {
  return cluster_->submit(procedure_for(options_.variant), req.to_value(),
                          [this, req, cb = std::move(on_done)](const Outcome& o) {
                            if (o.committed) committed_.push_back({req, o.global_index});
                            if (cb) cb(o);
                          });
}

Outcome Deployment::run(const NewOrderRequest& req) { return cluster_->await(submit(req)); }

ConsistencyReport Deployment::check_consistency() const {
  return tpcc::check_consistency(*cluster_, options_.variant, options_.scale, options_.seed, committed_);
}

SerializabilityResult Deployment::verify() const { return verify_serializability(*cluster_, initial_); }

Digest Deployment::data_digest() const {
  return cluster_->cluster_digest([](const TableSchema& s) { return !s.replicated; });
}

}  // namespace tpart::tpcc
