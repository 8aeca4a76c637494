#include "tpart/tpcc.hpp"

#include <gtest/gtest.h>

namespace tpart::tpcc {
namespace {

DeploymentOptions desk(Variant v, uint32_t physical = 1, double latency = 0.0) {
  DeploymentOptions o;
  o.variant = v;
  o.scale = Scale{4, 2, 100, 10};
  o.seed = 11;
  o.num_physical = v == Variant::kV1 ? 1 : physical;
  o.net_latency_us = latency;
  return o;
}

NewOrderRequest order(int64_t w, int64_t d, int64_t c, std::vector<OrderItem> items) {
  return NewOrderRequest{w, d, c, std::move(items)};
}

TEST(TpccRules, StockRule) {
  EXPECT_EQ(next_stock_quantity(50, 5), 45);
  EXPECT_EQ(next_stock_quantity(12, 5), 98);
  EXPECT_EQ(next_stock_quantity(15, 5), 10);
}

TEST(TpccRules, TotalPay) {
  EXPECT_EQ(total_pay(Decimal::parse("0.1"), Decimal::parse("0.1"), Decimal::parse("0.5"), Decimal::from_int(100)),
            Decimal::from_int(60));
  EXPECT_EQ(total_pay(Decimal(), Decimal(), Decimal(), Decimal::from_int(15)), Decimal::from_int(15));
}

TEST(TpccRules, SeededPopulationRanges) {
  for (int64_t k = 1; k <= 200; ++k) {
    EXPECT_GE(warehouse_tax(3, k), Decimal());
    EXPECT_LE(warehouse_tax(3, k), Decimal::parse("0.2"));
    EXPECT_LE(customer_discount(3, 1, 1, k), Decimal::parse("0.5"));
    EXPECT_GE(item_price(3, k), Decimal::from_int(1));
    EXPECT_LE(item_price(3, k), Decimal::from_int(100));
    EXPECT_GE(initial_stock_quantity(3, 1, k), 10);
    EXPECT_LE(initial_stock_quantity(3, 1, k), 100);
  }
  EXPECT_EQ(dist_info(1, 7, 2), "S-1-7-2");
  EXPECT_EQ(dist_column(2), "s_dist_02");
}

TEST(TpccLoad, DeskScalePlacement) {
  DeploymentOptions o = desk(Variant::kV2, 2);
  o.scale = Scale{2, 2, 10, 3};
  Deployment dep(o);
  dep.load();
  const Cluster& cl = dep.cluster();
  TableId district = cl.catalog().id_of("district");
  std::vector<Key> keys;
  for (const auto& [k, r] : cl.store(1).rows(district)) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<Key>{{1, 1}, {1, 2}}));
  EXPECT_EQ(cl.store(0).row_count(district), 0u);
  EXPECT_EQ(cl.store(1).row_count(cl.catalog().id_of("stock")), 10u);
  EXPECT_EQ(cl.store(1).row_count(cl.catalog().id_of("customer")), 6u);
  auto items = [&](PartitionId p) {
    return cl.store(p).digest_tables([](const TableSchema& s) { return s.name == "item"; });
  };
  EXPECT_EQ(items(0), items(1));
  EXPECT_EQ(items(1), items(2));
  EXPECT_EQ(cl.store(1).row_count(cl.catalog().id_of("stock_dist_info")), 0u);
  EXPECT_THROW(load_initial(dep.cluster(), Variant::kV2, o.scale, o.seed), EngineError);
  EXPECT_THROW(dep.load(), EngineError);
}

TEST(TpccLoad, V3ReplicatesStockDistInfo) {
  Deployment dep(desk(Variant::kV3, 2));
  dep.load();
  const Cluster& cl = dep.cluster();
  TableId sdi = cl.catalog().id_of("stock_dist_info");
  for (PartitionId p = 0; p < cl.num_partitions(); ++p) EXPECT_EQ(cl.store(p).row_count(sdi), 400u);
}

TEST(TpccOrder, FirstOrderTakesIdOne) {
  Deployment dep(desk(Variant::kV2));
  dep.load();
  auto out = dep.run(order(1, 1, 1, {{7, 1, 3}}));
  ASSERT_TRUE(out.committed) << out.error;
  const auto& st = dep.cluster().store(1);
  const TableId district = dep.cluster().catalog().id_of("district");
  const TableId oorder = dep.cluster().catalog().id_of("oorder");
  EXPECT_EQ(std::get<int64_t>(st.find(district, Key{1, 1})->values[1]), 2);
  EXPECT_NE(st.find(oorder, Key{1, 1, 1}), nullptr);
  ASSERT_TRUE(dep.run(order(1, 1, 2, {{8, 1, 1}})).committed);
  EXPECT_NE(st.find(oorder, Key{1, 1, 2}), nullptr);
  EXPECT_TRUE(dep.check_consistency().ok());
}

TEST(TpccOrder, TotalPayMatchesHandComputation) {
  Deployment dep(desk(Variant::kV2));
  dep.load();
  const uint64_t s = 11;
  auto req = order(2, 1, 4, {{5, 2, 3}, {9, 2, 1}});
  Decimal total = item_price(s, 5) * 3 + item_price(s, 9) * 1;
  Decimal expect = (Decimal::from_int(1) + warehouse_tax(s, 2) + district_tax(s, 2, 1)) * total *
                   (Decimal::from_int(1) - customer_discount(s, 2, 1, 4));
  auto out = dep.run(req);
  ASSERT_TRUE(out.committed) << out.error;
  EXPECT_EQ(out.value.as_decimal(), expect);
}

TEST(TpccOrder, SanityChecksAbortWithUserError) {
  Deployment dep(desk(Variant::kV2));
  dep.load();
  for (auto bad : {order(1, 1, 11, {{1, 1, 1}}), order(1, 3, 1, {{1, 1, 1}}), order(1, 1, 1, {{101, 1, 1}}),
                   order(1, 1, 1, {{1, 5, 1}}), order(1, 1, 1, {{1, 1, 0}}), order(1, 1, 1, {})}) {
    auto out = dep.run(bad);
    EXPECT_FALSE(out.committed);
    EXPECT_EQ(out.reason, AbortReason::kUserError);
  }
  EXPECT_TRUE(dep.check_consistency().ok());
  EXPECT_TRUE(dep.cluster().history().committed_in_order().empty());
}

TEST(TpccOrder, AllLocalOrdersSendNoMessages) {
  for (Variant v : {Variant::kV2, Variant::kV3}) {
    Deployment dep(desk(v, 4, 100));
    dep.load();
    ASSERT_TRUE(dep.run(order(3, 2, 1, {{1, 3, 1}, {2, 3, 2}, {3, 3, 3}})).committed);
    EXPECT_EQ(dep.cluster().metrics().messages, 0u) << variant_name(v);
  }
}

TEST(TpccOrder, RemoteRoundsSequentialVersusParallel) {
  const double L = 100;
  auto req = order(1, 1, 1, {{1, 2, 1}, {2, 3, 1}, {3, 1, 1}});
  Deployment v2(desk(Variant::kV2, 4, L));
  v2.load();
  auto a = v2.run(req);
  Deployment v3(desk(Variant::kV3, 4, L));
  v3.load();
  auto b = v3.run(req);
  ASSERT_TRUE(a.committed && b.committed);
  EXPECT_GE(a.body_latency_us(), 4 * L);
  EXPECT_GE(b.body_latency_us(), 2 * L);
  EXPECT_LT(b.body_latency_us(), 4 * L);
  EXPECT_EQ(a.value, b.value);
  EXPECT_GT(v2.cluster().metrics().child_result_bytes, 0u);
  EXPECT_EQ(v3.cluster().metrics().child_result_bytes, 0u);
}

TEST(TpccOrder, VariantsAgreeOnSerialStream) {
  Scale scale{4, 2, 100, 10};
  WorkloadOptions wo;
  wo.seed = 5;
  wo.txns = 120;
  wo.remote_prob = 0.4;
  auto stream = gen_workload(scale, wo).requests;
  std::vector<std::vector<Value>> pays;
  std::vector<Digest> digests;
  for (Variant v : {Variant::kV1, Variant::kV2, Variant::kV3}) {
    Deployment dep(desk(v, 3, 20));
    dep.load();
    std::vector<Value> p;
    for (const auto& r : stream) {
      auto out = dep.run(r);
      ASSERT_TRUE(out.committed) << variant_name(v) << ": " << out.error;
      p.push_back(out.value);
    }
    dep.cluster().run_until_quiescent();
    pays.push_back(p);
    digests.push_back(dep.data_digest());
    EXPECT_TRUE(dep.check_consistency().ok());
  }
  EXPECT_EQ(pays[0], pays[1]);
  EXPECT_EQ(pays[1], pays[2]);
  EXPECT_EQ(digests[0], digests[1]);
  EXPECT_EQ(digests[1], digests[2]);
}

TEST(TpccOrder, HundredOrdersOnOneDistrict) {
  Deployment dep(desk(Variant::kV3, 4, 10));
  dep.load();
  WorkloadOptions wo;
  wo.seed = 2;
  wo.txns = 100;
  wo.remote_prob = 0.2;
  wo.hot_district = std::make_pair(int64_t{2}, int64_t{1});
  int committed = 0;
  for (const auto& r : gen_workload(dep.options().scale, wo).requests) committed += dep.run(r).committed;
  EXPECT_EQ(committed, 100);
  dep.cluster().run_until_quiescent();
  const TableId district = dep.cluster().catalog().id_of("district");
  EXPECT_EQ(std::get<int64_t>(dep.cluster().store(2).find(district, Key{2, 1})->values[1]), 101);
  EXPECT_TRUE(dep.check_consistency().ok());
}

TEST(TpccAudit, ConcurrentRunIsConsistentAndSerializable) {
  for (Variant v : {Variant::kV2, Variant::kV3}) {
    Deployment dep(desk(v, 2, 50));
    dep.load();
    WorkloadOptions wo;
    wo.seed = 9;
    wo.txns = 200;
    wo.remote_prob = 0.3;
    for (const auto& r : gen_workload(dep.options().scale, wo).requests) dep.submit(r);
    dep.cluster().run_until_quiescent();
    auto rep = dep.check_consistency();
    EXPECT_TRUE(rep.ok()) << (rep.violations.empty() ? "" : rep.violations.front());
    auto ser = dep.verify();
    EXPECT_TRUE(ser.ok) << ser.counterexample;
    EXPECT_EQ(ser.replayed, dep.committed_orders().size());
  }
}

TEST(TpccAudit, SkippedOorderInsertIsReported) {
  DeploymentOptions o = desk(Variant::kV2);
  o.procedures.skip_oorder_insert = true;
  Deployment dep(o);
  dep.load();
  ASSERT_TRUE(dep.run(order(1, 1, 1, {{1, 1, 1}})).committed);
  auto rep = dep.check_consistency();
  EXPECT_FALSE(rep.ok());
}

TEST(TpccAudit, FreshLoadIsConsistent) {
  Deployment dep(desk(Variant::kV1));
  dep.load();
  EXPECT_TRUE(dep.check_consistency().ok());
}

TEST(TpccWorkload, StreamsAreDeterministicAndShaped) {
  Scale scale{4, 2, 100, 10};
  WorkloadOptions wo;
  wo.seed = 77;
  wo.txns = 300;
  wo.remote_prob = 0.0;
  auto local = gen_workload(scale, wo).requests;
  EXPECT_EQ(local, gen_workload(scale, wo).requests);
  for (const auto& r : local) {
    EXPECT_EQ(r.remote_suppliers(), 0u);
    EXPECT_GE(r.items.size(), 5u);
    EXPECT_LE(r.items.size(), 15u);
    std::set<int64_t> ids;
    for (const auto& it : r.items) {
      ids.insert(it.item_id);
      EXPECT_GE(it.qty, 1);
      EXPECT_LE(it.qty, 10);
    }
    EXPECT_EQ(ids.size(), r.items.size());
  }
  wo.remote_prob = 1.0;
  for (const auto& r : gen_workload(scale, wo).requests) {
    for (const auto& it : r.items) EXPECT_NE(it.supplier_w_id, r.w_id);
  }
  Scale one{1, 2, 100, 10};
  auto coerced = gen_workload(one, wo);
  EXPECT_FALSE(coerced.warnings.empty());
  for (const auto& r : coerced.requests) EXPECT_EQ(r.remote_suppliers(), 0u);
}

TEST(TpccWorkload, StreamRoundTrip) {
  WorkloadOptions wo;
  wo.txns = 25;
  wo.remote_prob = 0.5;
  auto reqs = gen_workload(Scale{}, wo).requests;
  EXPECT_EQ(read_stream(dump_stream(reqs)), reqs);
  EXPECT_THROW(read_stream("zz\n"), EngineError);
}

}  // namespace
}  // namespace tpart::tpcc
