#include "tpart/occ.hpp"

#include <gtest/gtest.h>

#include <memory>

#include "tpart/netsim.hpp"
#include "tpart/verify.hpp"

namespace tpart {
namespace {

struct Store {
  Catalog catalog;
  TableId stock;
  std::unique_ptr<PartitionStore> store;

  Store() {
    stock = catalog.define_table({"stock", 1, {"q"}, false});
    store = std::make_unique<PartitionStore>(1, catalog);
    // Seven committed updates leave stock(1) at version 7.
    AccessSet load;
    LocalView(*store, load, false).add("stock", Key{1}, {{"q", int64_t{0}}});
    store->apply(load);
    for (int64_t i = 1; i < 7; ++i) bump();
  }

  void bump() {
    AccessSet acc;
    LocalView(*store, acc, false).update("stock", Key{1}, {{"q", int64_t{1}}});
    store->apply(acc);
  }

  AccessSet read_at(uint64_t version) const {
    AccessSet s;
    s.reads[TableKey{stock, Key{1}}] = version;
    return s;
  }
};

TEST(Validate, UnchangedReadIsValid) {
  Store s;
  PendingQueue q;
  auto v = validate(1, *s.store, q, 10, s.read_at(7));
  EXPECT_TRUE(v.valid);
  EXPECT_EQ(v.sequence, 1u);
  EXPECT_TRUE(q.contains(10));
}

TEST(Validate, StaleReadConflicts) {
  Store s;
  s.bump();
  PendingQueue q;
  auto v = validate(1, *s.store, q, 10, s.read_at(7));
  EXPECT_FALSE(v.valid);
  EXPECT_EQ(v.conflict, AbortReason::kValidationConflict);
  ASSERT_TRUE(v.conflict_key);
  EXPECT_EQ(v.conflict_key->table, s.stock);
  EXPECT_FALSE(q.contains(10));
}

TEST(Validate, EmptySetIsValid) {
  Store s;
  PendingQueue q;
  EXPECT_TRUE(validate(1, *s.store, q, 10, AccessSet{}).valid);
}

TEST(Validate, PendingWriteBlocksReaders) {
  Store s;
  PendingQueue q;
  AccessSet writer = s.read_at(7);
  writer.writes[TableKey{s.stock, Key{1}}] = BufferedWrite{false, {int64_t{5}}};
  ASSERT_TRUE(validate(1, *s.store, q, 10, writer).valid);
  auto v = validate(1, *s.store, q, 11, s.read_at(7));
  EXPECT_FALSE(v.valid);
  EXPECT_EQ(v.conflict, AbortReason::kPendingOverlap);
  q.unpark(10, writer);
  EXPECT_TRUE(validate(1, *s.store, q, 11, s.read_at(7)).valid);
}

TEST(Validate, PendingReadBlocksWritersButNotReaders) {
  Store s;
  PendingQueue q;
  ASSERT_TRUE(validate(1, *s.store, q, 10, s.read_at(7)).valid);
  EXPECT_TRUE(validate(1, *s.store, q, 11, s.read_at(7)).valid);
  AccessSet writer;
  writer.writes[TableKey{s.stock, Key{1}}] = BufferedWrite{false, {int64_t{5}}};
  auto v = validate(1, *s.store, q, 12, writer);
  EXPECT_FALSE(v.valid);
  EXPECT_EQ(v.conflict, AbortReason::kPendingOverlap);
}

TEST(Validate, SequencesIncrease) {
  Store s;
  PendingQueue q;
  auto a = validate(1, *s.store, q, 10, s.read_at(7));
  auto b = validate(1, *s.store, q, 11, s.read_at(7));
  EXPECT_LT(a.sequence, b.sequence);
}

// --- history checks over a real contended run --------------------------------

Task<Value> incr_body(TxnContext& ctx, Value args) {
  Key k{args.at(1).as_int()};
  auto rec = ctx.get("kv", k);
  int64_t next = rec ? rec->get_int("v") + 1 : 1;
  if (rec) ctx.update("kv", k, {{"v", next}});
  else ctx.add("kv", k, {{"v", next}});
  co_return Value(next);
}

Task<Value> pair_body(TxnContext& ctx, Value args) {
  Value here = Value::list({args.at(0), args.at(2)});
  Value mine = co_await ctx.exec_sub("incr", std::move(here), ctx.partition());
  Value there = Value::list({args.at(1), args.at(2)});
  auto target = static_cast<PartitionId>(args.at(1).as_int());
  Value theirs = co_await ctx.exec_sub("incr", std::move(there), target);
  co_return Value::list({mine, theirs});
}

struct ContendedRun {
  std::shared_ptr<Catalog> catalog = std::make_shared<Catalog>();
  std::shared_ptr<Registry> registry = std::make_shared<Registry>();
  std::unique_ptr<Cluster> cluster;
  std::vector<PartitionStore> initial;

  ContendedRun() {
    catalog->define_table({"kv", 1, {"v"}, false});
    registry->register_mapper("first", [](const Value& a) { return a.at(0).as_int(); });
    registry->register_procedure("incr", incr_body, "first");
    registry->register_procedure("pair", pair_body, "first");
    catalog->freeze();
    registry->freeze();
    ClusterConfig c;
    c.num_logical = 4;
    c.num_physical = 4;
    c.mapping = ClusterConfig::round_robin(4, 4);
    c.net_latency_us = 50;
    c.retry_limit = 20;
    cluster = std::make_unique<Cluster>(c, catalog, registry);
    initial = cluster->snapshot();
    for (int i = 0; i < 60; ++i) {
      int64_t home = i % 4, other = (i + 1 + i / 4) % 4;
      if (other == home) other = (home + 1) % 4;
      cluster->submit("pair", Value::list({home, other, int64_t{i % 3}}));
    }
    cluster->run_until_quiescent();
  }
};

TEST(History, ContendedRunPassesChecks) {
  ContendedRun r;
  EXPECT_GT(r.cluster->metrics().committed, 0u);
  auto h = check_history(r.cluster->history(), r.initial);
  EXPECT_TRUE(h.ok) << h.counterexample;
  auto s = verify_serializability(*r.cluster, r.initial);
  EXPECT_TRUE(s.ok) << s.counterexample;
  EXPECT_EQ(s.replayed, r.cluster->metrics().committed);
}

TEST(History, InvertedPairIsReported) {
  ContendedRun r;
  HistoryLog h = r.cluster->history();
  // Find two committed records touching a common partition and swap their
  // global positions.
  auto& recs = h.mutable_records();
  CommitRecord* first = nullptr;
  CommitRecord* second = nullptr;
  for (auto& a : recs) {
    if (!a.committed) continue;
    for (auto& b : recs) {
      if (!b.committed || b.global_index <= a.global_index) continue;
      for (const auto& [p, ea] : a.partitions) {
        auto eb = b.partitions.find(p);
        if (eb == b.partitions.end() || ea.writes.empty() || eb->second.writes.empty()) continue;
        if (ea.writes.front().first == eb->second.writes.front().first) {
          first = &a;
          second = &b;
        }
      }
      if (first) break;
    }
    if (first) break;
  }
  ASSERT_TRUE(first && second);
  std::swap(first->global_index, second->global_index);
  auto hc = check_history(h, r.initial);
  EXPECT_FALSE(hc.ok);
  EXPECT_FALSE(hc.counterexample.empty());
  auto s = verify_serializability(h, r.initial, r.cluster->snapshot(), r.cluster->shared_catalog(),
                                  r.cluster->shared_registry());
  EXPECT_FALSE(s.ok);
  EXPECT_FALSE(s.counterexample.empty());
}

TEST(History, TamperedFinalStateIsReported) {
  ContendedRun r;
  auto finals = r.cluster->snapshot();
  AccessSet acc;
  LocalView(finals[2], acc, false).add("kv", Key{999}, {{"v", int64_t{1}}});
  finals[2].apply(acc);
  auto s = verify_serializability(r.cluster->history(), r.initial, finals, r.cluster->shared_catalog(),
                                  r.cluster->shared_registry());
  EXPECT_FALSE(s.ok);
  EXPECT_NE(s.counterexample.find("partition 2"), std::string::npos) << s.counterexample;
}

TEST(History, SerializationIsCanonical) {
  ContendedRun a, b;
  EXPECT_EQ(a.cluster->history().serialize(*a.catalog), b.cluster->history().serialize(*b.catalog));
}

}  // namespace
}  // namespace tpart
