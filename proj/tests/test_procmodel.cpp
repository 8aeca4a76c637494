#include "tpart/procmodel.hpp"

#include <gtest/gtest.h>

#include <memory>

#include "tpart/netsim.hpp"

namespace tpart {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const EngineError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no EngineError thrown";
  return ErrorCode::kUser;
}

Task<Value> where_body(TxnContext& ctx, Value) { co_return Value(static_cast<int64_t>(ctx.partition())); }

Task<Value> put_body(TxnContext& ctx, Value args) {
  ctx.add("kv", Key{args.at(1).as_int()}, {{"v", args.at(2).as_int()}});
  co_return Value();
}

Task<Value> peek_body(TxnContext& ctx, Value args) {
  auto rec = ctx.get("kv", Key{args.at(1).as_int()});
  co_return rec ? Value(rec->get_int("v")) : Value();
}

// [home, target, k]: inserts kv(k) at home, then the same key at target.
Task<Value> put_both_body(TxnContext& ctx, Value args) {
  ctx.add("kv", Key{args.at(2).as_int()}, {{"v", int64_t{1}}});
  Value sub = Value::list({args.at(1), args.at(2), int64_t{2}});
  auto target = static_cast<PartitionId>(args.at(1).as_int());
  co_await ctx.exec_sub("put", std::move(sub), target);
  co_return Value();
}

// [home, target, k]: calls put on target with the same key twice.
Task<Value> dup_child_body(TxnContext& ctx, Value args) {
  ctx.add("kv", Key{100}, {{"v", int64_t{1}}});
  auto target = static_cast<PartitionId>(args.at(1).as_int());
  Value first = Value::list({args.at(1), args.at(2), int64_t{1}});
  co_await ctx.exec_sub("put", std::move(first), target);
  Value second = Value::list({args.at(1), args.at(2), int64_t{2}});
  co_await ctx.exec_sub("put", std::move(second), target);
  co_return Value();
}

Task<Value> empty_fanout_body(TxnContext& ctx, Value) {
  auto out = co_await ctx.parallel_exec("where", {}, {});
  co_return Value(static_cast<int64_t>(out.size()));
}

Task<Value> sub_where_body(TxnContext& ctx, Value args) {
  Value sub = Value::list({args.at(1)});
  auto target = static_cast<PartitionId>(args.at(1).as_int());
  co_return co_await ctx.exec_sub("where", std::move(sub), target);
}

Task<Value> bad_target_body(TxnContext& ctx, Value) {
  Value sub = Value::list({int64_t{0}});
  co_return co_await ctx.exec_sub("where", std::move(sub), 99);
}

struct Env {
  std::shared_ptr<Catalog> catalog = std::make_shared<Catalog>();
  std::shared_ptr<Registry> registry = std::make_shared<Registry>();

  Env() {
    catalog->define_table({"kv", 1, {"v"}, false});
    registry->register_mapper("map", [](const Value& a) { return a.at(0).as_int(); });
    registry->register_procedure("where", where_body, "map");
    registry->register_procedure("put", put_body, "map");
    registry->register_procedure("peek", peek_body, "map");
    registry->register_procedure("put_both", put_both_body, "map");
    registry->register_procedure("dup_child", dup_child_body, "map");
    registry->register_procedure("empty_fanout", empty_fanout_body, "map");
    registry->register_procedure("sub_where", sub_where_body, "map");
    registry->register_procedure("bad_target", bad_target_body, "map");
    catalog->freeze();
    registry->freeze();
  }

  std::unique_ptr<Cluster> make(uint32_t n) {
    ClusterConfig c;
    c.num_logical = n;
    c.num_physical = n;
    c.mapping = ClusterConfig::round_robin(n, n);
    c.net_latency_us = 100;
    c.cost = CostModel::zero();
    return std::make_unique<Cluster>(c, catalog, registry);
  }
};

TEST(Registry, MapperAndProcedureRegistration) {
  Registry r;
  r.register_mapper("map", [](const Value& a) { return a.at(0).as_int(); });
  EXPECT_EQ(r.map_partition("map", Value::list({3})), 3);
  EXPECT_EQ(r.map_partition("map", Value::list({0})), 0);
  EXPECT_EQ(code_of([&] { r.register_mapper("map", [](const Value&) { return int64_t{0}; }); }),
            ErrorCode::kDuplicateName);
  EXPECT_EQ(code_of([&] { r.map_partition("nope", Value()); }), ErrorCode::kUnknownMapper);
  r.register_procedure("new_order", where_body, "map");
  r.register_procedure("new_order_update_stock", where_body, "map");
  EXPECT_TRUE(r.has_procedure("new_order"));
  EXPECT_EQ(code_of([&] { r.register_procedure("x", where_body, "nope"); }), ErrorCode::kUnknownMapper);
  EXPECT_EQ(code_of([&] { r.register_procedure("new_order", where_body, "map"); }), ErrorCode::kDuplicateName);
  EXPECT_EQ(code_of([&] { r.procedure("nope"); }), ErrorCode::kUnknownProcedure);
  r.freeze();
  EXPECT_EQ(code_of([&] { r.register_procedure("late", where_body, "map"); }), ErrorCode::kRegistryFrozen);
}

TEST(Procmodel, RootRunsOnMappedPartition) {
  Env env;
  auto cl = env.make(4);
  auto out = cl->exec_root("where", Value::list({2}));
  ASSERT_TRUE(out.committed);
  EXPECT_EQ(out.value.as_int(), 2);
}

TEST(Procmodel, MapperOutOfRangeFailsAtInvocation) {
  Env env;
  auto cl = env.make(4);
  EXPECT_EQ(code_of([&] { cl->submit("where", Value::list({4})); }), ErrorCode::kPartitionRange);
  EXPECT_EQ(code_of([&] { cl->submit("where", Value::list({-1})); }), ErrorCode::kPartitionRange);
}

TEST(Procmodel, SubtransactionRunsOnTarget) {
  Env env;
  auto cl = env.make(4);
  auto out = cl->exec_root("sub_where", Value::list({1, 3}));
  ASSERT_TRUE(out.committed);
  EXPECT_EQ(out.value.as_int(), 3);
  EXPECT_EQ(cl->metrics().messages_by_kind["invoke"], 1u);
}

TEST(Procmodel, SamePartitionSubtransactionIsInline) {
  Env env;
  auto cl = env.make(4);
  auto out = cl->exec_root("sub_where", Value::list({2, 2}));
  ASSERT_TRUE(out.committed);
  EXPECT_EQ(out.value.as_int(), 2);
  EXPECT_EQ(cl->run_until_quiescent().messages, 0u);
}

TEST(Procmodel, ChildDuplicateKeyAbortsEverywhere) {
  Env env;
  auto cl = env.make(2);
  const Digest d0 = cl->state_digest(0, true), d1 = cl->state_digest(1, true);
  auto out = cl->exec_root("dup_child", Value::list({0, 1, 5}));
  EXPECT_FALSE(out.committed);
  EXPECT_EQ(out.reason, AbortReason::kUserError);
  cl->run_until_quiescent();
  EXPECT_EQ(cl->state_digest(0, true), d0);
  EXPECT_EQ(cl->state_digest(1, true), d1);
}

TEST(Procmodel, LocalityConfinesReadsToOwnPartition) {
  Env env;
  auto cl = env.make(2);
  ASSERT_TRUE(cl->exec_root("put", Value::list({1, 7, 42})).committed);
  EXPECT_EQ(cl->exec_root("peek", Value::list({1, 7})).value.as_int(), 42);
  EXPECT_TRUE(cl->exec_root("peek", Value::list({0, 7})).value.is_null());
}

TEST(Procmodel, SameKeyOnTwoPartitionsIsIndependent) {
  Env env;
  auto cl = env.make(2);
  ASSERT_TRUE(cl->exec_root("put_both", Value::list({0, 1, 9})).committed);
  EXPECT_EQ(cl->exec_root("peek", Value::list({0, 9})).value.as_int(), 1);
  EXPECT_EQ(cl->exec_root("peek", Value::list({1, 9})).value.as_int(), 2);
}

TEST(Procmodel, EmptyParallelExecSendsNothing) {
  Env env;
  auto cl = env.make(2);
  auto out = cl->exec_root("empty_fanout", Value::list({0}));
  ASSERT_TRUE(out.committed);
  EXPECT_EQ(out.value.as_int(), 0);
  EXPECT_EQ(cl->run_until_quiescent().messages, 0u);
}

TEST(Procmodel, InvalidTargetAbortsRoot) {
  Env env;
  auto cl = env.make(2);
  auto out = cl->exec_root("bad_target", Value::list({0}));
  EXPECT_FALSE(out.committed);
  EXPECT_EQ(out.reason, AbortReason::kUserError);
  EXPECT_NE(out.error.find("out of range"), std::string::npos);
}

TEST(Procmodel, ReadOnlyRootCommits) {
  Env env;
  auto cl = env.make(1);
  auto out = cl->exec_root("peek", Value::list({0, 1}));
  EXPECT_TRUE(out.committed);
  EXPECT_TRUE(out.value.is_null());
}

}  // namespace
}  // namespace tpart
