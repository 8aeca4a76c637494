#include "tpart/storage.hpp"

#include <gtest/gtest.h>

#include "tpart/errors.hpp"

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

struct Fixture {
  Catalog catalog;
  TableId item, district, new_order;

  Fixture() {
    item = catalog.define_table({"item", 1, {"price", "name"}, true});
    district = catalog.define_table({"district", 2, {"tax", "next_o_id"}, false});
    new_order = catalog.define_table({"new_order", 3, {}, false});
  }
};

TEST(Catalog, DefineAndLookup) {
  Fixture f;
  EXPECT_EQ(f.catalog.id_of("district"), f.district);
  EXPECT_TRUE(f.catalog.schema(f.item).replicated);
  EXPECT_EQ(f.catalog.column_index(f.district, "next_o_id"), 1u);
  EXPECT_FALSE(f.catalog.find("nope"));
  EXPECT_EQ(code_of([&] { f.catalog.define_table({"district", 2, {"x"}, false}); }), ErrorCode::kDuplicateName);
  EXPECT_EQ(code_of([&] { f.catalog.define_table({"bad", 0, {"x"}, false}); }), ErrorCode::kInvalidSchema);
  EXPECT_EQ(code_of([&] { f.catalog.define_table({"bad", 1, {"x", "x"}, false}); }), ErrorCode::kInvalidSchema);
  EXPECT_EQ(code_of([&] { f.catalog.id_of("nope"); }), ErrorCode::kUnknownTable);
  f.catalog.freeze();
  EXPECT_EQ(code_of([&] { f.catalog.define_table({"late", 1, {"x"}, false}); }), ErrorCode::kRegistryFrozen);
}

TEST(Storage, AddCommitsAtVersionOne) {
  Fixture f;
  PartitionStore store(1, f.catalog);
  AccessSet acc;
  LocalView view(store, acc, false);
  view.add("new_order", Key{1, 1, 1}, {});
  EXPECT_EQ(store.find(f.new_order, Key{1, 1, 1}), nullptr);
  store.apply(acc);
  ASSERT_NE(store.find(f.new_order, Key{1, 1, 1}), nullptr);
  EXPECT_EQ(store.find(f.new_order, Key{1, 1, 1})->version, 1u);
}

TEST(Storage, DiscardedWriteSetLeavesKeyAbsent) {
  Fixture f;
  PartitionStore store(1, f.catalog);
  {
    AccessSet acc;
    LocalView view(store, acc, false);
    view.add("new_order", Key{1, 1, 1}, {});
  }
  EXPECT_EQ(store.row_count(f.new_order), 0u);
}

TEST(Storage, DuplicateKeyRejected) {
  Fixture f;
  PartitionStore store(1, f.catalog);
  AccessSet acc;
  LocalView(store, acc, false).add("new_order", Key{1, 1, 1}, {});
  store.apply(acc);
  AccessSet acc2;
  LocalView view(store, acc2, false);
  EXPECT_EQ(code_of([&] { view.add("new_order", Key{1, 1, 1}, {}); }), ErrorCode::kDuplicateKey);
  view.add("new_order", Key{1, 1, 2}, {});
  EXPECT_EQ(code_of([&] { view.add("new_order", Key{1, 1, 2}, {}); }), ErrorCode::kDuplicateKey);
}

TEST(Storage, UpdateBumpsVersionMonotonically) {
  Fixture f;
  PartitionStore store(1, f.catalog);
  AccessSet load;
  LocalView(store, load, false).add("district", Key{1, 1}, {{"tax", Decimal::parse("0.1")}, {"next_o_id", int64_t{1}}});
  store.apply(load);
  for (int64_t next = 2; next <= 3; ++next) {
    AccessSet acc;
    LocalView view(store, acc, false);
    auto rec = view.get("district", Key{1, 1});
    ASSERT_TRUE(rec);
    EXPECT_EQ(rec->get_int("next_o_id"), next - 1);
    view.update("district", Key{1, 1}, {{"next_o_id", next}});
    EXPECT_EQ(acc.reads.at(TableKey{f.district, Key{1, 1}}), static_cast<uint64_t>(next - 1));
    store.apply(acc);
  }
  EXPECT_EQ(store.find(f.district, Key{1, 1})->version, 3u);
  EXPECT_EQ(std::get<int64_t>(store.find(f.district, Key{1, 1})->values[1]), 3);
}

TEST(Storage, ReadYourWrites) {
  Fixture f;
  PartitionStore store(1, f.catalog);
  AccessSet acc;
  LocalView view(store, acc, false);
  view.add("district", Key{1, 1}, {{"tax", Decimal()}, {"next_o_id", int64_t{1}}});
  view.update("district", Key{1, 1}, {{"next_o_id", int64_t{5}}});
  auto rec = view.get("district", Key{1, 1});
  ASSERT_TRUE(rec);
  EXPECT_EQ(rec->get_int("next_o_id"), 5);
  EXPECT_EQ(rec->version, 0u);
}

TEST(Storage, ForeignKeysAreMissing) {
  Fixture f;
  PartitionStore p1(1, f.catalog), p2(2, f.catalog);
  AccessSet load;
  LocalView(p2, load, false).add("district", Key{2, 1}, {{"tax", Decimal()}, {"next_o_id", int64_t{1}}});
  p2.apply(load);
  AccessSet acc;
  LocalView view(p1, acc, false);
  EXPECT_FALSE(view.get("district", Key{2, 1}));
  EXPECT_EQ(acc.reads.at(TableKey{f.district, Key{2, 1}}), 0u);
  EXPECT_EQ(code_of([&] { view.update("district", Key{2, 1}, {{"next_o_id", int64_t{2}}}); }), ErrorCode::kNotFound);
}

TEST(Storage, SchemaChecks) {
  Fixture f;
  PartitionStore store(1, f.catalog);
  AccessSet acc;
  LocalView view(store, acc, false);
  EXPECT_EQ(code_of([&] { view.add("district", Key{1, 1}, {{"tax", Decimal()}}); }), ErrorCode::kInvalidSchema);
  EXPECT_EQ(code_of([&] { view.get("district", Key{1}); }), ErrorCode::kInvalidSchema);
  EXPECT_EQ(code_of([&] { view.get("nope", Key{1}); }), ErrorCode::kUnknownTable);
  EXPECT_EQ(code_of([&] {
              view.add("district", Key{1, 1}, {{"tax", Decimal()}, {"zzz", int64_t{1}}});
            }),
            ErrorCode::kUnknownColumn);
}

TEST(Storage, ReplicatedWritesNeedBroadcast) {
  Fixture f;
  PartitionStore store(1, f.catalog);
  AccessSet acc;
  LocalView plain(store, acc, false);
  EXPECT_EQ(code_of([&] { plain.add("item", Key{1}, {{"price", Decimal::parse("5")}, {"name", "x"}}); }),
            ErrorCode::kReplicatedWrite);
  LocalView bcast(store, acc, true);
  bcast.add("item", Key{1}, {{"price", Decimal::parse("5")}, {"name", "x"}});
  store.apply(acc);
  EXPECT_EQ(store.row_count(f.item), 1u);
}

TEST(Storage, DigestProperties) {
  Fixture f;
  PartitionStore a(1, f.catalog), b(1, f.catalog);
  EXPECT_EQ(a.digest(true), Digest{});
  EXPECT_EQ(a.digest(true).hex(), Digest{}.hex());
  auto load = [](PartitionStore& s) {
    AccessSet acc;
    LocalView(s, acc, true).add("district", Key{1, 1}, {{"tax", Decimal()}, {"next_o_id", int64_t{1}}});
    LocalView(s, acc, true).add("item", Key{1}, {{"price", Decimal::parse("5")}, {"name", "x"}});
    s.apply(acc);
  };
  load(a);
  load(b);
  EXPECT_EQ(a.digest(true), b.digest(true));
  EXPECT_NE(a.digest(true), a.digest(false));
  AccessSet acc;
  LocalView(b, acc, false).update("district", Key{1, 1}, {{"next_o_id", int64_t{2}}});
  b.apply(acc);
  EXPECT_NE(a.digest(true), b.digest(true));
}

TEST(Storage, DigestIsAdditiveOverRecords) {
  Fixture f;
  const auto& s = f.catalog.schema(f.new_order);
  Digest sum = record_digest(s, Key{1, 1, 1}, {});
  sum += record_digest(s, Key{1, 1, 2}, {});
  PartitionStore store(1, f.catalog);
  AccessSet acc;
  LocalView view(store, acc, false);
  view.add("new_order", Key{1, 1, 2}, {});
  view.add("new_order", Key{1, 1, 1}, {});
  store.apply(acc);
  EXPECT_EQ(store.digest(false), sum);
}

}  // namespace
}  // namespace tpart
