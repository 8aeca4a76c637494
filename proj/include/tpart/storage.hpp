#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tpart/value.hpp"

namespace tpart {

using PartitionId = uint32_t;
using TableId = uint32_t;
using Key = std::vector<int64_t>;

struct TableSchema {
  std::string name;
  uint32_t key_arity = 1;
  std::vector<std::string> columns;
  bool replicated = false;
};

/// Table definitions shared by every logical partition. Frozen once a cluster
/// is spawned over it.
class Catalog {
 public:
  TableId define_table(TableSchema schema);

  const TableSchema& schema(TableId id) const { return tables_.at(id); }
  TableId id_of(std::string_view name) const;
  std::optional<TableId> find(std::string_view name) const;
  size_t column_index(TableId id, std::string_view column) const;
  size_t size() const { return tables_.size(); }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

 private:
  std::vector<TableSchema> tables_;
  std::map<std::string, TableId, std::less<>> by_name_;
  bool frozen_ = false;
};

struct TableKey {
  TableId table = 0;
  Key key;

  friend auto operator<=>(const TableKey&, const TableKey&) = default;
  friend bool operator==(const TableKey&, const TableKey&) = default;
};

std::string format_table_key(const Catalog& catalog, const TableKey& tk);

/// Copy of a committed (or own-buffered) row handed to procedure code.
struct Record {
  const TableSchema* schema = nullptr;
  Key key;
  std::vector<Scalar> values;
  /// Committed version; 0 for a row that exists only in the caller's write set.
  uint64_t version = 0;

  const Scalar& field(std::string_view column) const;
  int64_t get_int(std::string_view column) const;
  Decimal get_decimal(std::string_view column) const;
  const std::string& get_string(std::string_view column) const;
};

using FieldValues = std::vector<std::pair<std::string, Scalar>>;

struct StoredRecord {
  std::vector<Scalar> values;
  uint64_t version = 0;
};

struct BufferedWrite {
  bool insert = false;
  std::vector<Scalar> values;
};

/// Read and write sets one (sub)transaction tree accumulated on one partition.
/// Versions of 0 record that the key was observed absent.
struct AccessSet {
  std::map<TableKey, uint64_t> reads;
  std::map<TableKey, BufferedWrite> writes;

  bool empty() const { return reads.empty() && writes.empty(); }
};

/// Order-independent digest over (table, key, values) triples. Two lanes of
/// 64-bit sums of per-record hashes, so partition digests add up to the
/// digest of their union.
struct Digest {
  uint64_t lo = 0;
  uint64_t hi = 0;

  Digest& operator+=(const Digest& o) {
    lo += o.lo;
    hi += o.hi;
    return *this;
  }
  std::string hex() const;
  friend bool operator==(const Digest&, const Digest&) = default;
};

Digest record_digest(const TableSchema& schema, const Key& key, const std::vector<Scalar>& values);

/// Versioned in-memory tables owned by one logical partition executor.
class PartitionStore {
 public:
  PartitionStore(PartitionId id, const Catalog& catalog);

  PartitionId id() const { return id_; }
  const Catalog& catalog() const { return *catalog_; }

  const StoredRecord* find(TableId table, const Key& key) const;
  uint64_t version_of(const TableKey& tk) const;
  size_t row_count(TableId table) const { return tables_.at(table).size(); }
  const std::map<Key, StoredRecord>& rows(TableId table) const { return tables_.at(table); }

  /// Installs buffered writes, bumping each touched key's version by one.
  /// Returns the new version per written key.
  std::vector<std::pair<TableKey, uint64_t>> apply(const AccessSet& set);

  Digest digest(bool include_replicated) const;
  Digest digest_tables(const std::function<bool(const TableSchema&)>& pick) const;

 private:
  PartitionId id_;
  const Catalog* catalog_;
  std::vector<std::map<Key, StoredRecord>> tables_;
};

/// Storage operations of one (sub)transaction on its executing partition.
/// Every access goes through the partition's own store and the root's access
/// set for that partition.
class LocalView {
 public:
  LocalView(PartitionStore& store, AccessSet& access, bool broadcast)
      : store_(&store), access_(&access), broadcast_(broadcast) {}

  std::optional<Record> get(std::string_view table, const Key& key);
  void add(std::string_view table, const Key& key, const FieldValues& values);
  void update(std::string_view table, const Key& key, const FieldValues& updates);

  PartitionStore& store() { return *store_; }
  AccessSet& access() { return *access_; }

 private:
  TableKey resolve(std::string_view table, const Key& key) const;
  void check_writable(const TableSchema& schema) const;
  void note_read(const TableKey& tk);

  PartitionStore* store_;
  AccessSet* access_;
  bool broadcast_;
};

}  // namespace tpart
