#include "tpart/storage.hpp"

#include <cstdio>
#include <set>

#include "tpart/errors.hpp"

namespace tpart {

TableId Catalog::define_table(TableSchema schema) {
  if (frozen_) throw EngineError(ErrorCode::kRegistryFrozen, "catalog is frozen; define tables before start");
  if (schema.name.empty()) throw EngineError(ErrorCode::kInvalidSchema, "table name is empty");
  if (schema.key_arity == 0) throw EngineError(ErrorCode::kInvalidSchema, "table " + schema.name + ": key_arity must be >= 1");
  if (by_name_.count(schema.name)) throw EngineError(ErrorCode::kDuplicateName, "table " + schema.name + " already defined");
  std::set<std::string_view> seen;
  for (const auto& c : schema.columns) {
    if (!seen.insert(c).second) throw EngineError(ErrorCode::kInvalidSchema, "table " + schema.name + ": duplicate column " + c);
  }
  auto id = static_cast<TableId>(tables_.size());
  by_name_.emplace(schema.name, id);
  tables_.push_back(std::move(schema));
  return id;
}

std::optional<TableId> Catalog::find(std::string_view name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

TableId Catalog::id_of(std::string_view name) const {
  auto id = find(name);
  if (!id) throw EngineError(ErrorCode::kUnknownTable, "unknown table " + std::string(name));
  return *id;
}

size_t Catalog::column_index(TableId id, std::string_view column) const {
  const auto& cols = tables_.at(id).columns;
  for (size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] == column) return i;
  }
  throw EngineError(ErrorCode::kUnknownColumn, "table " + tables_.at(id).name + " has no column " + std::string(column));
}

std::string format_table_key(const Catalog& catalog, const TableKey& tk) {
  std::string s = catalog.schema(tk.table).name + "(";
  for (size_t i = 0; i < tk.key.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(tk.key[i]);
  }
  return s + ")";
}

const Scalar& Record::field(std::string_view column) const {
  for (size_t i = 0; i < schema->columns.size(); ++i) {
    if (schema->columns[i] == column) return values[i];
  }
  throw EngineError(ErrorCode::kUnknownColumn, "table " + schema->name + " has no column " + std::string(column));
}

int64_t Record::get_int(std::string_view column) const {
  const auto* v = std::get_if<int64_t>(&field(column));
  if (!v) throw EngineError(ErrorCode::kDecode, std::string(column) + " is not an integer");
  return *v;
}

Decimal Record::get_decimal(std::string_view column) const {
  const auto* v = std::get_if<Decimal>(&field(column));
  if (!v) throw EngineError(ErrorCode::kDecode, std::string(column) + " is not a decimal");
  return *v;
}

const std::string& Record::get_string(std::string_view column) const {
  const auto* v = std::get_if<std::string>(&field(column));
  if (!v) throw EngineError(ErrorCode::kDecode, std::string(column) + " is not a string");
  return *v;
}

namespace {

constexpr uint64_t kFnvPrime = 0x100000001b3ULL;

uint64_t fnv1a(const std::vector<uint8_t>& bytes, uint64_t basis) {
  uint64_t h = basis;
  for (uint8_t b : bytes) {
    h ^= b;
    h *= kFnvPrime;
  }
  return h;
}

uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::string Digest::hex() const {
  char buf[33];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx", static_cast<unsigned long long>(hi),
                static_cast<unsigned long long>(lo));
  return buf;
}

Digest record_digest(const TableSchema& schema, const Key& key, const std::vector<Scalar>& values) {
  std::vector<uint8_t> bytes(schema.name.begin(), schema.name.end());
  bytes.push_back(0);
  Value::List k;
  for (int64_t part : key) k.emplace_back(part);
  Value(std::move(k)).encode_to(bytes);
  for (const auto& v : values) Value::from_scalar(v).encode_to(bytes);
  return Digest{mix64(fnv1a(bytes, 0xcbf29ce484222325ULL)), mix64(fnv1a(bytes, 0x84222325cbf29ce4ULL) ^ 0x9e3779b97f4a7c15ULL)};
}

PartitionStore::PartitionStore(PartitionId id, const Catalog& catalog)
    : id_(id), catalog_(&catalog), tables_(catalog.size()) {}

const StoredRecord* PartitionStore::find(TableId table, const Key& key) const {
  const auto& t = tables_.at(table);
  auto it = t.find(key);
  return it == t.end() ? nullptr : &it->second;
}

uint64_t PartitionStore::version_of(const TableKey& tk) const {
  const auto* r = find(tk.table, tk.key);
  return r ? r->version : 0;
}

std::vector<std::pair<TableKey, uint64_t>> PartitionStore::apply(const AccessSet& set) {
  std::vector<std::pair<TableKey, uint64_t>> installed;
  installed.reserve(set.writes.size());
  for (const auto& [tk, w] : set.writes) {
    auto& rec = tables_.at(tk.table)[tk.key];
    rec.values = w.values;
    rec.version += 1;
    installed.emplace_back(tk, rec.version);
  }
  return installed;
}

Digest PartitionStore::digest_tables(const std::function<bool(const TableSchema&)>& pick) const {
  Digest d;
  for (TableId t = 0; t < tables_.size(); ++t) {
    const auto& schema = catalog_->schema(t);
    if (!pick(schema)) continue;
    for (const auto& [key, rec] : tables_[t]) d += record_digest(schema, key, rec.values);
  }
  return d;
}

Digest PartitionStore::digest(bool include_replicated) const {
  return digest_tables([&](const TableSchema& s) { return include_replicated || !s.replicated; });
}

TableKey LocalView::resolve(std::string_view table, const Key& key) const {
  TableId id = store_->catalog().id_of(table);
  const auto& schema = store_->catalog().schema(id);
  if (key.size() != schema.key_arity) {
    throw EngineError(ErrorCode::kInvalidSchema, "table " + schema.name + " expects " + std::to_string(schema.key_arity) +
                                                     " key components, got " + std::to_string(key.size()));
  }
  return TableKey{id, key};
}

void LocalView::check_writable(const TableSchema& schema) const {
  if (schema.replicated && !broadcast_) {
    throw EngineError(ErrorCode::kReplicatedWrite, "table " + schema.name + " is replicated; writes need a broadcast transaction");
  }
}

void LocalView::note_read(const TableKey& tk) {
  access_->reads.try_emplace(tk, store_->version_of(tk));
}

std::optional<Record> LocalView::get(std::string_view table, const Key& key) {
  TableKey tk = resolve(table, key);
  const auto& schema = store_->catalog().schema(tk.table);
  note_read(tk);
  if (auto w = access_->writes.find(tk); w != access_->writes.end()) {
    return Record{&schema, key, w->second.values, store_->version_of(tk)};
  }
  const auto* rec = store_->find(tk.table, key);
  if (!rec) return std::nullopt;
  return Record{&schema, key, rec->values, rec->version};
}

void LocalView::add(std::string_view table, const Key& key, const FieldValues& values) {
  TableKey tk = resolve(table, key);
  const auto& schema = store_->catalog().schema(tk.table);
  check_writable(schema);
  if (values.size() != schema.columns.size()) {
    throw EngineError(ErrorCode::kInvalidSchema, "add to " + schema.name + " must supply every column");
  }
  std::vector<Scalar> row(schema.columns.size());
  std::vector<bool> seen(schema.columns.size(), false);
  for (const auto& [col, v] : values) {
    size_t i = store_->catalog().column_index(tk.table, col);
    if (seen[i]) throw EngineError(ErrorCode::kInvalidSchema, "column " + col + " given twice");
    seen[i] = true;
    row[i] = v;
  }
  if (access_->writes.count(tk) || store_->find(tk.table, key)) {
    throw EngineError(ErrorCode::kDuplicateKey, "duplicate key " + format_table_key(store_->catalog(), tk));
  }
  note_read(tk);
  access_->writes.emplace(tk, BufferedWrite{true, std::move(row)});
}

void LocalView::update(std::string_view table, const Key& key, const FieldValues& updates) {
  TableKey tk = resolve(table, key);
  const auto& schema = store_->catalog().schema(tk.table);
  check_writable(schema);
  std::vector<std::pair<size_t, const Scalar*>> cols;
  cols.reserve(updates.size());
  for (const auto& [col, v] : updates) cols.emplace_back(store_->catalog().column_index(tk.table, col), &v);

  auto w = access_->writes.find(tk);
  if (w == access_->writes.end()) {
    const auto* rec = store_->find(tk.table, key);
    if (!rec) throw EngineError(ErrorCode::kNotFound, "no row " + format_table_key(store_->catalog(), tk) + " on this partition");
    note_read(tk);
    w = access_->writes.emplace(tk, BufferedWrite{false, rec->values}).first;
  }
  for (const auto& [i, v] : cols) w->second.values[i] = *v;
}

}  // namespace tpart
