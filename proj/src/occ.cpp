#include "tpart/occ.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace tpart {

const char* abort_reason_name(AbortReason r) {
  switch (r) {
    case AbortReason::kNone: return "none";
    case AbortReason::kUserError: return "user-error";
    case AbortReason::kValidationConflict: return "validation-conflict";
    case AbortReason::kPendingOverlap: return "pending-overlap";
  }
  return "unknown";
}

std::optional<TableKey> PendingQueue::overlap(const AccessSet& set) const {
  if (parked_.empty()) return std::nullopt;
  for (const auto& [tk, v] : set.reads) {
    if (pending_writes_.count(tk)) return tk;
  }
  for (const auto& [tk, w] : set.writes) {
    if (pending_writes_.count(tk) || pending_reads_.count(tk)) return tk;
  }
  return std::nullopt;
}

uint64_t PendingQueue::park(RootId root, const AccessSet& set) {
  uint64_t seq = ++vote_seq_;
  parked_.emplace(root, seq);
  for (const auto& [tk, v] : set.reads) ++pending_reads_[tk];
  for (const auto& [tk, w] : set.writes) ++pending_writes_[tk];
  return seq;
}

void PendingQueue::unpark(RootId root, const AccessSet& set) {
  if (!parked_.erase(root)) return;
  auto drop = [](std::map<TableKey, uint32_t>& m, const TableKey& tk) {
    auto it = m.find(tk);
    if (it != m.end() && --it->second == 0) m.erase(it);
  };
  for (const auto& [tk, v] : set.reads) drop(pending_reads_, tk);
  for (const auto& [tk, w] : set.writes) drop(pending_writes_, tk);
}

ValidationVote validate(PartitionId partition, const PartitionStore& store, PendingQueue& pending, RootId root,
                        const AccessSet& fragment) {
  ValidationVote vote;
  vote.partition = partition;
  for (const auto& [tk, version] : fragment.reads) {
    if (store.version_of(tk) != version) {
      vote.valid = false;
      vote.conflict = AbortReason::kValidationConflict;
      vote.conflict_key = tk;
      return vote;
    }
  }
  if (auto k = pending.overlap(fragment)) {
    vote.valid = false;
    vote.conflict = AbortReason::kPendingOverlap;
    vote.conflict_key = *k;
    return vote;
  }
  vote.sequence = pending.park(root, fragment);
  return vote;
}

CommitRecord& HistoryLog::append(CommitRecord rec) {
  index_[rec.root_id] = records_.size();
  records_.push_back(std::move(rec));
  return records_.back();
}

CommitRecord* HistoryLog::find(RootId root) {
  auto it = index_.find(root);
  return it == index_.end() ? nullptr : &records_[it->second];
}

std::vector<const CommitRecord*> HistoryLog::committed_in_order() const {
  std::vector<const CommitRecord*> out;
  for (const auto& r : records_) {
    if (r.committed) out.push_back(&r);
  }
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->global_index < b->global_index; });
  return out;
}

void HistoryLog::clear() {
  records_.clear();
  index_.clear();
}

std::string HistoryLog::serialize(const Catalog& catalog) const {
  std::ostringstream os;
  for (const auto& r : records_) {
    os << "g=";
    if (r.committed) os << r.global_index;
    else os << "-";
    os << " root=" << r.root_id << " txn=" << r.txn_name << (r.broadcast ? " broadcast" : "")
       << " outcome=" << (r.committed ? "committed" : std::string("aborted:") + abort_reason_name(r.reason))
       << " args=" << to_hex(r.args) << " ret=" << to_hex(r.result) << " parts=";
    bool first = true;
    for (const auto& [p, e] : r.partitions) {
      os << (first ? "" : ";") << p << ":" << e.vote_sequence << "/" << e.commit_sequence;
      first = false;
    }
    auto dump = [&](const char* label, auto member) {
      os << " " << label << "=";
      bool first_entry = true;
      for (const auto& [p, e] : r.partitions) {
        for (const auto& [tk, v] : e.*member) {
          os << (first_entry ? "" : ",") << p << ":" << format_table_key(catalog, tk) << "@" << v;
          first_entry = false;
        }
      }
    };
    dump("reads", &PartitionEntry::reads);
    dump("writes", &PartitionEntry::writes);
    os << "\n";
  }
  return os.str();
}

HistoryCheck check_history(const HistoryLog& history, const std::vector<PartitionStore>& initial) {
  HistoryCheck out;
  auto fail = [&](std::string msg) {
    if (out.ok) {
      out.ok = false;
      out.counterexample = std::move(msg);
    }
  };

  auto committed = history.committed_in_order();
  std::set<uint64_t> seen;
  for (const auto* r : committed) {
    if (r->global_index == 0 || !seen.insert(r->global_index).second) {
      throw EngineError(ErrorCode::kMalformedHistory,
                        "root " + std::to_string(r->root_id) + " has a zero or repeated global index");
    }
    for (const auto& [p, e] : r->partitions) {
      if (p >= initial.size()) throw EngineError(ErrorCode::kMalformedHistory, "record names unknown partition");
      if (e.commit_sequence == 0) {
        throw EngineError(ErrorCode::kMalformedHistory,
                          "root " + std::to_string(r->root_id) + " committed without applying on partition " +
                              std::to_string(p));
      }
    }
  }

  // Conflicting pairs must be ordered the same way locally and globally.
  struct Access {
    uint64_t local;
    uint64_t global;
    RootId root;
    bool write;
  };
  std::map<std::pair<PartitionId, TableKey>, std::vector<Access>> by_key;
  for (const auto* r : committed) {
    for (const auto& [p, e] : r->partitions) {
      std::set<TableKey> written;
      for (const auto& [tk, v] : e.writes) written.insert(tk);
      for (const auto& tk : written) by_key[{p, tk}].push_back({e.commit_sequence, r->global_index, r->root_id, true});
      for (const auto& [tk, v] : e.reads) {
        if (!written.count(tk)) by_key[{p, tk}].push_back({e.commit_sequence, r->global_index, r->root_id, false});
      }
    }
  }
  const Catalog* catalog = initial.empty() ? nullptr : &initial.front().catalog();
  for (auto& [pk, accesses] : by_key) {
    std::sort(accesses.begin(), accesses.end(), [](const Access& a, const Access& b) { return a.local < b.local; });
    const Access* last_any = nullptr;
    const Access* last_write = nullptr;
    for (const auto& a : accesses) {
      const Access* prior = a.write ? last_any : last_write;
      if (prior && prior->global > a.global) {
        fail("partition " + std::to_string(pk.first) + " key " + format_table_key(*catalog, pk.second) + ": root " +
             std::to_string(prior->root) + " (local " + std::to_string(prior->local) + ", global " +
             std::to_string(prior->global) + ") precedes root " + std::to_string(a.root) + " (local " +
             std::to_string(a.local) + ", global " + std::to_string(a.global) + ") locally but not globally");
        return out;
      }
      if (!last_any || a.global > last_any->global) last_any = &a;
      if (a.write && (!last_write || a.global > last_write->global)) last_write = &a;
    }
  }

  // Version chains replayed in global order.
  std::map<std::pair<PartitionId, TableKey>, uint64_t> current;
  auto version = [&](PartitionId p, const TableKey& tk) -> uint64_t& {
    auto [it, inserted] = current.try_emplace({p, tk}, 0);
    if (inserted) it->second = initial[p].version_of(tk);
    return it->second;
  };
  for (const auto* r : committed) {
    for (const auto& [p, e] : r->partitions) {
      for (const auto& [tk, v] : e.reads) {
        if (version(p, tk) != v) {
          fail("root " + std::to_string(r->root_id) + " (global " + std::to_string(r->global_index) + ") read " +
               format_table_key(*catalog, tk) + "@" + std::to_string(v) + " on partition " + std::to_string(p) +
               " but the serial order has version " + std::to_string(version(p, tk)));
          return out;
        }
      }
      for (const auto& [tk, v] : e.writes) {
        uint64_t& cur = version(p, tk);
        if (v != cur + 1) {
          fail("root " + std::to_string(r->root_id) + " installed " + format_table_key(*catalog, tk) + "@" +
               std::to_string(v) + " on partition " + std::to_string(p) + " over version " + std::to_string(cur));
          return out;
        }
        cur = v;
      }
    }
  }
  return out;
}

}  // namespace tpart
