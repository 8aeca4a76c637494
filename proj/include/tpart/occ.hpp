#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tpart/procmodel.hpp"
#include "tpart/storage.hpp"

namespace tpart {

enum class AbortReason { kNone, kUserError, kValidationConflict, kPendingOverlap };

const char* abort_reason_name(AbortReason r);

struct ValidationVote {
  PartitionId partition = 0;
  bool valid = true;
  /// Local validation sequence number; meaningful only when valid.
  uint64_t sequence = 0;
  /// kValidationConflict (stale read) or kPendingOverlap when !valid.
  AbortReason conflict = AbortReason::kNone;
  std::optional<TableKey> conflict_key;
};

/// Validated-but-undecided fragments on one partition, plus the local
/// validation and commit counters.
class PendingQueue {
 public:
  bool contains(RootId root) const { return parked_.count(root) > 0; }
  size_t size() const { return parked_.size(); }

  /// Returns the first key of `set` that collides with a parked fragment:
  /// any read or write of `set` against a parked write, or a write of `set`
  /// against a parked read.
  std::optional<TableKey> overlap(const AccessSet& set) const;

  uint64_t park(RootId root, const AccessSet& set);
  void unpark(RootId root, const AccessSet& set);
  uint64_t next_commit_sequence() { return ++commit_seq_; }

 private:
  std::map<RootId, uint64_t> parked_;
  std::map<TableKey, uint32_t> pending_writes_;
  std::map<TableKey, uint32_t> pending_reads_;
  uint64_t vote_seq_ = 0;
  uint64_t commit_seq_ = 0;
};

/// Backward validation of one fragment on its owning partition. On a Valid
/// verdict the fragment is parked in `pending` with the next local sequence.
ValidationVote validate(PartitionId partition, const PartitionStore& store, PendingQueue& pending, RootId root,
                        const AccessSet& fragment);

/// What one committed (or aborted) root did on one partition.
struct PartitionEntry {
  uint64_t vote_sequence = 0;
  /// Position in the partition's local commit (apply) order; 0 if never applied.
  uint64_t commit_sequence = 0;
  std::vector<std::pair<TableKey, uint64_t>> reads;
  /// Installed version per written key.
  std::vector<std::pair<TableKey, uint64_t>> writes;
};

struct CommitRecord {
  RootId root_id = 0;
  std::string txn_name;
  bool broadcast = false;
  std::vector<uint8_t> args;
  std::vector<uint8_t> result;
  bool committed = false;
  AbortReason reason = AbortReason::kNone;
  /// Position in the cluster-wide commit log; 0 for aborted attempts.
  uint64_t global_index = 0;
  std::map<PartitionId, PartitionEntry> partitions;
};

/// Append-only record of every decided root attempt, in decision order.
class HistoryLog {
 public:
  CommitRecord& append(CommitRecord rec);
  CommitRecord* find(RootId root);
  const std::vector<CommitRecord>& records() const { return records_; }
  std::vector<CommitRecord>& mutable_records() { return records_; }
  std::vector<const CommitRecord*> committed_in_order() const;
  void clear();

  /// Line-delimited canonical form; byte-identical across equal-seed runs.
  std::string serialize(const Catalog& catalog) const;

 private:
  std::vector<CommitRecord> records_;
  std::map<RootId, size_t> index_;
};

struct HistoryCheck {
  bool ok = true;
  std::string counterexample;
};

/// Structural and ordering checks that need no replay:
///  - committed records carry distinct, positive global indices;
///  - on every partition, conflicting committed transactions appear in the
///    global log in their local commit order;
///  - replaying versions in global order from `initial_versions`, every read
///    saw the latest version and every write installed latest + 1.
HistoryCheck check_history(const HistoryLog& history, const std::vector<PartitionStore>& initial);

}  // namespace tpart
