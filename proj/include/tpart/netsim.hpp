#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "tpart/occ.hpp"
#include "tpart/procmodel.hpp"
#include "tpart/storage.hpp"

namespace tpart {

/// Simulated time in nanoseconds. Reported outward in microseconds.
using SimTime = int64_t;

inline double to_us(SimTime t) { return static_cast<double>(t) / 1000.0; }

/// Simulated CPU cost of executor work, in nanoseconds.
struct CostModel {
  SimTime message_ns = 1000;
  SimTime txn_begin_ns = 500;
  SimTime storage_op_ns = 200;
  SimTime send_ns = 100;
  SimTime validate_key_ns = 50;
  SimTime apply_write_ns = 100;

  static CostModel zero() { return CostModel{0, 0, 0, 0, 0, 0}; }
};

struct ClusterConfig {
  uint32_t num_logical = 1;
  uint32_t num_physical = 1;
  /// logical id -> physical worker id; must cover every logical partition.
  std::vector<uint32_t> mapping;
  /// One-way latency between distinct physical workers; co-located is 0.
  double net_latency_us = 0.0;
  uint64_t seed = 0;
  /// Each remote delivery is scaled by (1 + jitter * u), u uniform in [-1, 1].
  double latency_jitter = 0.0;
  /// Immediate retries granted to a root aborted by validation.
  uint32_t retry_limit = 5;
  /// Livelock guard on simulated time since the last metrics reset.
  double max_sim_time_us = 3.6e9;
  CostModel cost;
  bool trace = false;

  /// Round-robin mapping of `num_logical` partitions onto `num_physical` workers.
  static std::vector<uint32_t> round_robin(uint32_t num_logical, uint32_t num_physical);
  /// Parses "key = value" lines whose keys are this struct's field names;
  /// mapping is written "0:0,1:0,2:1". Unknown keys are an error.
  static ClusterConfig parse_kv(const std::string& text, ClusterConfig base);
  static ClusterConfig parse_kv(const std::string& text);
  void validate() const;
};

enum class MessageKind { kInvoke, kResult, kValidate, kVote, kDecide, kBroadcast };

const char* message_kind_name(MessageKind k);

struct MessageEnvelope {
  MessageKind kind = MessageKind::kInvoke;
  PartitionId src = 0;
  PartitionId dst = 0;
  RootId root_id = 0;
  /// Canonical protocol header (ids, flags, participant lists).
  std::vector<uint8_t> header;
  /// Invoke args or result value bytes; empty for a null result.
  std::vector<uint8_t> payload;
  SimTime send_time = 0;
  SimTime deliver_time = 0;
  bool local = false;  // src and dst share a physical worker
};

struct AbortCounts {
  uint64_t user_error = 0;
  uint64_t validation_conflict = 0;
  uint64_t pending_overlap = 0;

  uint64_t total() const { return user_error + validation_conflict + pending_overlap; }
};

struct MetricsReport {
  uint64_t submitted = 0;
  uint64_t committed = 0;
  /// Final outcomes that did not commit (after retries).
  uint64_t aborted = 0;
  /// Every aborted attempt, before retry.
  AbortCounts aborts;
  double makespan_us = 0.0;
  double throughput_tps = 0.0;
  double latency_p50_us = 0.0;
  double latency_p95_us = 0.0;
  double latency_p99_us = 0.0;
  double body_latency_p50_us = 0.0;
  uint64_t messages = 0;
  uint64_t local_messages = 0;
  double messages_per_txn = 0.0;
  double remote_subtxns_per_txn = 0.0;
  uint64_t child_result_bytes = 0;
  std::map<std::string, uint64_t> messages_by_kind;
  std::vector<double> worker_busy_fraction;
};

/// Final outcome of one submission (across retries).
struct Outcome {
  bool committed = false;
  Value value;
  AbortReason reason = AbortReason::kNone;
  std::string error;
  uint32_t attempts = 0;
  RootId root_id = 0;
  uint64_t global_index = 0;
  SimTime submit_time = 0;
  SimTime finish_time = 0;
  SimTime body_start = 0;
  SimTime body_end = 0;

  double latency_us() const { return to_us(finish_time - submit_time); }
  double body_latency_us() const { return to_us(body_end - body_start); }
};

using Ticket = uint64_t;

/// Per-logical-partition load and symmetric inter-partition message rates
/// measured over the current metrics window.
struct MeasuredProfile {
  std::vector<double> load;
  std::vector<std::vector<double>> traffic;
};

/// Deterministic in-process cluster. One executor per logical partition,
/// hosted on physical workers that each process one event at a time. All
/// execution happens inside the discrete-event loop driven by await() and
/// run_until_quiescent().
class Cluster final : private Runtime {
 public:
  Cluster(ClusterConfig config, std::shared_ptr<const Catalog> catalog, std::shared_ptr<const Registry> registry);
  ~Cluster() override;
  Cluster(const Cluster&) = delete;
  Cluster& operator=(const Cluster&) = delete;

  const ClusterConfig& config() const { return config_; }
  const Catalog& catalog() const { return *catalog_; }
  const Registry& registry() const { return *registry_; }
  std::shared_ptr<const Catalog> shared_catalog() const { return catalog_; }
  std::shared_ptr<const Registry> shared_registry() const { return registry_; }
  uint32_t num_partitions() const override { return config_.num_logical; }

  /// Enqueues a root transaction on the partition its mapper selects.
  /// Throws for unknown procedures and out-of-range mapper results.
  Ticket submit(const std::string& txn_name, Value args);
  /// Like submit, with a completion callback run inside the event loop.
  Ticket submit(const std::string& txn_name, Value args, std::function<void(const Outcome&)> on_done);
  /// Runs `txn_name` once on every logical partition with identical args, in
  /// one root commit, with replicated-table writes allowed.
  Ticket submit_broadcast(const std::string& txn_name, Value args);

  const Outcome& await(Ticket t);
  /// submit + await.
  Outcome exec_root(const std::string& txn_name, Value args);

  MetricsReport run_until_quiescent();
  /// Starts a fresh metrics window: counters, latency samples, busy time and
  /// the history log are cleared. Requires quiescence.
  void reset_metrics();
  MetricsReport metrics() const;
  MeasuredProfile measured_profile() const;

  /// Simulated microseconds; monotone.
  double now() const;
  SimTime now_ns() const;

  bool quiescent() const;
  Digest state_digest(PartitionId partition, bool include_replicated) const;
  /// Sum of per-partition digests over tables chosen by `pick`.
  Digest cluster_digest(const std::function<bool(const TableSchema&)>& pick) const;
  const PartitionStore& store(PartitionId p) const { return executors_.at(p).store; }
  std::vector<PartitionStore> snapshot() const;
  /// Replaces partition contents; requires quiescence and a matching layout.
  void restore(const std::vector<PartitionStore>& stores);

  const HistoryLog& history() const { return history_; }
  const std::vector<MessageEnvelope>& trace() const { return trace_; }
  std::string trace_text() const;
  uint32_t physical_of(PartitionId p) const { return config_.mapping.at(p); }

  /// Partitions currently holding a fragment for `root`.
  std::set<PartitionId> partitions_holding(RootId root) const;
  /// Observer invoked when a root body finishes, before validation.
  void set_body_done_hook(std::function<void(RootId, const std::set<PartitionId>& participants)> hook) {
    body_done_hook_ = std::move(hook);
  }

 private:
  struct Submission {
    Ticket ticket;
  };
  using InboxItem = std::variant<MessageEnvelope, Submission>;

  struct Fragment {
    AccessSet access;
    bool parked = false;
  };

  struct RootState {
    Ticket ticket = 0;
    std::set<PartitionId> participants;
    std::map<PartitionId, ValidationVote> votes;
    size_t votes_expected = 0;
    bool deciding = false;
    std::vector<uint8_t> result;
  };

  struct Executor {
    PartitionId id;
    PartitionStore store;
    std::map<RootId, Fragment> fragments;
    PendingQueue pending;
    std::map<RootId, RootState> roots;
    SimTime busy_ns = 0;  // attributed to this logical partition
    uint64_t roots_started = 0;
  };

  struct Worker {
    std::deque<InboxItem> inbox;
    SimTime busy_until = 0;
    SimTime busy_ns = 0;
    bool scheduled = false;
  };

  struct TicketState {
    std::string txn_name;
    Value args;
    std::vector<uint8_t> args_bytes;
    bool broadcast = false;
    PartitionId home = 0;
    std::function<void(const Outcome&)> on_done;
    bool done = false;
    Outcome outcome;
  };

  struct EventKey {
    SimTime time;
    uint64_t src_rank;
    uint64_t seq;
    friend auto operator<=>(const EventKey&, const EventKey&) = default;
  };
  struct Delivery {
    MessageEnvelope msg;
  };
  struct SubmitEvent {
    Ticket ticket;
  };
  struct WorkerRun {
    uint32_t worker;
  };
  using Event = std::variant<Delivery, SubmitEvent, WorkerRun>;

  // Runtime
  CallId start_remote(TxnContext& caller, const std::string& proc, const Value& args, PartitionId target) override;
  CallSlot& slot(CallId id) override;
  void release(CallId id) override;
  void charge_storage_op() override { charge(config_.cost.storage_op_ns); }
  void note_inline_call() override {}

  Ticket enqueue_ticket(TicketState state);
  void schedule(SimTime time, uint64_t src_rank, Event ev);
  bool step();
  void run_worker(uint32_t worker);
  void handle(Executor& ex, InboxItem item);
  void handle_submission(Executor& ex, Ticket ticket);
  void handle_invoke(Executor& ex, MessageEnvelope msg);
  void handle_result(Executor& ex, const MessageEnvelope& msg);
  void handle_validate(Executor& ex, const MessageEnvelope& msg);
  void handle_vote(Executor& ex, const MessageEnvelope& msg);
  void handle_decide(Executor& ex, const MessageEnvelope& msg);

  Detached drive_root(PartitionId home, RootId root, Ticket ticket);
  Detached drive_child(PartitionId at, RootId root, CallId call, PartitionId caller, std::string proc, Value args,
                       uint32_t depth, bool broadcast);
  Task<Value> broadcast_body(TxnContext& ctx, std::string proc, Value args);

  void on_body_done(PartitionId home, RootId root, std::optional<Value> result, AbortReason reason,
                    std::string error);
  void on_vote(Executor& ex, RootId root, ValidationVote vote);
  void decide(Executor& ex, RootId root);
  void finish_attempt(Executor& ex, RootId root, bool committed, AbortReason reason, std::string error,
                      uint64_t global_index);
  void commit_fragment(Executor& ex, RootId root);
  void discard_fragment(Executor& ex, RootId root);

  void send(MessageKind kind, PartitionId src, PartitionId dst, RootId root, Value header,
            std::vector<uint8_t> payload = {});
  SimTime latency(uint32_t src_worker, uint32_t dst_worker);
  void charge(SimTime ns) { step_charge_ += ns; }
  SimTime step_now() const { return step_start_ + step_charge_; }
  Executor& executor(PartitionId p) { return executors_.at(p); }

  ClusterConfig config_;
  std::shared_ptr<const Catalog> catalog_;
  std::shared_ptr<const Registry> registry_;
  std::vector<Executor> executors_;
  std::vector<Worker> workers_;
  std::map<EventKey, Event> events_;
  std::map<Ticket, TicketState> tickets_;
  std::map<CallId, CallSlot> calls_;
  HistoryLog history_;
  std::vector<MessageEnvelope> trace_;
  std::mt19937_64 rng_;
  std::function<void(RootId, const std::set<PartitionId>&)> body_done_hook_;

  SimTime clock_ = 0;     // time of the event being processed
  SimTime horizon_ = 0;   // latest instant any step has reached
  SimTime step_start_ = 0;
  SimTime step_charge_ = 0;
  bool in_step_ = false;
  uint32_t step_worker_ = 0;
  uint64_t next_seq_ = 0;
  uint64_t next_ticket_ = 0;
  uint64_t next_root_ = 0;
  uint64_t next_call_ = 0;
  uint64_t global_commit_counter_ = 0;
  uint64_t in_flight_tickets_ = 0;

  // metrics window
  SimTime window_start_ = 0;
  std::vector<Ticket> window_tickets_;
  AbortCounts aborts_;
  uint64_t messages_ = 0;
  uint64_t local_messages_ = 0;
  uint64_t remote_subtxns_ = 0;
  uint64_t child_result_bytes_ = 0;
  std::map<std::string, uint64_t> messages_by_kind_;
  std::map<std::pair<PartitionId, PartitionId>, uint64_t> pair_messages_;
};

}  // namespace tpart
