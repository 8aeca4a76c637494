#include "tpart/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace tpart {

const char* message_kind_name(MessageKind k) {
  switch (k) {
    case MessageKind::kInvoke: return "invoke";
    case MessageKind::kResult: return "result";
    case MessageKind::kValidate: return "validate";
    case MessageKind::kVote: return "vote";
    case MessageKind::kDecide: return "decide";
    case MessageKind::kBroadcast: return "broadcast";
  }
  return "unknown";
}

std::vector<uint32_t> ClusterConfig::round_robin(uint32_t num_logical, uint32_t num_physical) {
  std::vector<uint32_t> m(num_logical);
  for (uint32_t i = 0; i < num_logical; ++i) m[i] = num_physical ? i % num_physical : 0;
  return m;
}

void ClusterConfig::validate() const {
  auto bad = [](const std::string& what) { throw EngineError(ErrorCode::kInvalidConfig, what); };
  if (num_logical == 0) bad("num_logical must be >= 1");
  if (num_physical == 0) bad("num_physical must be >= 1");
  if (mapping.size() < num_logical) bad("unmapped logical partition " + std::to_string(mapping.size()));
  if (mapping.size() > num_logical) bad("mapping names more partitions than num_logical");
  for (uint32_t i = 0; i < num_logical; ++i) {
    if (mapping[i] >= num_physical) {
      bad("logical partition " + std::to_string(i) + " mapped to invalid worker " + std::to_string(mapping[i]));
    }
  }
  if (!(net_latency_us >= 0.0)) bad("net_latency_us must be >= 0");
  if (!(latency_jitter >= 0.0 && latency_jitter < 1.0)) bad("latency_jitter must be in [0, 1)");
  if (!(max_sim_time_us > 0.0)) bad("max_sim_time_us must be > 0");
}

ClusterConfig ClusterConfig::parse_kv(const std::string& text) { return parse_kv(text, ClusterConfig{}); }

ClusterConfig ClusterConfig::parse_kv(const std::string& text, ClusterConfig c) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool mapping_given = false;
  auto trim = [](std::string s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw EngineError(ErrorCode::kInvalidConfig, "line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "num_logical") c.num_logical = static_cast<uint32_t>(std::stoul(val));
      else if (key == "num_physical") c.num_physical = static_cast<uint32_t>(std::stoul(val));
      else if (key == "net_latency_us") c.net_latency_us = std::stod(val);
      else if (key == "seed") c.seed = std::stoull(val);
      else if (key == "latency_jitter") c.latency_jitter = std::stod(val);
      else if (key == "retry_limit") c.retry_limit = static_cast<uint32_t>(std::stoul(val));
      else if (key == "max_sim_time_us") c.max_sim_time_us = std::stod(val);
      else if (key == "trace") c.trace = (val == "1" || val == "true");
      else if (key == "mapping") {
        std::map<uint32_t, uint32_t> pairs;
        std::istringstream ms(val);
        std::string item;
        while (std::getline(ms, item, ',')) {
          item = trim(item);
          auto colon = item.find(':');
          if (colon == std::string::npos) throw EngineError(ErrorCode::kInvalidConfig, "mapping entry without ':'");
          pairs[static_cast<uint32_t>(std::stoul(item.substr(0, colon)))] =
              static_cast<uint32_t>(std::stoul(item.substr(colon + 1)));
        }
        c.mapping.clear();
        for (uint32_t i = 0; pairs.count(i); ++i) c.mapping.push_back(pairs[i]);
        if (c.mapping.size() != pairs.size()) throw EngineError(ErrorCode::kInvalidConfig, "mapping ids must be 0..n-1");
        mapping_given = true;
      } else {
        throw EngineError(ErrorCode::kInvalidConfig, "line " + std::to_string(lineno) + ": unknown key " + key);
      }
    } catch (const std::logic_error&) {
      throw EngineError(ErrorCode::kInvalidConfig, "line " + std::to_string(lineno) + ": bad value for " + key);
    }
  }
  if (!mapping_given && c.mapping.size() != c.num_logical) c.mapping = round_robin(c.num_logical, c.num_physical);
  return c;
}

Cluster::Cluster(ClusterConfig config, std::shared_ptr<const Catalog> catalog,
                 std::shared_ptr<const Registry> registry)
    : config_(std::move(config)), catalog_(std::move(catalog)), registry_(std::move(registry)), rng_(config_.seed) {
  config_.validate();
  if (!catalog_ || !catalog_->frozen()) throw EngineError(ErrorCode::kInvalidConfig, "catalog must be frozen");
  if (!registry_ || !registry_->frozen()) throw EngineError(ErrorCode::kInvalidConfig, "registry must be frozen");
  executors_.reserve(config_.num_logical);
  for (PartitionId p = 0; p < config_.num_logical; ++p) {
    executors_.push_back(Executor{p, PartitionStore(p, *catalog_), {}, {}, {}, 0, 0});
  }
  workers_.resize(config_.num_physical);
}

Cluster::~Cluster() {
  // Suspended coroutine frames are owned by their awaiting parents; tearing
  // down a cluster mid-flight leaks them, so only quiescent clusters are
  // expected here.
}

// ---------------------------------------------------------------------------
// Submission

Ticket Cluster::submit(const std::string& txn_name, Value args) { return submit(txn_name, std::move(args), nullptr); }

Ticket Cluster::submit(const std::string& txn_name, Value args, std::function<void(const Outcome&)> on_done) {
  const Procedure& proc = registry_->procedure(txn_name);
  int64_t home = registry_->map_partition(proc.mapper_name, args);
  if (home < 0 || home >= static_cast<int64_t>(config_.num_logical)) {
    throw EngineError(ErrorCode::kPartitionRange, "mapper " + proc.mapper_name + " returned partition " +
                                                      std::to_string(home) + " outside [0, " +
                                                      std::to_string(config_.num_logical) + ")");
  }
  TicketState st;
  st.txn_name = txn_name;
  st.args_bytes = args.encode();
  st.args = std::move(args);
  st.home = static_cast<PartitionId>(home);
  st.on_done = std::move(on_done);
  return enqueue_ticket(std::move(st));
}

Ticket Cluster::submit_broadcast(const std::string& txn_name, Value args) {
  registry_->procedure(txn_name);
  TicketState st;
  st.txn_name = txn_name;
  st.args_bytes = args.encode();
  st.args = std::move(args);
  st.broadcast = true;
  st.home = 0;
  return enqueue_ticket(std::move(st));
}

Ticket Cluster::enqueue_ticket(TicketState st) {
  Ticket t = ++next_ticket_;
  SimTime at = in_step_ ? step_now() : now_ns();
  st.outcome.submit_time = at;
  tickets_.emplace(t, std::move(st));
  window_tickets_.push_back(t);
  ++in_flight_tickets_;
  schedule(at, 0, SubmitEvent{t});
  return t;
}

const Outcome& Cluster::await(Ticket t) {
  auto& ts = tickets_.at(t);
  while (!ts.done) {
    if (!step()) throw EngineError(ErrorCode::kLivelock, "event queue drained before ticket completed");
  }
  return ts.outcome;
}

Outcome Cluster::exec_root(const std::string& txn_name, Value args) { return await(submit(txn_name, std::move(args))); }

// ---------------------------------------------------------------------------
// Event loop

void Cluster::schedule(SimTime time, uint64_t src_rank, Event ev) {
  events_.emplace(EventKey{time, src_rank, ++next_seq_}, std::move(ev));
}

bool Cluster::step() {
  if (events_.empty()) return false;
  auto node = events_.extract(events_.begin());
  const SimTime t = node.key().time;
  if (static_cast<double>(t - window_start_) > config_.max_sim_time_us * 1000.0) {
    throw EngineError(ErrorCode::kLivelock, "simulated time exceeded max_sim_time_us");
  }
  clock_ = std::max(clock_, t);
  auto wake = [&](uint32_t w) {
    auto& wk = workers_[w];
    if (!wk.scheduled) {
      wk.scheduled = true;
      schedule(std::max(clock_, wk.busy_until), 0, WorkerRun{w});
    }
  };
  std::visit(
      [&](auto& ev) {
        using T = std::decay_t<decltype(ev)>;
        if constexpr (std::is_same_v<T, Delivery>) {
          uint32_t w = physical_of(ev.msg.dst);
          workers_[w].inbox.emplace_back(std::move(ev.msg));
          wake(w);
        } else if constexpr (std::is_same_v<T, SubmitEvent>) {
          uint32_t w = physical_of(tickets_.at(ev.ticket).home);
          workers_[w].inbox.emplace_back(Submission{ev.ticket});
          wake(w);
        } else {
          run_worker(ev.worker);
        }
      },
      node.mapped());
  return true;
}

void Cluster::run_worker(uint32_t w) {
  auto& wk = workers_[w];
  wk.scheduled = false;
  if (wk.inbox.empty()) return;
  InboxItem item = std::move(wk.inbox.front());
  wk.inbox.pop_front();

  PartitionId dst = std::holds_alternative<MessageEnvelope>(item) ? std::get<MessageEnvelope>(item).dst
                                                                  : tickets_.at(std::get<Submission>(item).ticket).home;
  in_step_ = true;
  step_worker_ = w;
  step_start_ = std::max(clock_, wk.busy_until);
  step_charge_ = 0;
  Executor& ex = executor(dst);
  handle(ex, std::move(item));
  in_step_ = false;

  wk.busy_until = step_start_ + step_charge_;
  wk.busy_ns += step_charge_;
  ex.busy_ns += step_charge_;
  horizon_ = std::max(horizon_, wk.busy_until);
  if (!wk.inbox.empty()) {
    wk.scheduled = true;
    schedule(wk.busy_until, 0, WorkerRun{w});
  }
}

void Cluster::handle(Executor& ex, InboxItem item) {
  if (auto* sub = std::get_if<Submission>(&item)) {
    handle_submission(ex, sub->ticket);
    return;
  }
  auto& msg = std::get<MessageEnvelope>(item);
  charge(config_.cost.message_ns);
  switch (msg.kind) {
    case MessageKind::kInvoke:
    case MessageKind::kBroadcast: handle_invoke(ex, std::move(msg)); break;
    case MessageKind::kResult: handle_result(ex, msg); break;
    case MessageKind::kValidate: handle_validate(ex, msg); break;
    case MessageKind::kVote: handle_vote(ex, msg); break;
    case MessageKind::kDecide: handle_decide(ex, msg); break;
  }
}

SimTime Cluster::latency(uint32_t src_worker, uint32_t dst_worker) {
  if (src_worker == dst_worker) return 0;
  double base = config_.net_latency_us * 1000.0;
  if (config_.latency_jitter > 0.0) {
    double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    base *= 1.0 + config_.latency_jitter * u;
  }
  return static_cast<SimTime>(std::llround(base));
}

void Cluster::send(MessageKind kind, PartitionId src, PartitionId dst, RootId root, Value header,
                   std::vector<uint8_t> payload) {
  charge(config_.cost.send_ns);
  MessageEnvelope m;
  m.kind = kind;
  m.src = src;
  m.dst = dst;
  m.root_id = root;
  m.header = header.encode();
  m.payload = std::move(payload);
  m.send_time = step_now();
  uint32_t sw = physical_of(src);
  uint32_t dw = physical_of(dst);
  m.local = sw == dw;
  m.deliver_time = m.send_time + latency(sw, dw);

  ++messages_;
  if (m.local) ++local_messages_;
  ++messages_by_kind_[message_kind_name(kind)];
  ++pair_messages_[{std::min(src, dst), std::max(src, dst)}];
  if (kind == MessageKind::kInvoke || kind == MessageKind::kBroadcast) ++remote_subtxns_;
  if (kind == MessageKind::kResult) child_result_bytes_ += m.payload.size();
  if (config_.trace) {
    MessageEnvelope copy = m;
    copy.payload.clear();
    copy.header.clear();
    trace_.push_back(std::move(copy));
  }
  schedule(m.deliver_time, static_cast<uint64_t>(src) + 1, Delivery{std::move(m)});
}

// ---------------------------------------------------------------------------
// Runtime services for transaction contexts

CallId Cluster::start_remote(TxnContext& caller, const std::string& proc, const Value& args, PartitionId target) {
  CallId id = ++next_call_;
  auto& slot = calls_[id];
  slot.participants = &caller.mutable_participants();
  Value header = Value::list({static_cast<int64_t>(caller.root_id()), proc, static_cast<int64_t>(caller.partition()),
                              static_cast<int64_t>(caller.depth() + 1), static_cast<int64_t>(id),
                              static_cast<int64_t>(caller.broadcast() ? 1 : 0)});
  send(caller.broadcast() ? MessageKind::kBroadcast : MessageKind::kInvoke, caller.partition(), target,
       caller.root_id(), std::move(header), args.encode());
  return id;
}

CallSlot& Cluster::slot(CallId id) { return calls_.at(id); }

void Cluster::release(CallId id) { calls_.erase(id); }

// ---------------------------------------------------------------------------
// Root lifecycle

void Cluster::handle_submission(Executor& ex, Ticket ticket) {
  charge(config_.cost.txn_begin_ns);
  RootId root = ++next_root_;
  auto& ts = tickets_.at(ticket);
  ts.outcome.attempts += 1;
  ts.outcome.root_id = root;
  ts.outcome.body_start = step_now();
  RootState rs;
  rs.ticket = ticket;
  rs.participants.insert(ex.id);
  ex.roots.emplace(root, std::move(rs));
  ex.fragments.try_emplace(root);
  ++ex.roots_started;
  drive_root(ex.id, root, ticket);
}

Task<Value> Cluster::broadcast_body(TxnContext& ctx, std::string proc, Value args) {
  std::vector<Value> arg_list(config_.num_logical, args);
  std::vector<PartitionId> targets(config_.num_logical);
  for (PartitionId p = 0; p < config_.num_logical; ++p) targets[p] = p;
  co_await ctx.parallel_exec(std::move(proc), std::move(arg_list), std::move(targets));
  co_return Value();
}

Detached Cluster::drive_root(PartitionId home, RootId root, Ticket ticket) {
  Executor& ex = executor(home);
  RootState& rs = ex.roots.at(root);
  Fragment& frag = ex.fragments.at(root);
  const TicketState& ts = tickets_.at(ticket);
  TxnContext ctx(*this, *registry_, ex.store, frag.access, root, home, 0, ts.broadcast, rs.participants);
  std::optional<Value> result;
  std::string error;
  try {
    if (ts.broadcast) {
      result = co_await broadcast_body(ctx, ts.txn_name, ts.args);
    } else {
      result = co_await registry_->procedure(ts.txn_name).body(ctx, ts.args);
    }
  } catch (const std::exception& e) {
    error = e.what();
  }
  on_body_done(home, root, std::move(result), result ? AbortReason::kNone : AbortReason::kUserError, std::move(error));
}

Detached Cluster::drive_child(PartitionId at, RootId root, CallId call, PartitionId caller, std::string proc,
                              Value args, uint32_t depth, bool broadcast) {
  Executor& ex = executor(at);
  Fragment& frag = ex.fragments[root];
  std::set<PartitionId> participants{at};
  TxnContext ctx(*this, *registry_, ex.store, frag.access, root, at, depth, broadcast, participants);
  Value result;
  bool ok = true;
  ErrorCode code = ErrorCode::kUser;
  std::string error;
  try {
    result = co_await registry_->procedure(proc).body(ctx, std::move(args));
  } catch (const EngineError& e) {
    ok = false;
    code = e.code();
    error = e.what();
  } catch (const std::exception& e) {
    ok = false;
    error = e.what();
  }
  Value::List parts;
  for (PartitionId p : participants) parts.emplace_back(static_cast<int64_t>(p));
  Value header = Value::list({static_cast<int64_t>(call), static_cast<int64_t>(ok ? 1 : 0),
                              static_cast<int64_t>(code), error, Value(std::move(parts))});
  std::vector<uint8_t> payload;
  if (ok && !result.is_null()) payload = result.encode();
  send(MessageKind::kResult, at, caller, root, std::move(header), std::move(payload));
}

void Cluster::handle_invoke(Executor& ex, MessageEnvelope msg) {
  Value h = Value::decode(msg.header);
  auto root = static_cast<RootId>(h.at(0).as_int());
  std::string proc = h.at(1).as_string();
  auto caller = static_cast<PartitionId>(h.at(2).as_int());
  auto depth = static_cast<uint32_t>(h.at(3).as_int());
  auto call = static_cast<CallId>(h.at(4).as_int());
  bool broadcast = h.at(5).as_int() != 0;
  ex.fragments.try_emplace(root);
  drive_child(ex.id, root, call, caller, std::move(proc), Value::decode(msg.payload), depth, broadcast);
}

void Cluster::handle_result(Executor&, const MessageEnvelope& msg) {
  Value h = Value::decode(msg.header);
  auto call = static_cast<CallId>(h.at(0).as_int());
  CallSlot& s = calls_.at(call);
  s.done = true;
  if (h.at(1).as_int() == 0) {
    s.failed = true;
    s.error_code = static_cast<ErrorCode>(h.at(2).as_int());
    s.error = h.at(3).as_string();
  } else if (!msg.payload.empty()) {
    s.result = Value::decode(msg.payload);
  }
  for (const auto& p : h.at(4).as_list()) s.participants->insert(static_cast<PartitionId>(p.as_int()));
  if (auto waiter = s.waiter) waiter.resume();
}

void Cluster::on_body_done(PartitionId home, RootId root, std::optional<Value> result, AbortReason reason,
                           std::string error) {
  Executor& ex = executor(home);
  RootState& rs = ex.roots.at(root);
  TicketState& ts = tickets_.at(rs.ticket);
  ts.outcome.body_end = step_now();
  if (body_done_hook_) body_done_hook_(root, rs.participants);

  if (!result) {
    for (PartitionId p : rs.participants) {
      if (p != home) send(MessageKind::kDecide, home, p, root, Value::list({static_cast<int64_t>(root), 0, 0}));
    }
    discard_fragment(ex, root);
    finish_attempt(ex, root, false, reason, std::move(error), 0);
    return;
  }
  ts.outcome.value = *result;
  if (!result->is_null()) rs.result = result->encode();

  Fragment& frag = ex.fragments.at(root);
  charge(config_.cost.validate_key_ns * static_cast<SimTime>(frag.access.reads.size() + frag.access.writes.size()));
  ValidationVote home_vote = validate(home, ex.store, ex.pending, root, frag.access);
  rs.votes_expected = rs.participants.size();
  if (!home_vote.valid) {
    // No point polling the others; release their fragments.
    for (PartitionId p : rs.participants) {
      if (p != home) send(MessageKind::kDecide, home, p, root, Value::list({static_cast<int64_t>(root), 0, 0}));
    }
    rs.votes[home] = home_vote;
    discard_fragment(ex, root);
    finish_attempt(ex, root, false, home_vote.conflict,
                   std::string(abort_reason_name(home_vote.conflict)) + " on " +
                       format_table_key(*catalog_, *home_vote.conflict_key),
                   0);
    return;
  }
  frag.parked = true;
  for (PartitionId p : rs.participants) {
    if (p != home) send(MessageKind::kValidate, home, p, root, Value::list({static_cast<int64_t>(root)}));
  }
  on_vote(ex, root, home_vote);
}

void Cluster::handle_validate(Executor& ex, const MessageEnvelope& msg) {
  Value h = Value::decode(msg.header);
  auto root = static_cast<RootId>(h.at(0).as_int());
  auto it = ex.fragments.find(root);
  if (it == ex.fragments.end()) throw EngineError(ErrorCode::kMalformedHistory, "validate for unknown fragment");
  const AccessSet& access = it->second.access;
  charge(config_.cost.validate_key_ns * static_cast<SimTime>(access.reads.size() + access.writes.size()));
  ValidationVote vote = validate(ex.id, ex.store, ex.pending, root, access);
  Value key_info;
  if (vote.valid) {
    it->second.parked = true;
  } else {
    Value::List k;
    for (auto part : vote.conflict_key->key) k.emplace_back(part);
    key_info = Value::list({static_cast<int64_t>(vote.conflict_key->table), Value(std::move(k))});
    ex.fragments.erase(it);
  }
  send(MessageKind::kVote, ex.id, msg.src, root,
       Value::list({static_cast<int64_t>(root), static_cast<int64_t>(vote.valid ? 1 : 0),
                    static_cast<int64_t>(vote.sequence), static_cast<int64_t>(vote.conflict), key_info}));
}

void Cluster::handle_vote(Executor& ex, const MessageEnvelope& msg) {
  Value h = Value::decode(msg.header);
  ValidationVote vote;
  vote.partition = msg.src;
  vote.valid = h.at(1).as_int() != 0;
  vote.sequence = static_cast<uint64_t>(h.at(2).as_int());
  vote.conflict = static_cast<AbortReason>(h.at(3).as_int());
  if (!vote.valid) {
    TableKey tk;
    tk.table = static_cast<TableId>(h.at(4).at(0).as_int());
    for (const auto& part : h.at(4).at(1).as_list()) tk.key.push_back(part.as_int());
    vote.conflict_key = std::move(tk);
  }
  on_vote(ex, static_cast<RootId>(h.at(0).as_int()), std::move(vote));
}

void Cluster::on_vote(Executor& ex, RootId root, ValidationVote vote) {
  RootState& rs = ex.roots.at(root);
  rs.votes[vote.partition] = std::move(vote);
  if (rs.votes.size() == rs.votes_expected) decide(ex, root);
}

void Cluster::decide(Executor& ex, RootId root) {
  RootState& rs = ex.roots.at(root);
  const ValidationVote* failed = nullptr;
  for (const auto& [p, v] : rs.votes) {
    if (!v.valid) {
      failed = &v;
      break;
    }
  }
  if (failed) {
    AbortReason reason = failed->conflict;
    std::string error = std::string(abort_reason_name(reason)) + " on partition " + std::to_string(failed->partition) +
                        " at " + format_table_key(*catalog_, *failed->conflict_key);
    for (const auto& [p, v] : rs.votes) {
      if (p != ex.id && v.valid) {
        send(MessageKind::kDecide, ex.id, p, root, Value::list({static_cast<int64_t>(root), 0, 0}));
      }
    }
    discard_fragment(ex, root);
    finish_attempt(ex, root, false, reason, std::move(error), 0);
    return;
  }

  uint64_t g = ++global_commit_counter_;
  const TicketState& ts = tickets_.at(rs.ticket);
  CommitRecord rec;
  rec.root_id = root;
  rec.txn_name = ts.txn_name;
  rec.broadcast = ts.broadcast;
  rec.args = ts.args_bytes;
  rec.result = rs.result;
  rec.committed = true;
  rec.global_index = g;
  for (const auto& [p, v] : rs.votes) rec.partitions[p].vote_sequence = v.sequence;
  history_.append(std::move(rec));
  for (PartitionId p : rs.participants) {
    if (p != ex.id) {
      send(MessageKind::kDecide, ex.id, p, root,
           Value::list({static_cast<int64_t>(root), 1, static_cast<int64_t>(g)}));
    }
  }
  commit_fragment(ex, root);
  finish_attempt(ex, root, true, AbortReason::kNone, {}, g);
}

void Cluster::handle_decide(Executor& ex, const MessageEnvelope& msg) {
  Value h = Value::decode(msg.header);
  auto root = static_cast<RootId>(h.at(0).as_int());
  if (h.at(1).as_int() != 0) commit_fragment(ex, root);
  else discard_fragment(ex, root);
}

void Cluster::commit_fragment(Executor& ex, RootId root) {
  auto it = ex.fragments.find(root);
  if (it == ex.fragments.end()) throw EngineError(ErrorCode::kMalformedHistory, "commit for unknown fragment");
  const AccessSet& access = it->second.access;
  charge(config_.cost.apply_write_ns * static_cast<SimTime>(access.writes.size()));
  ex.pending.unpark(root, access);
  auto installed = ex.store.apply(access);
  uint64_t seq = ex.pending.next_commit_sequence();
  if (CommitRecord* rec = history_.find(root)) {
    PartitionEntry& e = rec->partitions[ex.id];
    e.commit_sequence = seq;
    e.reads.assign(access.reads.begin(), access.reads.end());
    e.writes = std::move(installed);
  }
  ex.fragments.erase(it);
}

void Cluster::discard_fragment(Executor& ex, RootId root) {
  auto it = ex.fragments.find(root);
  if (it == ex.fragments.end()) return;
  ex.pending.unpark(root, it->second.access);
  ex.fragments.erase(it);
}

void Cluster::finish_attempt(Executor& ex, RootId root, bool committed, AbortReason reason, std::string error,
                             uint64_t global_index) {
  auto node = ex.roots.extract(root);
  RootState& rs = node.mapped();
  TicketState& ts = tickets_.at(rs.ticket);
  const Ticket ticket = rs.ticket;

  if (!committed) {
    CommitRecord rec;
    rec.root_id = root;
    rec.txn_name = ts.txn_name;
    rec.broadcast = ts.broadcast;
    rec.args = ts.args_bytes;
    rec.reason = reason;
    for (PartitionId p : rs.participants) {
      auto v = rs.votes.find(p);
      rec.partitions[p].vote_sequence = v != rs.votes.end() && v->second.valid ? v->second.sequence : 0;
    }
    history_.append(std::move(rec));
    switch (reason) {
      case AbortReason::kUserError: ++aborts_.user_error; break;
      case AbortReason::kValidationConflict: ++aborts_.validation_conflict; break;
      case AbortReason::kPendingOverlap: ++aborts_.pending_overlap; break;
      case AbortReason::kNone: break;
    }
    bool retryable = reason == AbortReason::kValidationConflict || reason == AbortReason::kPendingOverlap;
    if (retryable && ts.outcome.attempts <= config_.retry_limit) {
      // Seeded randomized backoff, one round trip plus up to `attempts` more,
      // so a parked fragment can be decided and symmetric conflicts break.
      const double rtt = std::max(2.0 * config_.net_latency_us * 1000.0, 1000.0);
      const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
      const auto delay = static_cast<SimTime>(std::llround(rtt * (1.0 + u * ts.outcome.attempts)));
      schedule(step_now() + delay, 0, SubmitEvent{ticket});
      return;
    }
    ts.outcome.committed = false;
    ts.outcome.value = Value();
    ts.outcome.reason = reason;
    ts.outcome.error = std::move(error);
  } else {
    ts.outcome.committed = true;
    ts.outcome.reason = AbortReason::kNone;
    ts.outcome.global_index = global_index;
  }
  ts.outcome.finish_time = step_now();
  ts.done = true;
  --in_flight_tickets_;
  if (ts.on_done) ts.on_done(ts.outcome);
}

// ---------------------------------------------------------------------------
// Inspection

double Cluster::now() const { return to_us(now_ns()); }

SimTime Cluster::now_ns() const { return std::max(clock_, horizon_); }

bool Cluster::quiescent() const {
  if (!events_.empty() || in_flight_tickets_ != 0) return false;
  for (const auto& w : workers_) {
    if (!w.inbox.empty()) return false;
  }
  return true;
}

MetricsReport Cluster::run_until_quiescent() {
  while (step()) {
  }
  return metrics();
}

void Cluster::reset_metrics() {
  if (!quiescent()) throw EngineError(ErrorCode::kInFlight, "reset_metrics requires a quiescent cluster");
  window_start_ = now_ns();
  window_tickets_.clear();
  aborts_ = {};
  messages_ = local_messages_ = remote_subtxns_ = child_result_bytes_ = 0;
  messages_by_kind_.clear();
  pair_messages_.clear();
  history_.clear();
  trace_.clear();
  for (auto& w : workers_) w.busy_ns = 0;
  for (auto& e : executors_) {
    e.busy_ns = 0;
    e.roots_started = 0;
  }
}

namespace {

double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  auto rank = static_cast<size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
  if (rank == 0) rank = 1;
  return v[rank - 1];
}

}  // namespace

MetricsReport Cluster::metrics() const {
  MetricsReport m;
  std::vector<double> lat, body;
  for (Ticket t : window_tickets_) {
    const auto& ts = tickets_.at(t);
    ++m.submitted;
    if (!ts.done) continue;
    if (ts.outcome.committed) {
      ++m.committed;
      lat.push_back(ts.outcome.latency_us());
      body.push_back(ts.outcome.body_latency_us());
    } else {
      ++m.aborted;
    }
  }
  m.aborts = aborts_;
  SimTime span = m.submitted ? now_ns() - window_start_ : 0;
  m.makespan_us = to_us(span);
  m.throughput_tps = span > 0 ? static_cast<double>(m.committed) / (static_cast<double>(span) / 1e9) : 0.0;
  m.latency_p50_us = percentile(lat, 50);
  m.latency_p95_us = percentile(lat, 95);
  m.latency_p99_us = percentile(lat, 99);
  m.body_latency_p50_us = percentile(body, 50);
  m.messages = messages_;
  m.local_messages = local_messages_;
  m.messages_by_kind = messages_by_kind_;
  m.child_result_bytes = child_result_bytes_;
  if (m.committed) {
    m.messages_per_txn = static_cast<double>(messages_) / static_cast<double>(m.committed);
    m.remote_subtxns_per_txn = static_cast<double>(remote_subtxns_) / static_cast<double>(m.committed);
  }
  for (const auto& w : workers_) {
    m.worker_busy_fraction.push_back(span > 0 ? static_cast<double>(w.busy_ns) / static_cast<double>(span) : 0.0);
  }
  return m;
}

MeasuredProfile Cluster::measured_profile() const {
  const size_t n = config_.num_logical;
  MeasuredProfile prof{std::vector<double>(n, 0.0), std::vector<std::vector<double>>(n, std::vector<double>(n, 0.0))};
  double seconds = static_cast<double>(now_ns() - window_start_) / 1e9;
  if (seconds <= 0) return prof;
  for (size_t p = 0; p < n; ++p) prof.load[p] = static_cast<double>(executors_[p].roots_started) / seconds;
  for (const auto& [pair, count] : pair_messages_) {
    if (pair.first == pair.second) continue;
    double rate = static_cast<double>(count) / seconds;
    prof.traffic[pair.first][pair.second] += rate;
    prof.traffic[pair.second][pair.first] += rate;
  }
  return prof;
}

Digest Cluster::state_digest(PartitionId partition, bool include_replicated) const {
  const auto& ex = executors_.at(partition);
  if (!ex.fragments.empty()) {
    throw EngineError(ErrorCode::kInFlight, "partition " + std::to_string(partition) + " has in-flight transactions");
  }
  return ex.store.digest(include_replicated);
}

Digest Cluster::cluster_digest(const std::function<bool(const TableSchema&)>& pick) const {
  Digest d;
  for (const auto& ex : executors_) {
    if (!ex.fragments.empty()) throw EngineError(ErrorCode::kInFlight, "cluster has in-flight transactions");
    d += ex.store.digest_tables(pick);
  }
  return d;
}

std::vector<PartitionStore> Cluster::snapshot() const {
  std::vector<PartitionStore> out;
  out.reserve(executors_.size());
  for (const auto& ex : executors_) out.push_back(ex.store);
  return out;
}

void Cluster::restore(const std::vector<PartitionStore>& stores) {
  if (!quiescent()) throw EngineError(ErrorCode::kInFlight, "restore requires a quiescent cluster");
  if (stores.size() != executors_.size()) throw EngineError(ErrorCode::kInvalidConfig, "snapshot partition count differs");
  for (size_t i = 0; i < stores.size(); ++i) {
    if (&stores[i].catalog() != catalog_.get() && stores[i].catalog().size() != catalog_->size()) {
      throw EngineError(ErrorCode::kInvalidConfig, "snapshot built over a different catalog");
    }
    executors_[i].store = stores[i];
  }
}

std::set<PartitionId> Cluster::partitions_holding(RootId root) const {
  std::set<PartitionId> out;
  for (const auto& ex : executors_) {
    if (ex.fragments.count(root)) out.insert(ex.id);
  }
  return out;
}

std::string Cluster::trace_text() const {
  std::string out;
  char buf[160];
  for (const auto& m : trace_) {
    std::snprintf(buf, sizeof(buf), "%s %u %u %.3f %.3f %llu %s\n", message_kind_name(m.kind), m.src, m.dst,
                  to_us(m.send_time), to_us(m.deliver_time), static_cast<unsigned long long>(m.root_id),
                  m.local ? "local" : "remote");
    out += buf;
  }
  return out;
}

}  // namespace tpart
