#include "tpart/verify.hpp"

namespace tpart {

SerializabilityResult verify_serializability(const HistoryLog& history, const std::vector<PartitionStore>& initial,
                                             const std::vector<PartitionStore>& finals,
                                             std::shared_ptr<const Catalog> catalog,
                                             std::shared_ptr<const Registry> registry) {
  SerializabilityResult out;
  if (initial.empty() || initial.size() != finals.size()) {
    throw EngineError(ErrorCode::kMalformedHistory, "initial and final partition counts differ");
  }
  HistoryCheck structural = check_history(history, initial);
  if (!structural.ok) {
    out.ok = false;
    out.counterexample = structural.counterexample;
    return out;
  }

  ClusterConfig cfg;
  cfg.num_logical = static_cast<uint32_t>(initial.size());
  cfg.num_physical = 1;
  cfg.mapping.assign(cfg.num_logical, 0);
  cfg.cost = CostModel::zero();
  cfg.retry_limit = 0;
  Cluster replay(cfg, std::move(catalog), std::move(registry));
  replay.restore(initial);

  for (const CommitRecord* rec : history.committed_in_order()) {
    Value args = Value::decode(rec->args);
    Ticket t = rec->broadcast ? replay.submit_broadcast(rec->txn_name, args) : replay.submit(rec->txn_name, args);
    replay.await(t);
    // Decides to other partitions land after the home decision; drain them
    // so the next transaction starts from fully applied state.
    replay.run_until_quiescent();
    const Outcome& o = replay.await(t);
    ++out.replayed;
    if (!o.committed) {
      out.ok = false;
      out.counterexample = "global " + std::to_string(rec->global_index) + " (root " + std::to_string(rec->root_id) +
                           ", " + rec->txn_name + ") aborted on serial replay: " + o.error;
      return out;
    }
    std::vector<uint8_t> ret = o.value.is_null() ? std::vector<uint8_t>{} : o.value.encode();
    if (ret != rec->result) {
      out.ok = false;
      out.counterexample = "global " + std::to_string(rec->global_index) + " (root " + std::to_string(rec->root_id) +
                           ", " + rec->txn_name + ") returned " + to_hex(rec->result) + " live but " + to_hex(ret) +
                           " on serial replay";
      return out;
    }
  }
  replay.run_until_quiescent();

  for (PartitionId p = 0; p < finals.size(); ++p) {
    Digest live = finals[p].digest(true);
    Digest serial = replay.state_digest(p, true);
    if (!(live == serial)) {
      out.ok = false;
      out.counterexample = "partition " + std::to_string(p) + " digest " + live.hex() + " differs from serial replay " +
                           serial.hex();
      return out;
    }
  }
  return out;
}

SerializabilityResult verify_serializability(const Cluster& live, const std::vector<PartitionStore>& initial) {
  if (!live.quiescent()) throw EngineError(ErrorCode::kInFlight, "verify_serializability requires a quiescent cluster");
  return verify_serializability(live.history(), initial, live.snapshot(), live.shared_catalog(),
                                live.shared_registry());
}

}  // namespace tpart
