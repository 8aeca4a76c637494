#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tpart/netsim.hpp"
#include "tpart/occ.hpp"

namespace tpart {

struct SerializabilityResult {
  bool ok = true;
  std::string counterexample;
  size_t replayed = 0;
};

/// Serial-replay oracle. Re-executes every committed root of `history` in
/// global_index order on a fresh single-worker cluster seeded with `initial`,
/// and passes iff each replayed return value matches the recorded one and the
/// replay's per-partition digests equal `finals`. Ordering and version-chain
/// checks from check_history run first. Throws kMalformedHistory.
SerializabilityResult verify_serializability(const HistoryLog& history, const std::vector<PartitionStore>& initial,
                                             const std::vector<PartitionStore>& finals,
                                             std::shared_ptr<const Catalog> catalog,
                                             std::shared_ptr<const Registry> registry);

/// Same, taking history, finals and procedures from a quiescent live cluster.
SerializabilityResult verify_serializability(const Cluster& live, const std::vector<PartitionStore>& initial);

}  // namespace tpart
