#pragma once

#include <coroutine>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tpart/errors.hpp"
#include "tpart/storage.hpp"
#include "tpart/task.hpp"
#include "tpart/value.hpp"

namespace tpart {

using RootId = uint64_t;
using CallId = uint64_t;

class TxnContext;

/// Pure function from call arguments to a logical partition id. May return
/// an out-of-range id; that is reported when a transaction is invoked.
using MapperFn = std::function<int64_t(const Value& args)>;
using ProcedureBody = std::function<Task<Value>(TxnContext& ctx, Value args)>;

struct Procedure {
  std::string name;
  ProcedureBody body;
  std::string mapper_name;
};

/// Named procedures and partition mappers, identical on every partition.
class Registry {
 public:
  void register_mapper(const std::string& name, MapperFn fn);
  void register_procedure(const std::string& name, ProcedureBody body, const std::string& mapper_name);

  const Procedure& procedure(std::string_view name) const;
  bool has_procedure(std::string_view name) const { return procedures_.count(name) > 0; }
  /// Evaluates a mapper without range checking.
  int64_t map_partition(std::string_view mapper_name, const Value& args) const;

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

 private:
  void check_open() const;

  std::map<std::string, MapperFn, std::less<>> mappers_;
  std::map<std::string, Procedure, std::less<>> procedures_;
  bool frozen_ = false;
};

/// Completion slot for a subtransaction shipped to another executor.
struct CallSlot {
  bool done = false;
  bool failed = false;
  ErrorCode error_code = ErrorCode::kUser;
  std::string error;
  Value result;
  std::coroutine_handle<> waiter;
  /// Participant set of the invoking context; the reply's participants are
  /// merged into it.
  std::set<PartitionId>* participants = nullptr;
};

/// Services a transaction context needs from the executor hosting it.
class Runtime {
 public:
  virtual ~Runtime() = default;

  virtual uint32_t num_partitions() const = 0;
  /// Ships an invoke envelope and returns the slot its result will fill.
  virtual CallId start_remote(TxnContext& caller, const std::string& proc, const Value& args, PartitionId target) = 0;
  virtual CallSlot& slot(CallId id) = 0;
  virtual void release(CallId id) = 0;
  /// Accounts simulated CPU time for one storage access.
  virtual void charge_storage_op() = 0;
  virtual void note_inline_call() {}
};

/// Per-(sub)transaction handle passed to procedure bodies. All storage access
/// is confined to the executing partition; other partitions are reachable
/// only through exec_sub and parallel_exec.
class TxnContext {
 public:
  TxnContext(Runtime& rt, const Registry& registry, PartitionStore& store, AccessSet& access, RootId root,
             PartitionId partition, uint32_t depth, bool broadcast, std::set<PartitionId>& participants)
      : rt_(&rt),
        registry_(&registry),
        view_(store, access, broadcast),
        access_(&access),
        root_(root),
        partition_(partition),
        depth_(depth),
        broadcast_(broadcast),
        participants_(&participants) {}

  RootId root_id() const { return root_; }
  PartitionId partition() const { return partition_; }
  uint32_t depth() const { return depth_; }
  bool broadcast() const { return broadcast_; }
  const AccessSet& access() const { return *access_; }
  const std::set<PartitionId>& participants() const { return *participants_; }
  std::set<PartitionId>& mutable_participants() { return *participants_; }

  std::optional<Record> get(std::string_view table, const Key& key);
  /// Like get, but a missing row aborts the transaction.
  Record get_required(std::string_view table, const Key& key);
  void add(std::string_view table, const Key& key, const FieldValues& values);
  void update(std::string_view table, const Key& key, const FieldValues& updates);

  /// Runs `proc` on `target` as a subtransaction and waits for its result.
  /// Same-partition calls run inline in this context's scope.
  Task<Value> exec_sub(std::string proc, Value args, PartitionId target);

  /// Ships every invoke before waiting, then joins. Targets must be pairwise
  /// distinct. Results come back in input order; if any child fails, the
  /// first failure is rethrown after all children have finished.
  Task<std::vector<Value>> parallel_exec(std::string proc, std::vector<Value> args_list,
                                         std::vector<PartitionId> targets);

  int64_t map_partition(std::string_view mapper_name, const Value& args) const {
    return registry_->map_partition(mapper_name, args);
  }

 private:
  TxnContext inline_child();
  void check_target(PartitionId target) const;

  Runtime* rt_;
  const Registry* registry_;
  LocalView view_;
  AccessSet* access_;
  RootId root_;
  PartitionId partition_;
  uint32_t depth_;
  bool broadcast_;
  std::set<PartitionId>* participants_;
};

}  // namespace tpart
