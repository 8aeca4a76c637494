#include "tpart/procmodel.hpp"

#include <exception>

namespace tpart {

void Registry::check_open() const {
  if (frozen_) throw EngineError(ErrorCode::kRegistryFrozen, "registry is frozen; register before the cluster starts");
}

void Registry::register_mapper(const std::string& name, MapperFn fn) {
  check_open();
  if (!fn) throw EngineError(ErrorCode::kInvalidConfig, "mapper " + name + " has no function");
  if (!mappers_.emplace(name, std::move(fn)).second) {
    throw EngineError(ErrorCode::kDuplicateName, "mapper " + name + " already registered");
  }
}

void Registry::register_procedure(const std::string& name, ProcedureBody body, const std::string& mapper_name) {
  check_open();
  if (!mappers_.count(mapper_name)) throw EngineError(ErrorCode::kUnknownMapper, "unknown mapper " + mapper_name);
  if (!body) throw EngineError(ErrorCode::kInvalidConfig, "procedure " + name + " has no body");
  if (!procedures_.emplace(name, Procedure{name, std::move(body), mapper_name}).second) {
    throw EngineError(ErrorCode::kDuplicateName, "procedure " + name + " already registered");
  }
}

const Procedure& Registry::procedure(std::string_view name) const {
  auto it = procedures_.find(name);
  if (it == procedures_.end()) throw EngineError(ErrorCode::kUnknownProcedure, "unknown procedure " + std::string(name));
  return it->second;
}

int64_t Registry::map_partition(std::string_view mapper_name, const Value& args) const {
  auto it = mappers_.find(mapper_name);
  if (it == mappers_.end()) throw EngineError(ErrorCode::kUnknownMapper, "unknown mapper " + std::string(mapper_name));
  return it->second(args);
}

std::optional<Record> TxnContext::get(std::string_view table, const Key& key) {
  rt_->charge_storage_op();
  return view_.get(table, key);
}

Record TxnContext::get_required(std::string_view table, const Key& key) {
  auto rec = get(table, key);
  if (!rec) {
    std::string k;
    for (auto part : key) k += (k.empty() ? "" : ",") + std::to_string(part);
    throw EngineError(ErrorCode::kNotFound, "missing " + std::string(table) + "(" + k + ") on partition " +
                                                std::to_string(partition_));
  }
  return *std::move(rec);
}

void TxnContext::add(std::string_view table, const Key& key, const FieldValues& values) {
  rt_->charge_storage_op();
  view_.add(table, key, values);
}

void TxnContext::update(std::string_view table, const Key& key, const FieldValues& updates) {
  rt_->charge_storage_op();
  view_.update(table, key, updates);
}

TxnContext TxnContext::inline_child() {
  return TxnContext(*rt_, *registry_, view_.store(), *access_, root_, partition_, depth_ + 1, broadcast_,
                    *participants_);
}

void TxnContext::check_target(PartitionId target) const {
  if (target >= rt_->num_partitions()) {
    throw EngineError(ErrorCode::kPartitionRange, "target partition " + std::to_string(target) + " out of range [0, " +
                                                      std::to_string(rt_->num_partitions()) + ")");
  }
}

namespace {

struct CallAwaiter {
  Runtime* rt;
  CallId id;

  bool await_ready() { return rt->slot(id).done; }
  void await_suspend(std::coroutine_handle<> h) { rt->slot(id).waiter = h; }
  Value await_resume() {
    CallSlot slot = std::move(rt->slot(id));
    rt->release(id);
    if (slot.failed) throw EngineError(slot.error_code, slot.error);
    return std::move(slot.result);
  }
};

}  // namespace

Task<Value> TxnContext::exec_sub(std::string proc, Value args, PartitionId target) {
  check_target(target);
  const Procedure& p = registry_->procedure(proc);
  if (target == partition_) {
    rt_->note_inline_call();
    TxnContext child = inline_child();
    co_return co_await p.body(child, std::move(args));
  }
  CallId id = rt_->start_remote(*this, proc, args, target);
  co_return co_await CallAwaiter{rt_, id};
}

Task<std::vector<Value>> TxnContext::parallel_exec(std::string proc, std::vector<Value> args_list,
                                                    std::vector<PartitionId> targets) {
  if (args_list.size() != targets.size()) {
    throw EngineError(ErrorCode::kInvalidConfig, "parallel_exec: args and partitions differ in length");
  }
  std::set<PartitionId> distinct;
  for (PartitionId t : targets) {
    check_target(t);
    if (!distinct.insert(t).second) {
      throw EngineError(ErrorCode::kDuplicateTarget, "parallel_exec: partition " + std::to_string(t) + " targeted twice");
    }
  }
  const Procedure& p = registry_->procedure(proc);

  const size_t n = targets.size();
  std::vector<std::optional<CallId>> calls(n);
  for (size_t i = 0; i < n; ++i) {
    if (targets[i] != partition_) calls[i] = rt_->start_remote(*this, proc, args_list[i], targets[i]);
  }

  std::vector<Value> results(n);
  std::exception_ptr first_error;
  for (size_t i = 0; i < n; ++i) {
    if (calls[i]) continue;
    rt_->note_inline_call();
    try {
      TxnContext child = inline_child();
      results[i] = co_await p.body(child, std::move(args_list[i]));
    } catch (...) {
      if (!first_error) first_error = std::current_exception();
    }
  }
  for (size_t i = 0; i < n; ++i) {
    if (!calls[i]) continue;
    try {
      results[i] = co_await CallAwaiter{rt_, *calls[i]};
    } catch (...) {
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  co_return results;
}

}  // namespace tpart
