#include "blocksim/backend.h"

#include <algorithm>
#include <cassert>

#include "blocksim/error.h"

namespace blocksim {

double batch_latency(const BatchPlan& plan, const CostModelParams& params) {
  return params.c0_s + params.prefill_s_per_token * static_cast<double>(plan.total_prefill_tokens) +
         params.decode_s_per_seq * static_cast<double>(plan.decode_ids.size()) +
         params.context_s_per_token * static_cast<double>(plan.context_tokens);
}

Instance::Instance(const InstanceConfig& cfg) : cfg_(cfg), free_blocks_(cfg.total_blocks) {
  validate_instance_config(cfg_);
}

Instance Instance::from_snapshot(const InstanceSnapshot& snapshot, const InstanceConfig& cfg) {
  InstanceConfig local = cfg;
  local.instance_id = snapshot.instance_id;
  Instance inst(local);
  inst.pool_.reserve(snapshot.running.size() + snapshot.waiting.size() + 1);
  for (const SnapshotRequest& r : snapshot.running) {
    const int slot = inst.acquire_slot();
    Slot& s = inst.pool_[slot];
    s.id = r.id;
    s.prompt_tokens = r.prompt_tokens;
    s.target_output_tokens = r.estimated_output_tokens;
    s.estimated_output_tokens = r.estimated_output_tokens;
    s.prefill_progress = r.prefill_progress;
    s.decoded_tokens = r.decoded_tokens;
    s.held_blocks = static_cast<int>(blocks_needed(inst.stored_tokens(s), local.block_size));
    s.admission_seq = inst.next_admission_seq_++;
    s.ever_scheduled = true;
    s.live = true;
    inst.free_blocks_ -= s.held_blocks;
    inst.running_.push_back(slot);
  }
  if (inst.free_blocks_ < 0) {
    throw RequestTooLargeError("snapshot running set exceeds total memory blocks");
  }
  for (const SnapshotRequest& r : snapshot.waiting) {
    // Recompute semantics: anything off the batch restarts from scratch.
    const int slot = inst.acquire_slot();
    Slot& s = inst.pool_[slot];
    s.id = r.id;
    s.prompt_tokens = r.prompt_tokens;
    s.target_output_tokens = r.estimated_output_tokens;
    s.estimated_output_tokens = r.estimated_output_tokens;
    s.live = true;
    inst.waiting_.push_back(slot);
  }
  return inst;
}

int Instance::acquire_slot() {
  if (!free_slots_.empty()) {
    const int idx = free_slots_.back();
    free_slots_.pop_back();
    pool_[idx] = Slot{};
    return idx;
  }
  pool_.emplace_back();
  return static_cast<int>(pool_.size()) - 1;
}

void Instance::release_slot(int idx) {
  pool_[idx].live = false;
  free_slots_.push_back(idx);
}

void Instance::admit(RequestId id, TokenCount prompt_tokens, TokenCount target_output_tokens,
                     TokenCount estimated_output_tokens) {
  if (blocks_needed(static_cast<std::int64_t>(prompt_tokens) + target_output_tokens,
                    cfg_.block_size) > cfg_.total_blocks) {
    throw RequestTooLargeError("request " + std::to_string(id) + " needs " +
                               std::to_string(blocks_needed(
                                   static_cast<std::int64_t>(prompt_tokens) + target_output_tokens,
                                   cfg_.block_size)) +
                               " blocks, instance has " + std::to_string(cfg_.total_blocks));
  }
  const int slot = acquire_slot();
  Slot& s = pool_[slot];
  s.id = id;
  s.prompt_tokens = prompt_tokens;
  s.target_output_tokens = target_output_tokens;
  s.estimated_output_tokens = estimated_output_tokens;
  s.live = true;
  waiting_.push_back(slot);
}

Instance::PlanItem Instance::make_item(int slot, TokenCount chunk) const {
  const Slot& s = pool_[slot];
  PlanItem item;
  item.slot = slot;
  item.chunk = chunk;
  const TokenCount old_stored = stored_tokens(s);
  if (chunk == 0) {
    item.new_stored = old_stored + 1;
  } else {
    const TokenCount new_prefill = s.prefill_progress + chunk;
    // The step that finishes a prompt also emits the first output token.
    item.new_stored =
        new_prefill + s.decoded_tokens + (new_prefill == s.prompt_tokens ? 1 : 0);
  }
  item.delta_blocks = static_cast<int>(blocks_needed(item.new_stored, cfg_.block_size) -
                                       blocks_needed(old_stored, cfg_.block_size));
  return item;
}

void Instance::plan_chunked_prefill(std::vector<PlanItem>& items, int& admit_count) const {
  std::int64_t budget = cfg_.chunk_budget;
  for (const int slot : running_) {
    if (decode_ready(pool_[slot])) {
      items.push_back(make_item(slot, 0));  // one budget token per decode seq
      budget -= 1;
    }
  }
  if (budget < 0) budget = 0;
  for (const int slot : running_) {
    if (budget == 0) break;
    const Slot& s = pool_[slot];
    if (!decode_ready(s)) {
      const TokenCount chunk = static_cast<TokenCount>(
          std::min<std::int64_t>(s.prompt_tokens - s.prefill_progress, budget));
      items.push_back(make_item(slot, chunk));
      budget -= chunk;
    }
  }
  std::int64_t projected_free = free_blocks_;
  for (const PlanItem& item : items) projected_free -= item.delta_blocks;
  int members = static_cast<int>(running_.size());
  for (const int slot : waiting_) {
    if (budget == 0 || members >= cfg_.max_batch_size) break;
    const Slot& s = pool_[slot];
    const TokenCount chunk = static_cast<TokenCount>(
        std::min<std::int64_t>(s.prompt_tokens - s.prefill_progress, budget));
    PlanItem item = make_item(slot, chunk);
    // First-chunk fit only; the queue head blocks rather than being skipped.
    if (item.delta_blocks > projected_free) break;
    items.push_back(item);
    budget -= chunk;
    projected_free -= item.delta_blocks;
    ++members;
    ++admit_count;
  }
}

void Instance::plan_prefill_priority(std::vector<PlanItem>& items, int& admit_count) const {
  bool prefill_needed = !waiting_.empty();
  for (const int slot : running_) {
    if (!decode_ready(pool_[slot])) prefill_needed = true;
  }
  if (prefill_needed) {
    std::int64_t projected_free = free_blocks_;
    for (const int slot : running_) {
      const Slot& s = pool_[slot];
      if (!decode_ready(s)) {
        PlanItem item = make_item(slot, s.prompt_tokens - s.prefill_progress);
        projected_free -= item.delta_blocks;
        items.push_back(item);
      }
    }
    int members = static_cast<int>(running_.size());
    for (const int slot : waiting_) {
      if (members >= cfg_.max_batch_size) break;
      const Slot& s = pool_[slot];
      PlanItem item = make_item(slot, s.prompt_tokens - s.prefill_progress);
      if (item.delta_blocks > projected_free) break;
      items.push_back(item);
      projected_free -= item.delta_blocks;
      ++members;
      ++admit_count;
    }
    if (!items.empty()) return;  // pure-prefill batch; decoders stall
  }
  for (const int slot : running_) {
    if (decode_ready(pool_[slot])) items.push_back(make_item(slot, 0));
  }
}

void Instance::plan_step(std::vector<PlanItem>& items, int& admit_count) const {
  items.clear();
  admit_count = 0;
  if (cfg_.local_policy == LocalPolicy::kChunkedPrefill) {
    plan_chunked_prefill(items, admit_count);
  } else {
    plan_prefill_priority(items, admit_count);
  }
}

BatchPlan Instance::to_batch_plan(const std::vector<PlanItem>& items) const {
  BatchPlan plan;
  plan.decode_ids.reserve(items.size());
  for (const PlanItem& item : items) {
    if (item.preempted) continue;
    const Slot& s = pool_[item.slot];
    if (item.chunk == 0) {
      plan.decode_ids.push_back(s.id);
      plan.context_tokens += stored_tokens(s);
    } else {
      plan.prefill_segments.emplace_back(s.id, item.chunk);
      plan.total_prefill_tokens += item.chunk;
    }
  }
  return plan;
}

BatchPlan Instance::form_batch() const {
  if (!has_work()) throw EmptyPlanError("instance is idle, nothing runnable");
  std::vector<PlanItem> items;
  int admit_count = 0;
  plan_step(items, admit_count);
  BatchPlan plan = to_batch_plan(items);
  if (plan.empty()) throw EmptyPlanError("no runnable work fits the batch");
  return plan;
}

void Instance::preempt(int slot) {
  Slot& s = pool_[slot];
  running_.erase(std::find(running_.begin(), running_.end(), slot));
  free_blocks_ += s.held_blocks;
  s.held_blocks = 0;
  s.prefill_progress = 0;
  s.decoded_tokens = 0;
  s.admission_seq = 0;
  s.preempt_count += 1;
  waiting_.push_front(slot);
  total_preemptions_ += 1;
}

StepBegin Instance::begin_step() {
  return begin_step([this](const BatchPlan& plan) { return batch_latency(plan, cfg_.cost_model); });
}

StepBegin Instance::begin_step(const LatencyFn& latency_fn) {
  assert(!mid_step_);
  if (!has_work()) throw EmptyPlanError("instance is idle, nothing runnable");

  std::vector<PlanItem>& items = scratch_items_;  // capacity persists across steps
  int admit_count = 0;
  plan_step(items, admit_count);
  if (items.empty()) throw EmptyPlanError("no runnable work fits the batch");

  StepBegin begin;

  // Planned waiting-queue heads join the batch before allocation so they
  // are preemptable like any other member.
  for (int i = 0; i < admit_count; ++i) {
    const int slot = waiting_.front();
    waiting_.pop_front();
    Slot& s = pool_[slot];
    s.admission_seq = next_admission_seq_++;
    if (!s.ever_scheduled) {
      s.ever_scheduled = true;
      begin.started.push_back(s.id);
    }
    running_.push_back(slot);
  }

  for (PlanItem& item : items) {
    if (item.preempted) continue;
    while (item.delta_blocks > free_blocks_) {
      int victim = -1;
      std::uint64_t newest_seq = 0;
      for (const int slot : running_) {
        if (pool_[slot].admission_seq > newest_seq) {
          newest_seq = pool_[slot].admission_seq;
          victim = slot;
        }
      }
      if (victim == item.slot && running_.size() == 1) {
        throw DeadlockError("request " + std::to_string(pool_[item.slot].id) +
                            " cannot proceed with the whole memory free");
      }
      begin.preempted.push_back(pool_[victim].id);
      for (PlanItem& other : items) {
        if (other.slot == victim) other.preempted = true;
      }
      preempt(victim);
      if (item.preempted) break;  // the allocating member itself was evicted
    }
    if (item.preempted) continue;
    free_blocks_ -= item.delta_blocks;
    pool_[item.slot].held_blocks += item.delta_blocks;
  }

  begin.plan = to_batch_plan(items);
  assert(!begin.plan.empty());
  begin.duration = SimTime::from_seconds(latency_fn(begin.plan));
  std::swap(current_items_, scratch_items_);
  mid_step_ = true;
  return begin;
}

StepFinish Instance::finish_step() {
  assert(mid_step_);
  StepFinish finish;
  std::vector<int> done_slots;
  for (const PlanItem& item : current_items_) {
    if (item.preempted) continue;
    Slot& s = pool_[item.slot];
    const TokenCount prev_decoded = s.decoded_tokens;
    if (item.chunk > 0) {
      s.prefill_progress += item.chunk;
      s.lifetime_prefilled += item.chunk;
      if (s.prefill_progress == s.prompt_tokens) s.decoded_tokens += 1;
    } else {
      s.decoded_tokens += 1;
    }
    if (prev_decoded == 0 && s.decoded_tokens >= 1) finish.first_tokens.push_back(s.id);
    if (s.decoded_tokens >= s.target_output_tokens) {
      finish.completed.push_back(s.id);
      done_slots.push_back(item.slot);
    }
  }
  for (const int slot : done_slots) {
    Slot& s = pool_[slot];
    running_.erase(std::find(running_.begin(), running_.end(), slot));
    free_blocks_ += s.held_blocks;
    s.held_blocks = 0;
    completed_stats_.push_back({s.id, s.prompt_tokens, s.lifetime_prefilled, s.preempt_count});
    release_slot(slot);
  }
  current_items_.clear();
  mid_step_ = false;
  steps_executed_ += 1;
  return finish;
}

StepResult Instance::execute_step() {
  return execute_step(
      [this](const BatchPlan& plan) { return batch_latency(plan, cfg_.cost_model); });
}

StepResult Instance::execute_step(const LatencyFn& latency_fn) {
  StepBegin begin = begin_step(latency_fn);
  StepFinish finish = finish_step();
  StepResult result;
  result.duration = begin.duration;
  result.plan = std::move(begin.plan);
  result.completed = std::move(finish.completed);
  result.first_tokens = std::move(finish.first_tokens);
  result.preempted = std::move(begin.preempted);
  result.started = std::move(begin.started);
  return result;
}

InstanceSnapshot Instance::snapshot(SimTime now, int qpm) const {
  InstanceSnapshot snap;
  snap.instance_id = cfg_.instance_id;
  snap.snapshot_time = now;
  snap.batch_size = static_cast<int>(running_.size());
  snap.qpm = qpm;
  std::int64_t held = 0;
  snap.running.reserve(running_.size());
  for (const int slot : running_) {
    const Slot& s = pool_[slot];
    snap.running.push_back(
        {s.id, s.prompt_tokens, s.estimated_output_tokens, s.prefill_progress, s.decoded_tokens});
    held += blocks_needed(stored_tokens(s), cfg_.block_size);
  }
  snap.free_blocks = static_cast<int>(cfg_.total_blocks - held);
  snap.waiting.reserve(waiting_.size());
  for (const int slot : waiting_) {
    const Slot& s = pool_[slot];
    snap.waiting.push_back(
        {s.id, s.prompt_tokens, s.estimated_output_tokens, s.prefill_progress, s.decoded_tokens});
  }
  return snap;
}

std::vector<RequestId> Instance::running_ids() const {
  std::vector<RequestId> ids;
  ids.reserve(running_.size());
  for (const int slot : running_) ids.push_back(pool_[slot].id);
  return ids;
}

std::vector<RequestId> Instance::waiting_ids() const {
  std::vector<RequestId> ids;
  ids.reserve(waiting_.size());
  for (const int slot : waiting_) ids.push_back(pool_[slot].id);
  return ids;
}

std::int64_t Instance::lifetime_prefilled(RequestId id) const {
  for (const Slot& s : pool_) {
    if (s.live && s.id == id) return s.lifetime_prefilled;
  }
  return 0;
}

int Instance::preempt_count(RequestId id) const {
  for (const Slot& s : pool_) {
    if (s.live && s.id == id) return s.preempt_count;
  }
  return 0;
}

}  // namespace blocksim
