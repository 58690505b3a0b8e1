#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <utility>
#include <vector>

#include "blocksim/time.h"
#include "blocksim/types.h"

namespace blocksim {

// One execution step's composition: decode sequences plus prefill chunks
// under the token budget.
struct BatchPlan {
  std::vector<RequestId> decode_ids;                           // admission order
  std::vector<std::pair<RequestId, TokenCount>> prefill_segments;  // (id, chunk tokens)
  std::int64_t total_prefill_tokens = 0;
  std::int64_t context_tokens = 0;  // sum over decode_ids of stored tokens

  bool empty() const { return decode_ids.empty() && prefill_segments.empty(); }
};

// c0 + c_prefill * prefill_tokens + c_decode * |decode| + c_context * context.
double batch_latency(const BatchPlan& plan, const CostModelParams& params);

struct StepBegin {
  SimTime duration;
  BatchPlan plan;                      // surviving composition after preemption
  std::vector<RequestId> preempted;    // victims, in preemption order
  std::vector<RequestId> started;      // requests whose first-ever chunk runs this step
};

struct StepFinish {
  std::vector<RequestId> completed;
  std::vector<RequestId> first_tokens;  // decoded their first token this step
};

struct StepResult {
  SimTime duration;
  BatchPlan plan;
  std::vector<RequestId> completed;
  std::vector<RequestId> first_tokens;
  std::vector<RequestId> preempted;
  std::vector<RequestId> started;
};

// A simulated inference instance: paged block memory manager, waiting
// queue, and continuous batching under one of two local policies.
//
// Steps run in two phases so an engine can observe consistent state while
// a step is in flight: begin_step() forms the batch, resolves allocation
// (preempting the newest batch member on shortfall, recompute semantics),
// and prices the step; finish_step() advances progress counters and
// retires completions. execute_step() fuses both for callers that drive
// time themselves (the predictor's forward simulation).
class Instance {
 public:
  using LatencyFn = std::function<double(const BatchPlan&)>;  // seconds

  explicit Instance(const InstanceConfig& cfg);

  // Rebuilds an instance from a status snapshot, treating each entry's
  // estimated output length as its true length. Waiting entries restart
  // from zero progress (recompute semantics).
  static Instance from_snapshot(const InstanceSnapshot& snapshot, const InstanceConfig& cfg);

  // Appends to the waiting-queue tail. Throws RequestTooLargeError when
  // prompt + target can never fit even on an empty instance.
  void admit(RequestId id, TokenCount prompt_tokens, TokenCount target_output_tokens,
             TokenCount estimated_output_tokens);

  bool has_work() const { return !running_.empty() || !waiting_.empty(); }
  bool mid_step() const { return mid_step_; }

  // Plan the next step without mutating state. Throws EmptyPlanError when
  // nothing is runnable.
  BatchPlan form_batch() const;

  StepBegin begin_step();
  StepBegin begin_step(const LatencyFn& latency_fn);
  StepFinish finish_step();
  StepResult execute_step();
  StepResult execute_step(const LatencyFn& latency_fn);

  InstanceSnapshot snapshot(SimTime now, int qpm = 0) const;

  const InstanceConfig& config() const { return cfg_; }
  int free_blocks() const { return free_blocks_; }
  std::int64_t total_preemptions() const { return total_preemptions_; }
  std::int64_t steps_executed() const { return steps_executed_; }
  int running_count() const { return static_cast<int>(running_.size()); }
  int waiting_count() const { return static_cast<int>(waiting_.size()); }

  std::vector<RequestId> running_ids() const;
  std::vector<RequestId> waiting_ids() const;

  // Lifetime accounting for recompute semantics; id must be resident.
  std::int64_t lifetime_prefilled(RequestId id) const;
  int preempt_count(RequestId id) const;

  // Same accounting, retained for retired requests.
  struct CompletedStats {
    RequestId id = 0;
    TokenCount prompt_tokens = 0;
    std::int64_t lifetime_prefilled = 0;
    int preempt_count = 0;
  };
  const std::vector<CompletedStats>& completed_stats() const { return completed_stats_; }

 private:
  struct Slot {
    RequestId id = 0;
    TokenCount prompt_tokens = 0;
    TokenCount target_output_tokens = 0;
    TokenCount estimated_output_tokens = 0;
    TokenCount prefill_progress = 0;
    TokenCount decoded_tokens = 0;
    int held_blocks = 0;
    std::uint64_t admission_seq = 0;  // nonzero while in the running batch
    std::int64_t lifetime_prefilled = 0;
    int preempt_count = 0;
    bool ever_scheduled = false;
    bool live = false;
  };

  struct PlanItem {
    int slot = -1;
    TokenCount chunk = 0;       // prefill tokens this step; 0 for a decode
    TokenCount new_stored = 0;  // prefill + decoded after this step
    int delta_blocks = 0;
    bool preempted = false;
  };

  int acquire_slot();
  void release_slot(int idx);
  TokenCount stored_tokens(const Slot& s) const {
    return s.prefill_progress + s.decoded_tokens;
  }
  bool decode_ready(const Slot& s) const { return s.prefill_progress == s.prompt_tokens; }

  // Shared planning routine; appends items in allocation order (decodes,
  // then running prefills, then waiting-queue admissions) and reports how
  // many waiting-queue heads the plan admits.
  void plan_step(std::vector<PlanItem>& items, int& admit_count) const;
  void plan_chunked_prefill(std::vector<PlanItem>& items, int& admit_count) const;
  void plan_prefill_priority(std::vector<PlanItem>& items, int& admit_count) const;
  PlanItem make_item(int slot, TokenCount chunk) const;
  BatchPlan to_batch_plan(const std::vector<PlanItem>& items) const;

  void preempt(int slot);

  InstanceConfig cfg_;
  std::vector<Slot> pool_;
  std::vector<int> free_slots_;
  std::vector<int> running_;   // slot indices, admission order (oldest first)
  std::deque<int> waiting_;    // slot indices, head first
  int free_blocks_ = 0;
  std::uint64_t next_admission_seq_ = 1;
  bool mid_step_ = false;
  std::vector<PlanItem> current_items_;
  std::vector<PlanItem> scratch_items_;  // reused across steps
  std::int64_t total_preemptions_ = 0;
  std::int64_t steps_executed_ = 0;
  std::vector<CompletedStats> completed_stats_;
};

}  // namespace blocksim
