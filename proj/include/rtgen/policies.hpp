#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rtgen/error.hpp"
#include "rtgen/time.hpp"
#include "rtgen/types.hpp"

namespace rtgen {

enum class PolicyId { FCFS_AOT, FCFS_DYN, EDF_AOT, EDF_DYN, FTF };

struct SchedulerPolicy {
  PolicyId id = PolicyId::FCFS_AOT;
  bool deadline_aware = false;
  bool dynamic_hw = false;
  bool heterogeneity_aware = true;
  bool genai_aware = false;

  static SchedulerPolicy make(PolicyId id) {
    switch (id) {
      case PolicyId::FCFS_AOT: return {id, false, false, true, false};
      case PolicyId::FCFS_DYN: return {id, false, true, true, false};
      case PolicyId::EDF_AOT: return {id, true, false, true, false};
      case PolicyId::EDF_DYN: return {id, true, true, true, false};
      case PolicyId::FTF: return {id, true, true, true, true};
    }
    throw InternalError("bad policy id");
  }

  static SchedulerPolicy parse(std::string_view name) {
    if (name == "fcfs-aot") return make(PolicyId::FCFS_AOT);
    if (name == "fcfs-dyn") return make(PolicyId::FCFS_DYN);
    if (name == "edf-aot") return make(PolicyId::EDF_AOT);
    if (name == "edf-dyn") return make(PolicyId::EDF_DYN);
    if (name == "ftf") return make(PolicyId::FTF);
    throw ConfigError("unknown policy: " + std::string(name));
  }

  std::string_view name() const {
    switch (id) {
      case PolicyId::FCFS_AOT: return "fcfs-aot";
      case PolicyId::FCFS_DYN: return "fcfs-dyn";
      case PolicyId::EDF_AOT: return "edf-aot";
      case PolicyId::EDF_DYN: return "edf-dyn";
      case PolicyId::FTF: return "ftf";
    }
    throw InternalError("bad policy id");
  }

  bool is_fcfs() const { return id == PolicyId::FCFS_AOT || id == PolicyId::FCFS_DYN; }
  bool is_aot() const { return id == PolicyId::FCFS_AOT || id == PolicyId::EDF_AOT; }

  static const std::array<SchedulerPolicy, 5>& all() {
    static const std::array<SchedulerPolicy, 5> policies{
        make(PolicyId::FCFS_AOT), make(PolicyId::FCFS_DYN), make(PolicyId::EDF_AOT),
        make(PolicyId::EDF_DYN), make(PolicyId::FTF)};
    return policies;
  }
};

// Deadline extended with queue-front / queue-back sentinels. FTF places the
// pre-first-token generative pipeline at the front and post-first-token decode
// work at the back; an infinite deadline compares later than any finite one.
struct PriorityDeadline {
  enum Class { Front = 0, Finite = 1, Back = 2 };
  Class cls = Back;
  Time at;

  static PriorityDeadline front() { return {Front, {}}; }
  static PriorityDeadline finite(Time t) { return {Finite, t}; }
  static PriorityDeadline back() { return {Back, {}}; }

  friend bool operator<(const PriorityDeadline& a, const PriorityDeadline& b) {
    if (a.cls != b.cls) return a.cls < b.cls;
    if (a.cls != Finite) return false;
    return a.at < b.at;
  }
  friend bool operator==(const PriorityDeadline& a, const PriorityDeadline& b) {
    return a.cls == b.cls && (a.cls != Finite || a.at == b.at);
  }
};

// What the policy layer sees of one runnable request.
struct SchedView {
  std::int64_t request_id = 0;
  int decl_index = 0;
  Time arrival;
  Time lineage_arrival;
  std::optional<Time> deadline;
  bool pre_first_token_generative = false;  // encoder/prefill work before token 0
};

inline PriorityDeadline effective_deadline(const SchedulerPolicy& policy, const SchedView& v) {
  if (policy.id == PolicyId::FTF && v.pre_first_token_generative) return PriorityDeadline::front();
  if (!v.deadline) return PriorityDeadline::back();
  return PriorityDeadline::finite(*v.deadline);
}

// Strict-weak priority order. FCFS: oldest lineage first, declaration order
// breaking ties (a cascade child keeps its prompt's queue seniority). EDF/FTF:
// effective deadline, then arrival, then request id.
inline bool priority_before(const SchedulerPolicy& policy, const SchedView& a, const SchedView& b) {
  if (policy.is_fcfs()) {
    if (a.lineage_arrival != b.lineage_arrival) return a.lineage_arrival < b.lineage_arrival;
    if (a.decl_index != b.decl_index) return a.decl_index < b.decl_index;
    return a.request_id < b.request_id;
  }
  PriorityDeadline da = effective_deadline(policy, a);
  PriorityDeadline db = effective_deadline(policy, b);
  if (!(da == db)) return da < db;
  if (a.arrival != b.arrival) return a.arrival < b.arrival;
  return a.request_id < b.request_id;
}

inline std::vector<std::size_t> priority_order(const SchedulerPolicy& policy,
                                               const std::vector<SchedView>& runnable) {
  std::vector<std::size_t> order(runnable.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return priority_before(policy, runnable[x], runnable[y]);
  });
  return order;
}

// One permitted backend for the candidate's next layer.
struct PlacementOption {
  int backend_index = -1;
  BackendKind kind = BackendKind::CPU;
  Time latency;
};

struct BackendOccupancy {
  bool busy = false;
  PriorityDeadline occupant_deadline = PriorityDeadline::back();
  bool occupant_abortable = false;
  Time busy_until;
};

struct Placement {
  int backend_index = -1;  // -1: no dispatch this pass
  bool preempt = false;
};

// Per-dispatch-pass plan of when each backend is expected to come free,
// including work that earlier-priority candidates decided to wait for. Lets a
// deadline feasibility check account for the queue ahead of the candidate.
struct DispatchPlan {
  std::vector<Time> planned_free;
};

namespace detail {

inline bool option_better(const PlacementOption& a, const PlacementOption& b) {
  if (a.latency != b.latency) return a.latency < b.latency;
  if (tie_rank(a.kind) != tie_rank(b.kind)) return tie_rank(a.kind) < tie_rank(b.kind);
  return a.backend_index < b.backend_index;
}

inline bool preemptable_by(const BackendOccupancy& occ, const PriorityDeadline& candidate) {
  return occ.busy && occ.occupant_abortable && candidate < occ.occupant_deadline;
}

// Cheapest backend that is free or holds strictly lower-priority abortable
// work; used by EDF-DYN and by the FTF first-token path.
inline Placement cheapest_eligible(const std::vector<PlacementOption>& permitted,
                                   const std::vector<BackendOccupancy>& backends,
                                   const PriorityDeadline& candidate) {
  const PlacementOption* best = nullptr;
  bool best_preempt = false;
  for (const auto& opt : permitted) {
    const auto& occ = backends[opt.backend_index];
    bool preempt = false;
    if (occ.busy) {
      if (!preemptable_by(occ, candidate)) continue;
      preempt = true;
    }
    if (!best || option_better(opt, *best)) {
      best = &opt;
      best_preempt = preempt;
    }
  }
  if (!best) return {};
  return {best->backend_index, best_preempt};
}

inline Placement cheapest_free(const std::vector<PlacementOption>& permitted,
                               const std::vector<BackendOccupancy>& backends) {
  const PlacementOption* best = nullptr;
  for (const auto& opt : permitted) {
    if (backends[opt.backend_index].busy) continue;
    if (!best || option_better(opt, *best)) best = &opt;
  }
  if (!best) return {};
  return {best->backend_index, false};
}

}  // namespace detail

// Backend selection for one candidate given current occupancy.
//
//   FCFS-AOT  fixed profiled backend; wait while busy; never preempts.
//   FCFS-DYN  cheapest free permitted backend; never preempts.
//   EDF-AOT   fixed backend; aborts a strictly-later-deadline occupant.
//   EDF-DYN   cheapest backend counting preemptable occupants as available.
//   FTF       first-token pipeline like EDF-DYN at front priority; everything
//             else takes the cheapest free backend, waits while the planned
//             queue still meets its deadline, and only then aborts the
//             latest-deadline occupant.
inline Placement select_backend(const SchedulerPolicy& policy, const SchedView& candidate, Time now,
                                const std::vector<PlacementOption>& permitted,
                                const std::vector<BackendOccupancy>& backends,
                                std::optional<BackendKind> aot_kind, DispatchPlan* plan = nullptr) {
  PriorityDeadline prio = effective_deadline(policy, candidate);

  if (policy.is_aot()) {
    if (!aot_kind) throw InternalError("missing AOT binding");
    const PlacementOption* best_free = nullptr;
    const PlacementOption* victim = nullptr;
    for (const auto& opt : permitted) {
      if (opt.kind != *aot_kind) continue;
      const auto& occ = backends[opt.backend_index];
      if (!occ.busy) {
        if (!best_free || detail::option_better(opt, *best_free)) best_free = &opt;
      } else if (policy.id == PolicyId::EDF_AOT && detail::preemptable_by(occ, prio)) {
        if (!victim || backends[victim->backend_index].occupant_deadline <
                           backends[opt.backend_index].occupant_deadline) {
          victim = &opt;
        }
      }
    }
    if (best_free) return {best_free->backend_index, false};
    if (victim) return {victim->backend_index, true};
    return {};
  }

  if (policy.id == PolicyId::FCFS_DYN) return detail::cheapest_free(permitted, backends);

  if (policy.id == PolicyId::EDF_DYN || (policy.id == PolicyId::FTF && prio.cls == PriorityDeadline::Front)) {
    return detail::cheapest_eligible(permitted, backends, prio);
  }

  // FTF, non-front work.
  if (Placement free = detail::cheapest_free(permitted, backends); free.backend_index >= 0) return free;
  if (candidate.deadline) {
    // Wait when queuing behind planned work still meets the deadline; reserve
    // the slot so later candidates see this one ahead of them.
    const PlacementOption* best = nullptr;
    Time best_finish;
    for (const auto& opt : permitted) {
      Time avail = backends[opt.backend_index].busy_until;
      if (plan && plan->planned_free[opt.backend_index] > avail) {
        avail = plan->planned_free[opt.backend_index];
      }
      if (avail < now) avail = now;
      Time finish = avail + opt.latency;
      if (finish > *candidate.deadline) continue;
      if (!best || finish < best_finish ||
          (finish == best_finish && detail::option_better(opt, *best))) {
        best = &opt;
        best_finish = finish;
      }
    }
    if (best) {
      if (plan) plan->planned_free[best->backend_index] = best_finish;
      return {};  // wait
    }
  }
  const PlacementOption* victim = nullptr;
  for (const auto& opt : permitted) {
    const auto& occ = backends[opt.backend_index];
    if (!detail::preemptable_by(occ, prio)) continue;
    if (!victim) {
      victim = &opt;
      continue;
    }
    const auto& cur = backends[victim->backend_index];
    if (cur.occupant_deadline < occ.occupant_deadline ||
        (cur.occupant_deadline == occ.occupant_deadline && detail::option_better(opt, *victim))) {
      victim = &opt;
    }
  }
  if (victim) return {victim->backend_index, true};
  return {};
}

// Dispatched layers are abortable under deadline-aware policies except the FTF
// first-token pipeline; FCFS never preempts so its dispatches are not
// abortable either.
inline bool abortable_flag(const SchedulerPolicy& policy, const SchedView& v) {
  if (policy.is_fcfs()) return false;
  if (policy.id == PolicyId::FTF && v.pre_first_token_generative) return false;
  return true;
}

}  // namespace rtgen
