#include "doctest.h"

#include <random>

#include "rtgen/policies.hpp"

using namespace rtgen;

namespace {

SchedView view(std::int64_t id, double arrival_ms, std::optional<double> deadline_ms,
               int decl = 0, bool pre_token = false) {
  SchedView v;
  v.request_id = id;
  v.decl_index = decl;
  v.arrival = Time::from_us(static_cast<std::int64_t>(arrival_ms * 1000));
  v.lineage_arrival = v.arrival;
  if (deadline_ms) v.deadline = Time::from_us(static_cast<std::int64_t>(*deadline_ms * 1000));
  v.pre_first_token_generative = pre_token;
  return v;
}

}  // namespace

TEST_CASE("policy flags match the taxonomy") {
  auto check = [](PolicyId id, bool ddl, bool dyn, bool het, bool gen) {
    auto p = SchedulerPolicy::make(id);
    CHECK(p.deadline_aware == ddl);
    CHECK(p.dynamic_hw == dyn);
    CHECK(p.heterogeneity_aware == het);
    CHECK(p.genai_aware == gen);
  };
  check(PolicyId::FCFS_AOT, false, false, true, false);
  check(PolicyId::FCFS_DYN, false, true, true, false);
  check(PolicyId::EDF_AOT, true, false, true, false);
  check(PolicyId::EDF_DYN, true, true, true, false);
  check(PolicyId::FTF, true, true, true, true);
  CHECK(SchedulerPolicy::parse("ftf").id == PolicyId::FTF);
  CHECK(SchedulerPolicy::parse("edf-aot").name() == "edf-aot");
  CHECK_THROWS_AS(SchedulerPolicy::parse("nonsense"), ConfigError);
}

TEST_CASE("fcfs breaks arrival ties by declaration order") {
  auto p = SchedulerPolicy::make(PolicyId::FCFS_AOT);
  auto llm = view(7, 0.0, std::nullopt, /*decl=*/0);
  auto sr = view(3, 0.0, 8.33, /*decl=*/1);
  CHECK(priority_before(p, llm, sr));
  CHECK(!priority_before(p, sr, llm));
  // cascade child keeps its lineage's queue seniority
  auto child = view(9, 5.0, std::nullopt, /*decl=*/1);
  child.lineage_arrival = Time::zero();
  auto frame = view(2, 4.0, 20.0, /*decl=*/2);
  CHECK(priority_before(p, child, frame));
}

TEST_CASE("edf orders by deadline with infinite last") {
  auto p = SchedulerPolicy::make(PolicyId::EDF_DYN);
  auto sr120 = view(1, 0.0, 8.33);
  auto seg = view(2, 0.0, 16.67);
  auto gen = view(3, 0.0, std::nullopt);
  CHECK(priority_before(p, sr120, seg));
  CHECK(priority_before(p, seg, gen));
  CHECK(!priority_before(p, gen, sr120));
}

TEST_CASE("ftf puts pre-first-token generative work ahead of everything") {
  auto p = SchedulerPolicy::make(PolicyId::FTF);
  auto prefill = view(5, 0.0, std::nullopt, 0, /*pre_token=*/true);
  auto sr = view(1, 0.0, 8.33);
  auto decode = view(6, 0.0, std::nullopt);  // post-first-token: back of the queue
  CHECK(priority_before(p, prefill, sr));
  CHECK(priority_before(p, sr, decode));
  CHECK(!priority_before(p, decode, prefill));
}

TEST_CASE("priority order is a strict total order on random request sets") {
  std::mt19937_64 rng(42);
  for (int round = 0; round < 200; ++round) {
    std::vector<SchedView> views;
    int n = 2 + static_cast<int>(rng() % 7);
    for (int i = 0; i < n; ++i) {
      std::optional<double> deadline;
      if (rng() % 3 != 0) deadline = static_cast<double>(rng() % 50);
      views.push_back(view(i, static_cast<double>(rng() % 20), deadline,
                           static_cast<int>(rng() % 4), rng() % 5 == 0));
    }
    for (const auto& policy : SchedulerPolicy::all()) {
      // irreflexive + antisymmetric
      for (int i = 0; i < n; ++i) {
        CHECK(!priority_before(policy, views[i], views[i]));
        for (int j = 0; j < n; ++j) {
          if (i == j) continue;
          bool ij = priority_before(policy, views[i], views[j]);
          bool ji = priority_before(policy, views[j], views[i]);
          CHECK((ij != ji));  // ids differ, so exactly one direction holds
        }
      }
      // transitive
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          for (int k = 0; k < n; ++k) {
            if (priority_before(policy, views[i], views[j]) &&
                priority_before(policy, views[j], views[k])) {
              CHECK(priority_before(policy, views[i], views[k]));
            }
          }
        }
      }
      auto order = priority_order(policy, views);
      CHECK(order.size() == views.size());
    }
  }
}

namespace {

struct Bench {
  std::vector<PlacementOption> permitted;
  std::vector<BackendOccupancy> backends;

  void add_backend(BackendKind kind, double latency_ms, bool busy = false,
                   std::optional<double> occ_deadline_ms = std::nullopt, bool occ_abortable = true,
                   double busy_until_ms = 0.0) {
    int idx = static_cast<int>(backends.size());
    if (latency_ms > 0) {
      permitted.push_back(
          {idx, kind, Time::from_us(static_cast<std::int64_t>(latency_ms * 1000))});
    }
    BackendOccupancy occ;
    occ.busy = busy;
    if (busy) {
      occ.occupant_deadline = occ_deadline_ms
                                  ? PriorityDeadline::finite(Time::from_us(
                                        static_cast<std::int64_t>(*occ_deadline_ms * 1000)))
                                  : PriorityDeadline::back();
      occ.occupant_abortable = occ_abortable;
      occ.busy_until = Time::from_us(static_cast<std::int64_t>(busy_until_ms * 1000));
    }
    backends.push_back(occ);
  }
};

}  // namespace

TEST_CASE("aot policies stick to the bound backend") {
  Bench b;
  b.add_backend(BackendKind::NPU, 0.59, /*busy=*/true, std::nullopt, true, 99.0);  // prefill running
  b.add_backend(BackendKind::GPU, 3.23);
  auto sr = view(1, 8.33, 16.67);

  // FCFS-AOT waits for its bound backend even though the GPU is free.
  auto p = select_backend(SchedulerPolicy::make(PolicyId::FCFS_AOT), sr, Time::zero(), b.permitted,
                          b.backends, BackendKind::NPU);
  CHECK(p.backend_index == -1);

  // EDF-AOT aborts the later-deadline occupant instead.
  p = select_backend(SchedulerPolicy::make(PolicyId::EDF_AOT), sr, Time::zero(), b.permitted,
                     b.backends, BackendKind::NPU);
  CHECK(p.backend_index == 0);
  CHECK(p.preempt);
}

TEST_CASE("dynamic policies pick the cheapest free backend") {
  Bench b;
  b.add_backend(BackendKind::GPU, 2.87, /*busy=*/true, std::nullopt, true, 10.0);
  b.add_backend(BackendKind::NPU, 21.52);
  auto decode = view(4, 0.0, std::nullopt);
  auto p = select_backend(SchedulerPolicy::make(PolicyId::FCFS_DYN), decode, Time::zero(),
                          b.permitted, b.backends, std::nullopt);
  CHECK(p.backend_index == 1);  // GPU busy -> decode layer lands on the NPU
  CHECK(!p.preempt);

  Bench all_busy;
  all_busy.add_backend(BackendKind::GPU, 2.87, true, std::nullopt, false, 5.0);
  all_busy.add_backend(BackendKind::NPU, 21.52, true, std::nullopt, false, 5.0);
  p = select_backend(SchedulerPolicy::make(PolicyId::FCFS_DYN), decode, Time::zero(),
                     all_busy.permitted, all_busy.backends, std::nullopt);
  CHECK(p.backend_index == -1);
}

TEST_CASE("edf-dyn grabs its best backend through preemption") {
  Bench b;
  b.add_backend(BackendKind::NPU, 0.59, /*busy=*/true, std::nullopt, true, 7.0);  // prefill, infinite
  b.add_backend(BackendKind::GPU, 3.23);
  auto sr = view(1, 0.0, 8.33);
  auto p = select_backend(SchedulerPolicy::make(PolicyId::EDF_DYN), sr, Time::zero(), b.permitted,
                          b.backends, std::nullopt);
  CHECK(p.backend_index == 0);
  CHECK(p.preempt);

  // Both occupants strictly earlier-deadline: nothing to abort, fall to the free option.
  Bench earlier;
  earlier.add_backend(BackendKind::NPU, 0.59, true, 5.0, true, 4.0);
  earlier.add_backend(BackendKind::GPU, 3.23, true, 6.0, true, 4.0);
  auto seg = view(2, 0.0, 16.67);
  p = select_backend(SchedulerPolicy::make(PolicyId::EDF_DYN), seg, Time::zero(), earlier.permitted,
                     earlier.backends, std::nullopt);
  CHECK(p.backend_index == -1);
  CHECK(!p.preempt);
}

TEST_CASE("ftf frames wait while the queue still meets their deadline") {
  // NPU runs a decode layer until t=10; the frame meets its deadline by waiting.
  Bench b;
  b.add_backend(BackendKind::NPU, 5.23, /*busy=*/true, std::nullopt, true, 10.0);
  b.add_backend(BackendKind::GPU, 9.16, /*busy=*/true, 16.67, true, 12.0);
  auto od = view(3, 0.0, 16.67);
  DispatchPlan plan;
  plan.planned_free = {Time::from_ms(10), Time::from_ms(12)};
  auto p = select_backend(SchedulerPolicy::make(PolicyId::FTF), od, Time::zero(), b.permitted,
                          b.backends, std::nullopt, &plan);
  CHECK(p.backend_index == -1);
  CHECK(!p.preempt);
  // The wait reserved the NPU slot.
  CHECK(plan.planned_free[0] == Time::from_us(15230));

  // Hopeless by waiting: aborts the latest-deadline occupant (the decode layer).
  DispatchPlan plan2;
  plan2.planned_free = {Time::from_ms(14), Time::from_ms(12)};
  Bench c;
  c.add_backend(BackendKind::NPU, 5.23, true, std::nullopt, true, 14.0);
  c.add_backend(BackendKind::GPU, 9.16, true, 16.0, true, 12.0);
  p = select_backend(SchedulerPolicy::make(PolicyId::FTF), od, Time::zero(), c.permitted, c.backends,
                     std::nullopt, &plan2);
  CHECK(p.backend_index == 0);
  CHECK(p.preempt);
}

TEST_CASE("ftf first-token pipeline seizes the profiled backend") {
  Bench b;
  b.add_backend(BackendKind::NPU, 98.62, /*busy=*/true, 16.67, true, 8.0);  // frame running
  b.add_backend(BackendKind::GPU, 295.86);
  auto prefill = view(0, 0.0, std::nullopt, 0, /*pre_token=*/true);
  auto p = select_backend(SchedulerPolicy::make(PolicyId::FTF), prefill, Time::zero(), b.permitted,
                          b.backends, std::nullopt);
  CHECK(p.backend_index == 0);  // NPU via preemption, not the free-but-slow GPU
  CHECK(p.preempt);
}

TEST_CASE("abortable flags per policy") {
  auto prefill = view(0, 0.0, std::nullopt, 0, true);
  auto decode = view(0, 0.0, std::nullopt, 0, false);
  auto frame = view(1, 0.0, 8.33);
  CHECK(!abortable_flag(SchedulerPolicy::make(PolicyId::FTF), prefill));
  CHECK(abortable_flag(SchedulerPolicy::make(PolicyId::FTF), decode));
  CHECK(abortable_flag(SchedulerPolicy::make(PolicyId::FTF), frame));
  CHECK(abortable_flag(SchedulerPolicy::make(PolicyId::EDF_AOT), prefill));
  CHECK(abortable_flag(SchedulerPolicy::make(PolicyId::EDF_DYN), frame));
  CHECK(!abortable_flag(SchedulerPolicy::make(PolicyId::FCFS_AOT), frame));
  CHECK(!abortable_flag(SchedulerPolicy::make(PolicyId::FCFS_DYN), prefill));
}
