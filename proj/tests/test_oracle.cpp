#include "doctest.h"

#include "rtgen/oracle.hpp"

using namespace rtgen;

namespace {

TinyInstance two_backend_single_job() {
  TinyInstance inst;
  inst.backends = {{"npu0", BackendKind::NPU}, {"gpu0", BackendKind::GPU}};
  inst.jobs.push_back({"j0", Stage::Forward, 0, 1, Time::zero(), std::nullopt, false});
  inst.db.add_entry("j0", Stage::Forward, 0, BackendKind::NPU, Time::from_ms(2));
  inst.db.add_entry("j0", Stage::Forward, 0, BackendKind::GPU, Time::from_ms(5));
  return inst;
}

// Two frames with a 10 ms deadline plus one 12 ms job, all on one backend:
// zero violations exactly when the frames run first.
TinyInstance frames_then_long() {
  TinyInstance inst;
  inst.backends = {{"npu0", BackendKind::NPU}};
  inst.jobs.push_back({"long", Stage::Forward, 0, 1, Time::zero(), std::nullopt, true});
  inst.jobs.push_back({"f1", Stage::Forward, 0, 1, Time::zero(), Time::from_ms(10), false});
  inst.jobs.push_back({"f2", Stage::Forward, 0, 1, Time::zero(), Time::from_ms(10), false});
  inst.db.add_entry("long", Stage::Forward, 0, BackendKind::NPU, Time::from_ms(12));
  inst.db.add_entry("f1", Stage::Forward, 0, BackendKind::NPU, Time::from_ms(3));
  inst.db.add_entry("f2", Stage::Forward, 0, BackendKind::NPU, Time::from_ms(3));
  return inst;
}

}  // namespace

TEST_CASE("one layer on the faster of two backends") {
  auto best = exhaustive_best(two_backend_single_job(), Objective::MinMakespan);
  CHECK(best.makespan == Time::from_ms(2));
  REQUIRE(best.witness.size() == 1);
  CHECK(best.witness[0].backend_index == 0);
  auto replay = replay_witness(two_backend_single_job(), best.witness);
  CHECK(replay.makespan == best.makespan);
}

TEST_CASE("frames first avoids every violation") {
  auto inst = frames_then_long();
  auto best = exhaustive_best(inst, Objective::MinViolations);
  CHECK(best.violations == 0);
  // the witness starts both frames before the long job
  REQUIRE(best.witness.size() == 3);
  CHECK(inst.jobs[best.witness[0].job_index].deadline.has_value());
  CHECK(inst.jobs[best.witness[1].job_index].deadline.has_value());
  CHECK(!inst.jobs[best.witness[2].job_index].deadline.has_value());
  auto replay = replay_witness(inst, best.witness);
  CHECK(replay.violations == 0);

  // minimizing the generative completion sacrifices both frames instead
  auto ttft = exhaustive_best(inst, Objective::MinTTFT);
  CHECK(*ttft.ttft == Time::from_ms(12));
  auto ttft_replay = replay_witness(inst, ttft.witness);
  CHECK(*ttft_replay.gen_completion == Time::from_ms(12));
  CHECK(ttft_replay.violations == 2);
}

TEST_CASE("policies never beat the oracle on a contended micro instance") {
  // Shaped like the gaming scenario: a long generative job against periodic-ish frames.
  TinyInstance inst;
  inst.backends = {{"npu0", BackendKind::NPU}, {"gpu0", BackendKind::GPU}};
  inst.jobs.push_back({"gen", Stage::Forward, 0, 3, Time::zero(), std::nullopt, true});
  inst.db.add_entry("gen", Stage::Forward, 0, BackendKind::NPU, Time::from_ms(8));
  inst.db.add_entry("gen", Stage::Forward, 0, BackendKind::GPU, Time::from_ms(24));
  for (int i = 0; i < 3; ++i) {
    std::string name = "f" + std::to_string(i);
    Time arrival = Time::parse_ms("8.33").scaled(i);
    inst.jobs.push_back({name, Stage::Forward, 0, 1, arrival, arrival + Time::parse_ms("8.33"), false});
    inst.db.add_entry(name, Stage::Forward, 0, BackendKind::NPU, Time::parse_ms("0.59"));
    inst.db.add_entry(name, Stage::Forward, 0, BackendKind::GPU, Time::parse_ms("3.23"));
  }
  auto best_viol = exhaustive_best(inst, Objective::MinViolations);
  auto best_ttft = exhaustive_best(inst, Objective::MinTTFT);
  for (const auto& policy : SchedulerPolicy::all()) {
    auto run = run_policy_on_instance(inst, policy);
    CHECK(run.violations >= best_viol.violations);
    if (run.gen_completion) CHECK(!(*run.gen_completion < *best_ttft.ttft));
  }
}

TEST_CASE("oracle rejects oversized instances") {
  TinyInstance inst;
  inst.backends = {{"npu0", BackendKind::NPU}};
  for (int i = 0; i < 9; ++i) {
    std::string name = "j" + std::to_string(i);
    inst.jobs.push_back({name, Stage::Forward, 0, 1, Time::zero(), std::nullopt, false});
    inst.db.add_entry(name, Stage::Forward, 0, BackendKind::NPU, Time::from_ms(1));
  }
  CHECK_THROWS_WITH_AS(exhaustive_best(inst, Objective::MinMakespan), doctest::Contains("too large"),
                       ConfigError);
}

TEST_CASE("random instances are within bounds and replay deterministically") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    TinyInstance inst = random_instance(seed);
    inst.validate();
    auto a = exhaustive_best(inst, Objective::MinViolations);
    auto b = exhaustive_best(inst, Objective::MinViolations);
    CHECK(a.violations == b.violations);
    CHECK(a.witness.size() == b.witness.size());
    auto replay = replay_witness(inst, a.witness);
    CHECK(replay.violations == a.violations);
  }
}

TEST_CASE("scheduling space size estimator") {
  // 125 frame layer instances, each with two permitted backends.
  ScenarioSpec s;
  s.id = "space";
  ModelSpec m;
  m.id = "sr";
  m.task = Task::SR;
  m.layer_count = 1;
  m.fps = Rate::of(125);
  s.models = {m};
  double bits = schedule_space_log2(s, LatencyDatabase::default_calibrated(), Time::from_ms(1000),
                                    default_backends());
  CHECK(bits == doctest::Approx(125.0));  // CPU excluded for periodic models

  ScenarioSpec empty;
  CHECK(schedule_space_log2(empty, LatencyDatabase::default_calibrated(), Time::from_ms(100),
                            default_backends()) == 0.0);

  // scenario D over its own run: positive and dominated by decode layers
  auto d = builtin_scenario('D');
  double d_bits = schedule_space_log2(d, LatencyDatabase::default_calibrated(), Time::from_ms(1000),
                                      default_backends());
  CHECK(d_bits > 0.0);
}
