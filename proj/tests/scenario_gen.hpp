#pragma once

// Deterministic random scenario generator shared by the property tests and the
// acceptance suite.

#include <cstdint>
#include <random>
#include <string>

#include "rtgen/rtgen.hpp"

namespace rtgen_test {

inline rtgen::ScenarioSpec random_scenario(std::uint64_t seed) {
  using namespace rtgen;
  std::mt19937_64 rng(seed);
  auto pick = [&rng](std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  ScenarioSpec s;
  s.id = "rand" + std::to_string(seed);
  s.horizon = {HorizonPolicy::FixedMs, Time::from_ms(pick(60, 220))};
  s.retrieval_delay = Time::from_us(pick(0, 2000));

  bool with_llm = pick(0, 3) != 0;
  bool with_encoder = with_llm && pick(0, 1) == 1;
  if (with_encoder) {
    ModelSpec enc;
    enc.id = "enc";
    enc.task = Task::Encoder;
    enc.layer_count = 1;
    enc.cascade_next = "gen";
    s.models.push_back(enc);
  }
  if (with_llm) {
    ModelSpec llm;
    llm.id = "gen";
    llm.task = Task::LLM;
    llm.kind = ModelKind::Generative;
    llm.layer_count = static_cast<int>(pick(2, 6));
    s.models.push_back(llm);
  }
  int rt_count = static_cast<int>(pick(with_llm ? 0 : 1, 3));
  const Task rt_tasks[] = {Task::SR, Task::Seg, Task::OD};
  const std::int64_t rates[] = {30, 60, 120};
  for (int i = 0; i < rt_count; ++i) {
    ModelSpec m;
    m.id = "rt" + std::to_string(i);
    m.task = rt_tasks[pick(0, 2)];
    m.layer_count = static_cast<int>(pick(1, 2));
    m.fps = Rate::of(rates[pick(0, 2)]);
    s.models.push_back(m);
  }
  if (with_llm) {
    int prompt_count = static_cast<int>(pick(1, 2));
    Time arrival = Time::zero();
    for (int i = 0; i < prompt_count; ++i) {
      PromptJob p;
      arrival = arrival + Time::from_ms(pick(0, 40));
      p.arrival = arrival;
      p.input_tokens = static_cast<int>(pick(1, 2048));
      p.output_tokens = static_cast<int>(pick(1, 6));
      p.query_tokens = static_cast<int>(pick(8, 64));
      s.prompts.push_back(p);
    }
  }
  s.validate();
  return s;
}

}  // namespace rtgen_test
