#include "doctest.h"

#include <algorithm>

#include "rtgen/workload.hpp"

using namespace rtgen;

TEST_CASE("builtin scenarios match their definitions") {
  auto a = builtin_scenario('A');
  CHECK(a.models.size() == 2);
  for (const auto& m : a.models) CHECK(!m.fps);
  CHECK(a.models[0].task == Task::Encoder);
  CHECK(*a.models[0].cascade_next == "llm");
  CHECK(a.models[1].layer_count == 16);
  CHECK(a.prompts.size() == 1);
  CHECK(a.prompts[0].input_tokens == 1024);
  CHECK(a.prompts[0].output_tokens == 32);

  auto b = builtin_scenario('B');
  CHECK(b.models.size() == 2);
  CHECK(b.models[0].kind == ModelKind::Generative);  // LLM declared first
  CHECK(b.models[1].task == Task::SR);
  CHECK(*b.models[1].fps == Rate::of(120));
  CHECK(b.prompts[0].input_tokens == 64);

  auto c = builtin_scenario('C');
  CHECK(c.models.size() == 5);
  std::vector<std::int64_t> fps;
  for (const auto& m : c.models) {
    if (m.fps) fps.push_back(m.fps->num / m.fps->den);
  }
  std::sort(fps.begin(), fps.end());
  CHECK(fps == std::vector<std::int64_t>{60, 60, 120});

  auto d = builtin_scenario('D');
  CHECK(d.models.size() == 5);
  CHECK(d.prompts[0].output_tokens == 32);
  CHECK(d.cascade_entry_index() == 0);
  CHECK(d.generative_index() == 1);

  CHECK_THROWS_AS(builtin_scenario('E'), ConfigError);
}

TEST_CASE("scenario documents load and validate") {
  const char* doc = R"({
    "id": "scenario_b",
    "retrieval_delay_ms": 0,
    "horizon": {"policy": "until_llm_complete"},
    "models": [
      {"id": "llm", "task": "LLM", "kind": "generative", "layers": 16},
      {"id": "sr120", "task": "SR", "kind": "single_pass", "layers": 1, "fps": 120}
    ],
    "prompts": [{"arrival_ms": 0, "input_tokens": 64, "output_tokens": 32}]
  })";
  auto s = load_scenario(doc);
  CHECK(s.id == "scenario_b");
  CHECK(s.models.size() == 2);
  CHECK(s.models[0].kind == ModelKind::Generative);
  CHECK(*s.models[1].fps == Rate::of(120));
  CHECK(s.prompts[0].query_tokens == 32);  // default
}

TEST_CASE("scenario validation errors") {
  CHECK_THROWS_WITH_AS(load_scenario(R"({"id":"x","models":[]})"), doctest::Contains("empty scenario"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(
      load_scenario(R"({"models":[
        {"id":"e","task":"Encoder","layers":1,"cascade_next":"llm"},
        {"id":"llm","task":"LLM","kind":"generative","layers":16,"cascade_next":"e"}]})"),
      doctest::Contains("cyclic cascade"), ConfigError);
  CHECK_THROWS_WITH_AS(
      load_scenario(R"({"models":[{"id":"a","task":"SR","layers":1},{"id":"a","task":"SR","layers":1}]})"),
      doctest::Contains("duplicate model id"), ConfigError);
  CHECK_THROWS_WITH_AS(
      load_scenario(R"({"models":[{"id":"e","task":"Encoder","layers":1,"cascade_next":"ghost"}]})"),
      doctest::Contains("unknown model id"), ConfigError);
  CHECK_THROWS_AS(load_scenario("not json"), ConfigError);
  // two generative models
  CHECK_THROWS_WITH_AS(
      load_scenario(R"({"models":[
        {"id":"l1","task":"LLM","kind":"generative","layers":16},
        {"id":"l2","task":"LLM","kind":"generative","layers":16}]})"),
      doctest::Contains("at most one generative"), ConfigError);
  // generative model with fps
  CHECK_THROWS_AS(
      load_scenario(R"({"models":[{"id":"l","task":"LLM","kind":"generative","layers":16,"fps":30}]})"),
      ConfigError);
  // prompts without a generative model
  CHECK_THROWS_AS(load_scenario(R"({"models":[{"id":"s","task":"SR","layers":1,"fps":60}],
      "prompts":[{"input_tokens":64,"output_tokens":4}]})"),
                  ConfigError);
}

TEST_CASE("arrival generation is periodic, sorted, densely numbered") {
  auto b = builtin_scenario('B');
  auto reqs = generate_arrivals(b, Time::from_ms(100));
  // 12 SR frames in [0, 100) plus one prompt.
  int frames = 0;
  for (const auto& r : reqs) {
    if (r.model_index == 1) ++frames;
  }
  CHECK(frames == 12);
  CHECK(reqs.size() == 13);
  for (std::size_t i = 0; i < reqs.size(); ++i) CHECK(reqs[i].request_id == static_cast<std::int64_t>(i));
  // first two entries arrive at t=0: LLM (declared first), then the SR frame
  CHECK(reqs[0].model_index == 0);
  CHECK(reqs[1].model_index == 1);
  CHECK(reqs[1].arrival == Time::zero());
  CHECK(*reqs[1].deadline == Rate::of(120).period());
  // last SR frame at 11/120 s exactly
  CHECK(reqs.back().arrival == Rate::of(120).frame_time(11));

  auto d = builtin_scenario('D');
  auto dreqs = generate_arrivals(d, Time::from_ms(100));
  for (const auto& r : dreqs) {
    if (r.model_index >= 2) CHECK(*r.deadline - r.arrival == Rate::of(60).period());
  }

  ScenarioSpec empty_like = builtin_scenario('A');
  empty_like.prompts.clear();
  CHECK(generate_arrivals(empty_like, Time::from_ms(50)).empty());
}

TEST_CASE("next layer descriptor walks stages and contexts") {
  auto b = builtin_scenario('B');
  InferenceRequest llm;
  llm.model_index = 0;
  llm.stage = Stage::Prefill;
  llm.next_layer = 0;
  llm.input_tokens = 1024;
  llm.output_tokens = 32;
  auto ref = next_layer_descriptor(llm, b.models[0]);
  CHECK(ref.model == "LLM");
  CHECK(ref.stage == Stage::Prefill);
  CHECK(ref.layer_index == 0);
  CHECK(ref.context_tokens == 1024);

  llm.stage = Stage::Decode;
  llm.decode_k = 5;
  llm.next_layer = 3;
  ref = next_layer_descriptor(llm, b.models[0]);
  CHECK(ref.context_tokens == 1029);
  CHECK(ref.layer_index == 3);

  InferenceRequest frame;
  frame.model_index = 1;
  frame.stage = Stage::Forward;
  ref = next_layer_descriptor(frame, b.models[1]);
  CHECK(ref.model == "SR");
  CHECK(ref.context_tokens == 0);
  CHECK(ref.layer_index == 0);

  frame.status = RequestStatus::Complete;
  CHECK_THROWS_AS(next_layer_descriptor(frame, b.models[1]), ConfigError);

  // encoder context is the query length, not the prefill length
  auto a = builtin_scenario('A');
  InferenceRequest enc;
  enc.model_index = 0;
  enc.stage = Stage::Forward;
  enc.input_tokens = 1024;
  enc.query_tokens = 32;
  CHECK(next_layer_descriptor(enc, a.models[0]).context_tokens == 32);
}
