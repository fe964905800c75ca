#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rtgen/error.hpp"
#include "rtgen/time.hpp"
#include "rtgen/types.hpp"

namespace rtgen {

struct ModelSpec {
  std::string id;
  Task task = Task::SR;
  ModelKind kind = ModelKind::SinglePass;
  int layer_count = 1;
  std::optional<Rate> fps;
  std::optional<std::string> cascade_next;
};

struct PromptJob {
  Time arrival;
  int input_tokens = 0;   // prefill sequence length
  int output_tokens = 0;  // decode iterations
  int query_tokens = 32;  // encoder sequence length (raw query before retrieval)
};

enum class HorizonPolicy { UntilLLMComplete, FixedMs };

struct Horizon {
  HorizonPolicy policy = HorizonPolicy::UntilLLMComplete;
  Time fixed;  // meaningful for FixedMs
};

struct ScenarioSpec {
  std::string id;
  std::vector<ModelSpec> models;  // declaration order is the FCFS tie-break order
  std::vector<PromptJob> prompts;
  Horizon horizon;
  Time retrieval_delay;

  int model_index(std::string_view model_id) const {
    for (std::size_t i = 0; i < models.size(); ++i) {
      if (models[i].id == model_id) return static_cast<int>(i);
    }
    return -1;
  }

  // Index of the (at most one) generative model, or -1.
  int generative_index() const {
    for (std::size_t i = 0; i < models.size(); ++i) {
      if (models[i].kind == ModelKind::Generative) return static_cast<int>(i);
    }
    return -1;
  }

  // Root of the cascade chain that ends in the generative model; prompt jobs
  // instantiate this model. Equals generative_index() when nothing cascades
  // into the generative model.
  int cascade_entry_index() const {
    int g = generative_index();
    if (g < 0) return -1;
    int current = g;
    bool moved = true;
    while (moved) {
      moved = false;
      for (std::size_t i = 0; i < models.size(); ++i) {
        if (models[i].cascade_next && model_index(*models[i].cascade_next) == current) {
          current = static_cast<int>(i);
          moved = true;
          break;
        }
      }
    }
    return current;
  }

  void validate() const {
    if (models.empty()) throw ConfigError("empty scenario");
    std::set<std::string> ids;
    for (const auto& m : models) {
      if (m.id.empty()) throw ConfigError("model with empty id");
      if (!ids.insert(m.id).second) throw ConfigError("duplicate model id: " + m.id);
      if (m.layer_count < 1) throw ConfigError("layer_count must be >= 1: " + m.id);
      if (m.kind == ModelKind::Generative && m.fps) throw ConfigError("generative model with fps: " + m.id);
      if (m.kind == ModelKind::Generative && m.task != Task::LLM) {
        throw ConfigError("generative model must be an LLM task: " + m.id);
      }
    }
    int generative_count = 0;
    for (const auto& m : models) {
      if (m.kind == ModelKind::Generative) ++generative_count;
    }
    if (generative_count > 1) throw ConfigError("at most one generative cascade per scenario");
    for (const auto& m : models) {
      if (!m.cascade_next) continue;
      int target = model_index(*m.cascade_next);
      if (target < 0) throw ConfigError("unknown model id in cascade: " + *m.cascade_next);
      if (models[target].fps) throw ConfigError("cascade target cannot be periodic: " + *m.cascade_next);
    }
    // Cycle check along cascade_next chains.
    for (std::size_t start = 0; start < models.size(); ++start) {
      std::set<int> seen;
      int current = static_cast<int>(start);
      while (models[current].cascade_next) {
        if (!seen.insert(current).second) throw ConfigError("cyclic cascade");
        current = model_index(*models[current].cascade_next);
      }
      if (seen.count(current)) throw ConfigError("cyclic cascade");
    }
    if (!prompts.empty() && generative_count == 0) {
      throw ConfigError("prompts require a generative model");
    }
    Time prev = Time::zero();
    bool first = true;
    for (const auto& p : prompts) {
      if (p.input_tokens < 1 || p.output_tokens < 1 || p.query_tokens < 1) {
        throw ConfigError("prompt token counts must be >= 1");
      }
      if (p.arrival.negative()) throw ConfigError("prompt arrival must be >= 0");
      if (!first && p.arrival < prev) throw ConfigError("prompt arrivals must be non-decreasing");
      prev = p.arrival;
      first = false;
    }
    if (retrieval_delay.negative()) throw ConfigError("retrieval delay must be >= 0");
    if (horizon.policy == HorizonPolicy::FixedMs && !(horizon.fixed > Time::zero())) {
      throw ConfigError("fixed horizon must be positive");
    }
  }
};

// One frame or one generative job, as produced by arrival generation. The
// engine keeps its own mutable copy while simulating.
struct InferenceRequest {
  std::int64_t request_id = -1;
  int model_index = -1;
  int decl_index = -1;
  Time arrival;
  Time lineage_arrival;           // prompt/frame origin; cascade children inherit it
  std::optional<Time> deadline;   // nullopt = infinite
  Stage stage = Stage::Forward;
  int decode_k = 0;               // tokens already generated in the decode stage
  int next_layer = 0;
  RequestStatus status = RequestStatus::Pending;
  int input_tokens = 0;
  int output_tokens = 0;
  int query_tokens = 0;
};

struct LayerRef {
  std::string model;  // unit-model (task) name used for latency lookups
  Stage stage = Stage::Forward;
  int layer_index = 0;
  int context_tokens = 0;
};

inline bool request_finished(const InferenceRequest& r) {
  return r.status == RequestStatus::Complete || r.status == RequestStatus::Dropped ||
         r.status == RequestStatus::Starved;
}

inline int request_context_tokens(const InferenceRequest& r, const ModelSpec& m) {
  switch (r.stage) {
    case Stage::Forward: return m.task == Task::Encoder ? r.query_tokens : 0;
    case Stage::Prefill: return r.input_tokens;
    case Stage::Decode: return r.input_tokens + r.decode_k;
  }
  throw InternalError("bad stage");
}

inline LayerRef next_layer_descriptor(const InferenceRequest& r, const ModelSpec& m) {
  if (request_finished(r)) throw ConfigError("next layer requested for a finished request");
  if (r.next_layer < 0 || r.next_layer >= m.layer_count) throw InternalError("layer index out of range");
  return LayerRef{std::string(task_name(m.task)), r.stage, r.next_layer, request_context_tokens(r, m)};
}

// Entry requests over [0, horizon): one request per period for each
// fps-bearing model plus one per prompt job, sorted by (arrival, declaration
// order) with dense request ids. Cascade children are spawned at run time.
inline std::vector<InferenceRequest> generate_arrivals(const ScenarioSpec& scenario, Time horizon) {
  if (!(horizon > Time::zero()) && !scenario.models.empty()) {
    if (horizon.negative()) throw ConfigError("horizon must be >= 0");
  }
  std::vector<InferenceRequest> out;
  int entry = scenario.cascade_entry_index();
  for (std::size_t i = 0; i < scenario.models.size(); ++i) {
    const ModelSpec& m = scenario.models[i];
    if (m.fps) {
      std::int64_t n_frames = m.fps->frames_before(horizon);
      for (std::int64_t n = 0; n < n_frames; ++n) {
        InferenceRequest r;
        r.model_index = static_cast<int>(i);
        r.decl_index = static_cast<int>(i);
        r.arrival = m.fps->frame_time(n);
        r.lineage_arrival = r.arrival;
        r.deadline = r.arrival + m.fps->period();
        r.stage = Stage::Forward;
        out.push_back(r);
      }
    }
  }
  if (entry >= 0) {
    const ModelSpec& m = scenario.models[entry];
    for (const auto& p : scenario.prompts) {
      if (!(p.arrival < horizon)) continue;
      InferenceRequest r;
      r.model_index = entry;
      r.decl_index = entry;
      r.arrival = p.arrival;
      r.lineage_arrival = p.arrival;
      r.stage = m.kind == ModelKind::Generative ? Stage::Prefill : Stage::Forward;
      r.input_tokens = p.input_tokens;
      r.output_tokens = p.output_tokens;
      r.query_tokens = p.query_tokens;
      out.push_back(r);
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const InferenceRequest& a, const InferenceRequest& b) {
    if (a.arrival != b.arrival) return a.arrival < b.arrival;
    return a.decl_index < b.decl_index;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].request_id = static_cast<std::int64_t>(i);
  return out;
}

namespace detail {

inline Time json_ms(const nlohmann::json& j, const char* field) {
  if (j.is_number_integer()) {
    std::int64_t v = j.get<std::int64_t>();
    if (v < 0) throw ConfigError(std::string(field) + " must be >= 0");
    return Time::from_ms(v);
  }
  if (j.is_number_float()) return Time::parse_ms(j.dump());
  throw ConfigError(std::string(field) + " must be a number");
}

inline Rate json_rate(const nlohmann::json& j) {
  if (j.is_number_integer()) return Rate::of(j.get<std::int64_t>());
  if (j.is_number_float()) return Rate::parse(j.dump());
  throw ConfigError("fps must be a number");
}

inline int json_positive_int(const nlohmann::json& j, const char* field) {
  if (!j.is_number_integer()) throw ConfigError(std::string(field) + " must be an integer");
  std::int64_t v = j.get<std::int64_t>();
  if (v < 1 || v > 1 << 20) throw ConfigError(std::string(field) + " out of range");
  return static_cast<int>(v);
}

}  // namespace detail

inline ScenarioSpec load_scenario(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario parse error: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("scenario document must be an object");
  ScenarioSpec s;
  s.id = doc.value("id", std::string("scenario"));
  if (doc.contains("retrieval_delay_ms")) s.retrieval_delay = detail::json_ms(doc["retrieval_delay_ms"], "retrieval_delay_ms");
  if (doc.contains("horizon")) {
    const auto& h = doc["horizon"];
    if (!h.is_object() || !h.contains("policy")) throw ConfigError("horizon needs a policy");
    std::string policy = h["policy"].get<std::string>();
    if (policy == "until_llm_complete") {
      s.horizon.policy = HorizonPolicy::UntilLLMComplete;
    } else if (policy == "fixed_ms") {
      s.horizon.policy = HorizonPolicy::FixedMs;
      if (!h.contains("ms")) throw ConfigError("fixed_ms horizon needs ms");
      s.horizon.fixed = detail::json_ms(h["ms"], "horizon.ms");
    } else {
      throw ConfigError("unknown horizon policy: " + policy);
    }
  }
  if (!doc.contains("models") || !doc["models"].is_array()) throw ConfigError("scenario needs a models array");
  for (const auto& jm : doc["models"]) {
    ModelSpec m;
    if (!jm.contains("id")) throw ConfigError("model needs an id");
    m.id = jm["id"].get<std::string>();
    if (!jm.contains("task")) throw ConfigError("model needs a task: " + m.id);
    m.task = parse_task(jm["task"].get<std::string>());
    std::string kind = jm.value("kind", std::string("single_pass"));
    if (kind == "single_pass") {
      m.kind = ModelKind::SinglePass;
    } else if (kind == "generative") {
      m.kind = ModelKind::Generative;
    } else {
      throw ConfigError("unknown model kind: " + kind);
    }
    if (!jm.contains("layers")) throw ConfigError("model needs layers: " + m.id);
    m.layer_count = detail::json_positive_int(jm["layers"], "layers");
    if (jm.contains("fps")) m.fps = detail::json_rate(jm["fps"]);
    if (jm.contains("cascade_next")) m.cascade_next = jm["cascade_next"].get<std::string>();
    s.models.push_back(std::move(m));
  }
  if (doc.contains("prompts")) {
    if (!doc["prompts"].is_array()) throw ConfigError("prompts must be an array");
    for (const auto& jp : doc["prompts"]) {
      PromptJob p;
      if (jp.contains("arrival_ms")) p.arrival = detail::json_ms(jp["arrival_ms"], "arrival_ms");
      p.input_tokens = detail::json_positive_int(jp.at("input_tokens"), "input_tokens");
      p.output_tokens = detail::json_positive_int(jp.at("output_tokens"), "output_tokens");
      if (jp.contains("query_tokens")) p.query_tokens = detail::json_positive_int(jp["query_tokens"], "query_tokens");
      s.prompts.push_back(p);
    }
  }
  s.validate();
  return s;
}

// Scenarios A-D: A = chat assistant (RAG only), B = gaming with an LLM NPC and
// SR at 120 FPS, C = game streaming assistant (RAG + SR-120 + SR-60 + Seg),
// D = video conference (RAG + SR/Seg/OD at 60 FPS). Default prompt: one job at
// t=0, 32 output tokens, long (1024-token) context except B (64).
inline ScenarioSpec builtin_scenario(char which) {
  auto encoder = [](std::string next) {
    ModelSpec m;
    m.id = "encoder";
    m.task = Task::Encoder;
    m.kind = ModelKind::SinglePass;
    m.layer_count = 1;
    m.cascade_next = std::move(next);
    return m;
  };
  auto llm = [] {
    ModelSpec m;
    m.id = "llm";
    m.task = Task::LLM;
    m.kind = ModelKind::Generative;
    m.layer_count = 16;
    return m;
  };
  auto rt = [](std::string id, Task task, std::int64_t fps) {
    ModelSpec m;
    m.id = std::move(id);
    m.task = task;
    m.kind = ModelKind::SinglePass;
    m.layer_count = 1;
    m.fps = Rate::of(fps);
    return m;
  };
  auto prompt = [](int input_tokens) {
    PromptJob p;
    p.arrival = Time::zero();
    p.input_tokens = input_tokens;
    p.output_tokens = 32;
    p.query_tokens = 32;
    return p;
  };

  ScenarioSpec s;
  s.horizon.policy = HorizonPolicy::UntilLLMComplete;
  s.retrieval_delay = Time::zero();
  switch (which) {
    case 'A':
      s.id = "scenario_a";
      s.models = {encoder("llm"), llm()};
      s.prompts = {prompt(1024)};
      break;
    case 'B':
      s.id = "scenario_b";
      s.models = {llm(), rt("sr120", Task::SR, 120)};
      s.prompts = {prompt(64)};
      break;
    case 'C':
      s.id = "scenario_c";
      s.models = {encoder("llm"), llm(), rt("sr120", Task::SR, 120), rt("sr60", Task::SR, 60),
                  rt("seg", Task::Seg, 60)};
      s.prompts = {prompt(1024)};
      break;
    case 'D':
      s.id = "scenario_d";
      s.models = {encoder("llm"), llm(), rt("sr", Task::SR, 60), rt("seg", Task::Seg, 60),
                  rt("od", Task::OD, 60)};
      s.prompts = {prompt(1024)};
      break;
    default:
      throw ConfigError(std::string("unknown builtin scenario: ") + which);
  }
  s.validate();
  return s;
}

}  // namespace rtgen
