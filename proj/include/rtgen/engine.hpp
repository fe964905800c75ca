#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "rtgen/error.hpp"
#include "rtgen/latencydb.hpp"
#include "rtgen/policies.hpp"
#include "rtgen/time.hpp"
#include "rtgen/types.hpp"
#include "rtgen/workload.hpp"

namespace rtgen {

enum class TraceKind {
  LayerStart,
  LayerFinish,
  LayerAbort,
  TokenEmit,
  RequestComplete,
  RequestDrop,
  RequestStarve
};

inline std::string_view trace_kind_name(TraceKind k) {
  switch (k) {
    case TraceKind::LayerStart: return "layer_start";
    case TraceKind::LayerFinish: return "layer_finish";
    case TraceKind::LayerAbort: return "layer_abort";
    case TraceKind::TokenEmit: return "token_emit";
    case TraceKind::RequestComplete: return "request_complete";
    case TraceKind::RequestDrop: return "request_drop";
    case TraceKind::RequestStarve: return "request_starve";
  }
  throw InternalError("bad trace kind");
}

enum class AbortCause { None, Preempted, Expired, Halted };

struct TraceRecord {
  Time t;
  TraceKind kind = TraceKind::LayerStart;
  std::int64_t request_id = -1;
  std::string model;
  Stage stage = Stage::Forward;
  int layer = 0;  // layer index; token index for token_emit records
  std::string backend;
  BackendKind backend_kind = BackendKind::CPU;  // meaningful for layer records
  AbortCause abort_cause = AbortCause::None;
};

// Append-only event log of one simulation run. The JSONL form keeps a fixed
// field order so equal runs serialize byte-identically.
struct Trace {
  std::vector<TraceRecord> records;

  std::string to_jsonl() const {
    std::string out;
    out.reserve(records.size() * 96);
    for (const auto& r : records) {
      out += "{\"t_ms\":";
      out += r.t.ms_fixed(6);
      out += ",\"kind\":\"";
      out += trace_kind_name(r.kind);
      out += "\",\"request_id\":";
      out += std::to_string(r.request_id);
      out += ",\"model\":\"";
      out += r.model;
      out += "\",\"stage\":\"";
      out += stage_name_lower(r.stage);
      out += "\",\"layer\":";
      out += std::to_string(r.layer);
      out += ",\"backend\":\"";
      out += r.backend;
      out += "\"}\n";
    }
    return out;
  }
};

struct EngineOptions {
  // Under UntilLLMComplete: with no generative layer completion for this long,
  // the generative request is declared starved and the run ends.
  Time starvation_bound = Time::from_ms(2000);
  // Periodic real-time models skip CPU rows when an accelerator row exists.
  bool rt_excludes_cpu = true;
};

inline std::vector<BackendSpec> default_backends() {
  return {{"npu0", BackendKind::NPU}, {"gpu0", BackendKind::GPU}, {"cpu0", BackendKind::CPU}};
}

// Instance-mode job: one request whose layers all share a latency row.
struct JobSpec {
  std::string model;  // latency database model name
  Stage stage = Stage::Forward;
  int context = 0;
  int layers = 1;
  Time arrival;
  std::optional<Time> deadline;
  bool generative = false;
};

struct ScriptedStart {
  Time at;
  int job_index = -1;
  int backend_index = -1;
};

// Backend kinds a scenario model may run a stage on: database coverage,
// restricted to kinds present among the backends, with CPU dropped for
// periodic models when an accelerator row exists.
inline std::vector<BackendKind> permitted_model_kinds(const ModelSpec& m, Stage stage,
                                                      const LatencyDatabase& db,
                                                      const std::vector<BackendSpec>& backends,
                                                      const EngineOptions& opt) {
  auto kinds = db.supported_kinds(std::string(task_name(m.task)), stage);
  if (opt.rt_excludes_cpu && m.fps && kinds.size() > 1) std::erase(kinds, BackendKind::CPU);
  std::vector<BackendKind> present;
  for (BackendKind k : kinds) {
    for (const auto& b : backends) {
      if (b.kind == k) {
        present.push_back(k);
        break;
      }
    }
  }
  return present;
}

namespace detail {

struct CoreRequest {
  std::int64_t assigned_id = -1;
  int decl_index = 0;
  std::string model_id;
  std::string db_model;
  int scenario_model = -1;
  int job_index = -1;
  Time arrival;
  Time lineage_arrival;
  std::optional<Time> deadline;
  bool generative = false;
  bool generative_lineage = false;
  int prompt_index = -1;
  int input_tokens = 0;
  int output_tokens = 0;
  int query_tokens = 0;
  int layer_count = 1;
  int cascade_child = -1;
  bool encoder_context = false;
  int fixed_context = -1;  // >= 0: instance mode

  Stage stage = Stage::Forward;
  int decode_k = 0;
  int next_layer = 0;
  RequestStatus status = RequestStatus::Pending;
  bool issued = false;
  bool running = false;
  int backend = -1;
  bool running_abortable = false;
  std::uint32_t run_gen = 0;
  Time run_finish;
  std::int64_t next_frame = -1;  // periodic chain: index of the frame after this one

  bool terminal() const {
    return status == RequestStatus::Complete || status == RequestStatus::Dropped ||
           status == RequestStatus::Starved;
  }

  int context_tokens() const {
    if (fixed_context >= 0) return fixed_context;
    switch (stage) {
      case Stage::Forward: return encoder_context ? query_tokens : 0;
      case Stage::Prefill: return input_tokens;
      case Stage::Decode: return input_tokens + decode_k;
    }
    throw InternalError("bad stage");
  }

  bool last_layer_completes_request() const {
    if (next_layer != layer_count - 1) return false;
    if (stage == Stage::Forward) return true;
    return stage == Stage::Decode && decode_k + 1 == output_tokens;
  }
};

struct Event {
  Time t;
  int kind = 0;  // 0 arrival < 1 deadline expiry < 2 layer complete < 3 fixed horizon
  std::int64_t sort_a = 0;
  std::int64_t sort_b = 0;
  int req = -1;
  std::uint32_t gen = 0;
};

struct EventAfter {
  bool operator()(const Event& a, const Event& b) const {
    if (a.t != b.t) return a.t > b.t;
    if (a.kind != b.kind) return a.kind > b.kind;
    if (a.sort_a != b.sort_a) return a.sort_a > b.sort_a;
    return a.sort_b > b.sort_b;
  }
};

struct BackendRun {
  bool busy = false;
  int req = -1;
  Time finish;
};

struct LineageState {
  bool token0 = false;
  Time last_progress;
  bool active = true;
  int current_req = -1;
};

// Deterministic event loop shared by scenario runs, policy runs on tiny
// instances, and scripted witness replays. Single-threaded by construction.
class Core {
 public:
  Core(const LatencyDatabase& db, SchedulerPolicy policy, std::vector<BackendSpec> backends,
       EngineOptions opt)
      : db_(db), policy_(policy), backends_(std::move(backends)), opt_(opt) {
    if (backends_.empty()) throw ConfigError("zero backends");
    running_.resize(backends_.size());
  }

  void load_scenario(const ScenarioSpec& scenario) {
    scenario.validate();
    scenario_ = &scenario;
    for (std::size_t i = 0; i < scenario.models.size(); ++i) {
      const ModelSpec& m = scenario.models[i];
      for (Stage stage : model_stages(m)) {
        if (permitted_kinds_model(static_cast<int>(i), stage).empty()) {
          throw ConfigError("no supported backend for model " + m.id + " stage " +
                            std::string(stage_name(stage)));
        }
      }
    }
    compute_aot_bindings();
    int entry = scenario.cascade_entry_index();
    for (std::size_t p = 0; p < scenario.prompts.size(); ++p) {
      const PromptJob& job = scenario.prompts[p];
      LineageState lin;
      lin.last_progress = job.arrival;
      lineages_.push_back(lin);
      ++active_lineages_;
      int idx = make_prompt_request(entry, static_cast<int>(p), job);
      lineages_.back().current_req = idx;
      push_arrival(idx);
    }
    for (std::size_t i = 0; i < scenario.models.size(); ++i) {
      if (scenario.models[i].fps) {
        int idx = make_frame_request(static_cast<int>(i), 0);
        push_arrival(idx);
      }
    }
    if (scenario.horizon.policy == HorizonPolicy::FixedMs) {
      pq_.push(Event{scenario.horizon.fixed, 3, 0, 0, -1, 0});
    } else if (active_lineages_ == 0) {
      issuance_open_ = false;  // nothing generative to wait for: horizon collapses to zero
    }
  }

  void load_jobs(const std::vector<JobSpec>& jobs) {
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      const JobSpec& job = jobs[j];
      if (job.layers < 1) throw ConfigError("job needs layers >= 1");
      CoreRequest r;
      r.decl_index = static_cast<int>(j);
      r.job_index = static_cast<int>(j);
      r.model_id = job.model;
      r.db_model = job.model;
      r.arrival = job.arrival;
      r.lineage_arrival = job.arrival;
      r.deadline = job.deadline;
      r.generative = job.generative;
      r.layer_count = job.layers;
      r.fixed_context = job.context;
      r.stage = job.stage;
      if (permitted_options_probe(r).empty()) {
        throw ConfigError("no supported backend for job " + job.model);
      }
      reqs_.push_back(std::move(r));
      push_arrival(static_cast<int>(reqs_.size()) - 1);
    }
  }

  void set_script(const std::vector<ScriptedStart>* script) { script_ = script; }

  Trace run() {
    while (true) {
      std::optional<Time> next_t;
      if (!pq_.empty()) next_t = pq_.top().t;
      if (starvation_enabled() && active_lineages_ > 0) {
        Time bound = starve_deadline();
        if (!next_t || bound < *next_t) {
          halt_generative(bound);
          dispatch(bound);
          continue;
        }
      }
      if (!next_t) break;
      Time t = *next_t;
      bool effective = false;
      while (!pq_.empty() && pq_.top().t == t) {
        Event e = pq_.top();
        pq_.pop();
        effective = handle(e, t) || effective;
      }
      // A batch of stale completion events changes nothing; re-running the
      // dispatch would hand out boundary instants that do not exist.
      if (effective) dispatch(t);
    }
    if (script_ && script_pos_ != script_->size()) {
      throw InternalError("witness replay left unexecuted starts");
    }
    for (const auto& r : reqs_) {
      if (r.issued && !r.terminal()) throw InternalError("request left without terminal status");
    }
    return std::move(trace_);
  }

  // Terminal status of an instance job, for oracle comparisons.
  RequestStatus job_status(int job_index) const {
    for (const auto& r : reqs_) {
      if (r.job_index == job_index) return r.status;
    }
    throw InternalError("unknown job index");
  }

 private:
  // --- construction of requests ---

  int make_prompt_request(int entry_model, int prompt_index, const PromptJob& job) {
    const ModelSpec& m = scenario_->models[entry_model];
    CoreRequest r;
    r.decl_index = entry_model;
    r.scenario_model = entry_model;
    r.model_id = m.id;
    r.db_model = std::string(task_name(m.task));
    r.arrival = job.arrival;
    r.lineage_arrival = job.arrival;
    r.generative = m.kind == ModelKind::Generative;
    r.generative_lineage = true;
    r.prompt_index = prompt_index;
    r.input_tokens = job.input_tokens;
    r.output_tokens = job.output_tokens;
    r.query_tokens = job.query_tokens;
    r.layer_count = m.layer_count;
    r.encoder_context = m.task == Task::Encoder;
    r.stage = r.generative ? Stage::Prefill : Stage::Forward;
    r.cascade_child = m.cascade_next ? scenario_->model_index(*m.cascade_next) : -1;
    if (m.fps) r.deadline = r.arrival + m.fps->period();
    reqs_.push_back(std::move(r));
    return static_cast<int>(reqs_.size()) - 1;
  }

  int make_frame_request(int model_index, std::int64_t n) {
    const ModelSpec& m = scenario_->models[model_index];
    CoreRequest r;
    r.decl_index = model_index;
    r.scenario_model = model_index;
    r.model_id = m.id;
    r.db_model = std::string(task_name(m.task));
    r.arrival = m.fps->frame_time(n);
    r.lineage_arrival = r.arrival;
    r.deadline = r.arrival + m.fps->period();
    r.layer_count = m.layer_count;
    r.encoder_context = m.task == Task::Encoder;
    r.stage = Stage::Forward;
    r.next_frame = n + 1;
    r.cascade_child = m.cascade_next ? scenario_->model_index(*m.cascade_next) : -1;
    reqs_.push_back(std::move(r));
    return static_cast<int>(reqs_.size()) - 1;
  }

  void spawn_cascade_child(int parent_idx, Time now) {
    const CoreRequest parent = reqs_[parent_idx];  // copy: pushing below may reallocate
    const ModelSpec& parent_model = scenario_->models[parent.scenario_model];
    const ModelSpec& child_model = scenario_->models[parent.cascade_child];
    Time delay = (parent_model.task == Task::Encoder && child_model.kind == ModelKind::Generative)
                     ? scenario_->retrieval_delay
                     : Time::zero();
    CoreRequest r;
    r.decl_index = parent.cascade_child;
    r.scenario_model = parent.cascade_child;
    r.model_id = child_model.id;
    r.db_model = std::string(task_name(child_model.task));
    r.arrival = now + delay;
    r.lineage_arrival = parent.lineage_arrival;
    r.generative = child_model.kind == ModelKind::Generative;
    r.generative_lineage = parent.generative_lineage;
    r.prompt_index = parent.prompt_index;
    r.input_tokens = parent.input_tokens;
    r.output_tokens = parent.output_tokens;
    r.query_tokens = parent.query_tokens;
    r.layer_count = child_model.layer_count;
    r.encoder_context = child_model.task == Task::Encoder;
    r.stage = r.generative ? Stage::Prefill : Stage::Forward;
    r.cascade_child = child_model.cascade_next ? scenario_->model_index(*child_model.cascade_next) : -1;
    if (child_model.fps) r.deadline = r.arrival + child_model.fps->period();
    bool track_lineage = r.generative_lineage && r.prompt_index >= 0;
    reqs_.push_back(std::move(r));
    int idx = static_cast<int>(reqs_.size()) - 1;
    if (track_lineage) lineages_[reqs_[idx].prompt_index].current_req = idx;
    push_arrival(idx);
  }

  void push_arrival(int idx) {
    pq_.push(Event{reqs_[idx].arrival, 0, reqs_[idx].decl_index, idx, idx, 0});
  }

  // --- event handling ---

  bool handle(const Event& e, Time now) {
    switch (e.kind) {
      case 0: return on_arrival(e.req, now);
      case 1: return on_expiry(e.req, now);
      case 2: return on_layer_complete(e, now);
      case 3: return on_fixed_horizon(now);
      default: throw InternalError("bad event kind");
    }
  }

  bool on_arrival(int idx, Time now) {
    if (!issuance_open_) return false;
    if (scenario_ && scenario_->horizon.policy == HorizonPolicy::FixedMs &&
        !(now < scenario_->horizon.fixed)) {
      return false;  // issuance window is [0, horizon)
    }
    reqs_[idx].issued = true;
    reqs_[idx].assigned_id = next_id_++;
    if (reqs_[idx].deadline) pq_.push(Event{*reqs_[idx].deadline, 1, reqs_[idx].assigned_id, 0, idx, 0});
    std::int64_t next_frame = reqs_[idx].next_frame;
    int model = reqs_[idx].scenario_model;
    if (next_frame >= 0) {
      int next_idx = make_frame_request(model, next_frame);  // may reallocate reqs_
      push_arrival(next_idx);
    }
    return true;
  }

  bool on_expiry(int idx, Time now) {
    CoreRequest& r = reqs_[idx];
    if (!r.issued || r.terminal()) return false;
    if (r.running && r.run_finish == now && r.last_layer_completes_request()) {
      return false;  // completes exactly at its deadline; the completion event wins
    }
    if (r.running) abort_layer(idx, AbortCause::Expired, now);
    r.status = RequestStatus::Dropped;
    record(now, TraceKind::RequestDrop, r);
    return true;
  }

  bool on_layer_complete(const Event& e, Time now) {
    CoreRequest& r = reqs_[e.req];
    if (!r.running || e.gen != r.run_gen || r.run_finish != now) return false;  // stale after an abort
    int backend = r.backend;
    r.running = false;
    running_[backend] = BackendRun{};
    record_layer(now, TraceKind::LayerFinish, r, backend);
    ++r.next_layer;
    if (r.generative_lineage && r.prompt_index >= 0) {
      lineages_[r.prompt_index].last_progress = now;
    }
    if (r.next_layer < r.layer_count) return true;
    switch (r.stage) {
      case Stage::Forward:
        complete_request(e.req, now);
        break;
      case Stage::Prefill:
        emit_token(e.req, 0, now);
        r.stage = Stage::Decode;
        r.decode_k = 0;
        r.next_layer = 0;
        break;
      case Stage::Decode:
        emit_token(e.req, r.decode_k + 1, now);
        if (r.decode_k + 1 == r.output_tokens) {
          complete_request(e.req, now);
        } else {
          ++r.decode_k;
          r.next_layer = 0;
        }
        break;
    }
    return true;
  }

  bool on_fixed_horizon(Time now) {
    issuance_open_ = false;
    halt_generative(now);
    return true;
  }

  void emit_token(int idx, int token, Time now) {
    CoreRequest& r = reqs_[idx];
    TraceRecord rec;
    rec.t = now;
    rec.kind = TraceKind::TokenEmit;
    rec.request_id = r.assigned_id;
    rec.model = r.model_id;
    rec.stage = token == 0 ? Stage::Prefill : Stage::Decode;
    rec.layer = token;
    trace_.records.push_back(std::move(rec));
    if (token == 0 && r.prompt_index >= 0) lineages_[r.prompt_index].token0 = true;
  }

  void complete_request(int idx, Time now) {
    reqs_[idx].status = RequestStatus::Complete;
    record(now, TraceKind::RequestComplete, reqs_[idx]);
    bool generative = reqs_[idx].generative;
    int prompt = reqs_[idx].prompt_index;
    if (scenario_ && reqs_[idx].cascade_child >= 0) spawn_cascade_child(idx, now);  // may reallocate reqs_
    if (generative && prompt >= 0 && lineages_[prompt].active) {
      lineages_[prompt].active = false;
      --active_lineages_;
      if (active_lineages_ == 0 && scenario_ &&
          scenario_->horizon.policy == HorizonPolicy::UntilLLMComplete) {
        issuance_open_ = false;
      }
    }
  }

  // Starvation bound hit or fixed horizon reached: incomplete generative
  // pipelines end as Starved, issuance stops, in-flight frames drain.
  void halt_generative(Time at) {
    for (auto& lin : lineages_) {
      if (!lin.active) continue;
      lin.active = false;
      --active_lineages_;
      int idx = lin.current_req;
      if (idx < 0) continue;
      CoreRequest& r = reqs_[idx];
      if (r.terminal()) continue;
      if (r.running) abort_layer(idx, AbortCause::Halted, at);
      if (!r.issued) r.assigned_id = next_id_++;
      r.issued = true;
      r.status = RequestStatus::Starved;
      record(at, TraceKind::RequestStarve, r);
    }
    issuance_open_ = false;
  }

  bool starvation_enabled() const {
    return scenario_ && scenario_->horizon.policy == HorizonPolicy::UntilLLMComplete;
  }

  Time starve_deadline() const {
    bool found = false;
    Time best;
    for (const auto& lin : lineages_) {
      if (!lin.active) continue;
      Time bound = lin.last_progress + opt_.starvation_bound;
      if (!found || bound < best) {
        best = bound;
        found = true;
      }
    }
    if (!found) throw InternalError("no active lineage");
    return best;
  }

  // --- dispatch ---

  SchedView view_of(const CoreRequest& r) const {
    SchedView v;
    v.request_id = r.assigned_id;
    v.decl_index = r.decl_index;
    v.arrival = r.arrival;
    v.lineage_arrival = r.lineage_arrival;
    v.deadline = r.deadline;
    if (scenario_) {
      v.pre_first_token_generative =
          r.generative_lineage && r.prompt_index >= 0 && !lineages_[r.prompt_index].token0;
    } else {
      v.pre_first_token_generative = r.generative && !r.terminal();
    }
    return v;
  }

  std::vector<Stage> model_stages(const ModelSpec& m) const {
    if (m.kind == ModelKind::Generative) return {Stage::Prefill, Stage::Decode};
    return {Stage::Forward};
  }

  std::vector<BackendKind> permitted_kinds_model(int model_index, Stage stage) const {
    return permitted_model_kinds(scenario_->models[model_index], stage, db_, backends_, opt_);
  }

  std::vector<PlacementOption> permitted_options_probe(const CoreRequest& r) const {
    std::vector<PlacementOption> out;
    for (std::size_t b = 0; b < backends_.size(); ++b) {
      if (!db_.supports(r.db_model, r.stage, backends_[b].kind)) continue;
      out.push_back(PlacementOption{static_cast<int>(b), backends_[b].kind,
                                    db_.lookup(r.db_model, r.stage, r.context_tokens(), backends_[b].kind)});
    }
    return out;
  }

  std::vector<PlacementOption> permitted_options(const CoreRequest& r) const {
    std::vector<BackendKind> kinds;
    if (scenario_) {
      kinds = permitted_kinds_model(r.scenario_model, r.stage);
    } else {
      kinds = db_.supported_kinds(r.db_model, r.stage);
    }
    std::vector<PlacementOption> out;
    for (std::size_t b = 0; b < backends_.size(); ++b) {
      bool allowed = false;
      for (BackendKind k : kinds) allowed = allowed || k == backends_[b].kind;
      if (!allowed) continue;
      out.push_back(PlacementOption{static_cast<int>(b), backends_[b].kind,
                                    db_.lookup(r.db_model, r.stage, r.context_tokens(), backends_[b].kind)});
    }
    return out;
  }

  void compute_aot_bindings() {
    aot_bindings_.assign(scenario_->models.size(), {});
    const PromptJob* job = scenario_->prompts.empty() ? nullptr : &scenario_->prompts.front();
    for (std::size_t i = 0; i < scenario_->models.size(); ++i) {
      const ModelSpec& m = scenario_->models[i];
      for (Stage stage : model_stages(m)) {
        int ctx = 0;
        if (m.task == Task::Encoder) ctx = job ? job->query_tokens : 32;
        if (stage == Stage::Prefill || stage == Stage::Decode) ctx = job ? job->input_tokens : 64;
        auto kinds = permitted_kinds_model(static_cast<int>(i), stage);
        if (kinds.empty()) continue;
        aot_bindings_[i][static_cast<int>(stage)] =
            db_.best_backend(std::string(task_name(m.task)), stage, ctx, kinds);
      }
    }
  }

  std::optional<BackendKind> aot_kind(const CoreRequest& r) const {
    if (!policy_.is_aot()) return std::nullopt;
    if (scenario_) return aot_bindings_[r.scenario_model][static_cast<int>(r.stage)];
    // Instance jobs bind to their cheapest profiled backend.
    auto opts = permitted_options_probe(r);
    const PlacementOption* best = nullptr;
    for (const auto& o : opts) {
      if (!best || detail::option_better(o, *best)) best = &o;
    }
    if (!best) throw InternalError("unbound instance job");
    return best->kind;
  }

  std::vector<BackendOccupancy> occupancy_snapshot() const {
    std::vector<BackendOccupancy> occ(backends_.size());
    for (std::size_t b = 0; b < backends_.size(); ++b) {
      if (!running_[b].busy) continue;
      const CoreRequest& r = reqs_[running_[b].req];
      occ[b].busy = true;
      occ[b].occupant_deadline = effective_deadline(policy_, view_of(r));
      occ[b].occupant_abortable = r.running_abortable;
      occ[b].busy_until = running_[b].finish;
    }
    return occ;
  }

  void dispatch(Time now) {
    if (script_) {
      dispatch_scripted(now);
      return;
    }
    // A layer aborted by preemption re-enters the queue at the next event
    // boundary, not within the pass that displaced it.
    std::vector<char> preempted_now(reqs_.size(), 0);
    bool acted = true;
    while (acted) {
      acted = false;
      std::vector<std::size_t> idxs;
      std::vector<SchedView> views;
      for (std::size_t i = 0; i < reqs_.size(); ++i) {
        const CoreRequest& r = reqs_[i];
        if (!r.issued || r.terminal() || r.running || preempted_now[i]) continue;
        idxs.push_back(i);
        views.push_back(view_of(r));
      }
      DispatchPlan plan;
      plan.planned_free.assign(backends_.size(), now);
      for (std::size_t b = 0; b < backends_.size(); ++b) {
        if (running_[b].busy) plan.planned_free[b] = running_[b].finish;
      }
      for (std::size_t oi : priority_order(policy_, views)) {
        CoreRequest& r = reqs_[idxs[oi]];
        if (r.running || r.terminal()) continue;
        auto permitted = permitted_options(r);
        auto occ = occupancy_snapshot();
        Placement p = select_backend(policy_, views[oi], now, permitted, occ, aot_kind(r), &plan);
        if (p.backend_index < 0) continue;
        if (p.preempt) {
          int victim = running_[p.backend_index].req;
          abort_layer(victim, AbortCause::Preempted, now);
          preempted_now[victim] = 1;
        }
        start_layer(static_cast<int>(idxs[oi]), p.backend_index, now);
        plan.planned_free[p.backend_index] = reqs_[idxs[oi]].run_finish;
        acted = true;
      }
    }
  }

  void dispatch_scripted(Time now) {
    while (script_pos_ < script_->size() && (*script_)[script_pos_].at == now) {
      const ScriptedStart& s = (*script_)[script_pos_];
      int idx = -1;
      for (std::size_t i = 0; i < reqs_.size(); ++i) {
        if (reqs_[i].job_index == s.job_index) idx = static_cast<int>(i);
      }
      if (idx < 0) throw InternalError("witness names an unknown job");
      CoreRequest& r = reqs_[idx];
      if (!r.issued || r.terminal() || r.running) throw InternalError("witness start on unready job");
      if (s.backend_index < 0 || s.backend_index >= static_cast<int>(backends_.size()) ||
          running_[s.backend_index].busy) {
        throw InternalError("witness start on busy backend");
      }
      start_layer(idx, s.backend_index, now);
      ++script_pos_;
    }
    if (script_pos_ < script_->size() && (*script_)[script_pos_].at < now) {
      throw InternalError("witness replay missed a start time");
    }
  }

  void start_layer(int idx, int backend, Time now) {
    CoreRequest& r = reqs_[idx];
    Time latency = db_.lookup(r.db_model, r.stage, r.context_tokens(), backends_[backend].kind);
    r.running = true;
    r.backend = backend;
    r.running_abortable = script_ ? false : abortable_flag(policy_, view_of(r));
    ++r.run_gen;
    r.run_finish = now + latency;
    running_[backend] = BackendRun{true, idx, r.run_finish};
    record_layer(now, TraceKind::LayerStart, r, backend);
    pq_.push(Event{r.run_finish, 2, r.assigned_id, static_cast<std::int64_t>(r.run_gen), idx, r.run_gen});
  }

  // Aborted progress is discarded: the layer index stays where it was.
  void abort_layer(int idx, AbortCause cause, Time now) {
    CoreRequest& r = reqs_[idx];
    if (!r.running) throw InternalError("abort of an idle request");
    int backend = r.backend;
    r.running = false;
    ++r.run_gen;
    running_[backend] = BackendRun{};
    TraceRecord rec;
    rec.t = now;
    rec.kind = TraceKind::LayerAbort;
    rec.request_id = r.assigned_id;
    rec.model = r.model_id;
    rec.stage = r.stage;
    rec.layer = r.next_layer;
    rec.backend = backends_[backend].id;
    rec.backend_kind = backends_[backend].kind;
    rec.abort_cause = cause;
    trace_.records.push_back(std::move(rec));
  }

  void record_layer(Time t, TraceKind kind, const CoreRequest& r, int backend) {
    TraceRecord rec;
    rec.t = t;
    rec.kind = kind;
    rec.request_id = r.assigned_id;
    rec.model = r.model_id;
    rec.stage = r.stage;
    rec.layer = r.next_layer;
    rec.backend = backends_[backend].id;
    rec.backend_kind = backends_[backend].kind;
    trace_.records.push_back(std::move(rec));
  }

  void record(Time t, TraceKind kind, const CoreRequest& r) {
    TraceRecord rec;
    rec.t = t;
    rec.kind = kind;
    rec.request_id = r.assigned_id;
    rec.model = r.model_id;
    rec.stage = r.stage;
    rec.layer = r.next_layer;
    trace_.records.push_back(std::move(rec));
  }

  const LatencyDatabase& db_;
  SchedulerPolicy policy_;
  std::vector<BackendSpec> backends_;
  EngineOptions opt_;
  const ScenarioSpec* scenario_ = nullptr;
  const std::vector<ScriptedStart>* script_ = nullptr;

  std::vector<CoreRequest> reqs_;
  std::priority_queue<Event, std::vector<Event>, EventAfter> pq_;
  std::vector<BackendRun> running_;
  std::vector<LineageState> lineages_;
  std::vector<std::array<std::optional<BackendKind>, 3>> aot_bindings_;
  Trace trace_;
  std::int64_t next_id_ = 0;
  int active_lineages_ = 0;
  bool issuance_open_ = true;
  std::size_t script_pos_ = 0;
};

}  // namespace detail

// Runs one scenario under one policy on the given backends; the returned trace
// is a pure function of the arguments.
inline Trace simulate(const ScenarioSpec& scenario, const LatencyDatabase& db, SchedulerPolicy policy,
                      const std::vector<BackendSpec>& backends, EngineOptions opt = {}) {
  detail::Core core(db, policy, backends, opt);
  core.load_scenario(scenario);
  return core.run();
}

struct JobRunResult {
  Trace trace;
  std::vector<RequestStatus> statuses;
};

inline JobRunResult run_jobs(const std::vector<JobSpec>& jobs, const LatencyDatabase& db,
                             SchedulerPolicy policy, const std::vector<BackendSpec>& backends,
                             EngineOptions opt = {}) {
  detail::Core core(db, policy, backends, opt);
  core.load_jobs(jobs);
  JobRunResult result;
  result.trace = core.run();
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    result.statuses.push_back(core.job_status(static_cast<int>(j)));
  }
  return result;
}

// Executes a fixed start schedule through the same event loop (deadline drops
// included); throws InternalError when the schedule does not replay cleanly.
inline JobRunResult replay_jobs(const std::vector<JobSpec>& jobs, const LatencyDatabase& db,
                                const std::vector<BackendSpec>& backends,
                                const std::vector<ScriptedStart>& script, EngineOptions opt = {}) {
  detail::Core core(db, SchedulerPolicy::make(PolicyId::FCFS_AOT), backends, opt);
  core.load_jobs(jobs);
  core.set_script(&script);
  JobRunResult result;
  result.trace = core.run();
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    result.statuses.push_back(core.job_status(static_cast<int>(j)));
  }
  return result;
}

}  // namespace rtgen
