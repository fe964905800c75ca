#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rtgen/engine.hpp"
#include "rtgen/error.hpp"
#include "rtgen/latencydb.hpp"
#include "rtgen/time.hpp"
#include "rtgen/types.hpp"
#include "rtgen/workload.hpp"

namespace rtgen {

// A request set small enough to enumerate every work-conserving schedule.
struct TinyInstance {
  std::vector<JobSpec> jobs;
  LatencyDatabase db;
  std::vector<BackendSpec> backends;

  void validate() const {
    if (jobs.empty()) throw ConfigError("instance has no jobs");
    if (jobs.size() > 8) throw ConfigError("instance too large: more than 8 requests");
    int total_layers = 0;
    for (const auto& j : jobs) total_layers += j.layers;
    if (total_layers > 12) throw ConfigError("instance too large: more than 12 layer instances");
    if (backends.empty() || backends.size() > 3) throw ConfigError("instance needs 1..3 backends");
  }

  int generative_index() const {
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      if (jobs[j].generative) return static_cast<int>(j);
    }
    return -1;
  }
};

enum class Objective { MinViolations, MinTTFT, MinMakespan };

struct OracleOutcome {
  std::int64_t violations = 0;
  std::optional<Time> ttft;  // completion of the generative job
  Time makespan;
  std::vector<ScriptedStart> witness;
};

namespace oracle_detail {

// Independent brute-force executor: enumerates every schedule whose layer
// starts happen at event boundaries (deadline drops included), walking free
// backends in index order and branching over each permitted runnable layer
// plus a hold-until-next-event branch. The hold branch makes the enumeration a
// superset of what any abort-and-restart policy can realize: dropping the
// aborted attempts from a policy trace leaves exactly such a schedule. This
// intentionally shares no code with the engine.
class Enumerator {
 public:
  Enumerator(const TinyInstance& inst, Objective objective)
      : inst_(inst), objective_(objective), gen_(inst.generative_index()) {
    inst.validate();
    if (objective == Objective::MinTTFT && gen_ < 0) {
      throw ConfigError("MinTTFT needs a generative job");
    }
    for (const auto& job : inst_.jobs) {
      JobState s;
      for (const auto& b : inst_.backends) {
        if (inst_.db.supports(job.model, job.stage, b.kind)) {
          s.latency.push_back(inst_.db.lookup(job.model, job.stage, job.context, b.kind));
          s.permitted.push_back(true);
        } else {
          s.latency.push_back(Time::zero());
          s.permitted.push_back(false);
        }
      }
      bool any = false;
      for (bool p : s.permitted) any = any || p;
      if (!any) throw ConfigError("job without a supported backend");
      jobs_.push_back(std::move(s));
    }
    backends_busy_.assign(inst_.backends.size(), -1);
  }

  OracleOutcome best() {
    explore(Time::zero(), 0);
    if (!best_) throw InternalError("enumeration found no schedule");
    return *best_;
  }

 private:
  struct JobState {
    std::vector<Time> latency;     // per backend index
    std::vector<bool> permitted;   // per backend index
    int done_layers = 0;
    bool dropped = false;
    bool running = false;
    Time finish;
    int backend = -1;
    std::optional<Time> terminal_at;
  };

  const TinyInstance& inst_;
  Objective objective_;
  int gen_;
  std::vector<JobState> jobs_;
  std::vector<int> backends_busy_;  // job index or -1
  std::vector<ScriptedStart> path_;
  std::optional<OracleOutcome> best_;
  std::int64_t nodes_ = 0;

  bool job_finished(std::size_t j) const {
    return jobs_[j].dropped || jobs_[j].done_layers == inst_.jobs[j].layers;
  }

  bool all_terminal() const {
    for (std::size_t j = 0; j < jobs_.size(); ++j) {
      if (!job_finished(j)) return false;
    }
    return true;
  }

  std::int64_t violations() const {
    std::int64_t v = 0;
    for (const auto& s : jobs_) v += s.dropped ? 1 : 0;
    return v;
  }

  bool prune() const {
    if (!best_) return false;
    switch (objective_) {
      case Objective::MinViolations:
        return violations() > best_->violations;
      case Objective::MinTTFT:
        // the generative completion time is already decided
        return jobs_[gen_].terminal_at && best_->ttft && !(*jobs_[gen_].terminal_at < *best_->ttft);
      case Objective::MinMakespan:
        for (const auto& s : jobs_) {
          if (s.terminal_at && !(*s.terminal_at < best_->makespan)) return true;
        }
        return false;
    }
    return false;
  }

  void evaluate_leaf() {
    OracleOutcome out;
    out.violations = violations();
    for (std::size_t j = 0; j < jobs_.size(); ++j) {
      if (jobs_[j].terminal_at && *jobs_[j].terminal_at > out.makespan) {
        out.makespan = *jobs_[j].terminal_at;
      }
    }
    if (gen_ >= 0 && !jobs_[gen_].dropped) out.ttft = jobs_[gen_].terminal_at;
    bool better = false;
    if (!best_) {
      better = true;
    } else {
      switch (objective_) {
        case Objective::MinViolations: better = out.violations < best_->violations; break;
        case Objective::MinTTFT:
          better = out.ttft && (!best_->ttft || *out.ttft < *best_->ttft);
          break;
        case Objective::MinMakespan: better = out.makespan < best_->makespan; break;
      }
    }
    if (better) {
      out.witness = path_;
      best_ = out;
    }
  }

  // Settle deadline drops and layer completions at time t, mirroring the
  // engine's event order: a layer finishing exactly at the deadline saves the
  // request only when it is the request's last layer.
  void settle(Time t) {
    for (std::size_t j = 0; j < jobs_.size(); ++j) {
      JobState& s = jobs_[j];
      if (job_finished(j) || !inst_.jobs[j].deadline || !(*inst_.jobs[j].deadline == t)) continue;
      bool saved = s.running && s.finish == t && s.done_layers + 1 == inst_.jobs[j].layers;
      if (saved) continue;
      if (s.running) {
        backends_busy_[s.backend] = -1;
        s.running = false;
      }
      s.dropped = true;
      s.terminal_at = t;
    }
    for (std::size_t j = 0; j < jobs_.size(); ++j) {
      JobState& s = jobs_[j];
      if (!s.running || !(s.finish == t)) continue;
      s.running = false;
      backends_busy_[s.backend] = -1;
      ++s.done_layers;
      if (s.done_layers == inst_.jobs[j].layers) s.terminal_at = t;
    }
  }

  std::optional<Time> next_event_after(Time t) const {
    std::optional<Time> next;
    auto consider = [&next, &t](Time candidate) {
      if (!(candidate > t)) return;
      if (!next || candidate < *next) next = candidate;
    };
    for (std::size_t j = 0; j < jobs_.size(); ++j) {
      const JobState& s = jobs_[j];
      if (s.running) consider(s.finish);
      if (!job_finished(j)) {
        consider(inst_.jobs[j].arrival);
        if (inst_.jobs[j].deadline) consider(*inst_.jobs[j].deadline);
      }
    }
    return next;
  }

  // held: backends that chose to stay idle until the next event.
  void explore(Time t, unsigned held) {
    if (++nodes_ > 4000000) throw ConfigError("instance too large to enumerate");
    if (prune()) return;
    if (all_terminal()) {
      evaluate_leaf();
      return;
    }
    // Decision point: lowest-index free unheld backend with a runnable layer.
    for (std::size_t b = 0; b < backends_busy_.size(); ++b) {
      if (backends_busy_[b] >= 0 || (held & (1u << b))) continue;
      std::vector<std::size_t> candidates;
      for (std::size_t j = 0; j < jobs_.size(); ++j) {
        const JobState& s = jobs_[j];
        if (job_finished(j) || s.running || !s.permitted[b]) continue;
        if (inst_.jobs[j].arrival > t) continue;
        candidates.push_back(j);
      }
      if (candidates.empty()) continue;
      for (std::size_t j : candidates) {
        // index everything: deeper time advances replace the state vectors
        jobs_[j].running = true;
        jobs_[j].backend = static_cast<int>(b);
        jobs_[j].finish = t + jobs_[j].latency[b];
        backends_busy_[b] = static_cast<int>(j);
        path_.push_back(ScriptedStart{t, static_cast<int>(j), static_cast<int>(b)});
        explore(t, held);
        path_.pop_back();
        backends_busy_[b] = -1;
        jobs_[j].running = false;
        jobs_[j].backend = -1;
      }
      explore(t, held | (1u << b));  // or leave this backend idle for now
      return;
    }
    // Nothing placeable now: advance to the next event.
    std::optional<Time> next = next_event_after(t);
    if (!next) return;  // live jobs that can never run: dead branch
    std::vector<JobState> saved_jobs = jobs_;
    std::vector<int> saved_busy = backends_busy_;
    settle(*next);
    explore(*next, 0);
    jobs_ = std::move(saved_jobs);
    backends_busy_ = std::move(saved_busy);
  }
};

}  // namespace oracle_detail

inline OracleOutcome exhaustive_best(const TinyInstance& inst, Objective objective) {
  oracle_detail::Enumerator e(inst, objective);
  return e.best();
}

// Outcome of a policy run or a witness replay on a tiny instance, extracted
// from the engine trace.
struct InstanceOutcome {
  std::int64_t violations = 0;
  std::optional<Time> gen_completion;
  Time makespan;
  std::vector<RequestStatus> statuses;
};

inline InstanceOutcome summarize_instance_trace(const TinyInstance& inst, const JobRunResult& run) {
  InstanceOutcome out;
  out.statuses = run.statuses;
  int gen = inst.generative_index();
  std::string gen_model = gen >= 0 ? inst.jobs[gen].model : std::string();
  for (const auto& r : run.trace.records) {
    if (r.t > out.makespan) out.makespan = r.t;
    if (r.kind == TraceKind::RequestDrop) ++out.violations;
    if (gen >= 0 && r.kind == TraceKind::RequestComplete && r.model == gen_model) {
      out.gen_completion = r.t;
    }
  }
  return out;
}

inline InstanceOutcome run_policy_on_instance(const TinyInstance& inst, SchedulerPolicy policy) {
  inst.validate();
  return summarize_instance_trace(inst, run_jobs(inst.jobs, inst.db, policy, inst.backends));
}

inline InstanceOutcome replay_witness(const TinyInstance& inst,
                                      const std::vector<ScriptedStart>& witness) {
  inst.validate();
  return summarize_instance_trace(inst, replay_jobs(inst.jobs, inst.db, inst.backends, witness));
}

// Deterministic random instance for dominance checks: 2-3 backends, up to 4
// jobs with per-request-uniform layer costs, at most one generative job.
inline TinyInstance random_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&rng](std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  TinyInstance inst;
  inst.backends = {{"npu0", BackendKind::NPU}, {"gpu0", BackendKind::GPU}};
  if (pick(0, 1) == 1) inst.backends.push_back({"cpu0", BackendKind::CPU});
  int job_count = static_cast<int>(pick(2, 4));
  int layer_budget = 6;
  bool with_generative = pick(0, 1) == 1;
  for (int j = 0; j < job_count; ++j) {
    JobSpec job;
    job.model = "job" + std::to_string(j);
    job.stage = Stage::Forward;
    job.context = 0;
    bool generative = with_generative && j == 0;
    int max_layers = std::min(3, layer_budget - (job_count - 1 - j));
    job.layers = static_cast<int>(pick(1, std::max(1, max_layers)));
    layer_budget -= job.layers;
    if (generative) {
      job.generative = true;
      job.arrival = Time::zero();
    } else {
      job.arrival = Time::from_ms(pick(0, 15));
      job.deadline = job.arrival + Time::from_ms(pick(6, 30));
    }
    int supported = 0;
    for (const auto& b : inst.backends) {
      bool support = pick(0, 3) != 0;  // three in four
      if (&b == &inst.backends.back() && supported == 0) support = true;
      if (!support) continue;
      ++supported;
      inst.db.add_entry(job.model, Stage::Forward, 0, b.kind, Time::from_ms(pick(1, 12)));
    }
    inst.jobs.push_back(std::move(job));
  }
  inst.db.validate_coverage();
  return inst;
}

// Lower-bound count (log2) of distinct backend-assignment schedules: the sum
// over schedulable layer instances in the horizon of log2 of the permitted
// backend count.
inline double schedule_space_log2(const ScenarioSpec& scenario, const LatencyDatabase& db,
                                  Time horizon, const std::vector<BackendSpec>& backends,
                                  EngineOptions opt = {}) {
  if (scenario.models.empty()) return 0.0;
  scenario.validate();
  double total = 0.0;
  auto stage_term = [&](const ModelSpec& m, Stage stage, std::int64_t layer_instances) {
    auto kinds = permitted_model_kinds(m, stage, db, backends, opt);
    if (kinds.empty()) throw ConfigError("no supported backend for model " + m.id);
    total += static_cast<double>(layer_instances) * std::log2(static_cast<double>(kinds.size()));
  };
  for (const auto& m : scenario.models) {
    if (!m.fps) continue;
    std::int64_t frames = m.fps->frames_before(horizon);
    stage_term(m, Stage::Forward, frames * m.layer_count);
  }
  int entry = scenario.cascade_entry_index();
  if (entry >= 0) {
    for (const auto& p : scenario.prompts) {
      if (!(p.arrival < horizon)) continue;
      int idx = entry;
      while (idx >= 0) {
        const ModelSpec& m = scenario.models[idx];
        if (m.kind == ModelKind::Generative) {
          stage_term(m, Stage::Prefill, m.layer_count);
          stage_term(m, Stage::Decode, static_cast<std::int64_t>(p.output_tokens) * m.layer_count);
        } else {
          stage_term(m, Stage::Forward, m.layer_count);
        }
        idx = m.cascade_next ? scenario.model_index(*m.cascade_next) : -1;
      }
    }
  }
  return total;
}

}  // namespace rtgen
