#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rtgen/engine.hpp"
#include "rtgen/error.hpp"
#include "rtgen/time.hpp"
#include "rtgen/types.hpp"
#include "rtgen/workload.hpp"

namespace rtgen {

// Exact fraction; percentages are rendered to one decimal only at
// serialization time.
struct Ratio {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double pct() const { return 100.0 * static_cast<double>(num) / static_cast<double>(den); }

  std::string pct_1dp() const {
    std::int64_t tenths = detail::round_div_half_even(static_cast<__int128>(num) * 1000, den);
    std::string out = std::to_string(tenths / 10);
    out += '.';
    out += std::to_string(tenths % 10);
    return out;
  }

  friend bool operator<(const Ratio& a, const Ratio& b) {
    return static_cast<__int128>(a.num) * b.den < static_cast<__int128>(b.num) * a.den;
  }
  friend bool operator==(const Ratio& a, const Ratio& b) {
    return static_cast<__int128>(a.num) * b.den == static_cast<__int128>(b.num) * a.den;
  }
};

struct ModelCounts {
  std::string model;
  bool has_fps = false;
  std::int64_t issued = 0;
  std::int64_t completed = 0;
  std::int64_t dropped = 0;
  std::int64_t starved = 0;

  Ratio violation() const { return Ratio{dropped, issued > 0 ? issued : 1}; }
};

struct StagePartition {
  std::int64_t total = 0;
  std::array<std::int64_t, 3> by_kind{};  // indexed by BackendKind

  Ratio share(BackendKind k) const {
    return Ratio{by_kind[static_cast<std::size_t>(k)], total > 0 ? total : 1};
  }
};

struct MetricsReport {
  std::string scenario_id;
  std::string policy_name;
  std::vector<ModelCounts> counts;  // declaration order
  std::optional<Ratio> aggregate_violation;
  std::optional<Time> ttft;
  std::optional<Time> tpt;
  std::optional<Time> e2e;
  bool starved = false;
  std::array<StagePartition, 3> partition{};  // indexed by Stage
  Time end_time;

  const StagePartition& stage_partition(Stage s) const {
    return partition[static_cast<std::size_t>(s)];
  }

  static std::string csv_header() { return "policy,scenario,viol_pct,ttft_ms,tpt_ms,e2e_ms,starved"; }

  std::string csv_row() const {
    std::string out = policy_name + "," + scenario_id + ",";
    if (aggregate_violation) out += aggregate_violation->pct_1dp();
    out += ",";
    if (ttft) out += ttft->ms_fixed(3);
    out += ",";
    if (tpt) out += tpt->ms_fixed(3);
    out += ",";
    if (e2e) out += e2e->ms_fixed(3);
    out += ",";
    out += starved ? "true" : "false";
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["scenario"] = scenario_id;
    j["policy"] = policy_name;
    j["starved"] = starved;
    j["aggregate_violation_pct"] = aggregate_violation
                                       ? nlohmann::ordered_json(aggregate_violation->pct_1dp())
                                       : nlohmann::ordered_json(nullptr);
    j["ttft_ms"] = ttft ? nlohmann::ordered_json(ttft->ms_fixed(3)) : nlohmann::ordered_json(nullptr);
    j["tpt_ms"] = tpt ? nlohmann::ordered_json(tpt->ms_fixed(3)) : nlohmann::ordered_json(nullptr);
    j["e2e_ms"] = e2e ? nlohmann::ordered_json(e2e->ms_fixed(3)) : nlohmann::ordered_json(nullptr);
    j["end_ms"] = end_time.ms_fixed(3);
    nlohmann::ordered_json models = nlohmann::ordered_json::object();
    for (const auto& c : counts) {
      nlohmann::ordered_json m;
      m["issued"] = c.issued;
      m["completed"] = c.completed;
      m["dropped"] = c.dropped;
      if (c.has_fps) m["violation_pct"] = c.violation().pct_1dp();
      models[c.model] = std::move(m);
    }
    j["models"] = std::move(models);
    nlohmann::ordered_json part = nlohmann::ordered_json::object();
    for (Stage s : {Stage::Forward, Stage::Prefill, Stage::Decode}) {
      const auto& sp = stage_partition(s);
      if (sp.total == 0) continue;
      nlohmann::ordered_json by = nlohmann::ordered_json::object();
      for (BackendKind k : {BackendKind::NPU, BackendKind::GPU, BackendKind::CPU}) {
        by[std::string(backend_kind_name(k))] = sp.share(k).pct_1dp();
      }
      part[std::string(stage_name_lower(s))] = std::move(by);
    }
    j["backend_partition"] = std::move(part);
    return j;
  }
};

// Reduces a trace to the run's performance metrics. TTFT/TPT/E2E describe the
// earliest prompt's pipeline; violation rates are frame-weighted over the
// fps-bearing models.
inline MetricsReport compute(const Trace& trace, const ScenarioSpec& scenario,
                             std::string policy_name = {}) {
  MetricsReport rep;
  rep.scenario_id = scenario.id;
  rep.policy_name = std::move(policy_name);
  std::map<std::string, std::size_t> by_model;
  for (const auto& m : scenario.models) {
    by_model[m.id] = rep.counts.size();
    rep.counts.push_back(ModelCounts{m.id, m.fps.has_value(), 0, 0, 0, 0});
  }

  std::int64_t first_token_request = -1;
  Time first_token_time;
  std::vector<std::pair<int, Time>> tokens;  // (token index, time) of the tracked request
  for (const auto& r : trace.records) {
    if (r.t > rep.end_time) rep.end_time = r.t;
    switch (r.kind) {
      case TraceKind::RequestComplete:
      case TraceKind::RequestDrop:
      case TraceKind::RequestStarve: {
        auto it = by_model.find(r.model);
        if (it == by_model.end()) throw ConfigError("trace names unknown model: " + r.model);
        ModelCounts& c = rep.counts[it->second];
        ++c.issued;
        if (r.kind == TraceKind::RequestComplete) ++c.completed;
        if (r.kind == TraceKind::RequestDrop) ++c.dropped;
        if (r.kind == TraceKind::RequestStarve) {
          ++c.starved;
          rep.starved = true;
        }
        break;
      }
      case TraceKind::LayerFinish: {
        auto& sp = rep.partition[static_cast<std::size_t>(r.stage)];
        ++sp.total;
        ++sp.by_kind[static_cast<std::size_t>(r.backend_kind)];
        break;
      }
      case TraceKind::TokenEmit: {
        if (r.layer == 0 && first_token_request < 0) {
          first_token_request = r.request_id;
          first_token_time = r.t;
        }
        if (r.request_id == first_token_request) tokens.emplace_back(r.layer, r.t);
        break;
      }
      default: break;
    }
  }

  std::int64_t fps_issued = 0;
  std::int64_t fps_dropped = 0;
  bool any_fps = false;
  for (const auto& c : rep.counts) {
    if (!c.has_fps) continue;
    any_fps = true;
    fps_issued += c.issued;
    fps_dropped += c.dropped;
  }
  if (any_fps && fps_issued > 0) rep.aggregate_violation = Ratio{fps_dropped, fps_issued};

  if (!rep.starved && first_token_request >= 0 && !scenario.prompts.empty()) {
    Time prompt_arrival = scenario.prompts.front().arrival;
    rep.ttft = first_token_time - prompt_arrival;
    Time last = first_token_time;
    int emitted = 0;
    for (const auto& [k, t] : tokens) {
      if (t > last) last = t;
      ++emitted;
    }
    rep.e2e = last - prompt_arrival;
    if (emitted >= 2) rep.tpt = (last - first_token_time).divided(emitted - 1);
  }
  return rep;
}

// Policy x metrics matrix over one scenario, shaped like a results table with
// "-" for starved/absent cells.
struct ComparisonTable {
  std::string scenario_id;
  std::vector<MetricsReport> rows;

  std::string to_text() const {
    auto cell = [](const std::optional<Time>& t) { return t ? t->ms_fixed(1) : std::string("-"); };
    std::string out = "scenario " + scenario_id + "\n";
    out += pad("policy", 10) + pad("viol_pct", 10) + pad("ttft_ms", 10) + pad("tpt_ms", 10) + "\n";
    for (const auto& r : rows) {
      out += pad(r.policy_name, 10);
      out += pad(r.aggregate_violation ? r.aggregate_violation->pct_1dp() : "-", 10);
      out += pad(cell(r.ttft), 10);
      out += pad(cell(r.tpt), 10);
      out += "\n";
    }
    return out;
  }

  std::string to_csv() const {
    std::string out = MetricsReport::csv_header() + "\n";
    for (const auto& r : rows) out += r.csv_row() + "\n";
    return out;
  }

  // Per-model deadline violation breakdown over the fps-bearing models.
  std::string per_model_text() const {
    std::string out = "per-model violation rates, scenario " + scenario_id + "\n";
    out += pad("model", 10);
    for (const auto& r : rows) out += pad(r.policy_name, 10);
    out += "\n";
    if (rows.empty()) return out;
    for (std::size_t m = 0; m < rows.front().counts.size(); ++m) {
      if (!rows.front().counts[m].has_fps) continue;
      out += pad(rows.front().counts[m].model, 10);
      for (const auto& r : rows) out += pad(r.counts[m].violation().pct_1dp(), 10);
      out += "\n";
    }
    return out;
  }

  std::string per_model_csv() const {
    std::string out = "scenario,policy,model,issued,completed,dropped,viol_pct\n";
    for (const auto& r : rows) {
      for (const auto& c : r.counts) {
        if (!c.has_fps) continue;
        out += scenario_id + "," + r.policy_name + "," + c.model + "," + std::to_string(c.issued) +
               "," + std::to_string(c.completed) + "," + std::to_string(c.dropped) + "," +
               c.violation().pct_1dp() + "\n";
      }
    }
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["scenario"] = scenario_id;
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) arr.push_back(r.to_json());
    j["policies"] = std::move(arr);
    return j;
  }

 private:
  static std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s += std::string(width - s.size(), ' ');
    return s;
  }
};

inline ComparisonTable compare_report(std::vector<MetricsReport> reports) {
  if (reports.empty()) throw ConfigError("no reports to compare");
  ComparisonTable table;
  table.scenario_id = reports.front().scenario_id;
  for (const auto& r : reports) {
    if (r.scenario_id != table.scenario_id) throw ConfigError("mixed scenarios in comparison");
  }
  table.rows = std::move(reports);
  return table;
}

}  // namespace rtgen
