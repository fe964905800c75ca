// Command-line front end: run one scenario/policy, compare the five policies,
// sweep prompt lengths, and drive the validation oracle.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rtgen/rtgen.hpp"

namespace {

using namespace rtgen;

struct CommonArgs {
  std::string builtin;
  std::string scenario_path;
  std::string db_path;
  std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonArgs& args, bool need_scenario = true) {
  if (need_scenario) {
    auto* b = cmd->add_option("--builtin", args.builtin, "Built-in scenario id (A, B, C or D)");
    auto* s = cmd->add_option("--scenario", args.scenario_path, "Scenario document path (JSON)");
    b->excludes(s);
    s->excludes(b);
  }
  cmd->add_option("--db", args.db_path, "Latency database CSV (default: bundled calibration)");
  cmd->add_option("--out", args.out_dir, "Output directory for report files");
}

ScenarioSpec resolve_scenario(const CommonArgs& args) {
  if (!args.builtin.empty()) {
    if (args.builtin.size() != 1) throw ConfigError("builtin scenario must be one of A, B, C, D");
    return builtin_scenario(args.builtin[0]);
  }
  if (args.scenario_path.empty()) throw ConfigError("one of --builtin or --scenario is required");
  std::ifstream in(args.scenario_path, std::ios::binary);
  if (!in) throw ConfigError("cannot open scenario: " + args.scenario_path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_scenario(buf.str());
}

LatencyDatabase resolve_db(const CommonArgs& args) {
  if (!args.db_path.empty()) return LatencyDatabase::load_file(args.db_path);
  if (const char* env = std::getenv("RTGEN_DB"); env && *env) {
    return LatencyDatabase::load_file(env);
  }
  return LatencyDatabase::default_calibrated();
}

void write_file(const std::string& dir, const std::string& name, const std::string& content) {
  std::filesystem::create_directories(dir);
  std::filesystem::path path = std::filesystem::path(dir) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
}

void print_report(const MetricsReport& rep) {
  std::cout << "scenario " << rep.scenario_id << "  policy " << rep.policy_name << "\n";
  std::cout << "  deadline violation rate: "
            << (rep.aggregate_violation ? rep.aggregate_violation->pct_1dp() + " %" : "-") << "\n";
  std::cout << "  ttft: " << (rep.ttft ? rep.ttft->ms_fixed(1) + " ms" : "-")
            << "   tpt: " << (rep.tpt ? rep.tpt->ms_fixed(1) + " ms" : "-")
            << "   e2e: " << (rep.e2e ? rep.e2e->ms_fixed(1) + " ms" : "-") << "\n";
  std::cout << "  starved: " << (rep.starved ? "true" : "false") << "\n";
  for (const auto& c : rep.counts) {
    if (!c.has_fps) continue;
    std::cout << "  " << c.model << ": issued " << c.issued << ", dropped " << c.dropped << " ("
              << c.violation().pct_1dp() << " %)\n";
  }
}

int cmd_run(const CommonArgs& args, const std::string& policy_name, bool with_trace) {
  ScenarioSpec scenario = resolve_scenario(args);
  LatencyDatabase db = resolve_db(args);
  SchedulerPolicy policy = SchedulerPolicy::parse(policy_name);
  Trace trace = simulate(scenario, db, policy, default_backends());
  MetricsReport rep = compute(trace, scenario, std::string(policy.name()));
  std::string base = "report_" + rep.scenario_id + "_" + std::string(policy.name());
  write_file(args.out_dir, base + ".json", rep.to_json().dump(2) + "\n");
  write_file(args.out_dir, base + ".csv", MetricsReport::csv_header() + "\n" + rep.csv_row() + "\n");
  if (with_trace) write_file(args.out_dir, base + ".trace.jsonl", trace.to_jsonl());
  print_report(rep);
  return 0;
}

int cmd_compare(const CommonArgs& args, bool per_model) {
  ScenarioSpec scenario = resolve_scenario(args);
  LatencyDatabase db = resolve_db(args);
  std::vector<MetricsReport> reports;
  for (const auto& policy : SchedulerPolicy::all()) {
    Trace trace = simulate(scenario, db, policy, default_backends());
    reports.push_back(compute(trace, scenario, std::string(policy.name())));
  }
  ComparisonTable table = compare_report(std::move(reports));
  std::string base = "compare_" + table.scenario_id;
  write_file(args.out_dir, base + ".csv", table.to_csv());
  write_file(args.out_dir, base + ".json", table.to_json().dump(2) + "\n");
  std::cout << table.to_text();
  if (per_model) {
    write_file(args.out_dir, base + "_per_model.csv", table.per_model_csv());
    std::cout << "\n" << table.per_model_text();
  }
  return 0;
}

int cmd_sweep(const CommonArgs& args, const std::string& policy_name,
              const std::string& tokens_text) {
  ScenarioSpec scenario = resolve_scenario(args);
  LatencyDatabase db = resolve_db(args);
  SchedulerPolicy policy = SchedulerPolicy::parse(policy_name);
  std::vector<int> tokens;
  std::stringstream ss{tokens_text};
  for (std::string part; std::getline(ss, part, ',');) {
    try {
      tokens.push_back(std::stoi(part));
    } catch (const std::exception&) {
      throw ConfigError("bad token count: " + part);
    }
    if (tokens.back() < 1) throw ConfigError("token counts must be >= 1");
    if (tokens.back() > db.max_bucket()) {
      throw ConfigError("token count above the largest context bucket (" +
                        std::to_string(db.max_bucket()) + ")");
    }
  }
  if (tokens.empty()) throw ConfigError("--tokens needs at least one value");
  if (scenario.prompts.empty()) throw ConfigError("sweep needs a scenario with prompts");

  std::string csv = "policy,scenario,input_tokens,viol_pct,ttft_ms,tpt_ms,e2e_ms,starved,decode_npu_share_pct\n";
  std::cout << "input_tokens  viol_pct  ttft_ms    tpt_ms     decode_npu_share\n";
  for (int t : tokens) {
    ScenarioSpec swept = scenario;
    for (auto& p : swept.prompts) p.input_tokens = t;
    Trace trace = simulate(swept, db, policy, default_backends());
    MetricsReport rep = compute(trace, swept, std::string(policy.name()));
    Ratio npu_share = rep.stage_partition(Stage::Decode).share(BackendKind::NPU);
    csv += std::string(policy.name()) + "," + rep.scenario_id + "," + std::to_string(t) + ",";
    csv += rep.aggregate_violation ? rep.aggregate_violation->pct_1dp() : "";
    csv += ",";
    csv += rep.ttft ? rep.ttft->ms_fixed(3) : "";
    csv += ",";
    csv += rep.tpt ? rep.tpt->ms_fixed(3) : "";
    csv += ",";
    csv += rep.e2e ? rep.e2e->ms_fixed(3) : "";
    csv += ",";
    csv += rep.starved ? "true" : "false";
    csv += "," + npu_share.pct_1dp() + "\n";
    auto cell = [](const std::optional<Time>& v) { return v ? v->ms_fixed(1) : std::string("-"); };
    std::cout << t << "\t      " << (rep.aggregate_violation ? rep.aggregate_violation->pct_1dp() : "-")
              << "\t" << cell(rep.ttft) << "\t   " << cell(rep.tpt) << "\t      "
              << npu_share.pct_1dp() << " %\n";
  }
  write_file(args.out_dir, "sweep_" + scenario.id + "_" + std::string(policy.name()) + ".csv", csv);
  return 0;
}

int cmd_oracle_space(const CommonArgs& args, std::int64_t horizon_ms) {
  ScenarioSpec scenario = resolve_scenario(args);
  LatencyDatabase db = resolve_db(args);
  Time horizon = scenario.horizon.policy == HorizonPolicy::FixedMs ? scenario.horizon.fixed
                                                                   : Time::from_ms(horizon_ms);
  double bits = schedule_space_log2(scenario, db, horizon, default_backends());
  std::cout << "scenario " << scenario.id << ", horizon " << horizon.ms_fixed(1) << " ms\n";
  std::cout << "log2(schedule count) lower bound = " << bits << "\n";
  std::cout << "formula: sum over schedulable layer instances of log2(permitted backend count)\n";
  return 0;
}

int cmd_oracle_check(std::int64_t cases, std::uint64_t seed) {
  std::int64_t failures = 0;
  for (std::int64_t i = 0; i < cases; ++i) {
    TinyInstance inst = random_instance(seed + static_cast<std::uint64_t>(i));
    OracleOutcome best = exhaustive_best(inst, Objective::MinViolations);
    for (const auto& policy : SchedulerPolicy::all()) {
      InstanceOutcome run = run_policy_on_instance(inst, policy);
      if (run.violations < best.violations) {
        ++failures;
        std::cout << "dominance violated: seed " << seed + i << " policy " << policy.name() << "\n";
      }
    }
    InstanceOutcome replay = replay_witness(inst, best.witness);
    if (replay.violations != best.violations) {
      ++failures;
      std::cout << "witness replay mismatch: seed " << seed + i << "\n";
    }
  }
  std::cout << "oracle check: " << cases << " instances, " << failures << " failures\n";
  return failures == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven scheduling simulator for real-time + generative workloads"};
  app.require_subcommand(1);

  CommonArgs run_args;
  std::string run_policy;
  bool run_trace = false;
  auto* run = app.add_subcommand("run", "Simulate one scenario under one policy");
  add_common(run, run_args);
  run->add_option("--policy", run_policy, "fcfs-aot | fcfs-dyn | edf-aot | edf-dyn | ftf")->required();
  run->add_flag("--trace", run_trace, "Also write the trace as JSONL");

  CommonArgs cmp_args;
  bool cmp_per_model = false;
  auto* cmp = app.add_subcommand("compare", "Run all five policies and tabulate");
  add_common(cmp, cmp_args);
  cmp->add_flag("--per-model", cmp_per_model, "Include the per-model violation breakdown");

  CommonArgs sweep_args;
  std::string sweep_policy;
  std::string sweep_tokens;
  auto* sweep = app.add_subcommand("sweep", "Sweep prompt input lengths");
  add_common(sweep, sweep_args);
  sweep->add_option("--policy", sweep_policy, "Scheduling policy")->required();
  sweep->add_option("--tokens", sweep_tokens, "Comma-separated input token counts")->required();

  CommonArgs oracle_args;
  bool oracle_space = false;
  std::int64_t oracle_horizon_ms = 1000;
  std::int64_t oracle_cases = 100;
  std::uint64_t oracle_seed = 1;
  auto* oracle = app.add_subcommand("oracle", "Validation tooling");
  add_common(oracle, oracle_args, true);
  oracle->add_flag("--space", oracle_space, "Report the scheduling-space size estimate");
  oracle->add_option("--horizon-ms", oracle_horizon_ms, "Horizon for the space estimate");
  oracle->add_option("--cases", oracle_cases, "Random instances for the dominance check");
  oracle->add_option("--seed", oracle_seed, "Base seed for random instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(run_args, run_policy, run_trace);
    if (cmp->parsed()) return cmd_compare(cmp_args, cmp_per_model);
    if (sweep->parsed()) return cmd_sweep(sweep_args, sweep_policy, sweep_tokens);
    if (oracle->parsed()) {
      if (oracle_space) return cmd_oracle_space(oracle_args, oracle_horizon_ms);
      return cmd_oracle_check(oracle_cases, oracle_seed);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
