// versatune: training-data composition toolkit.
//
// Subcommands: detect, step, run, mix, simulate, report. Everything is
// file-driven so any trainer can integrate by reading and writing small
// JSON/JSONL files per epoch.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "versatune/versatune.hpp"

namespace fs = std::filesystem;
using namespace versatune;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitService = 3;

int exit_code_for(errc code) {
  switch (code) {
    case errc::endpoint_unreachable:
    case errc::too_many_dropped:
      return kExitService;
    default:
      return kExitData;
  }
}

std::string sanitize(std::string label) {
  std::replace(label.begin(), label.end(), ':', '_');
  return label;
}

void write_json(const fs::path& path, const ojson& j) {
  atomic_write_file(path, j.dump(2) + "\n");
}

ReferenceLossTable require_reference(const RunConfig& cfg) {
  if (!cfg.reference_losses)
    raise(errc::invalid_config, "reference_losses must be configured for scheduling");
  if (cfg.reference_losses->size() != cfg.domains.size())
    raise(errc::invalid_config, "reference_losses length does not match domains");
  return *cfg.reference_losses;
}

// ---- detect ----------------------------------------------------------------

int cmd_detect(const RunConfig& cfg, std::vector<std::string> sample_files) {
  if (!cfg.classifier) raise(errc::invalid_config, "classifier endpoint is not configured");
  std::vector<fs::path> files;
  for (const auto& f : sample_files) files.emplace_back(f);
  if (files.empty()) files = cfg.paths.samples;
  if (files.empty()) raise(errc::invalid_config, "no sample files given (argument or paths.samples)");
  for (const auto& f : files) detail::require_exists(f, "samples");

  std::vector<Distribution> per_iteration;
  std::size_t dropped_total = 0;
  for (const auto& file : files) {
    auto samples = load_samples(file);
    if (samples.empty()) raise(errc::invalid_config, file.string() + ": no samples");
    AnnotateResult res = annotate(samples, *cfg.classifier, cfg.domains);
    dropped_total += res.dropped;
    per_iteration.push_back(aggregate_iteration(res.annotations));
    std::cerr << "detect: " << file.string() << ": " << res.annotations.size()
              << " annotated, " << res.dropped << " dropped\n";
  }

  DetectionReport report = detect(per_iteration);
  ojson j = report_to_json(report);
  j["dropped_samples"] = dropped_total;
  fs::path out = cfg.paths.output_dir / "detection_report.json";
  write_json(out, j);
  std::cout << out.string() << "\n";
  return kExitOk;
}

// ---- step / run -------------------------------------------------------------

struct StepFiles {
  fs::path state;
  fs::path history;
};

void persist_state(const SchedulerState& state, const RunConfig& cfg, const StepFiles& files) {
  write_json(files.state, state_to_json(state, cfg.domains));
  std::string hist;
  for (const auto& rec : state.history) hist += manifest_to_json(rec, cfg.domains).dump() + "\n";
  atomic_write_file(files.history, hist);
  fs::path manifest = cfg.paths.output_dir /
                      ("manifest_step_" + std::to_string(state.step) + ".json");
  if (state.history.empty()) {
    // Step-0 manifest: the initial proportions, neutral signals.
    ojson j{{"step", 0},
            {"proportions", named_vector(state.proportions.weights(), cfg.domains)},
            {"gamma", named_vector(std::vector<double>(cfg.domains.size(), 0.0), cfg.domains)},
            {"phi", named_vector(std::vector<double>(cfg.domains.size(), 0.0), cfg.domains)},
            {"gate", false},
            {"cap_blocked", false}};
    write_json(manifest, j);
  } else {
    write_json(manifest, manifest_to_json(state.history.back(), cfg.domains));
  }
}

SchedulerState load_or_init_state(const RunConfig& cfg, const StepFiles& files, bool* initialized) {
  *initialized = false;
  if (fs::exists(files.state)) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(files.state));
    } catch (const nlohmann::json::parse_error& ex) {
      raise(errc::invalid_config, files.state.string() + ": " + ex.what());
    }
    return state_from_json(j, cfg.domains);
  }
  detail::require_exists(cfg.paths.detection_report, "detection_report");
  nlohmann::json report = nlohmann::json::parse(read_file(cfg.paths.detection_report));
  Distribution detected = detection_mean_from_json(report);
  if (detected.size() != cfg.domains.size())
    raise(errc::invalid_config, "detection report does not match configured domains");
  *initialized = true;
  return init_state(detected, cfg.scheduler);
}

std::optional<LossVector> feedback_for_step(const RunConfig& cfg, std::int64_t step) {
  if (cfg.paths.feedback.empty() || !fs::exists(cfg.paths.feedback)) return std::nullopt;
  std::optional<LossVector> found;
  for (auto& lv : load_feedback(cfg.paths.feedback, cfg.domains)) {
    if (lv.step() == step) {
      if (found) raise(errc::invalid_config, "duplicate feedback for step " + std::to_string(step));
      found = std::move(lv);
    }
  }
  return found;
}

int cmd_step(const RunConfig& cfg, const std::string& state_override,
             const std::string& feedback_line) {
  StepFiles files{cfg.paths.output_dir / "state.json", cfg.paths.output_dir / "history.jsonl"};
  if (!state_override.empty()) files.state = state_override;

  bool initialized = false;
  SchedulerState state = load_or_init_state(cfg, files, &initialized);
  ReferenceLossTable ref = require_reference(cfg);

  std::optional<LossVector> losses;
  if (!feedback_line.empty()) {
    losses = parse_feedback_line(feedback_line, cfg.domains);
  } else {
    losses = feedback_for_step(cfg, state.step + 1);
    if (!losses && !initialized)
      raise(errc::feedback_exhausted,
            "no feedback available for step " + std::to_string(state.step + 1));
  }

  if (losses) {
    state = step_scheduler(std::move(state), *losses, ref, cfg.scheduler);
  }
  persist_state(state, cfg, files);
  std::cout << "step " << state.step << " proportions "
            << named_vector(state.proportions.weights(), cfg.domains).dump() << "\n";
  return kExitOk;
}

int cmd_run(const RunConfig& cfg, const std::string& state_override) {
  StepFiles files{cfg.paths.output_dir / "state.json", cfg.paths.output_dir / "history.jsonl"};
  if (!state_override.empty()) files.state = state_override;

  bool initialized = false;
  SchedulerState state = load_or_init_state(cfg, files, &initialized);
  ReferenceLossTable ref = require_reference(cfg);
  if (initialized) persist_state(state, cfg, files);

  while (state.step < cfg.scheduler.total_steps) {
    std::optional<LossVector> losses = feedback_for_step(cfg, state.step + 1);
    if (!losses)
      raise(errc::feedback_exhausted,
            "no feedback available for step " + std::to_string(state.step + 1));
    state = step_scheduler(std::move(state), *losses, ref, cfg.scheduler);
    persist_state(state, cfg, files);  // crash-safe: committed after every step
  }
  std::cout << "completed " << state.step << " steps; state at " << files.state.string() << "\n";
  return kExitOk;
}

// ---- mix ---------------------------------------------------------------------

int cmd_mix(const RunConfig& cfg, const std::string& proportions_file) {
  detail::require_exists(proportions_file, "proportions manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(proportions_file));
  } catch (const nlohmann::json::parse_error& ex) {
    raise(errc::invalid_config, proportions_file + ": " + ex.what());
  }
  Distribution proportions(
      parse_named_vector(manifest.at("proportions"), cfg.domains, "proportions"));
  std::int64_t step = manifest.value("step", 0);

  MixPlan plan = build_mix_plan(proportions, cfg.budget, cfg.seed);

  std::vector<DomainPool> pools;
  for (const auto& [name, path] : cfg.paths.pools) {
    detail::require_exists(path, "pool '" + name + "'");
    pools.push_back(DomainPool{cfg.domains.index_of(name), path});
  }

  fs::path epoch_path = cfg.paths.output_dir / ("epoch_step_" + std::to_string(step) + ".jsonl");
  fs::path plan_path = cfg.paths.output_dir / ("mix_plan_step_" + std::to_string(step) + ".json");
  materialize(plan, pools, cfg.domains, epoch_path);
  write_json(plan_path, plan_to_json(plan, cfg.domains));
  std::cout << epoch_path.string() << "\n";
  return kExitOk;
}

// ---- simulate / report ---------------------------------------------------------

std::optional<std::size_t> unique_target(const std::vector<Strategy>& strategies) {
  std::optional<std::size_t> target;
  for (const auto& s : strategies) {
    if (!strategy_has_target(s.kind)) continue;
    if (target && *target != s.target) return std::nullopt;  // ambiguous
    target = s.target;
  }
  return target;
}

int cmd_simulate(const RunConfig& cfg, const std::string& world_file,
                 std::vector<std::string> strategy_specs, std::int64_t steps, int num_seeds,
                 bool csv) {
  SimWorld world;
  DomainSet domains = cfg.domains;
  if (world_file.empty()) {
    world = default_world();
    domains = default_domains();
  } else {
    detail::require_exists(world_file, "world config");
    auto [w, d] = world_from_json(nlohmann::json::parse(read_file(world_file)));
    world = std::move(w);
    domains = std::move(d);
  }
  if (strategy_specs.empty())
    strategy_specs = {"versatune", "versatune_constant", "uniform", "inverse"};

  std::vector<Strategy> strategies;
  for (const auto& spec : strategy_specs) strategies.push_back(parse_strategy(spec, domains));
  ReferenceLossTable ref = simulated_reference(world);

  std::vector<Trajectory> base_trajectories;
  for (const auto& s : strategies)
    base_trajectories.push_back(run_strategy(world, s, ref, steps, domains));

  for (const auto& traj : base_trajectories) {
    fs::path p = cfg.paths.output_dir / ("trajectory_" + sanitize(traj.label) + ".jsonl");
    atomic_write_file(p, trajectory_to_jsonl(traj, domains));
  }

  auto target = unique_target(strategies);
  ComparisonReport report = compare_report(base_trajectories, target);
  write_json(cfg.paths.output_dir / "comparison_report.json", comparison_to_json(report, domains));
  std::string table = render_comparison_table(report, domains);
  atomic_write_file(cfg.paths.output_dir / "comparison.txt", table);
  std::cout << table;

  if (csv) {
    std::string body = "strategy,step,domain,proportion,loss\n";
    for (const auto& traj : base_trajectories)
      for (const auto& pt : traj.points)
        for (std::size_t j = 0; j < domains.size(); ++j) {
          char buf[160];
          std::snprintf(buf, sizeof(buf), "%s,%lld,%s,%.17g,%.17g\n", traj.label.c_str(),
                        static_cast<long long>(pt.step), domains.name(j).c_str(),
                        pt.proportions[j], pt.losses[j]);
          body += buf;
        }
    atomic_write_file(cfg.paths.output_dir / "trajectories.csv", body);
  }

  if (num_seeds > 1) {
    ojson per_seed = ojson::object();
    std::vector<std::vector<double>> finals(strategies.size());
    for (int i = 0; i < num_seeds; ++i) {
      SimWorld seeded = world;
      seeded.rng_seed = world.rng_seed + static_cast<std::uint64_t>(i);
      for (std::size_t s = 0; s < strategies.size(); ++s) {
        Trajectory t = run_strategy(seeded, strategies[s], ref, steps, domains);
        finals[s].push_back(kahan_sum(t.points.back().losses.losses()) /
                            static_cast<double>(domains.size()));
      }
    }
    for (std::size_t s = 0; s < strategies.size(); ++s)
      per_seed[strategy_label(strategies[s], domains)] = finals[s];
    ojson pairwise = ojson::object();
    for (std::size_t a = 0; a < strategies.size(); ++a)
      for (std::size_t b = 0; b < strategies.size(); ++b) {
        if (a == b) continue;
        int wins = 0;
        for (int i = 0; i < num_seeds; ++i)
          if (finals[a][i] <= finals[b][i]) ++wins;
        pairwise[strategy_label(strategies[a], domains) + "<=" +
                 strategy_label(strategies[b], domains)] = wins;
      }
    write_json(cfg.paths.output_dir / "sweep_summary.json",
               ojson{{"num_seeds", num_seeds},
                     {"steps", steps},
                     {"final_mean_loss", std::move(per_seed)},
                     {"pairwise_leq_counts", std::move(pairwise)}});
  }
  return kExitOk;
}

int cmd_report(const RunConfig& cfg, const std::vector<std::string>& trajectory_files,
               const std::string& target_name) {
  if (trajectory_files.empty()) raise(errc::invalid_config, "no trajectory files given");
  std::vector<Trajectory> trajectories;
  for (const auto& f : trajectory_files) {
    detail::require_exists(f, "trajectory");
    trajectories.push_back(trajectory_from_jsonl(f, cfg.domains));
  }
  std::optional<std::size_t> target;
  if (!target_name.empty()) target = cfg.domains.index_of(target_name);
  ComparisonReport report = compare_report(trajectories, target);
  write_json(cfg.paths.output_dir / "comparison_report.json",
             comparison_to_json(report, cfg.domains));
  std::cout << render_comparison_table(report, cfg.domains);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VersaTune data-composition toolkit"};
  app.require_subcommand(0, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::string out_override;
  bool print_effective = false;
  app.add_option("--config", config_path, "Run config JSON");
  app.add_option("--seed", seed_override, "Override the config seed");
  app.add_option("--out", out_override, "Override the output directory");
  app.add_flag("--print-effective-config", print_effective,
               "Print the resolved config (defaults applied) and exit");

  auto* detect_cmd = app.add_subcommand("detect", "Aggregate classifier annotations into a knowledge distribution");
  std::vector<std::string> sample_files;
  detect_cmd->add_option("samples", sample_files, "Sample JSONL files, one per iteration");

  auto* step_cmd = app.add_subcommand("step", "Apply one scheduler step from loss feedback");
  std::string state_path, feedback_line;
  step_cmd->add_option("--state", state_path, "State file (default <out>/state.json)");
  step_cmd->add_option("--feedback-line", feedback_line, "Single feedback JSON line");

  auto* run_cmd = app.add_subcommand("run", "Run the scheduler over the whole feedback file");
  std::string run_state_path;
  run_cmd->add_option("--state", run_state_path, "State file (default <out>/state.json)");

  auto* mix_cmd = app.add_subcommand("mix", "Materialize an epoch dataset at given proportions");
  std::string proportions_file;
  mix_cmd->add_option("--proportions", proportions_file, "Proportions manifest JSON")->required();

  auto* sim_cmd = app.add_subcommand("simulate", "Run strategies through the synthetic loss world");
  std::string world_file;
  std::vector<std::string> strategy_specs;
  std::int64_t sim_steps = 4;
  int num_seeds = 1;
  bool csv = false;
  sim_cmd->add_option("--world", world_file, "World config JSON (default: built-in world)");
  sim_cmd->add_option("--strategies", strategy_specs, "Strategies to run")->delimiter(',');
  sim_cmd->add_option("--steps", sim_steps, "Steps to simulate");
  sim_cmd->add_option("--num-seeds", num_seeds, "Seeds for a sweep summary");
  sim_cmd->add_flag("--csv", csv, "Also write trajectories.csv");

  auto* report_cmd = app.add_subcommand("report", "Compare previously written trajectories");
  std::vector<std::string> trajectory_files;
  std::string target_name;
  report_cmd->add_option("trajectories", trajectory_files, "Trajectory JSONL files");
  report_cmd->add_option("--target", target_name, "Target domain for aggregate deltas");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (seed_override) cfg.seed = *seed_override;
    if (!out_override.empty()) cfg.paths.output_dir = out_override;

    if (print_effective) {
      std::cout << effective_config_json(cfg).dump(2) << "\n";
      return kExitOk;
    }
    if (app.get_subcommands().empty()) {
      std::cerr << "error: a subcommand is required (see --help)\n";
      return kExitUsage;
    }

    std::filesystem::create_directories(cfg.paths.output_dir);
    if (detect_cmd->parsed()) return cmd_detect(cfg, sample_files);
    if (step_cmd->parsed()) return cmd_step(cfg, state_path, feedback_line);
    if (run_cmd->parsed()) return cmd_run(cfg, run_state_path);
    if (mix_cmd->parsed()) return cmd_mix(cfg, proportions_file);
    if (sim_cmd->parsed()) return cmd_simulate(cfg, world_file, strategy_specs, sim_steps, num_seeds, csv);
    if (report_cmd->parsed()) return cmd_report(cfg, trajectory_files, target_name);
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
