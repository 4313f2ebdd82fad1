#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "versatune/core.hpp"
#include "versatune/errors.hpp"
#include "versatune/metrics.hpp"
#include "versatune/rng.hpp"
#include "versatune/scheduler.hpp"

namespace versatune {

// Synthetic loss-dynamics world. Each domain's loss relaxes toward its floor
// in proportion to effective exposure and drifts toward its ceiling in
// proportion to neglect; the affinity matrix routes cross-domain transfer
// (exposure_j = sum_i affinity[j][i] * proportions_i).
struct SimWorld {
  std::vector<double> losses;
  std::vector<double> floor;
  std::vector<double> ceiling;
  std::vector<double> learn_rate;   // a_j in (0, 1]
  std::vector<double> forget_rate;  // b_j in [0, 1)
  std::vector<std::vector<double>> affinity;
  std::uint64_t rng_seed = 0;
  double noise_scale = 0.0;
  std::int64_t step = 0;  // steps simulated so far; keys the per-step noise

  std::size_t size() const noexcept { return losses.size(); }

  void validate() const {
    const std::size_t k = losses.size();
    if (k == 0) raise(errc::empty_input, "world has no domains");
    auto want = [&](const std::vector<double>& v, const char* name) {
      if (v.size() != k) raise(errc::dimension_mismatch, std::string(name) + " length mismatch");
    };
    want(floor, "floor");
    want(ceiling, "ceiling");
    want(learn_rate, "learn_rate");
    want(forget_rate, "forget_rate");
    if (affinity.size() != k) raise(errc::dimension_mismatch, "affinity row count mismatch");
    for (std::size_t j = 0; j < k; ++j) {
      if (affinity[j].size() != k) raise(errc::dimension_mismatch, "affinity column count mismatch");
      if (affinity[j][j] != 1.0) raise(errc::invalid_config, "affinity diagonal must be 1");
      for (double a : affinity[j])
        if (!(a >= 0.0 && a <= 1.0)) raise(errc::invalid_config, "affinity entries must be in [0, 1]");
      if (!(floor[j] < ceiling[j])) raise(errc::invalid_config, "floor must be below ceiling");
      if (!(floor[j] > 0.0)) raise(errc::invalid_config, "floor must be > 0");
      if (!(losses[j] > floor[j] && losses[j] <= ceiling[j]))
        raise(errc::invalid_config, "initial losses must lie in (floor, ceiling]");
      if (!(learn_rate[j] > 0.0 && learn_rate[j] <= 1.0))
        raise(errc::invalid_config, "learn_rate must be in (0, 1]");
      if (!(forget_rate[j] >= 0.0 && forget_rate[j] < 1.0))
        raise(errc::invalid_config, "forget_rate must be in [0, 1)");
    }
    if (!(noise_scale >= 0.0)) raise(errc::invalid_config, "noise_scale must be >= 0");
  }
};

/// Advances the world by one training step at the given proportions.
inline SimWorld sim_step(SimWorld world, const Distribution& proportions, double noise_scale) {
  const std::size_t k = world.size();
  if (proportions.size() != k) raise(errc::dimension_mismatch, "proportions length mismatch");
  if (!(noise_scale >= 0.0)) raise(errc::invalid_argument, "noise_scale must be >= 0");

  world.step += 1;
  for (std::size_t j = 0; j < k; ++j) {
    double exposure = 0.0;
    for (std::size_t i = 0; i < k; ++i) exposure += world.affinity[j][i] * proportions[i];
    exposure = std::clamp(exposure, 0.0, 1.0);
    double eta = noise_scale == 0.0
                     ? 0.0
                     : noise_scale * gaussian_at(derive_key(world.rng_seed, 0x73696du /* "sim" */,
                                                            static_cast<std::uint64_t>(world.step)),
                                                 j);
    double next = world.losses[j] - world.learn_rate[j] * exposure * (world.losses[j] - world.floor[j]) +
                  world.forget_rate[j] * (1.0 - exposure) * (world.ceiling[j] - world.losses[j]) + eta;
    world.losses[j] = std::clamp(next, world.floor[j], world.ceiling[j]);
  }
  return world;
}

/// The world's knowledge distribution: mass proportional to how far each
/// domain sits below its worst-case loss.
inline Distribution knowledge_distribution(const SimWorld& world) {
  std::vector<double> mass(world.size());
  for (std::size_t j = 0; j < world.size(); ++j) mass[j] = world.ceiling[j] - world.losses[j];
  return normalize(mass);
}

/// Reference losses a small proxy model would report: just above the floors.
inline ReferenceLossTable simulated_reference(const SimWorld& world) {
  std::vector<double> ref(world.size());
  for (std::size_t j = 0; j < world.size(); ++j) ref[j] = world.floor[j] + 0.05;
  return ReferenceLossTable(std::move(ref));
}

enum class StrategyKind {
  uniform,
  inverse,
  versatune,
  versatune_constant,
  single_domain,
  expansion,
  expansion_uncapped,
};

struct Strategy {
  StrategyKind kind = StrategyKind::uniform;
  std::size_t target = 0;  // single_domain / expansion family only
};

inline bool strategy_has_target(StrategyKind kind) {
  return kind == StrategyKind::single_domain || kind == StrategyKind::expansion ||
         kind == StrategyKind::expansion_uncapped;
}

/// Parses "uniform", "inverse", "versatune", "versatune_constant",
/// "single:<domain>", "expansion:<domain>", "expansion_uncapped:<domain>".
inline Strategy parse_strategy(const std::string& text, const DomainSet& domains) {
  auto colon = text.find(':');
  std::string head = text.substr(0, colon);
  if (head == "uniform") return {StrategyKind::uniform, 0};
  if (head == "inverse") return {StrategyKind::inverse, 0};
  if (head == "versatune") return {StrategyKind::versatune, 0};
  if (head == "versatune_constant") return {StrategyKind::versatune_constant, 0};
  StrategyKind kind;
  if (head == "single") kind = StrategyKind::single_domain;
  else if (head == "expansion") kind = StrategyKind::expansion;
  else if (head == "expansion_uncapped") kind = StrategyKind::expansion_uncapped;
  else raise(errc::invalid_argument, "unknown strategy '" + text + "'");
  if (colon == std::string::npos)
    raise(errc::invalid_argument, "strategy '" + head + "' needs a target domain, e.g. " + head + ":medicine");
  return {kind, domains.index_of(text.substr(colon + 1))};
}

inline std::string strategy_label(const Strategy& s, const DomainSet& domains) {
  switch (s.kind) {
    case StrategyKind::uniform: return "uniform";
    case StrategyKind::inverse: return "inverse";
    case StrategyKind::versatune: return "versatune";
    case StrategyKind::versatune_constant: return "versatune_constant";
    case StrategyKind::single_domain: return "single:" + domains.name(s.target);
    case StrategyKind::expansion: return "expansion:" + domains.name(s.target);
    case StrategyKind::expansion_uncapped: return "expansion_uncapped:" + domains.name(s.target);
  }
  return "unknown";
}

struct TrajectoryPoint {
  std::int64_t step = 0;
  Distribution proportions;  // used for this step
  LossVector losses;         // resulting world losses
};

struct Trajectory {
  std::string label;
  std::vector<double> initial_losses;
  std::vector<TrajectoryPoint> points;
};

/// Closed loop: each step feeds the world's losses to the strategy's
/// scheduling rule and advances the world with the proportions it returns.
inline Trajectory run_strategy(SimWorld world, const Strategy& strategy,
                               const ReferenceLossTable& ref, std::int64_t steps,
                               const DomainSet& domains) {
  if (steps < 1) raise(errc::invalid_argument, "steps must be >= 1");
  world.validate();
  const std::size_t k = world.size();
  if (domains.size() != k) raise(errc::dimension_mismatch, "domain set does not match world");

  Trajectory traj;
  traj.label = strategy_label(strategy, domains);
  traj.initial_losses = world.losses;

  Distribution detected = knowledge_distribution(world);
  Distribution fixed;
  switch (strategy.kind) {
    case StrategyKind::uniform: fixed = uniform(k); break;
    case StrategyKind::inverse: fixed = inverse(detected); break;
    case StrategyKind::versatune_constant: fixed = detected; break;
    case StrategyKind::single_domain: {
      std::vector<double> w(k, 0.0);
      w[strategy.target] = 1.0;
      fixed = Distribution(std::move(w));
      break;
    }
    default: break;
  }

  SchedulerConfig cfg;
  cfg.total_steps = steps;
  if (strategy.kind == StrategyKind::versatune) {
    cfg.mode = SchedulerMode::robustness;
  } else if (strategy.kind == StrategyKind::expansion ||
             strategy.kind == StrategyKind::expansion_uncapped) {
    cfg.mode = SchedulerMode::expansion;
    cfg.target_domain = strategy.target;
  }
  SchedulerState state = init_state(detected, cfg);

  const double noise = world.noise_scale;
  for (std::int64_t t = 1; t <= steps; ++t) {
    Distribution used;
    if (strategy.kind == StrategyKind::versatune) {
      state = step_robustness(std::move(state), LossVector(t, world.losses), ref, cfg);
      used = state.proportions;
    } else if (strategy.kind == StrategyKind::expansion) {
      state = step_expansion(std::move(state), LossVector(t, world.losses), ref, cfg);
      used = state.proportions;
    } else if (strategy.kind == StrategyKind::expansion_uncapped) {
      // Ablation: the forgetting-vs-potential gate is forced open.
      state = step_expansion(std::move(state), LossVector(t, world.losses), ref, cfg, true);
      used = state.proportions;
    } else {
      used = fixed;
    }
    world = sim_step(std::move(world), used, noise);
    traj.points.push_back({t, used, LossVector(t, world.losses)});
  }
  return traj;
}

/// The six-domain world used by the packaged experiments. Initial losses and
/// rates are heterogeneous: domains the model already masters learn fast and
/// sit near their floors, weak domains have little usable headroom, and
/// "science" is the one weak domain with real capacity. Off-diagonal
/// affinities couple medicine<->science, law<->finance and code->science.
inline SimWorld default_world() {
  SimWorld w;
  w.losses = {1.40, 2.90, 1.70, 2.60, 2.20, 1.90};
  w.floor = {1.00, 2.30, 1.20, 1.60, 1.40, 1.30};
  w.ceiling = std::vector<double>(6, 3.50);
  w.learn_rate = {0.90, 0.20, 0.75, 0.75, 0.60, 0.70};
  w.forget_rate = std::vector<double>(6, 0.06);
  w.affinity = std::vector<std::vector<double>>(6, std::vector<double>(6, 0.0));
  for (std::size_t j = 0; j < 6; ++j) w.affinity[j][j] = 1.0;
  w.affinity[1][3] = w.affinity[3][1] = 0.30;  // medicine <-> science
  w.affinity[0][2] = w.affinity[2][0] = 0.30;  // law <-> finance
  w.affinity[3][4] = 0.20;                     // science <- code
  w.rng_seed = 0;
  w.noise_scale = 0.02;
  return w;
}

inline DomainSet default_domains() {
  return DomainSet({"law", "medicine", "finance", "science", "code", "other"});
}

struct StrategySummary {
  std::string label;
  double final_mean_loss = 0.0;
  std::vector<double> per_domain_delta;  // final - initial
  std::optional<double> target_delta;
  std::optional<double> non_target_delta_sum;
};

struct ComparisonReport {
  std::int64_t steps = 0;
  std::optional<std::size_t> target;
  std::vector<StrategySummary> rows;
};

/// Summarizes trajectories: final mean loss, per-domain deltas vs step 0 and,
/// when a target domain is designated, target vs non-target aggregates.
inline ComparisonReport compare_report(std::span<const Trajectory> trajectories,
                                       std::optional<std::size_t> target = std::nullopt) {
  if (trajectories.empty()) raise(errc::empty_input, "no trajectories");
  const std::size_t k = trajectories.front().initial_losses.size();
  const std::size_t steps = trajectories.front().points.size();
  ComparisonReport report;
  report.steps = static_cast<std::int64_t>(steps);
  report.target = target;
  for (const auto& traj : trajectories) {
    if (traj.initial_losses.size() != k || traj.points.size() != steps)
      raise(errc::dimension_mismatch, "trajectories disagree in k or step count");
    const auto& last = traj.points.back().losses;
    StrategySummary row;
    row.label = traj.label;
    row.final_mean_loss = kahan_sum(last.losses()) / static_cast<double>(k);
    row.per_domain_delta.resize(k);
    for (std::size_t j = 0; j < k; ++j) row.per_domain_delta[j] = last[j] - traj.initial_losses[j];
    if (target) {
      if (*target >= k) raise(errc::invalid_argument, "target index out of range");
      row.target_delta = row.per_domain_delta[*target];
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j)
        if (j != *target) acc += row.per_domain_delta[j];
      row.non_target_delta_sum = acc;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace versatune
