#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "versatune/core.hpp"
#include "versatune/errors.hpp"
#include "versatune/metrics.hpp"

namespace versatune {

enum class SchedulerMode { robustness, expansion };

struct SchedulerConfig {
  SchedulerMode mode = SchedulerMode::robustness;
  double sigma = 0.5;           // adjustment magnitude
  std::int64_t total_steps = 4; // scheduled steps (one per epoch by default)
  // Expansion-only knobs.
  double delta = 0.10;          // per-step increment for the target domain
  double epsilon = 1.0;         // forgetting-vs-potential variation threshold
  std::size_t target_domain = 0;
  double target_cap = 0.95;     // max proportion the target may reach via increments

  void validate(std::size_t k) const {
    if (!(sigma >= 0.0)) raise(errc::invalid_config, "sigma must be >= 0");
    if (total_steps < 1) raise(errc::invalid_config, "total_steps must be >= 1");
    if (mode == SchedulerMode::expansion) {
      if (!(delta > 0.0 && delta < 1.0)) raise(errc::invalid_config, "delta must be in (0, 1)");
      if (!(epsilon > 0.0)) raise(errc::invalid_config, "epsilon must be > 0");
      if (target_domain >= k) raise(errc::invalid_config, "target_domain out of range");
      if (!(target_cap > delta && target_cap <= 0.99))
        raise(errc::invalid_config, "target_cap must satisfy delta < cap <= 0.99");
    }
  }
};

// Telemetry for a gated expansion step: the realized increase factor for the
// target and the aggregate pre-step share of the other domains.
struct ExpansionAdjustment {
  double alpha = 0.0;
  double beta_share = 0.0;
};

struct StepRecord {
  std::int64_t step = 0;
  Distribution proportions;  // after this step
  LossVector losses;         // feedback consumed by this step
  SignalVector gamma;
  SignalVector phi;
  bool gate = false;
  bool cap_blocked = false;
  std::optional<ExpansionAdjustment> adjustment;
};

struct SchedulerState {
  std::int64_t step = 0;
  Distribution proportions;
  std::optional<LossVector> prev_losses;
  std::vector<StepRecord> history;
};

/// Step 0 state: proportions start at the detected knowledge distribution.
inline SchedulerState init_state(const Distribution& detected, const SchedulerConfig& config) {
  config.validate(detected.size());
  SchedulerState st;
  st.step = 0;
  st.proportions = detected;
  return st;
}

namespace detail {

inline void check_step_order(const SchedulerState& state, const LossVector& losses,
                             const SchedulerConfig& config) {
  if (state.step >= config.total_steps)
    raise(errc::step_order_violation,
          "schedule already complete at step " + std::to_string(state.step));
  if (losses.step() != state.step + 1)
    raise(errc::step_order_violation,
          "state at step " + std::to_string(state.step) + " cannot consume feedback for step " +
              std::to_string(losses.step()));
  if (losses.size() != state.proportions.size())
    raise(errc::dimension_mismatch, "feedback length does not match domain count");
}

// P'_j = P_j * (1 + sigma * gamma_j)
inline std::vector<double> scaled_weights(const Distribution& p, const SignalVector& gamma,
                                          double sigma) {
  std::vector<double> scaled(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) scaled[j] = p[j] * (1.0 + sigma * gamma[j]);
  return scaled;
}

}  // namespace detail

/// One multi-ability step: multiplicative update by learnable potential,
/// then renormalization.
inline SchedulerState step_robustness(SchedulerState state, const LossVector& losses,
                                      const ReferenceLossTable& ref,
                                      const SchedulerConfig& config) {
  detail::check_step_order(state, losses, config);
  SignalVector gamma = potential_vector(losses, ref);
  Distribution next = normalize(detail::scaled_weights(state.proportions, gamma, config.sigma));
  StepRecord rec{losses.step(), next,  losses, gamma, SignalVector::zeros(losses.size()),
                 false,         false, std::nullopt};
  state.history.push_back(std::move(rec));
  state.prev_losses = losses;
  state.proportions = std::move(next);
  state.step = losses.step();
  return state;
}

/// True iff the mean non-target forgetting (divided by k, as specified)
/// stays strictly below epsilon times the target's learnable potential.
inline bool expansion_gate(const SignalVector& phi, double gamma_target, double epsilon,
                           std::size_t k, std::size_t target) {
  if (k < 2) raise(errc::invalid_k, "gate needs k >= 2");
  if (phi.size() != k) raise(errc::dimension_mismatch, "phi length does not match k");
  if (target >= k) raise(errc::invalid_argument, "target index out of range");
  double acc = 0.0;
  for (std::size_t j = 0; j < k; ++j)
    if (j != target) acc += phi[j];
  return acc / static_cast<double>(k) < epsilon * gamma_target;
}

/// One domain-expansion step. `gate_override` forces the gate decision and
/// exists for the uncapped-expansion ablation; normal callers leave it unset.
inline SchedulerState step_expansion(SchedulerState state, const LossVector& losses,
                                     const ReferenceLossTable& ref,
                                     const SchedulerConfig& config,
                                     std::optional<bool> gate_override = std::nullopt) {
  detail::check_step_order(state, losses, config);
  const std::size_t k = losses.size();
  const std::size_t e = config.target_domain;
  if (e >= k) raise(errc::invalid_config, "target_domain out of range");

  SignalVector gamma = potential_vector(losses, ref);
  // No previous snapshot exists at t = 1; forgetting is neutral there.
  SignalVector phi = state.prev_losses ? forgetting_vector(losses, *state.prev_losses)
                                       : SignalVector::zeros(k);

  std::vector<double> scaled = detail::scaled_weights(state.proportions, gamma, config.sigma);

  bool gate = gate_override ? *gate_override
                            : expansion_gate(phi, gamma[e], config.epsilon, k, e);
  const double prev_target = state.proportions[e];
  bool cap_ok = prev_target + config.delta <= config.target_cap;

  Distribution next;
  bool cap_blocked = false;
  std::optional<ExpansionAdjustment> adjustment;
  if (gate && cap_ok) {
    // Target grows by exactly delta; the others share the complement in
    // proportion to their scaled weights.
    double rest = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      if (j != e) rest += scaled[j];
    if (rest <= 0.0) raise(errc::all_zero, "non-target weights vanished");
    double budget = 1.0 - prev_target - config.delta;
    std::vector<double> w(k);
    w[e] = prev_target + config.delta;
    for (std::size_t j = 0; j < k; ++j)
      if (j != e) w[j] = scaled[j] / rest * budget;
    next = Distribution(std::move(w));
    adjustment = ExpansionAdjustment{
        prev_target > 0.0 ? (prev_target + config.delta) / prev_target : 0.0,
        1.0 - prev_target};
  } else {
    cap_blocked = gate && !cap_ok;
    next = normalize(scaled);
  }

  StepRecord rec{losses.step(), next, losses, std::move(gamma), std::move(phi),
                 gate,          cap_blocked, adjustment};
  state.history.push_back(std::move(rec));
  state.prev_losses = losses;
  state.proportions = std::move(next);
  state.step = losses.step();
  return state;
}

/// Applies one step in the configured mode.
inline SchedulerState step_scheduler(SchedulerState state, const LossVector& losses,
                                     const ReferenceLossTable& ref,
                                     const SchedulerConfig& config) {
  return config.mode == SchedulerMode::expansion
             ? step_expansion(std::move(state), losses, ref, config)
             : step_robustness(std::move(state), losses, ref, config);
}

using FeedbackSource = std::function<std::optional<LossVector>()>;

/// Folds the per-step update over total_steps feedback snapshots.
inline SchedulerState run_schedule(SchedulerState state, const FeedbackSource& feedback,
                                   const ReferenceLossTable& ref,
                                   const SchedulerConfig& config) {
  config.validate(state.proportions.size());
  while (state.step < config.total_steps) {
    std::optional<LossVector> losses = feedback();
    if (!losses)
      raise(errc::feedback_exhausted,
            "feedback ended at step " + std::to_string(state.step) + " of " +
                std::to_string(config.total_steps));
    state = step_scheduler(std::move(state), *losses, ref, config);
  }
  return state;
}

inline SchedulerState run_schedule(SchedulerState state, std::span<const LossVector> feedback,
                                   const ReferenceLossTable& ref,
                                   const SchedulerConfig& config) {
  std::size_t i = 0;
  return run_schedule(std::move(state),
                      [&]() -> std::optional<LossVector> {
                        if (i >= feedback.size()) return std::nullopt;
                        return feedback[i++];
                      },
                      ref, config);
}

}  // namespace versatune
