#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "versatune/core.hpp"
#include "versatune/errors.hpp"

namespace versatune {

// Per-domain mastery ceiling: the best (lowest) average loss a small
// reference model achieved on each domain.
class ReferenceLossTable {
 public:
  ReferenceLossTable() = default;

  explicit ReferenceLossTable(std::vector<double> losses) : losses_(std::move(losses)) {
    if (losses_.empty()) raise(errc::empty_input, "reference table has no entries");
    for (std::size_t i = 0; i < losses_.size(); ++i) {
      if (!std::isfinite(losses_[i]))
        raise(errc::non_finite, "reference loss " + std::to_string(i) + " is not finite");
      if (losses_[i] <= 0.0)
        raise(errc::non_positive_loss,
              "reference loss " + std::to_string(i) + " must be > 0");
    }
  }

  std::size_t size() const noexcept { return losses_.size(); }
  double operator[](std::size_t i) const { return losses_[i]; }
  const std::vector<double>& losses() const noexcept { return losses_; }

 private:
  std::vector<double> losses_;
};

// Vector of non-negative per-domain signals (learnable potential or
// forgetting degree).
struct SignalVector {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }

  static SignalVector zeros(std::size_t k) { return SignalVector{std::vector<double>(k, 0.0)}; }
};

/// max{(loss_theta - loss_ref) / loss_theta, 0}: the clamped relative gap
/// between the model's current loss and the mastery ceiling.
inline double learnable_potential(double loss_theta, double loss_ref) {
  if (!(loss_theta > 0.0)) raise(errc::non_positive_loss, "loss_theta must be > 0");
  if (!(loss_ref > 0.0)) raise(errc::non_positive_loss, "loss_ref must be > 0");
  return std::max((loss_theta - loss_ref) / loss_theta, 0.0);
}

/// max{(loss_t - loss_prev) / loss_prev, 0}: the clamped relative loss
/// increase between consecutive steps.
inline double forgetting_degree(double loss_t, double loss_prev) {
  if (!(loss_t > 0.0)) raise(errc::non_positive_loss, "loss_t must be > 0");
  if (!(loss_prev > 0.0)) raise(errc::non_positive_loss, "loss_prev must be > 0");
  return std::max((loss_t - loss_prev) / loss_prev, 0.0);
}

inline SignalVector potential_vector(const LossVector& losses, const ReferenceLossTable& ref) {
  if (losses.size() != ref.size())
    raise(errc::dimension_mismatch, "loss vector and reference table differ in length");
  SignalVector out;
  out.values.reserve(losses.size());
  for (std::size_t j = 0; j < losses.size(); ++j)
    out.values.push_back(learnable_potential(losses[j], ref[j]));
  return out;
}

inline SignalVector forgetting_vector(const LossVector& losses, const LossVector& prev) {
  if (losses.size() != prev.size())
    raise(errc::dimension_mismatch, "loss snapshots differ in length");
  if (prev.step() != losses.step() - 1)
    raise(errc::non_consecutive_steps,
          "expected snapshots at consecutive steps, got " + std::to_string(prev.step()) +
              " then " + std::to_string(losses.step()));
  SignalVector out;
  out.values.reserve(losses.size());
  for (std::size_t j = 0; j < losses.size(); ++j)
    out.values.push_back(forgetting_degree(losses[j], prev[j]));
  return out;
}

/// Per-domain minimum over per-epoch average losses.
inline ReferenceLossTable mastery_ceiling(std::span<const std::vector<double>> epoch_losses) {
  if (epoch_losses.empty()) raise(errc::empty_epochs, "no domains given");
  std::vector<double> best;
  best.reserve(epoch_losses.size());
  for (std::size_t j = 0; j < epoch_losses.size(); ++j) {
    const auto& epochs = epoch_losses[j];
    if (epochs.empty())
      raise(errc::empty_epochs, "domain " + std::to_string(j) + " has no epoch entries");
    double lo = epochs.front();
    for (double v : epochs) {
      if (!(v > 0.0) || !std::isfinite(v))
        raise(errc::non_positive_loss,
              "epoch loss for domain " + std::to_string(j) + " must be > 0");
      lo = std::min(lo, v);
    }
    best.push_back(lo);
  }
  return ReferenceLossTable(std::move(best));
}

}  // namespace versatune
