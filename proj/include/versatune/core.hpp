#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "versatune/errors.hpp"

namespace versatune {

// Absolute tolerance on |sum(weights) - 1| for a valid Distribution.
inline constexpr double kSumTolerance = 1e-9;

// Compensated (Kahan) summation so that aggregate results are insensitive
// to the order of their inputs well below test tolerances.
inline double kahan_sum(std::span<const double> xs) {
  double sum = 0.0, carry = 0.0;
  for (double x : xs) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return sum;
}

// Fixed, ordered registry of domain names. All vectors in the pipeline are
// indexed against one DomainSet for the lifetime of a run.
class DomainSet {
 public:
  explicit DomainSet(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() < 2) raise(errc::invalid_k, "a domain set needs at least 2 domains");
    for (std::size_t i = 0; i < names_.size(); ++i) {
      const auto& n = names_[i];
      if (n.empty()) raise(errc::invalid_argument, "empty domain name at index " + std::to_string(i));
      if (!index_.emplace(n, i).second)
        raise(errc::invalid_argument, "duplicate domain name '" + n + "'");
    }
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) raise(errc::invalid_argument, "unknown domain '" + name + "'");
    return it->second;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Length-k probability vector over domains.
class Distribution {
 public:
  Distribution() = default;

  explicit Distribution(std::vector<double> weights) : weights_(std::move(weights)) {
    if (weights_.empty()) raise(errc::empty_input, "distribution has no entries");
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (!std::isfinite(weights_[i]))
        raise(errc::non_finite, "weight " + std::to_string(i) + " is not finite");
      if (weights_[i] < 0.0)
        raise(errc::negative_weight, "weight " + std::to_string(i) + " is negative");
    }
    double sum = kahan_sum(weights_);
    if (std::abs(sum - 1.0) > kSumTolerance)
      raise(errc::sum_out_of_tolerance,
            "weights sum to " + std::to_string(sum) + ", expected 1");
  }

  std::size_t size() const noexcept { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  bool empty() const noexcept { return weights_.empty(); }

 private:
  std::vector<double> weights_;
};

// Per-domain validation losses (nats) observed at one training step.
class LossVector {
 public:
  LossVector() = default;

  LossVector(std::int64_t step, std::vector<double> losses)
      : step_(step), losses_(std::move(losses)) {
    if (step_ < 0) raise(errc::invalid_argument, "step index must be non-negative");
    if (losses_.empty()) raise(errc::empty_input, "loss vector has no entries");
    for (std::size_t i = 0; i < losses_.size(); ++i) {
      if (!std::isfinite(losses_[i]))
        raise(errc::non_finite, "loss " + std::to_string(i) + " is not finite");
      if (losses_[i] <= 0.0)
        raise(errc::non_positive_loss, "loss " + std::to_string(i) + " must be > 0");
    }
  }

  std::int64_t step() const noexcept { return step_; }
  double operator[](std::size_t i) const { return losses_[i]; }
  const std::vector<double>& losses() const noexcept { return losses_; }
  std::size_t size() const noexcept { return losses_.size(); }

 private:
  std::int64_t step_ = 0;
  std::vector<double> losses_;
};

/// raw / sum(raw). Rejects negative, non-finite and all-zero input.
inline Distribution normalize(std::span<const double> raw) {
  if (raw.empty()) raise(errc::empty_input, "nothing to normalize");
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isfinite(raw[i]))
      raise(errc::non_finite, "entry " + std::to_string(i) + " is not finite");
    if (raw[i] < 0.0)
      raise(errc::negative_weight, "entry " + std::to_string(i) + " is negative");
  }
  double sum = kahan_sum(raw);
  if (sum == 0.0) raise(errc::all_zero, "all entries are zero");
  std::vector<double> w(raw.begin(), raw.end());
  for (double& x : w) x /= sum;
  return Distribution(std::move(w));
}

inline Distribution normalize(const std::vector<double>& raw) {
  return normalize(std::span<const double>(raw));
}

/// Equal weight 1/k for each of k >= 2 domains.
inline Distribution uniform(std::size_t k) {
  if (k < 2) raise(errc::invalid_k, "uniform distribution needs k >= 2");
  return Distribution(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

/// Reciprocal reweighting: weight_j proportional to 1 / max(d_j, floor).
inline Distribution inverse(const Distribution& d, double floor = 1e-3) {
  if (!(floor > 0.0)) raise(errc::invalid_argument, "inverse floor must be > 0");
  std::vector<double> recip(d.size());
  for (std::size_t j = 0; j < d.size(); ++j) recip[j] = 1.0 / std::max(d[j], floor);
  return normalize(recip);
}

/// Sum of absolute componentwise differences.
inline double l1_distance(const Distribution& a, const Distribution& b) {
  if (a.size() != b.size())
    raise(errc::dimension_mismatch, "distributions have different lengths");
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) acc += std::abs(a[j] - b[j]);
  return acc;
}

}  // namespace versatune
