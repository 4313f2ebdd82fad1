#pragma once

#include <stdexcept>
#include <string>

namespace versatune {

enum class errc {
  // vector / distribution
  all_zero,
  negative_weight,
  non_finite,
  invalid_k,
  dimension_mismatch,
  invalid_argument,
  // losses & signals
  non_positive_loss,
  empty_input,
  empty_epochs,
  non_consecutive_steps,
  // scheduler
  step_order_violation,
  feedback_exhausted,
  // classifier output parsing
  no_json_found,
  missing_key,
  unexpected_key,
  non_numeric_value,
  sum_out_of_tolerance,
  // annotation client
  endpoint_unreachable,
  too_many_dropped,
  // mixing
  invalid_budget,
  missing_pool,
  empty_pool,
  // config / files
  invalid_config,
  io_error,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::all_zero: return "AllZero";
    case errc::negative_weight: return "NegativeWeight";
    case errc::non_finite: return "NonFinite";
    case errc::invalid_k: return "InvalidK";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::invalid_argument: return "InvalidArgument";
    case errc::non_positive_loss: return "NonPositiveLoss";
    case errc::empty_input: return "EmptyInput";
    case errc::empty_epochs: return "EmptyEpochs";
    case errc::non_consecutive_steps: return "NonConsecutiveSteps";
    case errc::step_order_violation: return "StepOrderViolation";
    case errc::feedback_exhausted: return "FeedbackExhausted";
    case errc::no_json_found: return "NoJsonFound";
    case errc::missing_key: return "MissingKey";
    case errc::unexpected_key: return "UnexpectedKey";
    case errc::non_numeric_value: return "NonNumericValue";
    case errc::sum_out_of_tolerance: return "SumOutOfTolerance";
    case errc::endpoint_unreachable: return "EndpointUnreachable";
    case errc::too_many_dropped: return "TooManyDropped";
    case errc::invalid_budget: return "InvalidBudget";
    case errc::missing_pool: return "MissingPool";
    case errc::empty_pool: return "EmptyPool";
    case errc::invalid_config: return "InvalidConfig";
    case errc::io_error: return "IoError";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace versatune
