#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "versatune/core.hpp"
#include "versatune/errors.hpp"

namespace versatune {

// One text sequence sampled from the base model, ingested from JSONL.
struct SampleRecord {
  std::string id;
  std::string text;
};

struct ProbabilityAnnotation {
  std::string sample_id;
  Distribution probs;
};

// Aggregated detection outcome across T iterations.
struct DetectionReport {
  std::vector<Distribution> per_iteration;
  Distribution mean;
  std::vector<double> per_domain_stddev;
  double max_stddev_pct = 0.0;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string spelled_count(std::size_t n) {
  static const char* words[] = {"zero", "one", "two",   "three", "four",  "five", "six",
                                "seven", "eight", "nine", "ten",  "eleven", "twelve"};
  return n < std::size(words) ? words[n] : std::to_string(n);
}

inline std::string enumerate_names(const DomainSet& domains) {
  std::string out;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    if (i > 0) out += i + 1 == domains.size() ? ", and " : ", ";
    out += domains.name(i);
  }
  return out;
}

}  // namespace detail

/// Classification prompt for one sample: the annotation-expert instruction,
/// the text fragment, and a JSON output contract with one key per domain.
inline std::string build_prompt(const SampleRecord& sample, const DomainSet& domains) {
  if (detail::trim(sample.text).empty())
    raise(errc::invalid_argument, "sample '" + sample.id + "' has empty text");
  std::string prompt;
  prompt += "You are a data domain annotation expert, and you currently have the following ";
  prompt += detail::spelled_count(domains.size());
  prompt += " data domains: ";
  prompt += detail::enumerate_names(domains);
  prompt +=
      ". Please classify the following text fragment based on their topic and structure by "
      "providing the probability distribution of its belonging to each category, where the sum "
      "of probabilities across all domain categories equals 1, without additional commentary:\n"
      "\n"
      "# Text\n";
  prompt += sample.text;
  prompt +=
      "\n"
      "\n"
      "Output Format:\n"
      "```json\n"
      "{\n";
  for (std::size_t i = 0; i < domains.size(); ++i) {
    prompt += "    \"" + domains.name(i) + "\": \"\"";
    if (i + 1 < domains.size()) prompt += ",";
    prompt += "\n";
  }
  prompt += "}\n```\n";
  return prompt;
}

namespace detail {

// First balanced {...} span, skipping brace characters inside JSON strings.
inline bool extract_json_object(std::string_view raw, std::size_t from, std::string& out,
                                std::size_t& next_from) {
  std::size_t start = raw.find('{', from);
  if (start == std::string_view::npos) return false;
  int depth = 0;
  bool in_string = false, escaped = false;
  for (std::size_t i = start; i < raw.size(); ++i) {
    char c = raw[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) {
      out = std::string(raw.substr(start, i - start + 1));
      next_from = start + 1;
      return true;
    }
  }
  next_from = start + 1;
  out.clear();
  return true;  // an unbalanced '{' exists; caller may rescan past it
}

inline double numeric_value(const nlohmann::json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    std::string s = trim(v.get<std::string>());
    if (!s.empty()) {
      char* end = nullptr;
      double parsed = std::strtod(s.c_str(), &end);
      if (end == s.c_str() + s.size() && std::isfinite(parsed)) return parsed;
    }
  }
  raise(errc::non_numeric_value, "value for '" + key + "' is not a number");
}

}  // namespace detail

/// Pulls the first JSON object out of a classifier reply (code fences and
/// prose around it are fine), checks it carries exactly the configured domain
/// keys, and returns the probabilities. Sums within 0.05 of 1 are accepted
/// and renormalized; anything further off is rejected.
inline Distribution parse_classifier_output(std::string_view raw, const DomainSet& domains) {
  std::string body;
  nlohmann::json obj;
  bool parsed = false;
  std::size_t from = 0;
  while (!parsed && detail::extract_json_object(raw, from, body, from)) {
    if (body.empty()) continue;
    auto candidate = nlohmann::json::parse(body, nullptr, false);
    if (!candidate.is_discarded() && candidate.is_object()) {
      obj = std::move(candidate);
      parsed = true;
    }
  }
  if (!parsed) raise(errc::no_json_found, "no JSON object in classifier reply");

  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!domains.contains(it.key()))
      raise(errc::unexpected_key, "unexpected domain key '" + it.key() + "'");

  std::vector<double> probs(domains.size());
  for (std::size_t j = 0; j < domains.size(); ++j) {
    const std::string& name = domains.name(j);
    auto it = obj.find(name);
    if (it == obj.end()) raise(errc::missing_key, "missing domain key '" + name + "'");
    double v = detail::numeric_value(*it, name);
    if (!std::isfinite(v)) raise(errc::non_numeric_value, "value for '" + name + "' is not finite");
    if (v < 0.0) raise(errc::negative_weight, "probability for '" + name + "' is negative");
    probs[j] = v;
  }

  double sum = kahan_sum(probs);
  if (std::abs(sum - 1.0) > 0.05)
    raise(errc::sum_out_of_tolerance,
          "probabilities sum to " + std::to_string(sum) + ", outside 1 +/- 0.05");
  if (std::abs(sum - 1.0) > kSumTolerance)
    for (double& p : probs) p /= sum;
  return Distribution(std::move(probs));
}

/// Formats a distribution in the same fenced-JSON shape the prompt requests;
/// parse_classifier_output(format(d)) == d exactly.
inline std::string format_annotation_json(const Distribution& d, const DomainSet& domains) {
  if (d.size() != domains.size()) raise(errc::dimension_mismatch, "distribution length mismatch");
  std::string out = "```json\n{\n";
  char buf[64];
  for (std::size_t j = 0; j < domains.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "%.17g", d[j]);
    out += "    \"" + domains.name(j) + "\": \"" + buf + "\"";
    if (j + 1 < domains.size()) out += ",";
    out += "\n";
  }
  out += "}\n```\n";
  return out;
}

/// Componentwise mean of per-sample probability vectors (Kahan-compensated,
/// so annotation order does not matter).
inline Distribution aggregate_iteration(std::span<const ProbabilityAnnotation> annotations) {
  if (annotations.empty()) raise(errc::empty_input, "no annotations to aggregate");
  const std::size_t k = annotations.front().probs.size();
  std::vector<double> sum(k, 0.0), carry(k, 0.0);
  for (const auto& a : annotations) {
    if (a.probs.size() != k) raise(errc::dimension_mismatch, "annotation length mismatch");
    for (std::size_t j = 0; j < k; ++j) {
      double y = a.probs[j] - carry[j];
      double t = sum[j] + y;
      carry[j] = (t - sum[j]) - y;
      sum[j] = t;
    }
  }
  for (double& s : sum) s /= static_cast<double>(annotations.size());
  double total = kahan_sum(sum);
  if (std::abs(total - 1.0) > kSumTolerance) return normalize(sum);
  return Distribution(std::move(sum));
}

/// Mean and spread across T per-iteration distributions. Standard deviation
/// is the T-1 sample estimator; T = 1 reports zeros.
inline DetectionReport detect(std::span<const Distribution> iteration_results) {
  if (iteration_results.empty()) raise(errc::empty_input, "no iteration results");
  const std::size_t k = iteration_results.front().size();
  const std::size_t T = iteration_results.size();

  std::vector<double> mean(k, 0.0);
  for (const auto& d : iteration_results) {
    if (d.size() != k) raise(errc::dimension_mismatch, "iteration result length mismatch");
    for (std::size_t j = 0; j < k; ++j) mean[j] += d[j];
  }
  for (double& m : mean) m /= static_cast<double>(T);

  std::vector<double> stddev(k, 0.0);
  if (T > 1) {
    for (const auto& d : iteration_results)
      for (std::size_t j = 0; j < k; ++j) {
        double diff = d[j] - mean[j];
        stddev[j] += diff * diff;
      }
    for (double& s : stddev) s = std::sqrt(s / static_cast<double>(T - 1));
  }

  DetectionReport report;
  report.per_iteration.assign(iteration_results.begin(), iteration_results.end());
  double total = kahan_sum(mean);
  report.mean = std::abs(total - 1.0) > kSumTolerance ? normalize(mean)
                                                      : Distribution(std::move(mean));
  report.per_domain_stddev = std::move(stddev);
  report.max_stddev_pct =
      100.0 * *std::max_element(report.per_domain_stddev.begin(), report.per_domain_stddev.end());
  return report;
}

}  // namespace versatune
