#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "versatune/core.hpp"
#include "versatune/detector.hpp"
#include "versatune/errors.hpp"

namespace versatune {

// Connection settings for the external domain classifier (an OpenAI-style
// chat-completions endpoint).
struct ClassifierEndpointConfig {
  std::string base_url;      // e.g. http://127.0.0.1:8080/v1
  std::string model_name;
  std::string api_key_env;   // env var holding the bearer token; may be empty
  int max_parallel = 4;
  double timeout_s = 30.0;
  int max_retries = 2;

  void validate() const {
    if (base_url.empty()) raise(errc::invalid_config, "classifier base_url is empty");
    if (max_parallel < 1) raise(errc::invalid_config, "max_parallel must be >= 1");
    if (!(timeout_s > 0.0)) raise(errc::invalid_config, "timeout_s must be > 0");
    if (max_retries < 0) raise(errc::invalid_config, "max_retries must be >= 0");
  }
};

struct AnnotateResult {
  std::vector<ProbabilityAnnotation> annotations;  // input order, failures removed
  std::size_t dropped = 0;
};

namespace detail {

struct ParsedUrl {
  std::string origin;  // scheme://host:port
  std::string path;    // prefix, no trailing slash
};

inline ParsedUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  std::size_t path_start =
      url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string path = url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, path_start), path};
}

}  // namespace detail

/// Classifies every sample against the endpoint with bounded parallelism.
/// Failed samples are retried with exponential backoff, then dropped and
/// counted; more than 10% drops (or total failure) aborts the run.
inline AnnotateResult annotate(std::span<const SampleRecord> samples,
                               const ClassifierEndpointConfig& endpoint,
                               const DomainSet& domains) {
  endpoint.validate();
  if (samples.empty()) raise(errc::empty_input, "no samples to annotate");

  const auto url = detail::split_url(endpoint.base_url);
  const std::string route = url.path + "/chat/completions";
  std::string bearer;
  if (!endpoint.api_key_env.empty()) {
    if (const char* key = std::getenv(endpoint.api_key_env.c_str())) bearer = key;
  }

  std::vector<std::optional<ProbabilityAnnotation>> results(samples.size());
  std::atomic<std::size_t> cursor{0};

  auto worker = [&]() {
    httplib::Client client(url.origin);
    client.set_connection_timeout(std::chrono::milliseconds(
        static_cast<int>(endpoint.timeout_s * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(
        static_cast<int>(endpoint.timeout_s * 1000)));
    if (!bearer.empty()) client.set_bearer_token_auth(bearer);

    for (;;) {
      std::size_t i = cursor.fetch_add(1);
      if (i >= samples.size()) return;
      const SampleRecord& sample = samples[i];

      nlohmann::json body = {
          {"model", endpoint.model_name},
          {"messages",
           nlohmann::json::array({{{"role", "user"}, {"content", build_prompt(sample, domains)}}})},
          {"temperature", 0},
      };
      const std::string payload = body.dump();

      for (int attempt = 0; attempt <= endpoint.max_retries; ++attempt) {
        if (attempt > 0) {
          auto backoff = std::chrono::milliseconds(std::min(50L << (attempt - 1), 2000L));
          std::this_thread::sleep_for(backoff);
        }
        auto res = client.Post(route, payload, "application/json");
        if (!res || res->status != 200) continue;
        try {
          auto reply = nlohmann::json::parse(res->body);
          const std::string content =
              reply.at("choices").at(0).at("message").at("content").get<std::string>();
          results[i] = ProbabilityAnnotation{sample.id, parse_classifier_output(content, domains)};
          break;
        } catch (const std::exception&) {
          // malformed reply counts as a failed attempt
        }
      }
    }
  };

  std::size_t n_threads = std::min<std::size_t>(endpoint.max_parallel, samples.size());
  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& th : threads) th.join();

  AnnotateResult out;
  for (auto& r : results) {
    if (r) out.annotations.push_back(std::move(*r));
    else ++out.dropped;
  }
  if (out.annotations.empty())
    raise(errc::endpoint_unreachable, "every request to " + endpoint.base_url + " failed");
  if (out.dropped * 10 > samples.size())
    raise(errc::too_many_dropped, std::to_string(out.dropped) + " of " +
                                      std::to_string(samples.size()) + " samples dropped");
  return out;
}

}  // namespace versatune
