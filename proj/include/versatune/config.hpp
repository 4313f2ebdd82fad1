#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "versatune/client.hpp"
#include "versatune/core.hpp"
#include "versatune/errors.hpp"
#include "versatune/io.hpp"
#include "versatune/metrics.hpp"
#include "versatune/scheduler.hpp"
#include "versatune/serialize.hpp"

namespace versatune {

struct RunPaths {
  std::vector<std::filesystem::path> samples;            // one JSONL per detection iteration
  std::map<std::string, std::filesystem::path> pools;    // domain name -> JSONL dataset
  std::filesystem::path feedback;                        // per-step loss JSONL
  std::filesystem::path detection_report;                // cmd_step/run fallback init
  std::filesystem::path output_dir = "out";
};

struct RunConfig {
  DomainSet domains{std::vector<std::string>{"law", "medicine", "finance", "science", "code", "other"}};
  std::uint64_t seed = 42;
  std::uint64_t budget = 60000;
  std::optional<ClassifierEndpointConfig> classifier;
  SchedulerConfig scheduler;
  std::optional<ReferenceLossTable> reference_losses;
  RunPaths paths;
};

namespace detail {

inline void require_exists(const std::filesystem::path& p, const std::string& what) {
  if (p.empty()) raise(errc::invalid_config, what + " path is not configured");
  if (!std::filesystem::exists(p)) raise(errc::invalid_config, what + " path does not exist: " + p.string());
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j,
                                  const std::filesystem::path& config_dir) {
  RunConfig cfg;
  try {
    if (j.contains("domains")) cfg.domains = DomainSet(j["domains"].get<std::vector<std::string>>());
    cfg.seed = j.value("seed", cfg.seed);
    cfg.budget = j.value("budget", cfg.budget);

    if (j.contains("classifier")) {
      const auto& c = j["classifier"];
      ClassifierEndpointConfig ep;
      ep.base_url = c.value("base_url", "");
      ep.model_name = c.value("model_name", "");
      ep.api_key_env = c.value("api_key_env", "");
      ep.max_parallel = c.value("max_parallel", ep.max_parallel);
      ep.timeout_s = c.value("timeout_s", ep.timeout_s);
      ep.max_retries = c.value("max_retries", ep.max_retries);
      cfg.classifier = std::move(ep);
    }

    if (j.contains("scheduler")) {
      const auto& s = j["scheduler"];
      std::string mode = s.value("mode", "robustness");
      if (mode == "robustness") cfg.scheduler.mode = SchedulerMode::robustness;
      else if (mode == "expansion") cfg.scheduler.mode = SchedulerMode::expansion;
      else raise(errc::invalid_config, "scheduler.mode must be robustness or expansion");
      cfg.scheduler.sigma = s.value("sigma", cfg.scheduler.sigma);
      cfg.scheduler.total_steps = s.value("total_steps", cfg.scheduler.total_steps);
      cfg.scheduler.delta = s.value("delta", cfg.scheduler.delta);
      cfg.scheduler.epsilon = s.value("epsilon", cfg.scheduler.epsilon);
      cfg.scheduler.target_cap = s.value("target_cap", cfg.scheduler.target_cap);
      if (s.contains("target_domain"))
        cfg.scheduler.target_domain = cfg.domains.index_of(s["target_domain"].get<std::string>());
    }

    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return path.is_absolute() ? path : config_dir / path;
    };

    if (j.contains("reference_losses")) {
      const auto& r = j["reference_losses"];
      if (r.is_string())
        cfg.reference_losses = load_reference_losses(resolve(r.get<std::string>()), cfg.domains);
      else
        cfg.reference_losses =
            ReferenceLossTable(parse_named_vector(r, cfg.domains, "reference_losses"));
    }

    if (j.contains("paths")) {
      const auto& p = j["paths"];
      for (const auto& s : p.value("samples", std::vector<std::string>{}))
        cfg.paths.samples.push_back(resolve(s));
      if (p.contains("pools"))
        for (auto it = p["pools"].begin(); it != p["pools"].end(); ++it) {
          if (!cfg.domains.contains(it.key()))
            raise(errc::invalid_config, "pool for unknown domain '" + it.key() + "'");
          cfg.paths.pools[it.key()] = resolve(it->get<std::string>());
        }
      if (p.contains("feedback")) cfg.paths.feedback = resolve(p["feedback"].get<std::string>());
      if (p.contains("detection_report"))
        cfg.paths.detection_report = resolve(p["detection_report"].get<std::string>());
      if (p.contains("output_dir")) cfg.paths.output_dir = resolve(p["output_dir"].get<std::string>());
    }
  } catch (const nlohmann::json::exception& ex) {
    raise(errc::invalid_config, std::string("bad config: ") + ex.what());
  }

  if (cfg.budget == 0) raise(errc::invalid_config, "budget must be > 0");
  cfg.scheduler.validate(cfg.domains.size());
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& ex) {
    raise(errc::invalid_config, path.string() + ": " + ex.what());
  }
  auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return config_from_json(j, dir);
}

/// All knobs with defaults resolved, for --print-effective-config.
inline ojson effective_config_json(const RunConfig& cfg) {
  ojson j;
  j["domains"] = cfg.domains.names();
  j["seed"] = cfg.seed;
  j["budget"] = cfg.budget;
  if (cfg.classifier) {
    j["classifier"] = ojson{{"base_url", cfg.classifier->base_url},
                            {"model_name", cfg.classifier->model_name},
                            {"api_key_env", cfg.classifier->api_key_env},
                            {"max_parallel", cfg.classifier->max_parallel},
                            {"timeout_s", cfg.classifier->timeout_s},
                            {"max_retries", cfg.classifier->max_retries}};
  }
  ojson sched{{"mode", cfg.scheduler.mode == SchedulerMode::expansion ? "expansion" : "robustness"},
              {"sigma", cfg.scheduler.sigma},
              {"total_steps", cfg.scheduler.total_steps}};
  if (cfg.scheduler.mode == SchedulerMode::expansion) {
    sched["delta"] = cfg.scheduler.delta;
    sched["epsilon"] = cfg.scheduler.epsilon;
    sched["target_domain"] = cfg.domains.name(cfg.scheduler.target_domain);
    sched["target_cap"] = cfg.scheduler.target_cap;
  }
  j["scheduler"] = std::move(sched);
  if (cfg.reference_losses)
    j["reference_losses"] = named_vector(cfg.reference_losses->losses(), cfg.domains);
  ojson paths = ojson::object();
  ojson samples = ojson::array();
  for (const auto& s : cfg.paths.samples) samples.push_back(s.string());
  paths["samples"] = std::move(samples);
  ojson pools = ojson::object();
  for (const auto& [name, p] : cfg.paths.pools) pools[name] = p.string();
  paths["pools"] = std::move(pools);
  if (!cfg.paths.feedback.empty()) paths["feedback"] = cfg.paths.feedback.string();
  if (!cfg.paths.detection_report.empty())
    paths["detection_report"] = cfg.paths.detection_report.string();
  paths["output_dir"] = cfg.paths.output_dir.string();
  j["paths"] = std::move(paths);
  return j;
}

}  // namespace versatune
