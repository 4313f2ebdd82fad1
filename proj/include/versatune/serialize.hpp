#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "versatune/core.hpp"
#include "versatune/detector.hpp"
#include "versatune/errors.hpp"
#include "versatune/io.hpp"
#include "versatune/metrics.hpp"
#include "versatune/mixer.hpp"
#include "versatune/scheduler.hpp"
#include "versatune/simulator.hpp"

// JSON wire formats. Outputs use ordered_json keyed in domain order so files
// read naturally; parsers accept keys in any order.

namespace versatune {

using ojson = nlohmann::ordered_json;

inline ojson named_vector(std::span<const double> values, const DomainSet& domains) {
  if (values.size() != domains.size())
    raise(errc::dimension_mismatch, "vector length does not match domain set");
  ojson obj = ojson::object();
  for (std::size_t j = 0; j < domains.size(); ++j) obj[domains.name(j)] = values[j];
  return obj;
}

/// Reads a {"domain": value} object whose keys must exactly match the
/// configured domain set.
inline std::vector<double> parse_named_vector(const nlohmann::json& obj, const DomainSet& domains,
                                              const std::string& what) {
  if (!obj.is_object()) raise(errc::invalid_config, what + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!domains.contains(it.key()))
      raise(errc::invalid_config, what + " has unknown domain key '" + it.key() + "'");
  std::vector<double> values(domains.size());
  for (std::size_t j = 0; j < domains.size(); ++j) {
    const std::string& name = domains.name(j);
    auto it = obj.find(name);
    if (it == obj.end()) raise(errc::invalid_config, what + " is missing domain '" + name + "'");
    if (!it->is_number()) raise(errc::invalid_config, what + "." + name + " must be a number");
    values[j] = it->get<double>();
  }
  return values;
}

// ---- loss feedback -------------------------------------------------------

inline LossVector parse_feedback_line(const std::string& line, const DomainSet& domains) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& ex) {
    raise(errc::invalid_config, std::string("bad feedback line: ") + ex.what());
  }
  if (!obj.contains("step") || !obj["step"].is_number_integer())
    raise(errc::invalid_config, "feedback line needs an integer \"step\"");
  return LossVector(obj["step"].get<std::int64_t>(),
                    parse_named_vector(obj.at("losses"), domains, "losses"));
}

inline std::vector<LossVector> load_feedback(const std::filesystem::path& path,
                                             const DomainSet& domains) {
  std::vector<LossVector> out;
  for_each_line(path, [&](const std::string& line, std::size_t lineno) {
    try {
      out.push_back(parse_feedback_line(line, domains));
    } catch (const Error& e) {
      raise(e.code(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  });
  return out;
}

inline ojson feedback_to_json(const LossVector& losses, const DomainSet& domains) {
  return ojson{{"step", losses.step()}, {"losses", named_vector(losses.losses(), domains)}};
}

// ---- scheduler manifests & state ------------------------------------------

inline ojson manifest_to_json(const StepRecord& rec, const DomainSet& domains) {
  return ojson{{"step", rec.step},
               {"proportions", named_vector(rec.proportions.weights(), domains)},
               {"gamma", named_vector(rec.gamma.values, domains)},
               {"phi", named_vector(rec.phi.values, domains)},
               {"gate", rec.gate},
               {"cap_blocked", rec.cap_blocked}};
}

inline ojson state_to_json(const SchedulerState& state, const DomainSet& domains) {
  ojson j{{"step", state.step},
          {"proportions", named_vector(state.proportions.weights(), domains)}};
  if (state.prev_losses) j["prev_losses"] = feedback_to_json(*state.prev_losses, domains);
  else j["prev_losses"] = nullptr;
  ojson hist = ojson::array();
  for (const auto& rec : state.history) {
    ojson h = manifest_to_json(rec, domains);
    h["losses"] = named_vector(rec.losses.losses(), domains);
    if (rec.adjustment)
      h["adjustment"] = ojson{{"alpha", rec.adjustment->alpha},
                              {"beta_share", rec.adjustment->beta_share}};
    hist.push_back(std::move(h));
  }
  j["history"] = std::move(hist);
  return j;
}

inline SchedulerState state_from_json(const nlohmann::json& j, const DomainSet& domains) {
  SchedulerState state;
  try {
    state.step = j.at("step").get<std::int64_t>();
    state.proportions =
        Distribution(parse_named_vector(j.at("proportions"), domains, "proportions"));
    if (j.contains("prev_losses") && !j["prev_losses"].is_null()) {
      const auto& pl = j["prev_losses"];
      state.prev_losses = LossVector(pl.at("step").get<std::int64_t>(),
                                     parse_named_vector(pl.at("losses"), domains, "prev_losses"));
    }
    for (const auto& h : j.value("history", nlohmann::json::array())) {
      StepRecord rec;
      rec.step = h.at("step").get<std::int64_t>();
      rec.proportions = Distribution(parse_named_vector(h.at("proportions"), domains, "proportions"));
      rec.losses = LossVector(rec.step, parse_named_vector(h.at("losses"), domains, "losses"));
      rec.gamma = SignalVector{parse_named_vector(h.at("gamma"), domains, "gamma")};
      rec.phi = SignalVector{parse_named_vector(h.at("phi"), domains, "phi")};
      rec.gate = h.at("gate").get<bool>();
      rec.cap_blocked = h.at("cap_blocked").get<bool>();
      if (h.contains("adjustment") && !h["adjustment"].is_null())
        rec.adjustment = ExpansionAdjustment{h["adjustment"].at("alpha").get<double>(),
                                             h["adjustment"].at("beta_share").get<double>()};
      state.history.push_back(std::move(rec));
    }
  } catch (const nlohmann::json::exception& ex) {
    raise(errc::invalid_config, std::string("corrupt scheduler state: ") + ex.what());
  }
  return state;
}

// ---- detection -------------------------------------------------------------

inline SampleRecord parse_sample_line(const std::string& line) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& ex) {
    raise(errc::invalid_config, std::string("bad sample line: ") + ex.what());
  }
  SampleRecord rec;
  try {
    rec.id = obj.at("id").is_string() ? obj["id"].get<std::string>() : obj.at("id").dump();
    rec.text = obj.at("text").get<std::string>();
  } catch (const nlohmann::json::exception& ex) {
    raise(errc::invalid_config, std::string("sample line needs id and text: ") + ex.what());
  }
  if (detail::trim(rec.text).empty()) raise(errc::invalid_config, "sample text is empty");
  return rec;
}

inline std::vector<SampleRecord> load_samples(const std::filesystem::path& path) {
  std::vector<SampleRecord> out;
  for_each_line(path, [&](const std::string& line, std::size_t lineno) {
    try {
      out.push_back(parse_sample_line(line));
    } catch (const Error& e) {
      raise(e.code(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  });
  return out;
}

inline ojson report_to_json(const DetectionReport& report) {
  ojson per_iter = ojson::array();
  for (const auto& d : report.per_iteration) per_iter.push_back(d.weights());
  return ojson{{"per_iteration", std::move(per_iter)},
               {"mean", report.mean.weights()},
               {"stddev", report.per_domain_stddev},
               {"max_stddev_pct", report.max_stddev_pct}};
}

inline Distribution detection_mean_from_json(const nlohmann::json& j) {
  try {
    return Distribution(j.at("mean").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& ex) {
    raise(errc::invalid_config, std::string("corrupt detection report: ") + ex.what());
  }
}

// ---- reference losses ------------------------------------------------------

/// Reads either a {"domain": loss} JSON object (.json) or a JSONL of
/// {"domain", "epoch", "avg_loss"} records folded through the per-domain
/// minimum (anything else).
inline ReferenceLossTable load_reference_losses(const std::filesystem::path& path,
                                                const DomainSet& domains) {
  if (path.extension() == ".json") {
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& ex) {
      raise(errc::invalid_config, path.string() + ": " + ex.what());
    }
    return ReferenceLossTable(parse_named_vector(obj, domains, "reference_losses"));
  }
  std::vector<std::vector<double>> per_domain(domains.size());
  for_each_line(path, [&](const std::string& line, std::size_t lineno) {
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
      per_domain[domains.index_of(obj.at("domain").get<std::string>())].push_back(
          obj.at("avg_loss").get<double>());
    } catch (const std::exception& ex) {
      raise(errc::invalid_config, path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  });
  return mastery_ceiling(per_domain);
}

// ---- mix plans --------------------------------------------------------------

inline ojson plan_to_json(const MixPlan& plan, const DomainSet& domains) {
  ojson counts = ojson::object();
  for (std::size_t j = 0; j < domains.size(); ++j) counts[domains.name(j)] = plan.counts[j];
  return ojson{{"budget", plan.budget}, {"counts", std::move(counts)}, {"seed", plan.seed}};
}

// ---- simulator --------------------------------------------------------------

inline ojson world_to_json(const SimWorld& world, const DomainSet& domains) {
  return ojson{{"domains", domains.names()},
               {"losses", world.losses},
               {"floor", world.floor},
               {"ceiling", world.ceiling},
               {"learn_rate", world.learn_rate},
               {"forget_rate", world.forget_rate},
               {"affinity", world.affinity},
               {"rng_seed", world.rng_seed},
               {"noise_scale", world.noise_scale}};
}

inline std::pair<SimWorld, DomainSet> world_from_json(const nlohmann::json& j) {
  try {
    DomainSet domains(j.at("domains").get<std::vector<std::string>>());
    SimWorld w;
    w.losses = j.at("losses").get<std::vector<double>>();
    w.floor = j.at("floor").get<std::vector<double>>();
    w.ceiling = j.at("ceiling").get<std::vector<double>>();
    w.learn_rate = j.at("learn_rate").get<std::vector<double>>();
    w.forget_rate = j.at("forget_rate").get<std::vector<double>>();
    w.affinity = j.at("affinity").get<std::vector<std::vector<double>>>();
    w.rng_seed = j.value("rng_seed", 0ull);
    w.noise_scale = j.value("noise_scale", 0.0);
    w.validate();
    if (domains.size() != w.size()) raise(errc::dimension_mismatch, "domains vs world length");
    return {std::move(w), std::move(domains)};
  } catch (const nlohmann::json::exception& ex) {
    raise(errc::invalid_config, std::string("corrupt world config: ") + ex.what());
  }
}

/// First line is a header carrying the strategy label and step-0 losses;
/// each following line is one step.
inline std::string trajectory_to_jsonl(const Trajectory& traj, const DomainSet& domains) {
  ojson header{{"strategy", traj.label},
               {"initial_losses", named_vector(traj.initial_losses, domains)}};
  std::string out = header.dump();
  out += '\n';
  for (const auto& pt : traj.points) {
    ojson line{{"step", pt.step},
               {"proportions", named_vector(pt.proportions.weights(), domains)},
               {"losses", named_vector(pt.losses.losses(), domains)}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

inline Trajectory trajectory_from_jsonl(const std::filesystem::path& path,
                                        const DomainSet& domains) {
  Trajectory traj;
  bool have_header = false;
  for_each_line(path, [&](const std::string& line, std::size_t lineno) {
    try {
      nlohmann::json obj = nlohmann::json::parse(line);
      if (!have_header) {
        traj.label = obj.at("strategy").get<std::string>();
        traj.initial_losses = parse_named_vector(obj.at("initial_losses"), domains, "initial_losses");
        have_header = true;
        return;
      }
      TrajectoryPoint pt;
      pt.step = obj.at("step").get<std::int64_t>();
      pt.proportions =
          Distribution(parse_named_vector(obj.at("proportions"), domains, "proportions"));
      pt.losses = LossVector(pt.step, parse_named_vector(obj.at("losses"), domains, "losses"));
      traj.points.push_back(std::move(pt));
    } catch (const std::exception& ex) {
      raise(errc::invalid_config, path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  });
  if (!have_header) raise(errc::invalid_config, path.string() + ": missing trajectory header");
  return traj;
}

inline ojson comparison_to_json(const ComparisonReport& report, const DomainSet& domains) {
  ojson rows = ojson::array();
  for (const auto& row : report.rows) {
    ojson r{{"strategy", row.label},
            {"final_mean_loss", row.final_mean_loss},
            {"per_domain_delta", named_vector(row.per_domain_delta, domains)}};
    if (row.target_delta) r["target_delta"] = *row.target_delta;
    if (row.non_target_delta_sum) r["non_target_delta_sum"] = *row.non_target_delta_sum;
    rows.push_back(std::move(r));
  }
  ojson out{{"steps", report.steps}};
  if (report.target) out["target_domain"] = domains.name(*report.target);
  out["strategies"] = std::move(rows);
  return out;
}

/// Plain-text table: one row per strategy, aligned columns.
inline std::string render_comparison_table(const ComparisonReport& report,
                                           const DomainSet& domains) {
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%+.4f", v);
    return std::string(buf);
  };
  std::size_t label_w = 8;
  for (const auto& row : report.rows) label_w = std::max(label_w, row.label.size());

  std::string out = "strategy";
  out.append(label_w - 8 + 2, ' ');
  out += "final_mean";
  for (const auto& name : domains.names()) {
    out += "  d_";
    out += name;
  }
  if (report.target) out += "  target_delta  non_target_sum";
  out += '\n';

  for (const auto& row : report.rows) {
    out += row.label;
    out.append(label_w - row.label.size() + 2, ' ');
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%10.4f", row.final_mean_loss);
    out += buf;
    for (std::size_t j = 0; j < domains.size(); ++j) {
      out += "  ";
      std::string cell = fmt(row.per_domain_delta[j]);
      std::size_t col_w = 3 + domains.name(j).size();
      if (cell.size() < col_w) out.append(col_w - cell.size(), ' ');
      out += cell;
    }
    if (report.target) {
      std::snprintf(buf, sizeof(buf), "  %12s", fmt(*row.target_delta).c_str());
      out += buf;
      std::snprintf(buf, sizeof(buf), "  %14s", fmt(*row.non_target_delta_sum).c_str());
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace versatune
