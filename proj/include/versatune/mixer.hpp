#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "versatune/core.hpp"
#include "versatune/errors.hpp"
#include "versatune/io.hpp"
#include "versatune/rng.hpp"

namespace versatune {

struct DomainPool {
  std::size_t domain = 0;           // index into the DomainSet
  std::filesystem::path path;       // JSONL dataset, one record per line
};

// Integer per-domain sample counts realizing a proportion vector under a
// fixed epoch budget.
struct MixPlan {
  std::uint64_t budget = 0;
  std::vector<std::uint64_t> counts;
  std::uint64_t seed = 0;
};

/// Largest-remainder apportionment: floor(p_j * budget) per domain, leftover
/// going to the largest fractional remainders, ties broken by domain index.
inline MixPlan build_mix_plan(const Distribution& proportions, std::uint64_t budget,
                              std::uint64_t seed) {
  const std::size_t k = proportions.size();
  if (budget < k) raise(errc::invalid_budget, "budget must be at least k");

  MixPlan plan{budget, std::vector<std::uint64_t>(k, 0), seed};
  std::vector<double> remainder(k);
  std::uint64_t assigned = 0;
  for (std::size_t j = 0; j < k; ++j) {
    double exact = proportions[j] * static_cast<double>(budget);
    double fl = std::floor(exact);
    plan.counts[j] = static_cast<std::uint64_t>(fl);
    remainder[j] = exact - fl;
    assigned += plan.counts[j];
  }

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
    return a < b;
  });
  for (std::size_t i = 0; assigned < budget; ++i, ++assigned) plan.counts[order[i % k]] += 1;
  return plan;
}

namespace detail {

// Indices to emit for one domain: a plain subsample when the pool is big
// enough, otherwise whole copies of the pool plus a sampled remainder.
inline std::vector<std::size_t> select_indices(std::size_t pool_size, std::uint64_t count,
                                               CounterRng& rng) {
  std::vector<std::size_t> chosen;
  chosen.reserve(count);
  if (count <= pool_size) return sample_without_replacement(pool_size, count, rng);
  std::uint64_t full = count / pool_size;
  std::uint64_t rest = count % pool_size;
  for (std::uint64_t c = 0; c < full; ++c)
    for (std::size_t i = 0; i < pool_size; ++i) chosen.push_back(i);
  for (std::size_t i : sample_without_replacement(pool_size, rest, rng)) chosen.push_back(i);
  return chosen;
}

}  // namespace detail

/// Materializes one epoch dataset: per-domain sampling at the plan's counts,
/// a "domain" field injected into every record, then a global shuffle.
/// Returns the emitted JSONL lines in final order.
inline std::vector<std::string> materialize_lines(const MixPlan& plan,
                                                  std::span<const DomainPool> pools,
                                                  const DomainSet& domains) {
  if (plan.counts.size() != domains.size())
    raise(errc::dimension_mismatch, "plan and domain set differ in length");

  std::vector<const DomainPool*> by_domain(domains.size(), nullptr);
  for (const auto& pool : pools) {
    if (pool.domain >= domains.size()) raise(errc::invalid_argument, "pool domain out of range");
    by_domain[pool.domain] = &pool;
  }

  std::vector<std::string> out;
  out.reserve(plan.budget);
  for (std::size_t j = 0; j < domains.size(); ++j) {
    if (plan.counts[j] == 0) continue;
    if (by_domain[j] == nullptr)
      raise(errc::missing_pool, "no pool configured for domain '" + domains.name(j) + "'");
    std::vector<std::string> records = read_lines(by_domain[j]->path);
    if (records.empty())
      raise(errc::empty_pool, "pool for domain '" + domains.name(j) + "' is empty");

    CounterRng rng(derive_key(plan.seed, /*purpose=*/0x6d69786du /* "mixd" */, j));
    for (std::size_t i : detail::select_indices(records.size(), plan.counts[j], rng)) {
      nlohmann::ordered_json rec;
      try {
        rec = nlohmann::ordered_json::parse(records[i]);
      } catch (const nlohmann::json::parse_error& ex) {
        raise(errc::io_error, by_domain[j]->path.string() + " line " + std::to_string(i + 1) +
                                  ": " + ex.what());
      }
      if (!rec.is_object())
        raise(errc::io_error, by_domain[j]->path.string() + ": record is not a JSON object");
      rec["domain"] = domains.name(j);
      out.push_back(rec.dump());
    }
  }

  CounterRng shuffle_rng(derive_key(plan.seed, /*purpose=*/0x73687566u /* "shuf" */));
  fisher_yates_shuffle(out, shuffle_rng);
  return out;
}

inline void materialize(const MixPlan& plan, std::span<const DomainPool> pools,
                        const DomainSet& domains, const std::filesystem::path& out_path) {
  std::string body;
  for (const auto& line : materialize_lines(plan, pools, domains)) {
    body += line;
    body += '\n';
  }
  atomic_write_file(out_path, body);
}

}  // namespace versatune
