#include <algorithm>
#include <numeric>

#include <catch_amalgamated.hpp>

#include "test_support.hpp"
#include "versatune/simulator.hpp"

using namespace versatune;

namespace {

// Symmetric two-domain world with no transfer; handy for hand evaluation.
SimWorld tiny_world(double loss0, double loss1) {
  SimWorld w;
  w.losses = {loss0, loss1};
  w.floor = {1.0, 1.0};
  w.ceiling = {3.0, 3.0};
  w.learn_rate = {0.5, 0.5};
  w.forget_rate = {0.2, 0.2};
  w.affinity = {{1.0, 0.0}, {0.0, 1.0}};
  return w;
}

SimWorld identity_affinity(SimWorld w) {
  for (std::size_t i = 0; i < w.size(); ++i)
    for (std::size_t j = 0; j < w.size(); ++j) w.affinity[i][j] = i == j ? 1.0 : 0.0;
  return w;
}

}  // namespace

TEST_CASE("sim_step hand-evaluated updates") {
  // full exposure: loss moves fraction a of the way to the floor
  auto w = tiny_world(2.0, 2.0);
  auto next = sim_step(w, Distribution({1.0, 0.0}), 0.0);
  CHECK(next.losses[0] == Catch::Approx(1.5));
  // zero exposure: loss moves fraction b toward the ceiling
  auto w2 = tiny_world(1.5, 1.5);
  auto next2 = sim_step(w2, Distribution({0.0, 1.0}), 0.0);
  CHECK(next2.losses[0] == Catch::Approx(1.8));
  // fixed point at the floor under full exposure
  auto w3 = tiny_world(2.0, 2.0);
  w3.losses[0] = 1.0 + 1e-15;
  auto next3 = sim_step(w3, Distribution({1.0, 0.0}), 0.0);
  CHECK(next3.losses[0] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("losses stay inside [floor, ceiling] for any strategy") {
  auto world = default_world();
  auto domains = default_domains();
  auto ref = simulated_reference(world);
  for (const char* spec : {"uniform", "inverse", "versatune", "versatune_constant",
                           "single:other", "expansion:science", "expansion_uncapped:science"}) {
    auto traj = run_strategy(world, parse_strategy(spec, domains), ref, 12, domains);
    for (const auto& pt : traj.points)
      for (std::size_t j = 0; j < world.size(); ++j) {
        CHECK(pt.losses[j] >= world.floor[j]);
        CHECK(pt.losses[j] <= world.ceiling[j]);
      }
  }
}

TEST_CASE("noise-free runs are deterministic") {
  auto world = default_world();
  world.noise_scale = 0.0;
  auto domains = default_domains();
  auto ref = simulated_reference(world);
  auto a = run_strategy(world, parse_strategy("versatune", domains), ref, 6, domains);
  auto b = run_strategy(world, parse_strategy("versatune", domains), ref, 6, domains);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t t = 0; t < a.points.size(); ++t)
    for (std::size_t j = 0; j < world.size(); ++j) {
      CHECK(a.points[t].losses[j] == b.points[t].losses[j]);
      CHECK(a.points[t].proportions[j] == b.points[t].proportions[j]);
    }
}

TEST_CASE("seeded runs are reproducible and seed-sensitive") {
  auto world = default_world();
  auto domains = default_domains();
  auto ref = simulated_reference(world);
  auto a = run_strategy(world, parse_strategy("uniform", domains), ref, 4, domains);
  auto b = run_strategy(world, parse_strategy("uniform", domains), ref, 4, domains);
  CHECK(a.points.back().losses.losses() == b.points.back().losses.losses());
  world.rng_seed = 1;
  auto c = run_strategy(world, parse_strategy("uniform", domains), ref, 4, domains);
  CHECK(a.points.back().losses.losses() != c.points.back().losses.losses());
}

TEST_CASE("uniform strategy on a symmetric world keeps domains identical") {
  SimWorld w;
  const std::size_t k = 4;
  w.losses = std::vector<double>(k, 2.2);
  w.floor = std::vector<double>(k, 1.0);
  w.ceiling = std::vector<double>(k, 3.0);
  w.learn_rate = std::vector<double>(k, 0.4);
  w.forget_rate = std::vector<double>(k, 0.1);
  w.affinity = std::vector<std::vector<double>>(k, std::vector<double>(k, 0.0));
  for (std::size_t j = 0; j < k; ++j) w.affinity[j][j] = 1.0;
  DomainSet domains({"a", "b", "c", "d"});
  auto traj = run_strategy(w, parse_strategy("uniform", domains), simulated_reference(w), 5, domains);
  for (const auto& pt : traj.points)
    for (std::size_t j = 1; j < k; ++j) CHECK(pt.losses[j] == Catch::Approx(pt.losses[0]));
}

TEST_CASE("single-domain training forgets everything else (identity affinity)") {
  auto world = identity_affinity(default_world());
  world.noise_scale = 0.0;
  auto domains = default_domains();
  auto traj = run_strategy(world, parse_strategy("single:medicine", domains),
                           simulated_reference(world), 4, domains);
  std::size_t target = domains.index_of("medicine");
  double prev_target = world.losses[target];
  std::vector<double> prev = world.losses;
  for (const auto& pt : traj.points) {
    CHECK(pt.losses[target] < prev_target);  // target strictly improves
    prev_target = pt.losses[target];
    for (std::size_t j = 0; j < world.size(); ++j) {
      if (j == target) continue;
      CHECK(pt.losses[j] > prev[j]);  // every other domain strictly regresses
    }
    prev = pt.losses.losses();
  }
}

TEST_CASE("helper domain can rebound under single-domain training with affinity") {
  // strong code->science link: training only code still lowers science's loss
  auto world = identity_affinity(default_world());
  world.noise_scale = 0.0;
  world.affinity[3][4] = 0.8;
  auto domains = default_domains();
  auto traj = run_strategy(world, parse_strategy("single:code", domains),
                           simulated_reference(world), 3, domains);
  CHECK(traj.points.back().losses[3] < world.losses[3]);
}

TEST_CASE("permutation equivariance of the dynamics") {
  auto world = default_world();
  world.noise_scale = 0.0;
  auto domains = default_domains();
  auto ref = simulated_reference(world);

  std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  SimWorld permuted;
  permuted.losses.resize(6);
  permuted.floor.resize(6);
  permuted.ceiling.resize(6);
  permuted.learn_rate.resize(6);
  permuted.forget_rate.resize(6);
  permuted.affinity = std::vector<std::vector<double>>(6, std::vector<double>(6, 0.0));
  std::vector<std::string> names(6);
  std::vector<double> ref_perm(6);
  for (std::size_t j = 0; j < 6; ++j) {
    permuted.losses[j] = world.losses[perm[j]];
    permuted.floor[j] = world.floor[perm[j]];
    permuted.ceiling[j] = world.ceiling[perm[j]];
    permuted.learn_rate[j] = world.learn_rate[perm[j]];
    permuted.forget_rate[j] = world.forget_rate[perm[j]];
    names[j] = domains.name(perm[j]);
    ref_perm[j] = ref[perm[j]];
    for (std::size_t i = 0; i < 6; ++i) permuted.affinity[j][i] = world.affinity[perm[j]][perm[i]];
  }
  DomainSet perm_domains(names);

  auto base = run_strategy(world, parse_strategy("versatune", domains), ref, 5, domains);
  auto swapped = run_strategy(permuted, parse_strategy("versatune", perm_domains),
                              ReferenceLossTable(ref_perm), 5, perm_domains);
  for (std::size_t t = 0; t < base.points.size(); ++t)
    for (std::size_t j = 0; j < 6; ++j)
      CHECK(swapped.points[t].losses[j] ==
            Catch::Approx(base.points[t].losses[perm[j]]).epsilon(1e-12));
}

TEST_CASE("raising an affinity entry weakly lowers the receiving domain's losses") {
  auto world = default_world();
  world.noise_scale = 0.0;
  auto domains = default_domains();
  auto ref = simulated_reference(world);
  auto lo = world;
  auto hi = world;
  hi.affinity[5][0] = 0.5;  // "other" now receives transfer from law
  auto t_lo = run_strategy(lo, parse_strategy("versatune_constant", domains), ref, 6, domains);
  auto t_hi = run_strategy(hi, parse_strategy("versatune_constant", domains), ref, 6, domains);
  for (std::size_t t = 0; t < t_lo.points.size(); ++t)
    CHECK(t_hi.points[t].losses[5] <= t_lo.points[t].losses[5] + 1e-12);
}

TEST_CASE("versatune-constant holds the detected distribution fixed") {
  auto world = default_world();
  auto domains = default_domains();
  auto detected = knowledge_distribution(world);
  auto traj = run_strategy(world, parse_strategy("versatune_constant", domains),
                           simulated_reference(world), 4, domains);
  for (const auto& pt : traj.points)
    for (std::size_t j = 0; j < 6; ++j) CHECK(pt.proportions[j] == detected[j]);
}

TEST_CASE("compare_report aggregates deltas") {
  auto world = default_world();
  world.noise_scale = 0.0;
  auto domains = default_domains();
  auto ref = simulated_reference(world);
  std::vector<Trajectory> trajs;
  trajs.push_back(run_strategy(world, parse_strategy("expansion:science", domains), ref, 6, domains));
  trajs.push_back(run_strategy(world, parse_strategy("single:science", domains), ref, 6, domains));
  auto report = compare_report(trajs, domains.index_of("science"));
  REQUIRE(report.rows.size() == 2);
  for (const auto& row : report.rows) {
    REQUIRE(row.target_delta.has_value());
    REQUIRE(row.non_target_delta_sum.has_value());
    double sum = 0.0;
    for (std::size_t j = 0; j < 6; ++j)
      if (j != domains.index_of("science")) sum += row.per_domain_delta[j];
    CHECK(*row.non_target_delta_sum == Catch::Approx(sum));
    CHECK(*row.target_delta < 0.0);  // science improves under both
  }
  // expansion protects the non-targets better than pure single-domain training
  CHECK(*report.rows[0].non_target_delta_sum < *report.rows[1].non_target_delta_sum);
}

TEST_CASE("compare_report flags mismatched trajectories") {
  auto world = default_world();
  auto domains = default_domains();
  auto ref = simulated_reference(world);
  std::vector<Trajectory> trajs;
  trajs.push_back(run_strategy(world, parse_strategy("uniform", domains), ref, 3, domains));
  trajs.push_back(run_strategy(world, parse_strategy("uniform", domains), ref, 4, domains));
  CHECK_THROWS_MATCHES(compare_report(trajs), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == errc::dimension_mismatch;
                       }));
}

TEST_CASE("compare_report orders strategies by their final losses") {
  // hand-built pair of trajectories differing only in domain 0's final loss
  DomainSet domains({"a", "b"});
  auto mk = [&](const std::string& label, double final0) {
    Trajectory t;
    t.label = label;
    t.initial_losses = {2.0, 2.0};
    t.points.push_back({1, uniform(2), LossVector(1, {final0, 1.5})});
    return t;
  };
  std::vector<Trajectory> trajs{mk("worse", 1.9), mk("better", 1.2)};
  auto report = compare_report(trajs);
  CHECK(report.rows[0].final_mean_loss > report.rows[1].final_mean_loss);
  CHECK(report.rows[0].per_domain_delta[0] == Catch::Approx(-0.1));
  CHECK(report.rows[1].per_domain_delta[0] == Catch::Approx(-0.8));
  CHECK(report.rows[0].per_domain_delta[1] == report.rows[1].per_domain_delta[1]);
}

TEST_CASE("constant-loss trajectory reports zero deltas") {
  // a world pinned to its floor with no forgetting never moves
  SimWorld w;
  w.losses = {1.0 + 1e-12, 1.0 + 1e-12};
  w.floor = {1.0, 1.0};
  w.ceiling = {2.0, 2.0};
  w.learn_rate = {0.5, 0.5};
  w.forget_rate = {0.0, 0.0};
  w.affinity = {{1.0, 0.0}, {0.0, 1.0}};
  DomainSet domains({"a", "b"});
  auto traj = run_strategy(w, parse_strategy("uniform", domains), simulated_reference(w), 3, domains);
  auto report = compare_report(std::vector<Trajectory>{traj});
  for (double d : report.rows[0].per_domain_delta) CHECK(std::abs(d) <= 1e-9);
}

TEST_CASE("strategy parsing") {
  auto domains = default_domains();
  CHECK(parse_strategy("uniform", domains).kind == StrategyKind::uniform);
  auto s = parse_strategy("expansion_uncapped:code", domains);
  CHECK(s.kind == StrategyKind::expansion_uncapped);
  CHECK(s.target == domains.index_of("code"));
  CHECK(strategy_label(s, domains) == "expansion_uncapped:code");
  CHECK_THROWS(parse_strategy("bogus", domains));
  CHECK_THROWS(parse_strategy("single", domains));       // needs a target
  CHECK_THROWS(parse_strategy("single:warp", domains));  // unknown domain
}

TEST_CASE("world validation catches malformed inputs") {
  auto w = tiny_world(2.0, 2.0);
  CHECK_NOTHROW(w.validate());
  auto bad = w;
  bad.affinity[0][0] = 0.5;
  CHECK_THROWS(bad.validate());
  bad = w;
  bad.losses[1] = 0.5;  // below the floor
  CHECK_THROWS(bad.validate());
  bad = w;
  bad.learn_rate[0] = 1.5;
  CHECK_THROWS(bad.validate());
}
