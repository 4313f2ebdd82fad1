#include <catch_amalgamated.hpp>

#include "versatune/metrics.hpp"
#include "versatune/rng.hpp"

using namespace versatune;

TEST_CASE("learnable potential: gap over current loss, clamped at zero") {
  CHECK(learnable_potential(2.0, 1.0) == Catch::Approx(0.5));
  CHECK(learnable_potential(1.0, 1.0) == 0.0);
  CHECK(learnable_potential(0.8, 1.0) == 0.0);
  CHECK_THROWS_MATCHES(learnable_potential(0.0, 1.0), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == errc::non_positive_loss;
                       }));
  CHECK_THROWS(learnable_potential(1.0, -2.0));
}

TEST_CASE("forgetting degree: relative rise over previous loss, clamped") {
  CHECK(forgetting_degree(1.2, 1.0) == Catch::Approx(0.2));
  CHECK(forgetting_degree(1.0, 1.0) == 0.0);
  CHECK(forgetting_degree(0.9, 1.0) == 0.0);
  CHECK_THROWS(forgetting_degree(1.0, 0.0));
}

TEST_CASE("potential vector applies componentwise") {
  ReferenceLossTable ref({1.0, 1.0});
  auto zero = potential_vector(LossVector(1, {1.0, 1.0}), ref);
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 0.0);
  auto v = potential_vector(LossVector(1, {2.0, 4.0}), ref);
  CHECK(v[0] == Catch::Approx(0.5));
  CHECK(v[1] == Catch::Approx(0.75));
  CHECK_THROWS_MATCHES(potential_vector(LossVector(1, {2.0, 4.0, 1.0}), ref), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == errc::dimension_mismatch;
                       }));
}

TEST_CASE("forgetting vector wants consecutive steps") {
  LossVector prev(3, {1.0, 1.0});
  auto same = forgetting_vector(LossVector(4, {1.0, 1.0}), prev);
  CHECK(same[0] == 0.0);
  auto v = forgetting_vector(LossVector(4, {1.1, 0.9}), prev);
  CHECK(v[0] == Catch::Approx(0.1));
  CHECK(v[1] == 0.0);
  CHECK_THROWS_MATCHES(forgetting_vector(LossVector(5, {1.0, 1.0}), prev), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == errc::non_consecutive_steps;
                       }));
}

TEST_CASE("mastery ceiling is the per-domain epoch minimum") {
  auto table = mastery_ceiling(std::vector<std::vector<double>>{{2.0, 1.4, 1.6}, {1.7}});
  CHECK(table[0] == Catch::Approx(1.4));
  CHECK(table[1] == Catch::Approx(1.7));
  CHECK_THROWS_MATCHES(
      mastery_ceiling(std::vector<std::vector<double>>{{2.0, 0.0}}), Error,
      Catch::Matchers::Predicate<Error>(
          [](const Error& e) { return e.code() == errc::non_positive_loss; }));
  CHECK_THROWS_MATCHES(mastery_ceiling(std::vector<std::vector<double>>{{1.0}, {}}), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == errc::empty_epochs; }));
}

TEST_CASE("signals are bounded and monotone") {
  CounterRng rng(derive_key(11, 1));
  double prev_gamma = -1.0;
  for (int i = 0; i < 200; ++i) {
    double lt = 0.01 + rng.next_double() * 5.0;
    double lr = 0.01 + rng.next_double() * 5.0;
    double g = learnable_potential(lt, lr);
    CHECK(g >= 0.0);
    CHECK(g < 1.0);
    // monotone nondecreasing in loss_theta at fixed loss_ref
    CHECK(learnable_potential(lt + 0.5, lr) >= g);
    // monotone nonincreasing in loss_ref at fixed loss_theta
    CHECK(learnable_potential(lt, lr + 0.5) <= g);
    prev_gamma = g;
  }
  (void)prev_gamma;
}

TEST_CASE("signals are invariant under joint rescaling") {
  CounterRng rng(derive_key(11, 2));
  for (int i = 0; i < 200; ++i) {
    double lt = 0.01 + rng.next_double() * 5.0;
    double lr = 0.01 + rng.next_double() * 5.0;
    double c = 0.1 + rng.next_double() * 20.0;
    CHECK(learnable_potential(c * lt, c * lr) == Catch::Approx(learnable_potential(lt, lr)).margin(1e-12));
    CHECK(forgetting_degree(c * lt, c * lr) == Catch::Approx(forgetting_degree(lt, lr)).margin(1e-12));
  }
}

TEST_CASE("vector ops match an element-by-element loop") {
  CounterRng rng(derive_key(11, 3));
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t k = 2 + rng.bounded(8);
    std::vector<double> lt(k), lr(k), lp(k);
    for (std::size_t j = 0; j < k; ++j) {
      lt[j] = 0.05 + rng.next_double() * 4.0;
      lr[j] = 0.05 + rng.next_double() * 4.0;
      lp[j] = 0.05 + rng.next_double() * 4.0;
    }
    LossVector now(2, lt), prev(1, lp);
    ReferenceLossTable ref(lr);
    auto gv = potential_vector(now, ref);
    auto fv = forgetting_vector(now, prev);
    for (std::size_t j = 0; j < k; ++j) {
      double g = std::max((lt[j] - lr[j]) / lt[j], 0.0);
      double f = std::max((lt[j] - lp[j]) / lp[j], 0.0);
      CHECK(std::abs(gv[j] - g) <= 1e-15);
      CHECK(std::abs(fv[j] - f) <= 1e-15);
    }
  }
}
