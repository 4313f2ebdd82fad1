#include <catch_amalgamated.hpp>

#include "versatune/core.hpp"
#include "versatune/rng.hpp"

using namespace versatune;

TEST_CASE("normalize divides by the sum") {
  auto d = normalize(std::vector<double>{2.0, 1.0, 1.0});
  CHECK(d[0] == Catch::Approx(0.5));
  CHECK(d[1] == Catch::Approx(0.25));
  CHECK(d[2] == Catch::Approx(0.25));
}

TEST_CASE("normalize keeps an already-normalized vector") {
  std::vector<double> w(6, 1.0 / 6.0);
  auto d = normalize(w);
  for (std::size_t j = 0; j < 6; ++j) CHECK(d[j] == Catch::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("normalize rejects bad input") {
  CHECK_THROWS_MATCHES(normalize(std::vector<double>{0.0, 0.0, 0.0}), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == errc::all_zero; }));
  CHECK_THROWS_MATCHES(normalize(std::vector<double>{1.0, -0.1}), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == errc::negative_weight; }));
  CHECK_THROWS_MATCHES(normalize(std::vector<double>{1.0, std::nan("")}), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == errc::non_finite; }));
  CHECK_THROWS(normalize(std::vector<double>{}));
}

TEST_CASE("uniform splits mass equally") {
  auto d6 = uniform(6);
  for (std::size_t j = 0; j < 6; ++j) CHECK(d6[j] == Catch::Approx(1.0 / 6.0));
  auto d2 = uniform(2);
  CHECK(d2[0] == 0.5);
  CHECK(d2[1] == 0.5);
  CHECK_THROWS_MATCHES(uniform(1), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == errc::invalid_k;
                       }));
}

TEST_CASE("inverse reweights by reciprocals") {
  auto d = inverse(Distribution({0.5, 0.25, 0.25}));
  CHECK(d[0] == Catch::Approx(0.2));
  CHECK(d[1] == Catch::Approx(0.4));
  CHECK(d[2] == Catch::Approx(0.4));

  auto u = inverse(uniform(6));
  for (std::size_t j = 0; j < 6; ++j) CHECK(u[j] == Catch::Approx(1.0 / 6.0));

  auto floored = inverse(Distribution({1.0, 0.0}), 1e-3);
  CHECK(floored[0] == Catch::Approx(1.0 / 1001.0));
  CHECK(floored[1] == Catch::Approx(1000.0 / 1001.0));
}

TEST_CASE("l1_distance basics") {
  Distribution d({0.6, 0.4});
  CHECK(l1_distance(d, d) == 0.0);
  CHECK(l1_distance(Distribution({1.0, 0.0}), Distribution({0.0, 1.0})) == Catch::Approx(2.0));
  CHECK(l1_distance(Distribution({0.6, 0.4}), Distribution({0.5, 0.5})) ==
        Catch::Approx(0.2).margin(1e-15));
  CHECK_THROWS(l1_distance(d, uniform(3)));
}

TEST_CASE("distribution invariants are enforced") {
  CHECK_THROWS(Distribution({0.5, 0.6}));       // sum too large
  CHECK_THROWS(Distribution({1.2, -0.2}));      // negative
  CHECK_NOTHROW(Distribution({0.5, 0.5 + 5e-10}));  // inside 1e-9 tolerance
}

TEST_CASE("loss vector requires positive losses") {
  CHECK_THROWS_MATCHES(LossVector(1, {1.0, 0.0}), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == errc::non_positive_loss;
                       }));
  CHECK_THROWS(LossVector(-1, {1.0}));
  LossVector ok(3, {2.2, 0.4});
  CHECK(ok.step() == 3);
}

TEST_CASE("domain set validates names") {
  CHECK_THROWS(DomainSet({"solo"}));
  CHECK_THROWS(DomainSet({"a", "a"}));
  CHECK_THROWS(DomainSet({"a", ""}));
  DomainSet d({"law", "code"});
  CHECK(d.index_of("code") == 1);
  CHECK(d.contains("law"));
  CHECK_FALSE(d.contains("Law"));  // case-sensitive
  CHECK_THROWS(d.index_of("nope"));
}

// Property-style checks over seeded random vectors.

static std::vector<double> random_raw(CounterRng& rng, std::size_t k) {
  std::vector<double> v(k);
  for (double& x : v) x = rng.next_double() * 10.0;
  return v;
}

TEST_CASE("normalize is idempotent and scale-invariant") {
  CounterRng rng(derive_key(7, 1));
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t k = 2 + rng.bounded(8);
    auto raw = random_raw(rng, k);
    raw[rng.bounded(k)] += 0.1;  // at least one strictly positive entry
    auto once = normalize(raw);
    auto twice = normalize(once.weights());
    double c = 0.25 + rng.next_double() * 10.0;
    auto scaled_raw = raw;
    for (double& x : scaled_raw) x *= c;
    auto scaled = normalize(scaled_raw);
    for (std::size_t j = 0; j < k; ++j) {
      CHECK(std::abs(once[j] - twice[j]) <= 1e-12);
      CHECK(std::abs(once[j] - scaled[j]) <= 1e-12);
    }
  }
}

TEST_CASE("inverse is an involution away from the floor") {
  CounterRng rng(derive_key(7, 2));
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t k = 2 + rng.bounded(6);
    std::vector<double> raw(k);
    for (double& x : raw) x = 0.05 + rng.next_double();  // all entries well above floor
    auto d = normalize(raw);
    auto back = inverse(inverse(d));
    CHECK(l1_distance(d, back) <= 1e-9);
  }
}

TEST_CASE("l1_distance satisfies the triangle inequality") {
  CounterRng rng(derive_key(7, 3));
  for (int trial = 0; trial < 500; ++trial) {
    std::size_t k = 2 + rng.bounded(6);
    auto mk = [&]() {
      auto raw = random_raw(rng, k);
      raw[0] += 0.1;
      return normalize(raw);
    };
    auto a = mk(), b = mk(), c = mk();
    CHECK(l1_distance(a, c) <= l1_distance(a, b) + l1_distance(b, c) + 1e-12);
    CHECK(l1_distance(a, b) == Catch::Approx(l1_distance(b, a)));
  }
}
