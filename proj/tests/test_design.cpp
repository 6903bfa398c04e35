#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "svytree/design.hpp"
#include "svytree/error.hpp"

using namespace svytree;
using testutil::code_of;

namespace {

// Stratum A holds rows 0-99, B rows 100-149.
Frame two_strata() {
  std::vector<double> g(150), y(150);
  for (std::size_t j = 0; j < 150; ++j) {
    g[j] = j < 100 ? 0.0 : 1.0;
    y[j] = static_cast<double>(j);
  }
  return Frame({VariableSpec::categorical("g", {"A", "B"}), VariableSpec::numeric("y")},
               {g, y});
}

Frame sized(std::vector<double> sizes) {
  std::vector<double> g(sizes.size(), 0.0);
  return Frame({VariableSpec::categorical("g", {"x"}), VariableSpec::numeric("s")},
               {g, std::move(sizes)});
}


}  // namespace

TEST_CASE("stratified inclusion probabilities") {
  const Frame f = two_strata();
  const auto pi = compute_inclusion_probs(StratifiedDesign{"g", {{"A", 10}, {"B", 25}}}, f);
  for (std::size_t j = 0; j < 150; ++j) CHECK(pi[j] == (j < 100 ? 0.1 : 0.5));
  CHECK(code_of([&] {
          compute_inclusion_probs(StratifiedDesign{"g", {{"A", 101}}}, f);
        }) == Errc::OversampledStratum);
  CHECK(code_of([&] {
          compute_inclusion_probs(StratifiedDesign{"nope", {{"A", 1}}}, f);
        }) == Errc::UnknownVariable);
}

TEST_CASE("census design") {
  const Frame f = two_strata();
  const auto pi = compute_inclusion_probs(CensusDesign{}, f);
  CHECK(std::all_of(pi.begin(), pi.end(), [](double p) { return p == 1.0; }));
  const SampleDraw s = draw_sample(CensusDesign{}, f, 9);
  REQUIRE(s.size() == f.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s.members[i] == i);
    CHECK(s.weights[i] == 1.0);
  }
}

TEST_CASE("poisson pps with capping") {
  const std::vector<double> sizes{1, 1, 2, 4};
  const auto pi = pps_probabilities(sizes, 2.0);
  // 4 caps at 1 (2*4/8 = 1), leaving n = 1 over sizes {1, 1, 2}.
  CHECK(pi[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(pi[1] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(pi[2] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(pi[3] == 1.0);
  CHECK(std::accumulate(pi.begin(), pi.end(), 0.0) == doctest::Approx(2.0));

  const Frame f = sized(sizes);
  const Sampler sampler(PoissonPpsDesign{"s", 2.0}, f);
  const std::size_t R = 100000;
  std::vector<double> hits(4, 0.0);
  for (std::uint32_t r = 0; r < R; ++r) {
    const SampleDraw s = sampler.draw(replicate_seed(77, 0, r));
    for (std::size_t i = 0; i < s.size(); ++i) {
      hits[s.members[i]] += 1.0;
      CHECK(s.weights[i] == 1.0 / s.pi[i]);
    }
  }
  for (std::size_t j = 0; j < 4; ++j) {
    const double p = pi[j];
    const double freq = hits[j] / static_cast<double>(R);
    const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(R));
    if (p == 1.0) {
      CHECK(freq == 1.0);
    } else {
      CHECK(std::fabs(freq - p) < 3.0 * se);
    }
  }

  const auto d = diagnostics_from_probs(pi);
  CHECK(d.weight_ratio == doctest::Approx(4.0));
  CHECK(code_of([&] { compute_inclusion_probs(PoissonPpsDesign{"s", 2.0}, sized({1, 0, 2})); }) ==
        Errc::NonpositiveSize);
}

TEST_CASE("stratified draws have fixed size") {
  const Frame f = two_strata();
  const Sampler sampler(StratifiedDesign{"g", {{"A", 10}}}, f);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SampleDraw s = sampler.draw(seed);
    CHECK(s.size() == 10);
    CHECK(std::is_sorted(s.members.begin(), s.members.end()));
    CHECK(std::adjacent_find(s.members.begin(), s.members.end()) == s.members.end());
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(s.members[i] < 100);
      CHECK(s.weights[i] == 10.0);
    }
  }
}

TEST_CASE("srswor inclusion frequencies") {
  const Frame f = two_strata();
  std::vector<double> hits(150, 0.0);
  const Sampler sampler(SrsworDesign{20}, f);
  const std::size_t R = 10000;
  for (std::uint32_t r = 0; r < R; ++r) {
    const SampleDraw s = sampler.draw(replicate_seed(5, 20, r));
    REQUIRE(s.size() == 20);
    for (std::size_t j : s.members) hits[j] += 1.0;
  }
  const double p = 20.0 / 150.0;
  const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(R));
  for (std::size_t j : {0, 1, 74, 149}) {
    CHECK(std::fabs(hits[j] / static_cast<double>(R) - p) < 3.0 * se);
  }
  CHECK(code_of([&] { compute_inclusion_probs(SrsworDesign{151}, f); }) ==
        Errc::InfeasibleDesign);
}

TEST_CASE("draws depend only on the seed") {
  const Frame f = testutil::random_frame(1, 2000);
  const Sampler sampler(StratifiedDesign{"a", {{"a1", 5}, {"a2", 10}, {"a4", 30}}}, f);
  const SampleDraw x = sampler.draw(123);
  const SampleDraw y = draw_sample(sampler.design(), f, 123);
  CHECK(x.members == y.members);
  CHECK(x.weights == y.weights);
  CHECK(sampler.draw(124).members != x.members);
}

TEST_CASE("design diagnostics") {
  const std::vector<double> pi(1000, 0.1);
  const auto d = diagnostics_from_probs(pi);
  CHECK(d.n_min_pi == doctest::Approx(100.0));
  CHECK(d.max_weight == doctest::Approx(10.0));
  CHECK(d.sampling_fraction == doctest::Approx(0.1));
  CHECK(d.expected_n == doctest::Approx(100.0));

  std::vector<double> with_zero(pi);
  with_zero[3] = 0.0;
  CHECK(code_of([&] { diagnostics_from_probs(with_zero); }) ==
        Errc::ZeroInclusionProbability);
  CHECK(code_of([&] {
          design_diagnostics(StratifiedDesign{"g", {{"A", 10}}}, two_strata());
        }) == Errc::ZeroInclusionProbability);
}

TEST_CASE("rate allocation") {
  const Frame f = testutil::random_frame(2, 5000);
  const std::map<std::string, double> rates{{"a1", 1}, {"a2", 2}, {"a3", 4}, {"a4", 8}, {"a5", 16}};
  for (std::size_t n : {10, 333, 1000, 2500}) {
    const StratifiedDesign d = allocate_by_rates(f, "a", rates, n);
    std::size_t total = 0;
    for (const auto& [label, k] : d.counts) total += k;
    CHECK(total == n);
    const auto pi = compute_inclusion_probs(d, f);
    CHECK(std::accumulate(pi.begin(), pi.end(), 0.0) == doctest::Approx(static_cast<double>(n)));
  }
  // Rates push the top stratum past its size; it is taken whole.
  const auto counts = level_counts(f, f.column_index("a"));
  const StratifiedDesign big = allocate_by_rates(f, "a", rates, 3000);
  CHECK(big.counts.at("a5") == counts[4]);
  CHECK(code_of([&] { allocate_by_rates(f, "a", rates, 5001); }) == Errc::InfeasibleDesign);
}
