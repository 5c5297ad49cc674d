#include "doctest.h"

#include <chrono>
#include <cmath>
#include <numeric>

#include "clusterdyn/error.hpp"
#include "clusterdyn/gformula.hpp"
#include "clusterdyn/simulator.hpp"

using namespace clusterdyn;

namespace {

DiscreteModel model3() {
  return make_binary_model({0.25, 0.35, 0.4}, {{0.3, 0.5, 0.2}, {0.6, 0.55, 0.1}});
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_CASE("individual g-formula examples") {
  const auto flat = make_binary_model({0.2, 0.8}, {{0.37, 0.37}, {0.37, 0.37}});
  const auto spec = RegimeSpec::rank_preserving(RankFunction{{0, 1}}, ExactCount{1});
  CHECK(individual_gformula_expectation(flat, spec, 3) == doctest::Approx(0.37).epsilon(1e-14));
  const auto m = model3();
  const auto all = RegimeSpec::rank_preserving(RankFunction{{0, 1, 2}}, ExactCount{4});
  CHECK(individual_gformula_expectation(m, all, 4) ==
        doctest::Approx(0.25 * 0.6 + 0.35 * 0.55 + 0.4 * 0.1).epsilon(1e-14));
}

TEST_CASE("compositional, individual and oracle agree") {
  const auto m = model3();
  for (const auto& rank : {RankFunction{{0, 1, 2}}, RankFunction{{1, 1, 0}}, RankFunction{{-1, 2, 1}}})
    for (int n = 1; n <= 3; ++n)
      for (int kappa = 0; kappa <= n; ++kappa)
        for (bool gate : {false, true}) {
          const auto spec = RegimeSpec::rank_preserving(rank, ExactCount{kappa}, gate);
          const double oracle = exact_oracle(m, spec, n, Functional::mean_outcome()).front();
          CHECK(compositional_gformula_expectation(m, spec, n, Functional::mean_outcome()).value() ==
                doctest::Approx(oracle).epsilon(1e-10));
          CHECK(individual_gformula_expectation(m, spec, n) == doctest::Approx(oracle).epsilon(1e-10));
          const auto dist = compositional_gformula_expectation(m, spec, n, Functional::outcome_count(1)).values;
          const auto odist = exact_oracle(m, spec, n, Functional::outcome_count(1));
          for (std::size_t x = 0; x < dist.size(); ++x) CHECK(std::abs(dist[x] - odist[x]) <= 1e-10);
          CHECK(sum(dist) == doctest::Approx(1.0).epsilon(1e-9));
        }
}

TEST_CASE("named functionals match the generic path") {
  const auto m = model3();
  const auto spec = RegimeSpec::mixture({RankFunction{{0, 1, 2}}, RankFunction{{2, 2, 0}}}, {0.3, 0.7}, ExactCount{2});
  const int n = 3;
  const auto treated = compositional_gformula_expectation(m, spec, n, Functional::treated_count()).values;
  CHECK(sum(treated) == doctest::Approx(1.0));
  CHECK(treated[2] == doctest::Approx(1.0));
  const auto at_least = compositional_gformula_expectation(m, spec, n, Functional::at_least(1, 2)).value();
  const auto generic = compositional_gformula_expectation(m, spec, n, Functional::from([&](const Composition& o) {
                                                            int ones = 0;
                                                            for (int a = 0; a < 2; ++a)
                                                              for (int l = 0; l < 3; ++l) ones += o[static_cast<std::size_t>(outcome_cell(1, a, l, 3, 2))];
                                                            return ones >= 2 ? 1.0 : 0.0;
                                                          }))
                           .value();
  CHECK(at_least == doctest::Approx(generic).epsilon(1e-12));
  CHECK(at_least == doctest::Approx(exact_oracle(m, spec, n, Functional::at_least(1, 2)).front()).epsilon(1e-12));
}

TEST_CASE("reduced compositional evaluation") {
  SUBCASE("identity coarsening equals unreduced") {
    const auto m = model3();
    const auto spec = RegimeSpec::rank_preserving(RankFunction{{2, 0, 1}}, ExactCount{2}, false, Coarsening::identity(3));
    const auto red = reduced_compositional_expectation(m, Coarsening::identity(3), spec, 4, Functional::outcome_count(1));
    const auto full = compositional_gformula_expectation(m, spec, 4, Functional::outcome_count(1));
    for (std::size_t x = 0; x < red.values.size(); ++x) CHECK(red.values[x] == doctest::Approx(full.values[x]).epsilon(1e-10));
  }
  SUBCASE("K=4 to |V|=2 equals unreduced") {
    const auto m = make_binary_model({0.1, 0.2, 0.3, 0.4}, {{0.1, 0.2, 0.3, 0.4}, {0.5, 0.4, 0.9, 0.2}});
    const Coarsening c({0, 1, 1, 0});
    for (int kappa = 0; kappa <= 4; ++kappa)
      for (const auto& rank : {RankFunction{{1, 0}}, RankFunction{{1, 1}}}) {
        const auto spec = RegimeSpec::rank_preserving(rank, ExactCount{kappa}, false, c);
        CHECK(reduced_compositional_expectation(m, c, spec, 4, Functional::mean_outcome()).value() ==
              doctest::Approx(compositional_gformula_expectation(m, spec, 4, Functional::mean_outcome()).value()).epsilon(1e-10));
      }
  }
  SUBCASE("53130 positive-support terms at n=20, |V|=3") {
    const auto m = make_binary_model({0.1, 0.15, 0.2, 0.15, 0.25, 0.15},
                                     {{0.2, 0.3, 0.4, 0.5, 0.35, 0.6}, {0.5, 0.45, 0.7, 0.55, 0.6, 0.8}});
    const Coarsening c({0, 0, 1, 1, 2, 2});
    const auto spec = RegimeSpec::rank_preserving(RankFunction{{3, 1, 2}}, ExactCount{6}, false, c);
    const auto start = std::chrono::steady_clock::now();
    const auto rep = reduced_compositional_expectation(m, c, spec, 20, Functional::mean_outcome());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(rep.support_terms == 53130);
    CHECK(secs < 5.0);
    CHECK(rep.value() == doctest::Approx(individual_gformula_expectation(m, spec, 20)).epsilon(1e-10));
  }
  SUBCASE("treatment functionals are rejected") {
    const auto m = model3();
    const auto spec = RegimeSpec::rank_preserving(RankFunction{{0, 1, 2}}, ExactCount{1}, false, Coarsening::identity(3));
    CHECK_THROWS_AS(reduced_compositional_expectation(m, Coarsening::identity(3), spec, 3, Functional::treated_count()), Error);
  }
}

TEST_CASE("budget") {
  const auto m = model3();
  const auto spec = RegimeSpec::rank_preserving(RankFunction{{0, 1, 2}}, ExactCount{5});
  try {
    compositional_gformula_expectation(m, spec, 30, Functional::mean_outcome(), EvalOptions{100, 1});
    FAIL("expected BudgetExceeded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BudgetExceeded);
    CHECK(std::string(e.what()).find("324632") != std::string::npos);  // C(35, 5)
  }
}

TEST_CASE("determinism across thread counts") {
  const auto m = model3();
  const auto spec = RegimeSpec::rank_preserving(RankFunction{{0, 1, 1}}, ExactCount{7});
  const auto a = compositional_gformula_expectation(m, spec, 18, Functional::outcome_count(1), EvalOptions{5'000'000, 1});
  const auto b = compositional_gformula_expectation(m, spec, 18, Functional::outcome_count(1), EvalOptions{5'000'000, 8});
  CHECK(a.values == b.values);
}

TEST_CASE("large cluster value and curves") {
  const auto m = make_binary_model({0.6, 0.4}, {{0.3, 0.5}, {0.5, 0.6}});
  const double base = 0.6 * 0.3 + 0.4 * 0.5;
  const auto spec = RegimeSpec::rank_preserving(RankFunction{{0, 1}}, Proportion{0.0});
  CHECK(large_cluster_value(m, spec) == doctest::Approx(base));
  CHECK(large_cluster_value(m, spec.with_constraint(Proportion{0.5})) ==
        doctest::Approx(base + 0.4 * 0.1 + 0.1 * 0.2).epsilon(1e-14));

  const auto harm = make_binary_model({0.6, 0.4}, {{0.3, 0.5}, {0.5, 0.4}});  // delta = (0.2, -0.1)
  const auto gated = optimal_regime(harm, std::nullopt, Proportion{1.0}, true);
  CHECK(large_cluster_value(harm, gated) == doctest::Approx(base + 0.6 * 0.2));

  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);
  const auto curve = value_curve(harm, gated, grid);
  for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].value >= curve[i - 1].value - 1e-15);
  for (const auto& p : curve)
    if (p.kappa_star >= 0.6) CHECK(p.value == doctest::Approx(curve.back().value));
  // ungated candidate can decrease past P(delta > 0)
  const auto ungated = value_curve(harm, optimal_regime(harm, std::nullopt, Proportion{0.0}, false), grid);
  CHECK(ungated.back().value < ungated[12].value);
  CHECK(ungated.front().value == doctest::Approx(base));
  CHECK(ungated.back().value == doctest::Approx(0.6 * 0.5 + 0.4 * 0.4));
}

TEST_CASE("finite value approaches the large-cluster value") {
  const auto m = make_binary_model({0.6, 0.4}, {{0.3, 0.5}, {0.5, 0.6}});
  const auto spec = RegimeSpec::rank_preserving(RankFunction{{0, 1}}, Proportion{0.5});
  const double limit = large_cluster_value(m, spec);
  double prev = 1.0;
  for (int n : {10, 100, 1000}) {
    const double gap = std::abs(individual_gformula_expectation(m, spec, n) - limit);
    CHECK(gap <= prev);
    prev = gap;
  }
  CHECK(prev <= 0.02);
}
