#include "doctest.h"

#include <cmath>
#include <numeric>
#include <set>

#include "clusterdyn/error.hpp"
#include "clusterdyn/estimators.hpp"
#include "clusterdyn/gformula.hpp"
#include "clusterdyn/simulator.hpp"

using namespace clusterdyn;

namespace {

DiscreteModel model2() { return make_binary_model({0.4, 0.6}, {{0.2, 0.5}, {0.7, 0.6}}); }

bool same(const ClusterData& a, const ClusterData& b) {
  return a.l == b.l && a.a == b.a && a.y == b.y && a.block == b.block;
}

SubCluster blocks() {
  SubCluster s;
  s.max_size = 3;
  s.size_law = {0.2, 0.3, 0.5};
  s.kappa_law = {{0.5, 0.5}, {0.2, 0.5, 0.3}, {0.1, 0.3, 0.4, 0.2}};
  s.rank = RankFunction{{1, 2}};
  return s;
}

}  // namespace

TEST_CASE("simulate_cluster contracts") {
  const auto m = model2();
  const AssignmentMechanism bern = BernoulliAssignment{{0.0, 0.0}};
  CHECK(same(simulate_cluster(m, bern, 50, 3), simulate_cluster(m, bern, 50, 3)));
  for (int a : simulate_cluster(m, bern, 50, 3).a) CHECK(a == 0);

  const AssignmentMechanism reg = RegimeBased{RegimeSpec::rank_preserving(RankFunction{{0, 1}}, ExactCount{3})};
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto d = simulate_cluster(m, reg, 10, s);
    CHECK(std::accumulate(d.a.begin(), d.a.end(), 0) == 3);
  }
  const auto sub = simulate_cluster(m, blocks(), 40, 9);
  CHECK(sub.block.size() == 40);
  CHECK(sub.block.front() == 0);
  for (std::size_t i = 1; i < sub.block.size(); ++i) CHECK((sub.block[i] == sub.block[i - 1] || sub.block[i] == sub.block[i - 1] + 1));
  CHECK_THROWS_AS(simulate_cluster(m, BernoulliAssignment{{1.5, 0.0}}, 5, 1), Error);
  SubCluster bad = blocks();
  bad.kappa_law[1] = {0.5, 0.5};
  CHECK_THROWS_AS(validate_mechanism(bad, 2), Error);
}

TEST_CASE("counterfactual Monte Carlo agrees with the g-formula") {
  const auto m = model2();
  const auto spec = RegimeSpec::rank_preserving(RankFunction{{0, 1}}, ExactCount{2});
  const int n = 5;
  const int reps = 100000;
  double s = 0.0, s2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto d = simulate_counterfactual(m, spec, n, child_seed(77, static_cast<std::uint64_t>(r)));
    const double mean = std::accumulate(d.y.begin(), d.y.end(), 0.0) / n;
    s += mean;
    s2 += mean * mean;
  }
  const double mc = s / reps;
  const double se = std::sqrt((s2 / reps - mc * mc) / reps);
  const double truth = compositional_gformula_expectation(m, spec, n, Functional::mean_outcome()).value();
  CHECK(std::abs(mc - truth) <= 3.0 * se);

  // kappa = 0: outcome marginal is the never-treat mixture
  const auto never = spec.with_constraint(ExactCount{0});
  int ones = 0;
  const int total = 20000;
  for (int r = 0; r < total / 10; ++r)
    for (int y : simulate_counterfactual(m, never, 10, child_seed(5, static_cast<std::uint64_t>(r))).y) ones += y;
  const double p = 0.4 * 0.2 + 0.6 * 0.5;
  CHECK(std::abs(ones / static_cast<double>(total) - p) <= 3.5 * std::sqrt(p * (1 - p) / total));
}

TEST_CASE("exact oracle") {
  const auto m = model2();
  auto spec = RegimeSpec::rank_preserving(RankFunction{{0, 1}}, ExactCount{1});
  CHECK(exact_oracle(m, spec, 1, Functional::mean_outcome()).front() == doctest::Approx(0.4 * 0.7 + 0.6 * 0.6));
  // n = 2, constant rank: each of the two individuals treated with probability 1/2
  const auto flat = RegimeSpec::rank_preserving(RankFunction{{0, 0}}, ExactCount{1});
  const double per = 0.4 * 0.5 * (0.2 + 0.7) + 0.6 * 0.5 * (0.5 + 0.6);
  CHECK(exact_oracle(m, flat, 2, Functional::mean_outcome()).front() == doctest::Approx(per).epsilon(1e-14));
  try {
    exact_oracle(m, spec, 6, Functional::mean_outcome());
    FAIL("expected LimitExceeded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::LimitExceeded);
  }
  const auto dist = exact_oracle(m, spec.with_constraint(ExactCount{2}), 3, Functional::treated_count());
  CHECK(dist[2] == doctest::Approx(1.0));
}

TEST_CASE("replicate") {
  const auto m = model2();
  const AssignmentMechanism mech = blocks();
  const auto serial = replicate(m, mech, 30, 6, 11, 1);
  const auto parallel = replicate(m, mech, 30, 6, 11, 4);
  REQUIRE(serial.size() == 6);
  for (std::size_t r = 0; r < serial.size(); ++r) {
    CHECK(same(serial[r], parallel[r]));
    CHECK(same(serial[r], simulate_cluster(m, mech, 30, child_seed(11, r))));
  }
  CHECK(replicate(m, mech, 30, 0, 11, 4).empty());
  std::set<std::vector<int>> distinct;
  for (const auto& d : serial) distinct.insert(d.y);
  CHECK(distinct.size() == serial.size());
}

TEST_CASE("sub-cluster propensities concentrate as n grows") {
  const auto m = model2();
  const AssignmentMechanism mech = blocks();
  auto variance = [&](int n) {
    double s = 0.0, s2 = 0.0;
    const int reps = 200;
    for (const auto& d : replicate(m, mech, n, reps, 1234, 4)) {
      const double q = fit_empirical(d, 2, {0, 1}).propensity(1, 1);
      s += q;
      s2 += q * q;
    }
    return s2 / reps - (s / reps) * (s / reps);
  };
  CHECK(variance(5000) < 0.25 * variance(500));
}

TEST_CASE("mixed flip keeps per-cluster propensities away from one half") {
  const auto m = make_binary_model({0.5, 0.5}, {{0.3, 0.4}, {0.6, 0.5}});
  const AssignmentMechanism mech = MixedFlip{RankFunction{{0, 1}}, RankFunction{{1, 0}}, Proportion{0.5}};
  int far = 0;
  const auto reps = replicate(m, mech, 1000, 50, 99, 4);
  for (const auto& d : reps)
    if (std::abs(fit_empirical(d, 2, {0, 1}).propensity(1, 1) - 0.5) > 0.4) ++far;
  CHECK(far >= 47);
}
