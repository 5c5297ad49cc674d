#include "doctest.h"

#include <functional>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "clusterdyn/error.hpp"
#include "clusterdyn/estimators.hpp"
#include "clusterdyn/normal.hpp"

using namespace clusterdyn;

namespace {

// Rows for cell (l, a): `ones` outcomes equal to 1 out of `rows`.
struct Cell {
  int l, a, rows, ones;
};

ClusterData dataset(std::initializer_list<Cell> cells) {
  ClusterData d;
  for (const auto& c : cells)
    for (int i = 0; i < c.rows; ++i) {
      d.l.push_back(c.l);
      d.a.push_back(c.a);
      d.y.push_back(i < c.ones ? 1 : 0);
    }
  return d;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Config;
}

// Q_L = (1/2, 1/2), propensity 1/2, Q_Y(1|a,l) = quarters.
ClusterData exact_data() {
  return dataset({{0, 0, 4, 1}, {1, 0, 4, 2}, {0, 1, 4, 3}, {1, 1, 4, 4}});
}
DiscreteModel exact_model() { return make_binary_model({0.5, 0.5}, {{0.25, 0.5}, {0.75, 1.0}}); }

const std::vector<double> kBinary = {0.0, 1.0};

}  // namespace

TEST_CASE("normal quantiles") {
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
  CHECK(normal_quantile(0.84) == doctest::Approx(0.9944578832097535).epsilon(1e-14));
  CHECK(normal_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-12));
  for (double p = 0.001; p < 1.0; p += 0.0173) CHECK(std::abs(normal_cdf(normal_quantile(p)) - p) < 1e-14);
  CHECK(two_sided_z(0.05) == doctest::Approx(1.959963984540054).epsilon(1e-14));
  CHECK_THROWS_AS(normal_quantile(0.0), Error);
}

TEST_CASE("fit_empirical") {
  const auto emp = fit_empirical(dataset({{0, 1, 1, 1}, {0, 0, 1, 0}, {1, 1, 1, 1}}), 2, kBinary);
  CHECK(emp.q_l(0) == doctest::Approx(2.0 / 3.0));
  CHECK(emp.q_l(1) == doctest::Approx(1.0 / 3.0));
  CHECK(emp.propensity(1, 0) == doctest::Approx(0.5));
  CHECK(emp.q_y(1, 1, 0) == 1.0);
  CHECK_FALSE(emp.outcome_defined(0, 1));
  CHECK(emp.undefined_cells() == std::vector<std::pair<int, int>>{{0, 1}});
  CHECK(kind_of([&] { emp.q_y(0, 0, 1); }) == ErrorKind::PositivityViolated);
  const auto one = fit_empirical(dataset({{1, 0, 1, 1}}), 2, kBinary);
  CHECK(one.q_l(1) == 1.0);
  CHECK(one.propensity(0, 1) == 1.0);
  CHECK(one.q_y(1, 0, 1) == 1.0);
  CHECK(kind_of([] { fit_empirical(ClusterData{}, 2, kBinary); }) == ErrorKind::EmptyData);
}

TEST_CASE("plug-in estimates") {
  const auto data = exact_data();
  const auto emp = fit_empirical(data, 2, kBinary);
  const auto truth = exact_model();
  const auto spec = RegimeSpec::rank_preserving(RankFunction{{0, 1}}, ExactCount{1});
  Estimand finite{spec, false, 3, Functional::mean_outcome()};
  CHECK(plugin_estimate(emp, finite).point ==
        doctest::Approx(compositional_gformula_expectation(truth, spec, 3, Functional::mean_outcome()).value()).epsilon(1e-12));
  Estimand dist{spec, false, 3, Functional::outcome_count(1)};
  const auto pmf = plugin_estimate(emp, dist).values;
  const auto ref = compositional_gformula_expectation(truth, spec, 3, Functional::outcome_count(1)).values;
  for (std::size_t x = 0; x < pmf.size(); ++x) CHECK(pmf[x] == doctest::Approx(ref[x]).epsilon(1e-12));
  Estimand large{spec.with_constraint(Proportion{0.3}), false, std::nullopt, {}};
  CHECK(plugin_estimate(emp, large).point == doctest::Approx(large_cluster_value(truth, large.regime)).epsilon(1e-12));
  Estimand never{spec.with_constraint(ExactCount{0}), false, 4, {}};
  CHECK(plugin_estimate(emp, never).point == doctest::Approx(0.5 * 0.25 + 0.5 * 0.5).epsilon(1e-14));

  const auto holes = dataset({{0, 0, 4, 1}, {1, 0, 4, 2}, {0, 1, 4, 3}});
  const auto emp2 = fit_empirical(holes, 2, kBinary);
  Estimand all{spec.with_constraint(ExactCount{4}), false, 4, {}};
  CHECK(kind_of([&] { plugin_estimate(emp2, all); }) == ErrorKind::PositivityViolated);
  CHECK(kind_of([&] { ipw_estimate(holes, emp2, all); }) == ErrorKind::PositivityViolated);
  CHECK(plugin_estimate(emp2, never).point == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("IPW identity and observed-mechanism target") {
  const auto m = make_binary_model({0.3, 0.3, 0.4}, {{0.4, 0.5, 0.6}, {0.7, 0.6, 0.4}});
  const AssignmentMechanism mech = BernoulliAssignment{{0.3, 0.5, 0.7}};
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto d = simulate_cluster(m, mech, 200, s);
    const auto emp = fit_empirical(d, 3, kBinary);
    Estimand e{RegimeSpec::rank_preserving(RankFunction{{2, 0, 1}}, ExactCount{2}), false, 5, {}};
    CHECK(std::abs(ipw_estimate(d, emp, e).point - plugin_estimate(emp, e).point) <= 1e-12);
    InterventionDensity observed{{emp.propensity(1, 0), emp.propensity(1, 1), emp.propensity(1, 2)}};
    const double mean = std::accumulate(d.y.begin(), d.y.end(), 0.0) / d.size();
    CHECK(ipw_estimate(d, emp, observed) == doctest::Approx(mean).epsilon(1e-13));
  }
}

TEST_CASE("influence function") {
  SUBCASE("worked example") {
    const auto law = make_binary_model({1.0}, {{0.3}, {0.7}});
    const InfluenceFunction phi(law, {0.5}, InterventionDensity{{1.0}}, 0.2, 0.5);
    CHECK(phi.psi() == doctest::Approx(0.7));
    const auto t = phi(1, 1, 0);
    CHECK(t.phi1 == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(t.phi2 == doctest::Approx(-0.1).epsilon(1e-14));
    CHECK(t.phi0 == doctest::Approx(0.5).epsilon(1e-14));
    // a != g(l): indicator term vanishes
    CHECK(phi(0, 0, 0).phi1 == doctest::Approx(0.0).epsilon(1e-14));
  }
  SUBCASE("zero residual reduces to the regression term") {
    const auto law = make_model({1.0}, {{{0.5, 0.5}}, {{0.0, 1.0}}});
    const InfluenceFunction phi(law, {0.4}, InterventionDensity{{1.0}}, 0.0, 0.5);
    CHECK(phi(1, 1, 0).phi1 == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("mean zero under the law") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
      const int k = 1 + static_cast<int>(rng.below(4));
      std::vector<double> q(static_cast<std::size_t>(k)), prop(static_cast<std::size_t>(k)), g(static_cast<std::size_t>(k));
      double s = 0.0;
      for (auto& v : q) s += (v = rng.uniform() + 0.05);
      for (auto& v : q) v /= s;
      for (auto& v : prop) v = 0.05 + 0.9 * rng.uniform();
      for (auto& v : g) v = rng.uniform() < 0.3 ? std::round(rng.uniform()) : rng.uniform();
      std::vector<std::vector<double>> p1(2, std::vector<double>(static_cast<std::size_t>(k)));
      for (auto& row : p1)
        for (auto& v : row) v = rng.uniform();
      const auto law = make_binary_model(q, p1);
      const InfluenceFunction phi(law, prop, InterventionDensity{g}, rng.uniform(), 0.5);
      double mean = 0.0;
      for (int l = 0; l < k; ++l)
        for (int a = 0; a < 2; ++a)
          for (int y = 0; y < 2; ++y) {
            const double pa = a == 1 ? prop[static_cast<std::size_t>(l)] : 1.0 - prop[static_cast<std::size_t>(l)];
            mean += law.q_l(l) * pa * law.q_y(y, a, l) * phi(y, a, l).phi1;
          }
      CHECK(std::abs(mean) <= 1e-12);
    }
  }
  SUBCASE("positivity") {
    const auto law = make_binary_model({1.0}, {{0.3}, {0.7}});
    CHECK(kind_of([&] { InfluenceFunction(law, {0.0}, InterventionDensity{{0.5}}, 0.0, 0.5); }) ==
          ErrorKind::PositivityViolated);
  }
}

namespace {

// Psi at P_eps = (1 - eps) P + eps * point mass at (y0, a0, l0).
double perturbed_value(const DiscreteModel& law, const std::vector<double>& prop, int y0, int a0, int l0, double eps,
                       const std::function<RegimeSpec(const DiscreteModel&)>& regime) {
  const int k = law.levels();
  std::vector<double> q_l(static_cast<std::size_t>(k));
  std::vector<std::vector<std::vector<double>>> q_y(2, std::vector<std::vector<double>>(static_cast<std::size_t>(k)));
  for (int l = 0; l < k; ++l) {
    q_l[static_cast<std::size_t>(l)] = (1 - eps) * law.q_l(l) + (l == l0 ? eps : 0.0);
    for (int a = 0; a < 2; ++a) {
      const double pa = a == 1 ? prop[static_cast<std::size_t>(l)] : 1 - prop[static_cast<std::size_t>(l)];
      const double cell = (1 - eps) * law.q_l(l) * pa + (a == a0 && l == l0 ? eps : 0.0);
      auto& row = q_y[static_cast<std::size_t>(a)][static_cast<std::size_t>(l)];
      for (int y = 0; y < 2; ++y)
        row.push_back(((1 - eps) * law.q_l(l) * pa * law.q_y(y, a, l) + (a == a0 && l == l0 && y == y0 ? eps : 0.0)) / cell);
    }
  }
  const auto m = make_model(q_l, q_y);
  return large_cluster_value(m, regime(m));
}

void check_gateaux(const DiscreteModel& law, const std::vector<double>& prop, double kappa_star,
                   const std::function<RegimeSpec(const DiscreteModel&)>& regime) {
  const RegimeSpec spec = regime(law);
  const auto density = large_cluster_density(law, spec);
  const double eta = constraint_multiplier(law, spec, density);
  const InfluenceFunction phi(law, prop, density.density, eta, kappa_star);
  const double eps = 1e-6;
  for (int l = 0; l < law.levels(); ++l)
    for (int a = 0; a < 2; ++a)
      for (int y = 0; y < 2; ++y) {
        const double fd = (perturbed_value(law, prop, y, a, l, eps, regime) -
                           perturbed_value(law, prop, y, a, l, -eps, regime)) / (2 * eps);
        CHECK(phi(y, a, l).phi0 == doctest::Approx(fd).epsilon(1e-5));
      }
}

}  // namespace

TEST_CASE("EIF matches the numerical Gateaux derivative") {
  const auto law = make_binary_model({0.3, 0.3, 0.4}, {{0.4, 0.5, 0.6}, {0.7, 0.6, 0.4}});
  const std::vector<double> prop = {0.35, 0.5, 0.6};
  SUBCASE("gated optimal regime") {
    check_gateaux(law, prop, 0.45, [](const DiscreteModel& m) {
      return optimal_regime(m, std::nullopt, Proportion{0.45}, true);
    });
  }
  SUBCASE("fixed rank regime with a coarse threshold group") {
    const Coarsening c({0, 1, 1});
    check_gateaux(law, prop, 0.5, [&](const DiscreteModel&) {
      return RegimeSpec::rank_preserving(RankFunction{{2, 1}}, Proportion{0.5}, false, c);
    });
  }
  SUBCASE("gate leaves the constraint slack") {
    check_gateaux(law, prop, 0.9, [](const DiscreteModel& m) {
      return optimal_regime(m, std::nullopt, Proportion{0.9}, true);
    });
  }
}

TEST_CASE("empirical CATE and threshold") {
  const auto d = dataset({{0, 0, 10, 5}, {0, 1, 10, 7}, {1, 0, 10, 5}, {1, 1, 10, 4}, {2, 0, 10, 5}, {2, 1, 10, 8}});
  const auto emp = fit_empirical(d, 3, kBinary);
  auto r = empirical_cate_and_eta(emp, std::nullopt, 1.0 / 3.0, true);
  CHECK(r.delta.delta[0] == doctest::Approx(0.2));
  CHECK(r.delta.delta[1] == doctest::Approx(-0.1));
  CHECK(r.eta == doctest::Approx(0.2));
  CHECK(r.rule.treat[2] == doctest::Approx(1.0));
  CHECK(r.rule.treat[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(r.rule.treat[1] == 0.0);
  r = empirical_cate_and_eta(emp, std::nullopt, 1.0, true);
  CHECK(r.eta == 0.0);
  CHECK(r.rule.treat == std::vector<double>{1.0, 0.0, 1.0});
  const auto harm = fit_empirical(dataset({{0, 0, 4, 3}, {0, 1, 4, 1}, {1, 0, 4, 2}, {1, 1, 4, 1}}), 2, kBinary);
  for (double ks : {0.2, 0.7, 1.0}) CHECK(empirical_cate_and_eta(harm, std::nullopt, ks, true).rule.treat == std::vector<double>{0.0, 0.0});
  const auto missing = fit_empirical(dataset({{0, 0, 4, 3}, {1, 0, 4, 2}, {1, 1, 4, 1}}), 2, kBinary);
  CHECK(kind_of([&] { empirical_cate_and_eta(missing, std::nullopt, 0.5, true); }) == ErrorKind::PositivityViolated);
}

TEST_CASE("one-step estimator") {
  SUBCASE("deterministic outcomes: plug-in plus the constraint term") {
    const auto d = dataset({{0, 0, 6, 0}, {0, 1, 6, 6}, {1, 0, 8, 0}, {1, 1, 4, 4}, {2, 0, 6, 6}, {2, 1, 10, 0}});
    const auto emp = fit_empirical(d, 3, kBinary);
    Estimand e{RegimeSpec::rank_preserving(RankFunction{{1, 2, 0}}, Proportion{0.4}), false, std::nullopt, {}};
    const auto r = one_step_estimate(d, emp, e, 0.05);
    const auto law = emp.plugin_model();
    const auto density = large_cluster_density(law, e.regime);
    const double eta = constraint_multiplier(law, e.regime, density);
    double phi2 = 0.0;
    for (int l : d.l) phi2 += -eta * (density.density.treat[static_cast<std::size_t>(l)] - 0.4);
    phi2 /= d.size();
    CHECK(r.point == doctest::Approx(plugin_estimate(emp, e).point + phi2).epsilon(1e-12));
  }
  SUBCASE("interval uses the exact normal quantile") {
    const auto m = make_binary_model({0.3, 0.3, 0.4}, {{0.4, 0.5, 0.6}, {0.7, 0.6, 0.4}});
    const auto d = simulate_cluster(m, BernoulliAssignment{{0.5, 0.5, 0.5}}, 500, 4);
    const auto emp = fit_empirical(d, 3, kBinary);
    Estimand e{RegimeSpec{}, true, std::nullopt, {}};
    e.regime.constraint = Proportion{0.45};
    e.regime.gate = true;
    const auto r = one_step_estimate(d, emp, e, 0.32);
    REQUIRE(r.ci);
    CHECK((r.ci->second - r.point) == doctest::Approx(0.9944578832097535 * *r.se).epsilon(1e-12));
    CHECK(r.ci->first <= r.point);
    CHECK(kind_of([&] { Estimand f = e; f.n_star = 5; one_step_estimate(d, emp, f, 0.05); }) == ErrorKind::InvalidArgument);
  }
}

TEST_CASE("online estimator") {
  SUBCASE("equal scales give the plain mean") {
    const auto c = combine_online_terms({1.0, 2.0, 6.0}, {0.5, 0.5, 0.5});
    CHECK(c.point == doctest::Approx(3.0));
    CHECK(c.gamma == doctest::Approx(2.0));
    CHECK(c.half_width_unit == doctest::Approx(0.5 / std::sqrt(3.0)));
  }
  const auto m = make_binary_model({0.3, 0.3, 0.4}, {{0.4, 0.5, 0.6}, {0.7, 0.6, 0.4}});
  const auto d = simulate_cluster(m, BernoulliAssignment{{0.4, 0.5, 0.6}}, 400, 8);
  Estimand e{RegimeSpec{}, true, std::nullopt, {}};
  e.regime.constraint = Proportion{0.45};
  e.regime.gate = true;
  SUBCASE("single-term window") {
    const int n = d.size();
    OnlineOptions o;
    o.burn_in = n - 1;
    const auto r = online_estimate(d, 3, kBinary, e, 0.05, o);
    ClusterData prefix = d;
    prefix.l.pop_back();
    prefix.a.pop_back();
    prefix.y.pop_back();
    const auto emp = fit_empirical(prefix, 3, kBinary);
    const auto rule = empirical_cate_and_eta(emp, std::nullopt, 0.45, true);
    const InfluenceFunction phi(emp.plugin_model(), {emp.propensity(1, 0), emp.propensity(1, 1), emp.propensity(1, 2)},
                                rule.rule, rule.eta, 0.45);
    const auto last = static_cast<std::size_t>(n - 1);
    CHECK(r.point == doctest::Approx(phi.psi() + phi(d.y[last], d.a[last], d.l[last]).phi0).epsilon(1e-12));
  }
  SUBCASE("deterministic and order dependent") {
    OnlineOptions o;
    o.burn_in = 100;
    const auto a = online_estimate(d, 3, kBinary, e, 0.05, o);
    const auto b = online_estimate(d, 3, kBinary, e, 0.05, o);
    CHECK(a.point == b.point);
    ClusterData shuffled = d;
    std::reverse(shuffled.l.begin() + 100, shuffled.l.end());
    std::reverse(shuffled.a.begin() + 100, shuffled.a.end());
    std::reverse(shuffled.y.begin() + 100, shuffled.y.end());
    CHECK(online_estimate(shuffled, 3, kBinary, e, 0.05, o).point != a.point);
    o.batch = 25;
    const auto batched = online_estimate(d, 3, kBinary, e, 0.05, o);
    CHECK(batched.ci->first <= batched.point);
  }
  SUBCASE("burn-in errors") {
    OnlineOptions o;
    o.burn_in = 0;
    CHECK(kind_of([&] { online_estimate(d, 3, kBinary, e, 0.05, o); }) == ErrorKind::InsufficientBurnIn);
    o.burn_in = 2;
    CHECK(kind_of([&] { online_estimate(d, 3, kBinary, e, 0.05, o); }) == ErrorKind::InsufficientBurnIn);
  }
}
