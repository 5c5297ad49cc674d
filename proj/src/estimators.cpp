#include "clusterdyn/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "clusterdyn/error.hpp"
#include "clusterdyn/normal.hpp"

namespace clusterdyn {

namespace {

std::string cell_name(int a, int l) { return "(a=" + std::to_string(a) + ",l=" + std::to_string(l) + ")"; }

[[noreturn]] void throw_cells(ErrorKind kind, const std::string& prefix, const std::vector<std::pair<int, int>>& cells) {
  std::string msg = prefix;
  for (std::size_t i = 0; i < cells.size(); ++i) msg += (i ? ", " : " ") + cell_name(cells[i].first, cells[i].second);
  throw Error(kind, msg);
}

// Cells (a, l) with observed covariate mass that the density needs but the
// data never populated.
std::vector<std::pair<int, int>> missing_cells(const EmpiricalLaw& emp, const InterventionDensity& density) {
  std::vector<std::pair<int, int>> out;
  for (int l = 0; l < emp.levels(); ++l) {
    if (emp.level_count(l) == 0) continue;
    for (int a = 0; a < 2; ++a)
      if (density(a, l) > 0.0 && !emp.outcome_defined(a, l)) out.emplace_back(a, l);
  }
  return out;
}

void require_both_arms(const EmpiricalLaw& emp, ErrorKind kind, const std::vector<int>* extra_levels = nullptr) {
  std::vector<std::pair<int, int>> missing;
  for (int l = 0; l < emp.levels(); ++l) {
    const bool needed = emp.level_count(l) > 0 ||
                        (extra_levels && (*extra_levels)[static_cast<std::size_t>(l)] > 0);
    if (!needed) continue;
    for (int a = 0; a < 2; ++a)
      if (!emp.outcome_defined(a, l)) missing.emplace_back(a, l);
  }
  if (!missing.empty()) throw_cells(kind, "empirical CATE needs both arms at", missing);
}

// Empirical CATE on the regime's input levels; unobserved coarse levels get 0.
std::vector<double> empirical_input_cate(const EmpiricalLaw& emp, const std::optional<Coarsening>& coarsening) {
  const int k = emp.levels();
  const Coarsening map = coarsening ? *coarsening : Coarsening::identity(k);
  if (map.fine_levels() != k) throw Error(ErrorKind::SizeMismatch, "coarsening does not match the covariate levels");
  std::vector<double> num(static_cast<std::size_t>(map.coarse_levels()), 0.0);
  std::vector<double> mass(num.size(), 0.0);
  for (int l = 0; l < k; ++l) {
    if (emp.level_count(l) == 0) continue;
    const auto v = static_cast<std::size_t>(map(l));
    num[v] += emp.q_l(l) * (emp.mean_outcome(1, l) - emp.mean_outcome(0, l));
    mass[v] += emp.q_l(l);
  }
  for (std::size_t v = 0; v < num.size(); ++v) num[v] = mass[v] > 0.0 ? num[v] / mass[v] : 0.0;
  return num;
}

double kappa_star_of(const RegimeSpec& regime) {
  const auto* p = std::get_if<Proportion>(&regime.constraint);
  if (!p) throw Error(ErrorKind::InvalidArgument, "large-cluster target needs a kappa_star constraint");
  return p->kappa_star;
}

void require_large_mean(const Estimand& target, const char* method) {
  if (!target.large())
    throw Error(ErrorKind::InvalidArgument, std::string(method) + " is available for large-cluster targets only");
  if (target.functional.kind != Functional::Kind::MeanOutcome)
    throw Error(ErrorKind::InvalidArgument, std::string(method) + " supports the mean outcome only");
}

InterventionDensity target_density(const DiscreteModel& law, const RegimeSpec& regime, const Estimand& target,
                                   int threads) {
  if (target.large()) return large_cluster_density(law, regime).density;
  return marginal_intervention_density(law, regime, *target.n_star, threads);
}

std::vector<double> propensity_table(const EmpiricalLaw& emp) {
  std::vector<double> out(static_cast<std::size_t>(emp.levels()), 0.0);
  for (int l = 0; l < emp.levels(); ++l)
    if (emp.propensity_defined(l)) out[static_cast<std::size_t>(l)] = emp.propensity(1, l);
  return out;
}

void attach_interval(EstimateReport& report, double se, double alpha) {
  const double z = two_sided_z(alpha);
  report.se = se;
  report.ci = std::make_pair(report.point - z * se, report.point + z * se);
}

}  // namespace

EmpiricalLaw::EmpiricalLaw(int levels, std::vector<double> scores) : levels_(levels), scores_(std::move(scores)) {
  if (levels < 1) throw Error(ErrorKind::InvalidArgument, "need at least one covariate level");
  if (scores_.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one outcome");
  l_count_.assign(static_cast<std::size_t>(levels_), 0);
  b_count_.assign(static_cast<std::size_t>(2 * levels_), 0);
  o_count_.assign(static_cast<std::size_t>(2 * levels_) * scores_.size(), 0);
}

void EmpiricalLaw::add(int l, int a, int y) {
  if (l < 0 || l >= levels_ || (a != 0 && a != 1) || y < 0 || y >= outcomes())
    throw Error(ErrorKind::InvalidArgument, "observation (l=" + std::to_string(l) + ", a=" + std::to_string(a) +
                                                ", y=" + std::to_string(y) + ") out of range");
  ++n_;
  ++l_count_[static_cast<std::size_t>(l)];
  ++b_count_[static_cast<std::size_t>(a * levels_ + l)];
  ++o_count_[static_cast<std::size_t>((a * levels_ + l) * outcomes() + y)];
}

void EmpiricalLaw::remove(int l, int a, int y) {
  if (outcome_count(y, a, l) == 0) throw Error(ErrorKind::InvalidArgument, "removing an observation never added");
  --n_;
  --l_count_[static_cast<std::size_t>(l)];
  --b_count_[static_cast<std::size_t>(a * levels_ + l)];
  --o_count_[static_cast<std::size_t>((a * levels_ + l) * outcomes() + y)];
}

double EmpiricalLaw::q_l(int l) const {
  if (n_ == 0) throw Error(ErrorKind::EmptyData, "empirical law has no observations");
  return static_cast<double>(level_count(l)) / n_;
}

double EmpiricalLaw::propensity(int a, int l) const {
  if (!propensity_defined(l)) throw Error(ErrorKind::PositivityViolated, "propensity undefined at l=" + std::to_string(l));
  return static_cast<double>(joint_count(a, l)) / level_count(l);
}

double EmpiricalLaw::q_y(int y, int a, int l) const {
  if (!outcome_defined(a, l)) throw Error(ErrorKind::PositivityViolated, "outcome law undefined at " + cell_name(a, l));
  return static_cast<double>(outcome_count(y, a, l)) / joint_count(a, l);
}

double EmpiricalLaw::mean_outcome(int a, int l) const {
  double s = 0.0;
  for (int y = 0; y < outcomes(); ++y) s += scores_[static_cast<std::size_t>(y)] * outcome_count(y, a, l);
  if (!outcome_defined(a, l)) throw Error(ErrorKind::PositivityViolated, "outcome law undefined at " + cell_name(a, l));
  return s / joint_count(a, l);
}

std::vector<std::pair<int, int>> EmpiricalLaw::undefined_cells() const {
  std::vector<std::pair<int, int>> out;
  for (int a = 0; a < 2; ++a)
    for (int l = 0; l < levels_; ++l)
      if (!outcome_defined(a, l)) out.emplace_back(a, l);
  return out;
}

DiscreteModel EmpiricalLaw::plugin_model() const {
  if (n_ == 0) throw Error(ErrorKind::EmptyData, "empirical law has no observations");
  const int m = outcomes();
  std::vector<double> q_l(static_cast<std::size_t>(levels_));
  for (int l = 0; l < levels_; ++l) q_l[static_cast<std::size_t>(l)] = static_cast<double>(level_count(l)) / n_;
  std::vector<double> q_y(o_count_.size(), 0.0);
  for (int a = 0; a < 2; ++a)
    for (int l = 0; l < levels_; ++l) {
      const std::size_t base = static_cast<std::size_t>((a * levels_ + l) * m);
      const int b = joint_count(a, l);
      if (b == 0) {
        q_y[base] = 1.0;
        continue;
      }
      for (int y = 0; y < m; ++y) q_y[base + static_cast<std::size_t>(y)] = static_cast<double>(o_count_[base + static_cast<std::size_t>(y)]) / b;
    }
  return DiscreteModel(std::move(q_l), scores_, std::move(q_y));
}

EmpiricalLaw fit_empirical(const ClusterData& data, int levels, std::vector<double> scores) {
  if (data.l.empty()) throw Error(ErrorKind::EmptyData, "cluster has no observations");
  if (data.a.size() != data.l.size() || data.y.size() != data.l.size())
    throw Error(ErrorKind::SizeMismatch, "cluster columns differ in length");
  EmpiricalLaw emp(levels, std::move(scores));
  for (std::size_t i = 0; i < data.l.size(); ++i) emp.add(data.l[i], data.a[i], data.y[i]);
  return emp;
}

EmpiricalRule empirical_cate_and_eta(const EmpiricalLaw& emp, const std::optional<Coarsening>& coarsening,
                                     double kappa_star, bool gated) {
  require_both_arms(emp, ErrorKind::PositivityViolated);
  EmpiricalRule out;
  out.delta.delta = empirical_input_cate(emp, coarsening);
  out.regime = RegimeSpec::rank_preserving(RankFunction{out.delta.delta}, Proportion{kappa_star}, gated, coarsening);
  const DiscreteModel law = emp.plugin_model();
  const auto density = large_cluster_density(law, out.regime);
  out.eta = constraint_multiplier(law, out.regime, density);
  out.rule = density.density;
  return out;
}

RegimeSpec resolve_regime(const EmpiricalLaw& emp, const Estimand& target) {
  if (!target.optimal) {
    validate_regime(target.regime, emp.levels());
    return target.regime;
  }
  require_both_arms(emp, ErrorKind::PositivityViolated);
  return RegimeSpec::rank_preserving(RankFunction{empirical_input_cate(emp, target.regime.coarsening)},
                                     target.regime.constraint, target.regime.gate, target.regime.coarsening);
}

EstimateReport plugin_estimate(const EmpiricalLaw& emp, const Estimand& target, const EvalOptions& options) {
  const RegimeSpec regime = resolve_regime(emp, target);
  const DiscreteModel law = emp.plugin_model();
  EstimateReport report;
  report.method = "plugin";

  if (target.large()) {
    if (target.functional.kind != Functional::Kind::MeanOutcome)
      throw Error(ErrorKind::InvalidArgument, "large-cluster targets support the mean outcome only");
    const auto density = large_cluster_density(law, regime);
    if (auto cells = missing_cells(emp, density.density); !cells.empty())
      throw_cells(ErrorKind::PositivityViolated, "target needs undefined cells", cells);
    report.point = large_cluster_value(law, regime);
    report.values = {report.point};
    report.diagnostics.emplace_back("threshold", density.threshold);
  } else {
    const auto density = marginal_intervention_density(law, regime, *target.n_star, options.threads);
    if (auto cells = missing_cells(emp, density); !cells.empty())
      throw_cells(ErrorKind::PositivityViolated, "target needs undefined cells", cells);
    if (target.functional.kind == Functional::Kind::MeanOutcome) {
      report.point = individual_gformula_expectation(law, regime, *target.n_star, nullptr, options.threads);
      report.values = {report.point};
    } else {
      const auto g = compositional_gformula_expectation(law, regime, *target.n_star, target.functional, options);
      report.values = g.values;
      report.point = g.values.front();
      report.diagnostics.emplace_back("index_terms", static_cast<double>(g.index_terms));
    }
  }
  report.diagnostics.emplace_back("undefined_cells", static_cast<double>(emp.undefined_cells().size()));
  for (const auto& [a, l] : emp.undefined_cells()) report.notes.push_back("undefined " + cell_name(a, l));
  return report;
}

double ipw_estimate(const ClusterData& data, const EmpiricalLaw& emp, const InterventionDensity& density) {
  if (data.l.empty()) throw Error(ErrorKind::EmptyData, "cluster has no observations");
  double sum = 0.0;
  for (std::size_t i = 0; i < data.l.size(); ++i) {
    const int l = data.l[i];
    const int a = data.a[i];
    const double num = density(a, l);
    if (num == 0.0) continue;
    sum += emp.scores()[static_cast<std::size_t>(data.y[i])] * num / emp.propensity(a, l);
  }
  return sum / static_cast<double>(data.l.size());
}

EstimateReport ipw_estimate(const ClusterData& data, const EmpiricalLaw& emp, const Estimand& target, int threads) {
  if (target.functional.kind != Functional::Kind::MeanOutcome)
    throw Error(ErrorKind::InvalidArgument, "IPW supports the mean outcome only");
  const RegimeSpec regime = resolve_regime(emp, target);
  const DiscreteModel law = emp.plugin_model();
  const InterventionDensity density = target_density(law, regime, target, threads);
  if (auto cells = missing_cells(emp, density); !cells.empty())
    throw_cells(ErrorKind::PositivityViolated, "target needs undefined cells", cells);
  EstimateReport report;
  report.method = "ipw";
  report.point = ipw_estimate(data, emp, density);
  report.values = {report.point};
  return report;
}

InfluenceFunction::InfluenceFunction(DiscreteModel law, std::vector<double> propensity, InterventionDensity rule,
                                     double eta, double kappa_star)
    : law_(std::move(law)), propensity_(std::move(propensity)), rule_(std::move(rule)), eta_(eta),
      kappa_star_(kappa_star) {
  const int k = law_.levels();
  if (propensity_.size() != static_cast<std::size_t>(k) || rule_.size() != k)
    throw Error(ErrorKind::SizeMismatch, "influence function tables differ in length");
  std::vector<std::pair<int, int>> bad;
  for (int l = 0; l < k; ++l) {
    if (!(law_.q_l(l) > 0.0)) continue;
    const double q1 = propensity_[static_cast<std::size_t>(l)];
    for (int a = 0; a < 2; ++a) {
      const double q = a == 1 ? q1 : 1.0 - q1;
      if (rule_(a, l) > 0.0 && !(q > 0.0)) bad.emplace_back(a, l);
    }
    psi_ += law_.q_l(l) * (rule_(0, l) * law_.mean_outcome(0, l) + rule_(1, l) * law_.mean_outcome(1, l));
  }
  if (!bad.empty()) throw_cells(ErrorKind::PositivityViolated, "rule puts mass where the propensity is zero at", bad);
}

EifTerms InfluenceFunction::operator()(int y, int a, int l) const {
  const double g = rule_(a, l);
  double weighted_residual = 0.0;
  if (g > 0.0) {
    const double q1 = propensity_[static_cast<std::size_t>(l)];
    const double q = a == 1 ? q1 : 1.0 - q1;
    if (!(q > 0.0)) throw Error(ErrorKind::PositivityViolated, "zero propensity at " + cell_name(a, l));
    weighted_residual = g / q * (law_.score(y) - law_.mean_outcome(a, l));
  }
  EifTerms t;
  t.phi1 = weighted_residual + rule_(0, l) * law_.mean_outcome(0, l) + rule_(1, l) * law_.mean_outcome(1, l) - psi_;
  t.phi2 = -eta_ * (rule_(1, l) - kappa_star_);
  t.phi0 = t.phi1 + t.phi2;
  return t;
}

double constraint_multiplier(const DiscreteModel& law, const RegimeSpec& regime, const LargeClusterDensity& density) {
  if (regime.is_mixture()) throw Error(ErrorKind::InvalidArgument, "constraint multiplier needs a single rank function");
  if (std::isnan(density.threshold)) return 0.0;
  if (regime.gate && density.threshold <= 0.0) return 0.0;
  const RankFunction& rank = regime.ranks.front();
  double num = 0.0;
  double mass = 0.0;
  for (int l = 0; l < law.levels(); ++l) {
    if (rank(regime.input_level(l)) != density.threshold || !(law.q_l(l) > 0.0)) continue;
    num += law.q_l(l) * (law.mean_outcome(1, l) - law.mean_outcome(0, l));
    mass += law.q_l(l);
  }
  return mass > 0.0 ? num / mass : 0.0;
}

EstimateReport one_step_estimate(const ClusterData& data, const EmpiricalLaw& emp, const Estimand& target,
                                 double alpha) {
  require_large_mean(target, "one-step estimator");
  const RegimeSpec regime = resolve_regime(emp, target);
  const DiscreteModel law = emp.plugin_model();
  const auto density = large_cluster_density(law, regime);
  if (auto cells = missing_cells(emp, density.density); !cells.empty())
    throw_cells(ErrorKind::PositivityViolated, "target needs undefined cells", cells);
  const double eta = constraint_multiplier(law, regime, density);
  const InfluenceFunction phi(law, propensity_table(emp), density.density, eta, kappa_star_of(regime));

  const auto n = static_cast<double>(data.l.size());
  double mean = 0.0;
  double second = 0.0;
  for (std::size_t i = 0; i < data.l.size(); ++i) {
    const double v = phi(data.y[i], data.a[i], data.l[i]).phi0;
    mean += v;
    second += v * v;
  }
  mean /= n;
  second /= n;

  EstimateReport report;
  report.method = "onestep";
  report.point = phi.psi() + mean;
  report.values = {report.point};
  attach_interval(report, std::sqrt(second / n), alpha);
  report.diagnostics = {{"plugin", phi.psi()}, {"threshold", density.threshold}, {"eta", eta},
                        {"sigma", std::sqrt(second)}};
  return report;
}

OnlineCombination combine_online_terms(const std::vector<double>& phi, const std::vector<double>& sigma) {
  if (phi.empty() || phi.size() != sigma.size())
    throw Error(ErrorKind::SizeMismatch, "online terms and scales must be non-empty and equal in length");
  const auto m = static_cast<double>(phi.size());
  double inv = 0.0;
  double weighted = 0.0;
  for (std::size_t j = 0; j < phi.size(); ++j) {
    inv += 1.0 / sigma[j];
    weighted += phi[j] / sigma[j];
  }
  OnlineCombination out;
  out.gamma = inv / m;
  out.point = weighted / m / out.gamma;
  out.half_width_unit = 1.0 / (out.gamma * std::sqrt(m));
  return out;
}

EstimateReport online_estimate(const ClusterData& data, int levels, std::vector<double> scores, const Estimand& target,
                               double alpha, const OnlineOptions& options) {
  require_large_mean(target, "online estimator");
  const int n = data.size();
  if (n == 0) throw Error(ErrorKind::EmptyData, "cluster has no observations");
  if (options.batch < 1) throw Error(ErrorKind::InvalidArgument, "online batch size must be >= 1");
  if (options.burn_in < 1 || options.burn_in >= n)
    throw Error(ErrorKind::InsufficientBurnIn, "burn-in " + std::to_string(options.burn_in) + " must lie in [1, n-1]");

  EmpiricalLaw prefix(levels, std::move(scores));
  for (int i = 0; i < options.burn_in; ++i)
    prefix.add(data.l[static_cast<std::size_t>(i)], data.a[static_cast<std::size_t>(i)], data.y[static_cast<std::size_t>(i)]);

  // Every level that appears later must already be seen, so each step's
  // influence term is defined without imputation.
  std::vector<int> later(static_cast<std::size_t>(levels), 0);
  for (int i = options.burn_in; i < n; ++i) ++later[static_cast<std::size_t>(data.l[static_cast<std::size_t>(i)])];
  {
    std::vector<std::pair<int, int>> unseen;
    for (int l = 0; l < levels; ++l)
      if (later[static_cast<std::size_t>(l)] > 0 && prefix.level_count(l) == 0) unseen.emplace_back(0, l);
    if (!unseen.empty()) throw_cells(ErrorKind::InsufficientBurnIn, "burn-in never observes levels of", unseen);
    if (target.optimal) require_both_arms(prefix, ErrorKind::InsufficientBurnIn, &later);
  }

  const int m = prefix.outcomes();
  std::vector<double> phi_terms;
  std::vector<double> sigmas;
  phi_terms.reserve(static_cast<std::size_t>(n - options.burn_in));
  sigmas.reserve(phi_terms.capacity());
  std::optional<InfluenceFunction> phi;
  double sigma = 0.0;

  for (int j = options.burn_in; j < n; ++j) {
    if ((j - options.burn_in) % options.batch == 0) {
      const RegimeSpec regime = resolve_regime(prefix, target);
      const DiscreteModel law = prefix.plugin_model();
      const auto density = large_cluster_density(law, regime);
      if (auto cells = missing_cells(prefix, density.density); !cells.empty())
        throw_cells(j == options.burn_in ? ErrorKind::InsufficientBurnIn : ErrorKind::PositivityViolated,
                    "training prefix lacks cells", cells);
      phi.emplace(law, propensity_table(prefix), density.density, constraint_multiplier(law, regime, density),
                  kappa_star_of(regime));
      // Second moment over the prefix from cell counts.
      double second = 0.0;
      for (int a = 0; a < 2; ++a)
        for (int l = 0; l < levels; ++l)
          for (int y = 0; y < m; ++y) {
            const int c = prefix.outcome_count(y, a, l);
            if (c == 0) continue;
            const double v = (*phi)(y, a, l).phi0;
            second += c * v * v;
          }
      sigma = std::max(std::sqrt(second / prefix.n()), options.sigma_floor);
    }
    const auto i = static_cast<std::size_t>(j);
    phi_terms.push_back(phi->psi() + (*phi)(data.y[i], data.a[i], data.l[i]).phi0);
    sigmas.push_back(sigma);
    prefix.add(data.l[i], data.a[i], data.y[i]);
  }

  const auto combined = combine_online_terms(phi_terms, sigmas);
  const double z = two_sided_z(alpha);
  EstimateReport report;
  report.method = "online";
  report.point = combined.point;
  report.values = {report.point};
  report.se = combined.half_width_unit;
  report.ci = std::make_pair(combined.point - z * combined.half_width_unit, combined.point + z * combined.half_width_unit);
  report.diagnostics = {{"gamma", combined.gamma},
                        {"burn_in", static_cast<double>(options.burn_in)},
                        {"batch", static_cast<double>(options.batch)}};
  return report;
}

}  // namespace clusterdyn
