#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "clusterdyn/gformula.hpp"
#include "clusterdyn/model.hpp"
#include "clusterdyn/regimes.hpp"
#include "clusterdyn/simulator.hpp"

namespace clusterdyn {

// Count-based empirical law of one realized cluster. Cells with no
// observations stay undefined; nothing is imputed.
class EmpiricalLaw {
 public:
  EmpiricalLaw(int levels, std::vector<double> scores);

  void add(int l, int a, int y);
  void remove(int l, int a, int y);

  int n() const noexcept { return n_; }
  int levels() const noexcept { return levels_; }
  int outcomes() const noexcept { return static_cast<int>(scores_.size()); }
  const std::vector<double>& scores() const noexcept { return scores_; }

  int level_count(int l) const { return l_count_[static_cast<std::size_t>(l)]; }
  int joint_count(int a, int l) const { return b_count_[static_cast<std::size_t>(a * levels_ + l)]; }
  int outcome_count(int y, int a, int l) const {
    return o_count_[static_cast<std::size_t>((a * levels_ + l) * outcomes() + y)];
  }

  double q_l(int l) const;
  bool propensity_defined(int l) const { return level_count(l) > 0; }
  double propensity(int a, int l) const;  // q~_n(a | l); throws on undefined
  bool outcome_defined(int a, int l) const { return joint_count(a, l) > 0; }
  double q_y(int y, int a, int l) const;  // Q~_Y(y | a, l); throws on undefined
  double mean_outcome(int a, int l) const;

  std::vector<std::pair<int, int>> undefined_cells() const;  // (a, l)

  // Tabular model (Q~_L, Q~_Y). Undefined outcome rows are filled with a
  // point mass on outcome 0; callers must check positivity before relying on
  // them.
  DiscreteModel plugin_model() const;

 private:
  int levels_;
  int n_ = 0;
  std::vector<double> scores_;
  std::vector<int> l_count_;
  std::vector<int> b_count_;
  std::vector<int> o_count_;
};

// Throws EmptyData when the cluster has no rows.
EmpiricalLaw fit_empirical(const ClusterData& data, int levels, std::vector<double> scores);

// Parameter to estimate. Finite targets use n_star and any functional; large
// targets use the regime's Proportion constraint and the mean outcome. With
// `optimal`, the regime is rebuilt from the empirical CATE (ranks ignored).
struct Estimand {
  RegimeSpec regime;
  bool optimal = false;
  std::optional<int> n_star;  // absent: large-cluster target
  Functional functional;

  bool large() const noexcept { return !n_star.has_value(); }
};

struct EstimateReport {
  std::string method;
  double point = 0.0;
  std::vector<double> values;  // full pmf for distribution functionals
  std::optional<double> se;
  std::optional<std::pair<double, double>> ci;
  std::vector<std::pair<std::string, double>> diagnostics;
  std::vector<std::string> notes;
};

struct EmpiricalRule {
  CateTable delta;     // on the regime's input levels
  double eta = 0.0;    // clamped threshold when gated
  RegimeSpec regime;   // optimal regime on the empirical law
  InterventionDensity rule;  // large-cluster g~ on covariate levels
};

// Empirical CATE, threshold and optimal large-cluster rule. Requires both arms
// at every covariate level observed in the data.
EmpiricalRule empirical_cate_and_eta(const EmpiricalLaw& emp, const std::optional<Coarsening>& coarsening,
                                     double kappa_star, bool gated);

// Regime actually targeted: the estimand's regime, or the empirical optimum.
RegimeSpec resolve_regime(const EmpiricalLaw& emp, const Estimand& target);

EstimateReport plugin_estimate(const EmpiricalLaw& emp, const Estimand& target, const EvalOptions& options = {});

// Weighted mean of Y with weights q~*(A|L) / q~_n(A|L).
EstimateReport ipw_estimate(const ClusterData& data, const EmpiricalLaw& emp, const Estimand& target,
                            int threads = 1);
double ipw_estimate(const ClusterData& data, const EmpiricalLaw& emp, const InterventionDensity& target_density);

struct EifTerms {
  double phi1 = 0.0;
  double phi2 = 0.0;
  double phi0 = 0.0;
};

// Efficient influence function of the large-cluster value at a tabular law.
// rule(1 | l) is the target density on covariate levels, propensity(1 | l)
// the assignment mechanism. Treatment indicators are averaged analytically
// over the rule's randomization.
class InfluenceFunction {
 public:
  InfluenceFunction(DiscreteModel law, std::vector<double> propensity, InterventionDensity rule, double eta,
                    double kappa_star);

  double psi() const noexcept { return psi_; }
  double eta() const noexcept { return eta_; }
  EifTerms operator()(int y, int a, int l) const;

 private:
  DiscreteModel law_;
  std::vector<double> propensity_;
  InterventionDensity rule_;
  double eta_;
  double kappa_star_;
  double psi_ = 0.0;
};

// Shadow price of the resource constraint for a single-rank large-cluster
// regime: the mass-weighted CATE of the partially treated rank group, or 0
// when the gate leaves the constraint slack.
double constraint_multiplier(const DiscreteModel& law, const RegimeSpec& regime, const LargeClusterDensity& density);

EstimateReport one_step_estimate(const ClusterData& data, const EmpiricalLaw& emp, const Estimand& target,
                                 double alpha);

struct OnlineOptions {
  int burn_in = 0;
  int batch = 1;  // nuisances refit every `batch` observations
  double sigma_floor = 1e-6;
};

// Psi^ = Gamma^-1 (n - l)^-1 sum_j Phi_j / sigma_j with Gamma = (n - l)^-1 sum_j 1 / sigma_j.
struct OnlineCombination {
  double point = 0.0;
  double gamma = 0.0;
  double half_width_unit = 0.0;  // Gamma^-1 / sqrt(n - l)
};
OnlineCombination combine_online_terms(const std::vector<double>& phi, const std::vector<double>& sigma);

// Sequential estimator over the data order; step j uses nuisances fit on the
// first j - 1 rows only.
EstimateReport online_estimate(const ClusterData& data, int levels, std::vector<double> scores, const Estimand& target,
                               double alpha, const OnlineOptions& options);

}  // namespace clusterdyn
