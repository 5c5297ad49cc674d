#pragma once

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "clusterdyn/combinatorics.hpp"
#include "clusterdyn/model.hpp"
#include "clusterdyn/rng.hpp"

namespace clusterdyn {

// Priority per level of the regime's input space (L, or V when the regime
// reads a coarsening). Equal values form a rank group.
struct RankFunction {
  std::vector<double> values;

  int size() const noexcept { return static_cast<int>(values.size()); }
  double operator()(int level) const { return values[static_cast<std::size_t>(level)]; }
};

// Finite-cluster resource count kappa_n.
struct ExactCount {
  int kappa = 0;
};
// Asymptotic resource proportion kappa*; finite clusters use floor(n * kappa*).
struct Proportion {
  double kappa_star = 0.0;
};
using Constraint = std::variant<ExactCount, Proportion>;

// Rank-and-treat cluster regime. A single rank function gives an
// L-rank-preserving regime; several with weights give a mixture over rank
// functions. With gate set, individuals with rank <= 0 are never treated.
struct RegimeSpec {
  std::vector<RankFunction> ranks;
  std::vector<double> weights;
  Constraint constraint = ExactCount{0};
  bool gate = false;
  std::optional<Coarsening> coarsening;

  static RegimeSpec rank_preserving(RankFunction rank, Constraint constraint, bool gate = false,
                                    std::optional<Coarsening> coarsening = std::nullopt);
  static RegimeSpec mixture(std::vector<RankFunction> ranks, std::vector<double> weights, Constraint constraint,
                            bool gate = false, std::optional<Coarsening> coarsening = std::nullopt);

  bool is_mixture() const noexcept { return ranks.size() > 1; }
  int input_levels() const noexcept { return ranks.empty() ? 0 : ranks.front().size(); }
  // Level of the regime's input space read for covariate level l.
  int input_level(int l) const { return coarsening ? (*coarsening)(l) : l; }
  RegimeSpec with_constraint(Constraint c) const;
};

// Checks rank sizes, weights, and the constraint against a model with the given
// number of covariate levels.
void validate_regime(const RegimeSpec& spec, int model_levels);

// kappa_n for a cluster of n; throws InvalidArgument if an ExactCount exceeds n.
int resource_count(const Constraint& constraint, int n);

// Same regime expressed on the fine covariate levels: rank(l) := rank(c(l)).
RegimeSpec lift_to_fine(const RegimeSpec& spec);

struct ThresholdResult {
  enum class Kind { NoneTreated, Threshold };
  Kind kind = Kind::NoneTreated;
  double omega = 0.0;  // rank value of the last group receiving treatment
  int s_at = 0;        // #{i : rank >= omega}
  int s_above = 0;     // #{i : rank > omega}
};

// The rank group r present in counts with #{rank > r} < kappa <= #{rank >= r}.
ThresholdResult omega_threshold(std::span<const int> counts, const RankFunction& rank, int kappa);

// Treatment probability q(1 | level) for every level of the regime's input space.
struct InterventionDensity {
  std::vector<double> treat;

  double operator()(int a, int level) const {
    const double p = treat[static_cast<std::size_t>(level)];
    return a == 1 ? p : 1.0 - p;
  }
  int size() const noexcept { return static_cast<int>(treat.size()); }
};

// Single rank function, conditional on the composition of the regime's input.
InterventionDensity conditional_intervention_density(std::span<const int> counts, const RankFunction& rank, int kappa,
                                                     bool gate = false);
// Full spec (single rank or mixture); kappa from the spec's constraint at n = sum(counts).
InterventionDensity conditional_intervention_density(std::span<const int> counts, const RegimeSpec& spec);
// Mixture: convex combination of the component densities.
InterventionDensity mixture_conditional_density(std::span<const int> counts, const RegimeSpec& spec);

// q*_i(1 | l) for every covariate level l of the model, summing the
// conditional density over compositions of the other n-1 individuals.
InterventionDensity marginal_intervention_density(const DiscreteModel& model, const RegimeSpec& spec, int n,
                                                  int threads = 1);
// Single level; throws ZeroMassLevel if Q_L(level) = 0.
double marginal_intervention_probability(const DiscreteModel& model, const RegimeSpec& spec, int n, int level);

struct WeightedAllocation {
  Composition treated;  // treated count per level, t(l) = b(1, l)
  double weight = 0.0;
};

// Law of the treated counts given the composition, restricted to its
// positive support; mixture components with equal treated counts are merged.
std::vector<WeightedAllocation> treatment_allocations(std::span<const int> counts, const RegimeSpec& spec);

// Probability of the joint composition b (laid out by joint_cell over the
// regime's input levels) given counts. Throws IncompatibleComposition when
// the margins of b do not match counts.
double compositional_intervention_density(std::span<const int> b, std::span<const int> counts,
                                          const RegimeSpec& spec);

struct LargeClusterDensity {
  double threshold = 0.0;  // omega_0 (ungated) or eta_0 = max(omega_0, 0) (gated)
  InterventionDensity density;
};

// Large-cluster limit density for rank mass `mass` over the regime's input levels.
LargeClusterDensity large_cluster_density(std::span<const double> mass, const RankFunction& rank, double kappa_star,
                                          bool gate = false);
// Model-level version: density over covariate levels L (coarsened regimes
// read Q_V). Mixtures mix the component densities; their threshold is NaN.
LargeClusterDensity large_cluster_density(const DiscreteModel& model, const RegimeSpec& spec);

// Optimal regime ranks by the CATE on the coarsened space; gated adds the
// never-treat-harmful clamp.
RegimeSpec optimal_regime(const DiscreteModel& model, const std::optional<Coarsening>& coarsening,
                          Constraint constraint, bool gated);

// Convex combination of integer treated-count vectors whose expectation is
// counts(l) * p(l). Throws InfeasibleTarget if the total is not an integer or
// some p(l) lies outside [0, 1].
std::vector<WeightedAllocation> decompose_fractional_allocation(std::span<const int> counts, std::span<const double> p);

// Rank-and-treat for a realized cluster: sort by rank, break ties uniformly at
// random, treat the first kappa (stopping at rank <= 0 when gated). Mixture
// components are drawn from a separate sub-stream.
std::vector<int> sample_allocation(std::span<const int> levels, const RegimeSpec& spec, Rng& rng);

}  // namespace clusterdyn
