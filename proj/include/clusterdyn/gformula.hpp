#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "clusterdyn/combinatorics.hpp"
#include "clusterdyn/model.hpp"
#include "clusterdyn/regimes.hpp"

namespace clusterdyn {

// Function of a cluster's outcome composition. Named functionals are
// evaluated with closed-form inner sums; Custom enumerates compositions.
struct Functional {
  enum class Kind { MeanOutcome, TreatedCountDistribution, OutcomeCountDistribution, IndicatorAtLeast, Custom };

  Kind kind = Kind::MeanOutcome;
  int outcome = 1;    // outcome index for the count-based functionals
  int threshold = 0;  // x in P(#{Y = outcome} >= x)
  // Custom: receives the outcome composition. Unreduced evaluation passes the
  // (y, a, l) layout of outcome_cell; reduced evaluation passes counts over
  // (y, v) cells at index v * M + y.
  std::function<double(const Composition&)> custom;

  static Functional mean_outcome() { return {}; }
  static Functional treated_count() { return {Kind::TreatedCountDistribution, 1, 0, {}}; }
  static Functional outcome_count(int y) { return {Kind::OutcomeCountDistribution, y, 0, {}}; }
  static Functional at_least(int y, int x) { return {Kind::IndicatorAtLeast, y, x, {}}; }
  static Functional from(std::function<double(const Composition&)> fn) { return {Kind::Custom, 0, 0, std::move(fn)}; }

  bool is_distribution() const noexcept {
    return kind == Kind::TreatedCountDistribution || kind == Kind::OutcomeCountDistribution;
  }
};

struct EvalOptions {
  std::uint64_t budget = 5'000'000;  // maximum size of the enumerated index set
  int threads = 1;
};

struct GFormulaReport {
  // Scalar functionals: one entry. Distributions: pmf over x = 0..n.
  std::vector<double> values;
  int n = 0;
  int kappa = 0;
  std::uint64_t index_terms = 0;    // size of the index set the evaluator ranges over
  std::uint64_t support_terms = 0;  // terms with positive probability
  std::uint64_t pruned_terms = 0;   // index_terms - support_terms
  std::uint64_t full_terms = 0;     // (y, a, l) outcome compositions, saturating at uint64 max

  double value() const { return values.front(); }
};

// Per-observation score h'(y, a, l); defaults to the outcome score.
using ObservationScore = std::function<double(int y, int a, int l)>;

double individual_gformula_expectation(const DiscreteModel& model, const RegimeSpec& spec, int n,
                                       const ObservationScore& h = nullptr, int threads = 1);

// Throws BudgetExceeded (with the exact index-set size) before enumerating.
GFormulaReport compositional_gformula_expectation(const DiscreteModel& model, const RegimeSpec& spec, int n,
                                                  const Functional& h, const EvalOptions& options = {});

// Sums over outcome-by-coarse-group compositions of the coarsened model.
// spec must read the coarsening (its ranks live on the coarse levels). Only
// treatment-free functionals are available on this path.
GFormulaReport reduced_compositional_expectation(const DiscreteModel& model, const Coarsening& coarsening,
                                                 const RegimeSpec& spec, int n, const Functional& h,
                                                 const EvalOptions& options = {});

double large_cluster_value(const DiscreteModel& model, const RegimeSpec& spec);

struct ValuePoint {
  double kappa_star = 0.0;
  double threshold = 0.0;  // omega_0 or eta_0
  double value = 0.0;
};

std::vector<ValuePoint> value_curve(const DiscreteModel& model, const RegimeSpec& spec,
                                    std::span<const double> kappa_grid);

}  // namespace clusterdyn
