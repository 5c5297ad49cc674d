#pragma once

#include <optional>
#include <span>
#include <vector>

namespace clusterdyn {

inline constexpr double kProbabilityTolerance = 1e-12;

// Finite discrete model: covariate law Q_L over K levels and an outcome kernel
// Q_Y(y | a, l) over M scored outcomes. Treatment is binary.
//
// q_y is stored flat in [a][l][y] order.
class DiscreteModel {
 public:
  DiscreteModel() = default;
  DiscreteModel(std::vector<double> q_l, std::vector<double> scores, std::vector<double> q_y);

  int levels() const noexcept { return static_cast<int>(q_l_.size()); }
  int outcomes() const noexcept { return static_cast<int>(scores_.size()); }

  std::span<const double> q_l() const noexcept { return q_l_; }
  double q_l(int l) const { return q_l_[static_cast<std::size_t>(l)]; }
  std::span<const double> scores() const noexcept { return scores_; }
  double score(int y) const { return scores_[static_cast<std::size_t>(y)]; }
  std::span<const double> q_y() const noexcept { return q_y_; }

  double q_y(int y, int a, int l) const { return q_y_[index(y, a, l)]; }
  std::span<const double> q_y_row(int a, int l) const {
    return std::span<const double>(q_y_).subspan(index(0, a, l), scores_.size());
  }

  // E[Y | a, l] under the outcome scores.
  double mean_outcome(int a, int l) const;

  std::size_t index(int y, int a, int l) const {
    return (static_cast<std::size_t>(a) * q_l_.size() + static_cast<std::size_t>(l)) * scores_.size() +
           static_cast<std::size_t>(y);
  }

 private:
  std::vector<double> q_l_;
  std::vector<double> scores_;
  std::vector<double> q_y_;
};

// Throws Error{NonStochastic | NegativeProbability | SizeMismatch} unless every
// pmf row is non-negative and sums to one within kProbabilityTolerance.
void validate_model(const DiscreteModel& model);

// Builds and validates. q_y is nested [a][l][y]; scores default to {0, 1}.
DiscreteModel make_model(std::vector<double> q_l, const std::vector<std::vector<std::vector<double>>>& q_y,
                         std::vector<double> scores = {0.0, 1.0});

// Binary-outcome shorthand: p1[a][l] = Q_Y(1 | a, l).
DiscreteModel make_binary_model(std::vector<double> q_l, const std::vector<std::vector<double>>& p1);

// Surjective map from covariate levels onto coarse levels 0..coarse_levels-1.
class Coarsening {
 public:
  Coarsening() = default;
  explicit Coarsening(std::vector<int> map);

  static Coarsening identity(int levels);

  int fine_levels() const noexcept { return static_cast<int>(map_.size()); }
  int coarse_levels() const noexcept { return coarse_levels_; }
  int operator()(int l) const { return map_[static_cast<std::size_t>(l)]; }
  std::span<const int> map() const noexcept { return map_; }

  // Sums fine-level counts into coarse-level counts.
  std::vector<int> coarsen_counts(std::span<const int> counts) const;

  // Lifts a coarse-level table to fine levels: out[l] = values[c(l)].
  std::vector<double> lift(std::span<const double> values) const;

 private:
  std::vector<int> map_;
  int coarse_levels_ = 0;
};

struct CateTable {
  std::vector<double> delta;
};

struct CoarseModel {
  std::vector<double> q_v;          // Q_V(v)
  std::vector<double> q_l_given_v;  // Q_{L|v}(l) at v = c(l), indexed by l
  DiscreteModel model;              // (Q_V, Q*_Y) as a model over coarse levels
};

// Throws EmptyCoarseLevel when a coarse level carries no covariate mass.
CoarseModel coarsen_model(const DiscreteModel& model, const Coarsening& coarsening);

CateTable cate(const DiscreteModel& model, const std::optional<Coarsening>& coarsening = std::nullopt);

}  // namespace clusterdyn
