#pragma once

#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

#include "clusterdyn/gformula.hpp"
#include "clusterdyn/model.hpp"
#include "clusterdyn/regimes.hpp"

namespace clusterdyn {

// Whole cluster allocated by one regime.
struct RegimeBased {
  RegimeSpec regime;
};

// Independent treatment with probability p[l] for level l.
struct BernoulliAssignment {
  std::vector<double> p;
};

// Per cluster, a fair coin picks one of two rank functions; exactly kappa_n
// are treated. Marginal propensities are 1/2 yet per-cluster treated
// proportions never settle.
struct MixedFlip {
  RankFunction first;
  RankFunction second;
  Constraint constraint = Proportion{0.5};
};

// Cluster split into blocks of iid size (law over 1..max_size); each block
// draws its own resource count kappa ~ kappa_law[size - 1] over 0..size and
// allocates within the block by rank-and-treat on `rank`.
struct SubCluster {
  int max_size = 1;
  std::vector<double> size_law;
  std::vector<std::vector<double>> kappa_law;
  RankFunction rank;
};

using AssignmentMechanism = std::variant<RegimeBased, BernoulliAssignment, MixedFlip, SubCluster>;

void validate_mechanism(const AssignmentMechanism& mechanism, int levels);

struct ClusterData {
  std::vector<int> l;
  std::vector<int> a;
  std::vector<int> y;
  std::vector<int> block;  // empty unless the mechanism uses blocks
  std::uint64_t seed = 0;

  int size() const noexcept { return static_cast<int>(l.size()); }
};

// Covariates iid Q_L, treatments from the mechanism (reading covariates and
// its own randomizer only), outcomes drawn independently from Q_Y(. | a_i, l_i).
ClusterData simulate_cluster(const DiscreteModel& model, const AssignmentMechanism& mechanism, int n,
                             std::uint64_t seed);

// Counterfactual cluster under a target regime.
ClusterData simulate_counterfactual(const DiscreteModel& model, const RegimeSpec& target, int n, std::uint64_t seed);

struct OracleLimits {
  int max_n = 5;
  int max_levels = 3;
  int max_outcomes = 3;
};

// Exact E[h(O^{G+})] by brute-force enumeration of covariate vectors, tie-group
// subsets, and outcome vectors. Returns a pmf over 0..n for distribution
// functionals. Throws LimitExceeded outside `limits`.
std::vector<double> exact_oracle(const DiscreteModel& model, const RegimeSpec& target, int n, const Functional& h,
                                 const OracleLimits& limits = {});

// reps clusters with seeds child_seed(seed, r), returned in rep order.
std::vector<ClusterData> replicate(const DiscreteModel& model, const AssignmentMechanism& mechanism, int n, int reps,
                                   std::uint64_t seed, int threads = 1);

// Streaming form; sink calls are serialized but arrive in completion order.
void replicate(const DiscreteModel& model, const AssignmentMechanism& mechanism, int n, int reps, std::uint64_t seed,
               int threads, const std::function<void(int rep, ClusterData&& data)>& sink);

}  // namespace clusterdyn
