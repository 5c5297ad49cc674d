#include "clusterdyn/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <string>

#include "clusterdyn/error.hpp"
#include "clusterdyn/parallel.hpp"
#include "clusterdyn/rng.hpp"

namespace clusterdyn {

namespace {

void check_law(const std::vector<double>& law, const std::string& name) {
  double sum = 0.0;
  for (double p : law) {
    if (!(p >= 0.0)) throw Error(ErrorKind::NegativeProbability, name + " has a negative entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbabilityTolerance) throw Error(ErrorKind::NonStochastic, name + " does not sum to 1");
}

std::vector<int> assign(const AssignmentMechanism& mechanism, const std::vector<int>& levels, Rng& rng,
                        std::vector<int>& block) {
  const int n = static_cast<int>(levels.size());
  return std::visit(
      [&](const auto& mech) -> std::vector<int> {
        using T = std::decay_t<decltype(mech)>;
        if constexpr (std::is_same_v<T, RegimeBased>) {
          return sample_allocation(levels, mech.regime, rng);
        } else if constexpr (std::is_same_v<T, BernoulliAssignment>) {
          std::vector<int> a(levels.size());
          for (std::size_t i = 0; i < levels.size(); ++i)
            a[i] = rng.bernoulli(mech.p[static_cast<std::size_t>(levels[i])]) ? 1 : 0;
          return a;
        } else if constexpr (std::is_same_v<T, MixedFlip>) {
          const bool pick_first = rng.bernoulli(0.5);
          const auto spec = RegimeSpec::rank_preserving(pick_first ? mech.first : mech.second, mech.constraint);
          return sample_allocation(levels, spec, rng);
        } else {
          std::vector<int> a(levels.size(), 0);
          block.assign(levels.size(), 0);
          int start = 0;
          int id = 0;
          std::vector<int> members;
          while (start < n) {
            const int drawn = rng.discrete(mech.size_law) + 1;
            const int size = std::min(drawn, n - start);  // last block truncated
            const int kappa = rng.discrete(mech.kappa_law[static_cast<std::size_t>(size - 1)]);
            members.assign(levels.begin() + start, levels.begin() + start + size);
            const auto spec = RegimeSpec::rank_preserving(mech.rank, ExactCount{std::min(kappa, size)});
            const auto treated = sample_allocation(members, spec, rng);
            for (int j = 0; j < size; ++j) {
              a[static_cast<std::size_t>(start + j)] = treated[static_cast<std::size_t>(j)];
              block[static_cast<std::size_t>(start + j)] = id;
            }
            start += size;
            ++id;
          }
          return a;
        }
      },
      mechanism);
}

std::vector<int> draw_covariates(const DiscreteModel& model, int n, Rng& rng) {
  std::vector<int> l(static_cast<std::size_t>(n));
  for (auto& v : l) v = rng.discrete(model.q_l());
  return l;
}

std::vector<int> draw_outcomes(const DiscreteModel& model, const std::vector<int>& l, const std::vector<int>& a,
                               Rng& rng) {
  std::vector<int> y(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) y[i] = rng.discrete(model.q_y_row(a[i], l[i]));
  return y;
}

}  // namespace

void validate_mechanism(const AssignmentMechanism& mechanism, int levels) {
  std::visit(
      [&](const auto& mech) {
        using T = std::decay_t<decltype(mech)>;
        if constexpr (std::is_same_v<T, RegimeBased>) {
          validate_regime(mech.regime, levels);
        } else if constexpr (std::is_same_v<T, BernoulliAssignment>) {
          if (mech.p.size() != static_cast<std::size_t>(levels))
            throw Error(ErrorKind::SizeMismatch, "bernoulli mechanism needs one probability per level");
          for (double p : mech.p)
            if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidArgument, "bernoulli probability outside [0, 1]");
        } else if constexpr (std::is_same_v<T, MixedFlip>) {
          validate_regime(RegimeSpec::rank_preserving(mech.first, mech.constraint), levels);
          validate_regime(RegimeSpec::rank_preserving(mech.second, mech.constraint), levels);
        } else {
          if (mech.max_size < 1) throw Error(ErrorKind::InvalidArgument, "sub-cluster max_size must be >= 1");
          if (mech.size_law.size() != static_cast<std::size_t>(mech.max_size))
            throw Error(ErrorKind::SizeMismatch, "size_law must cover sizes 1..max_size");
          check_law(mech.size_law, "size_law");
          if (mech.kappa_law.size() != static_cast<std::size_t>(mech.max_size))
            throw Error(ErrorKind::SizeMismatch, "kappa_law needs one law per block size");
          for (std::size_t s = 0; s < mech.kappa_law.size(); ++s) {
            if (mech.kappa_law[s].size() != s + 2)
              throw Error(ErrorKind::SizeMismatch, "kappa_law for size " + std::to_string(s + 1) + " must cover 0.." +
                                                       std::to_string(s + 1));
            check_law(mech.kappa_law[s], "kappa_law[" + std::to_string(s) + "]");
          }
          if (mech.rank.size() != levels) throw Error(ErrorKind::SizeMismatch, "sub-cluster rank needs one value per level");
        }
      },
      mechanism);
}

ClusterData simulate_cluster(const DiscreteModel& model, const AssignmentMechanism& mechanism, int n,
                             std::uint64_t seed) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "cluster size must be at least 1");
  validate_mechanism(mechanism, model.levels());
  Rng l_rng(child_seed(seed, 0));
  Rng a_rng(child_seed(seed, 1));
  Rng y_rng(child_seed(seed, 2));
  ClusterData out;
  out.seed = seed;
  out.l = draw_covariates(model, n, l_rng);
  out.a = assign(mechanism, out.l, a_rng, out.block);
  out.y = draw_outcomes(model, out.l, out.a, y_rng);
  return out;
}

ClusterData simulate_counterfactual(const DiscreteModel& model, const RegimeSpec& target, int n, std::uint64_t seed) {
  return simulate_cluster(model, RegimeBased{target}, n, seed);
}

std::vector<double> exact_oracle(const DiscreteModel& model, const RegimeSpec& target, int n, const Functional& h,
                                 const OracleLimits& limits) {
  const int k = model.levels();
  const int m = model.outcomes();
  if (n < 1 || n > limits.max_n || k > limits.max_levels || m > limits.max_outcomes)
    throw Error(ErrorKind::LimitExceeded, "oracle limited to n <= " + std::to_string(limits.max_n) + ", K <= " +
                                              std::to_string(limits.max_levels) + ", M <= " +
                                              std::to_string(limits.max_outcomes));
  validate_regime(target, k);
  if (h.kind == Functional::Kind::Custom && !h.custom)
    throw Error(ErrorKind::InvalidArgument, "custom functional has no evaluator");

  const bool distribution = h.is_distribution();
  std::vector<double> result(distribution ? static_cast<std::size_t>(n) + 1 : 1, 0.0);
  const int kappa = resource_count(target.constraint, n);
  std::vector<double> weights = target.weights;
  if (weights.empty()) weights.assign(target.ranks.size(), 1.0 / static_cast<double>(target.ranks.size()));

  std::vector<int> l(static_cast<std::size_t>(n), 0);
  std::vector<int> a(static_cast<std::size_t>(n), 0);
  std::vector<int> y(static_cast<std::size_t>(n), 0);

  auto outcome_pass = [&](double p_assign) {
    std::fill(y.begin(), y.end(), 0);
    for (;;) {
      double p = p_assign;
      for (int i = 0; i < n; ++i)
        p *= model.q_y(y[static_cast<std::size_t>(i)], a[static_cast<std::size_t>(i)], l[static_cast<std::size_t>(i)]);
      if (p > 0.0) {
        switch (h.kind) {
          case Functional::Kind::MeanOutcome: {
            double s = 0.0;
            for (int v : y) s += model.score(v);
            result[0] += p * s / n;
            break;
          }
          case Functional::Kind::TreatedCountDistribution:
            result[static_cast<std::size_t>(std::accumulate(a.begin(), a.end(), 0))] += p;
            break;
          case Functional::Kind::OutcomeCountDistribution:
            result[static_cast<std::size_t>(std::count(y.begin(), y.end(), h.outcome))] += p;
            break;
          case Functional::Kind::IndicatorAtLeast:
            if (std::count(y.begin(), y.end(), h.outcome) >= h.threshold) result[0] += p;
            break;
          case Functional::Kind::Custom: {
            Composition o(static_cast<std::size_t>(2 * k * m), 0);
            for (int i = 0; i < n; ++i)
              ++o[static_cast<std::size_t>(outcome_cell(y[static_cast<std::size_t>(i)], a[static_cast<std::size_t>(i)],
                                                        l[static_cast<std::size_t>(i)], k, m))];
            result[0] += p * h.custom(o);
            break;
          }
        }
      }
      int i = 0;
      for (; i < n; ++i) {
        if (++y[static_cast<std::size_t>(i)] < m) break;
        y[static_cast<std::size_t>(i)] = 0;
      }
      if (i == n) break;
    }
  };

  for (;;) {
    double p_l = 1.0;
    for (int v : l) p_l *= model.q_l(v);
    if (p_l > 0.0) {
      for (std::size_t c = 0; c < target.ranks.size(); ++c) {
        if (weights[c] == 0.0) continue;
        const RankFunction& rank = target.ranks[c];
        std::vector<double> r(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) r[static_cast<std::size_t>(i)] = rank(target.input_level(l[static_cast<std::size_t>(i)]));

        int eligible = n;
        if (target.gate) eligible = static_cast<int>(std::count_if(r.begin(), r.end(), [](double v) { return v > 0.0; }));
        int remaining = std::min(kappa, eligible);

        // Walk rank groups from the top; the group where the budget runs out
        // is resolved by enumerating all equally likely subsets.
        std::vector<double> values(r);
        std::sort(values.begin(), values.end(), std::greater<>());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        std::fill(a.begin(), a.end(), 0);
        std::vector<int> tie_group;
        int tie_need = 0;
        for (double v : values) {
          if (remaining == 0) break;
          std::vector<int> members;
          for (int i = 0; i < n; ++i)
            if (r[static_cast<std::size_t>(i)] == v) members.push_back(i);
          if (static_cast<int>(members.size()) <= remaining) {
            for (int i : members) a[static_cast<std::size_t>(i)] = 1;
            remaining -= static_cast<int>(members.size());
          } else {
            tie_group = members;
            tie_need = remaining;
            remaining = 0;
          }
        }
        if (tie_group.empty()) {
          outcome_pass(p_l * weights[c]);
        } else {
          const int g = static_cast<int>(tie_group.size());
          std::vector<int> mask(static_cast<std::size_t>(g), 0);
          std::fill(mask.end() - tie_need, mask.end(), 1);
          std::vector<std::vector<int>> subsets;
          do subsets.push_back(mask);
          while (std::next_permutation(mask.begin(), mask.end()));
          const double p_subset = 1.0 / static_cast<double>(subsets.size());
          const std::vector<int> fixed = a;
          for (const auto& s : subsets) {
            a = fixed;
            for (int j = 0; j < g; ++j)
              if (s[static_cast<std::size_t>(j)]) a[static_cast<std::size_t>(tie_group[static_cast<std::size_t>(j)])] = 1;
            outcome_pass(p_l * weights[c] * p_subset);
          }
        }
      }
    }
    int i = 0;
    for (; i < n; ++i) {
      if (++l[static_cast<std::size_t>(i)] < k) break;
      l[static_cast<std::size_t>(i)] = 0;
    }
    if (i == n) break;
  }
  return result;
}

std::vector<ClusterData> replicate(const DiscreteModel& model, const AssignmentMechanism& mechanism, int n, int reps,
                                   std::uint64_t seed, int threads) {
  std::vector<ClusterData> out(static_cast<std::size_t>(std::max(reps, 0)));
  replicate(model, mechanism, n, reps, seed, threads,
            [&](int rep, ClusterData&& data) { out[static_cast<std::size_t>(rep)] = std::move(data); });
  return out;
}

void replicate(const DiscreteModel& model, const AssignmentMechanism& mechanism, int n, int reps, std::uint64_t seed,
               int threads, const std::function<void(int rep, ClusterData&& data)>& sink) {
  if (reps <= 0) return;
  validate_mechanism(mechanism, model.levels());
  std::mutex sink_mutex;
  run_shards(static_cast<std::size_t>(reps), threads, [&](std::size_t r) {
    ClusterData data = simulate_cluster(model, mechanism, n, child_seed(seed, r));
    std::lock_guard lock(sink_mutex);
    sink(static_cast<int>(r), std::move(data));
  });
}

}  // namespace clusterdyn
