#include "clusterdyn/regimes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "clusterdyn/error.hpp"
#include "clusterdyn/kernels.hpp"
#include "clusterdyn/parallel.hpp"

namespace clusterdyn {

namespace {

constexpr double kMassTolerance = 1e-12;

std::vector<double> component_weights(const RegimeSpec& spec) {
  if (spec.weights.empty()) return std::vector<double>(spec.ranks.size(), 1.0 / static_cast<double>(spec.ranks.size()));
  return spec.weights;
}

// Rank mass on the regime's input space.
std::vector<double> input_mass(const DiscreteModel& model, const RegimeSpec& spec) {
  if (!spec.coarsening) return {model.q_l().begin(), model.q_l().end()};
  std::vector<double> mass(static_cast<std::size_t>(spec.coarsening->coarse_levels()), 0.0);
  for (int l = 0; l < model.levels(); ++l) mass[static_cast<std::size_t>((*spec.coarsening)(l))] += model.q_l(l);
  return mass;
}

int positive_rank_count(std::span<const int> counts, const RankFunction& rank) {
  int out = 0;
  for (std::size_t l = 0; l < counts.size(); ++l)
    if (rank.values[l] > 0.0) out += counts[l];
  return out;
}

void check_counts(std::span<const int> counts, const RankFunction& rank) {
  if (counts.size() != rank.values.size())
    throw Error(ErrorKind::SizeMismatch, "composition has " + std::to_string(counts.size()) +
                                             " levels but the rank function has " +
                                             std::to_string(rank.values.size()));
  for (int c : counts)
    if (c < 0) throw Error(ErrorKind::InvalidArgument, "composition has a negative count");
}

// Treated-count law for one rank function, positive support only.
void single_rank_allocations(std::span<const int> counts, const RankFunction& rank, int kappa, bool gate,
                             double weight, std::vector<WeightedAllocation>& out) {
  const int k = static_cast<int>(counts.size());
  const int effective = gate ? std::min(kappa, positive_rank_count(counts, rank)) : kappa;
  const ThresholdResult thr = omega_threshold(counts, rank, effective);
  Composition base(static_cast<std::size_t>(k), 0);
  if (thr.kind == ThresholdResult::Kind::NoneTreated) {
    out.push_back({base, weight});
    return;
  }
  std::vector<int> group;
  std::vector<int> bounds;
  for (int l = 0; l < k; ++l) {
    const auto ul = static_cast<std::size_t>(l);
    if (counts[ul] == 0) continue;
    if (rank.values[ul] > thr.omega) {
      base[ul] = counts[ul];
    } else if (rank.values[ul] == thr.omega) {
      group.push_back(l);
      bounds.push_back(counts[ul]);
    }
  }
  const int need = effective - thr.s_above;
  const double log_denominator = log_binomial(thr.s_at - thr.s_above, need);
  for_each_bounded_composition(need, bounds, [&](const Composition& t) {
    Composition treated = base;
    double lp = -log_denominator;
    for (std::size_t g = 0; g < group.size(); ++g) {
      treated[static_cast<std::size_t>(group[g])] = t[g];
      lp += log_binomial(bounds[g], t[g]);
    }
    out.push_back({std::move(treated), weight * std::exp(lp)});
  });
}

}  // namespace

RegimeSpec RegimeSpec::rank_preserving(RankFunction rank, Constraint constraint, bool gate,
                                       std::optional<Coarsening> coarsening) {
  RegimeSpec spec;
  spec.ranks.push_back(std::move(rank));
  spec.weights = {1.0};
  spec.constraint = constraint;
  spec.gate = gate;
  spec.coarsening = std::move(coarsening);
  return spec;
}

RegimeSpec RegimeSpec::mixture(std::vector<RankFunction> ranks, std::vector<double> weights, Constraint constraint,
                               bool gate, std::optional<Coarsening> coarsening) {
  RegimeSpec spec;
  spec.ranks = std::move(ranks);
  spec.weights = std::move(weights);
  spec.constraint = constraint;
  spec.gate = gate;
  spec.coarsening = std::move(coarsening);
  return spec;
}

RegimeSpec RegimeSpec::with_constraint(Constraint c) const {
  RegimeSpec copy = *this;
  copy.constraint = c;
  return copy;
}

void validate_regime(const RegimeSpec& spec, int model_levels) {
  if (spec.ranks.empty()) throw Error(ErrorKind::InvalidArgument, "regime has no rank function");
  const int expected = spec.coarsening ? spec.coarsening->coarse_levels() : model_levels;
  if (spec.coarsening && spec.coarsening->fine_levels() != model_levels)
    throw Error(ErrorKind::SizeMismatch, "coarsening domain does not match model levels");
  for (const auto& r : spec.ranks) {
    if (r.size() != expected)
      throw Error(ErrorKind::SizeMismatch, "rank function has " + std::to_string(r.size()) + " entries, expected " +
                                               std::to_string(expected));
    for (double v : r.values)
      if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "rank values must be finite");
  }
  if (!spec.weights.empty()) {
    if (spec.weights.size() != spec.ranks.size())
      throw Error(ErrorKind::SizeMismatch, "mixture weights do not match the number of rank functions");
    double sum = 0.0;
    for (double w : spec.weights) {
      if (!(w >= 0.0)) throw Error(ErrorKind::NegativeProbability, "mixture weight is negative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > kProbabilityTolerance)
      throw Error(ErrorKind::NonStochastic, "mixture weights sum to " + std::to_string(sum));
  }
  if (const auto* p = std::get_if<Proportion>(&spec.constraint)) {
    if (!(p->kappa_star >= 0.0 && p->kappa_star <= 1.0))
      throw Error(ErrorKind::InvalidArgument, "kappa_star must lie in [0, 1]");
  } else if (std::get<ExactCount>(spec.constraint).kappa < 0) {
    throw Error(ErrorKind::InvalidArgument, "kappa must be non-negative");
  }
}

int resource_count(const Constraint& constraint, int n) {
  if (const auto* p = std::get_if<Proportion>(&constraint)) {
    if (!(p->kappa_star >= 0.0 && p->kappa_star <= 1.0))
      throw Error(ErrorKind::InvalidArgument, "kappa_star must lie in [0, 1]");
    // Guard against n * kappa* landing a hair below an integer.
    const int kappa = static_cast<int>(std::floor(static_cast<double>(n) * p->kappa_star + 1e-9));
    return std::clamp(kappa, 0, n);
  }
  const int kappa = std::get<ExactCount>(constraint).kappa;
  if (kappa < 0 || kappa > n)
    throw Error(ErrorKind::InvalidArgument,
                "kappa " + std::to_string(kappa) + " outside 0.." + std::to_string(n));
  return kappa;
}

RegimeSpec lift_to_fine(const RegimeSpec& spec) {
  if (!spec.coarsening) return spec;
  RegimeSpec out = spec;
  for (auto& r : out.ranks) r.values = spec.coarsening->lift(r.values);
  out.coarsening.reset();
  return out;
}

ThresholdResult omega_threshold(std::span<const int> counts, const RankFunction& rank, int kappa) {
  check_counts(counts, rank);
  const int n = total(counts);
  if (kappa < 0 || kappa > n)
    throw Error(ErrorKind::InvalidArgument, "kappa " + std::to_string(kappa) + " outside 0.." + std::to_string(n));
  ThresholdResult out;
  if (kappa == 0) return out;

  std::vector<double> present;
  for (std::size_t l = 0; l < counts.size(); ++l)
    if (counts[l] > 0) present.push_back(rank.values[l]);
  std::sort(present.begin(), present.end(), std::greater<>());
  present.erase(std::unique(present.begin(), present.end()), present.end());

  int above = 0;
  for (double r : present) {
    int at = above;
    for (std::size_t l = 0; l < counts.size(); ++l)
      if (rank.values[l] == r) at += counts[l];
    if (kappa <= at) {
      out.kind = ThresholdResult::Kind::Threshold;
      out.omega = r;
      out.s_at = at;
      out.s_above = above;
      return out;
    }
    above = at;
  }
  throw Error(ErrorKind::InvalidArgument, "threshold search fell through");  // unreachable: kappa <= n
}

InterventionDensity conditional_intervention_density(std::span<const int> counts, const RankFunction& rank, int kappa,
                                                     bool gate) {
  check_counts(counts, rank);
  const int effective = gate ? std::min(kappa, positive_rank_count(counts, rank)) : kappa;
  const ThresholdResult thr = omega_threshold(counts, rank, effective);
  InterventionDensity out{std::vector<double>(counts.size(), 0.0)};
  if (thr.kind == ThresholdResult::Kind::NoneTreated) return out;
  const double fraction =
      static_cast<double>(effective - thr.s_above) / static_cast<double>(thr.s_at - thr.s_above);
  for (std::size_t l = 0; l < counts.size(); ++l) {
    const double r = rank.values[l];
    if (gate && r <= 0.0) continue;
    if (r > thr.omega)
      out.treat[l] = 1.0;
    else if (r == thr.omega)
      out.treat[l] = fraction;
  }
  return out;
}

InterventionDensity mixture_conditional_density(std::span<const int> counts, const RegimeSpec& spec) {
  if (spec.ranks.empty()) throw Error(ErrorKind::InvalidArgument, "regime has no rank function");
  const int kappa = resource_count(spec.constraint, total(counts));
  const auto weights = component_weights(spec);
  InterventionDensity out{std::vector<double>(counts.size(), 0.0)};
  for (std::size_t j = 0; j < spec.ranks.size(); ++j) {
    if (weights[j] == 0.0) continue;
    const auto part = conditional_intervention_density(counts, spec.ranks[j], kappa, spec.gate);
    kernels::axpy(weights[j], part.treat, out.treat);
  }
  return out;
}

InterventionDensity conditional_intervention_density(std::span<const int> counts, const RegimeSpec& spec) {
  if (spec.ranks.size() == 1)
    return conditional_intervention_density(counts, spec.ranks.front(), resource_count(spec.constraint, total(counts)),
                                            spec.gate);
  return mixture_conditional_density(counts, spec);
}

InterventionDensity marginal_intervention_density(const DiscreteModel& model, const RegimeSpec& spec, int n,
                                                  int threads) {
  validate_regime(spec, model.levels());
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "cluster size must be at least 1");
  const std::vector<double> mass = input_mass(model, spec);
  const int nv = spec.input_levels();
  const Compositions others(n - 1, nv);
  const std::size_t shards = shard_count(others.size());
  std::vector<std::vector<double>> parts(shards, std::vector<double>(static_cast<std::size_t>(nv), 0.0));

  run_shards(shards, threads, [&](std::size_t s) {
    const auto [begin, end] = shard_range(others.size(), shards, s);
    auto& acc = parts[s];
    Composition full;
    for (const Composition& m : others.slice(begin, end)) {
      const double w = covariate_composition_pmf(m, mass);
      if (w == 0.0) continue;
      for (int v = 0; v < nv; ++v) {
        full = m;
        ++full[static_cast<std::size_t>(v)];
        acc[static_cast<std::size_t>(v)] += w * conditional_intervention_density(full, spec).treat[static_cast<std::size_t>(v)];
      }
    }
  });

  auto reduced = pairwise_reduce(std::move(parts), [](std::vector<double> a, std::vector<double> b) {
    kernels::axpy(1.0, b, a);
    return a;
  });
  InterventionDensity out{std::vector<double>(static_cast<std::size_t>(model.levels()))};
  for (int l = 0; l < model.levels(); ++l)
    out.treat[static_cast<std::size_t>(l)] = std::clamp(reduced[static_cast<std::size_t>(spec.input_level(l))], 0.0, 1.0);
  return out;
}

double marginal_intervention_probability(const DiscreteModel& model, const RegimeSpec& spec, int n, int level) {
  if (level < 0 || level >= model.levels()) throw Error(ErrorKind::SizeMismatch, "level index out of range");
  if (!(model.q_l(level) > 0.0))
    throw Error(ErrorKind::ZeroMassLevel, "level " + std::to_string(level) + " has zero covariate mass");
  return marginal_intervention_density(model, spec, n).treat[static_cast<std::size_t>(level)];
}

std::vector<WeightedAllocation> treatment_allocations(std::span<const int> counts, const RegimeSpec& spec) {
  if (spec.ranks.empty()) throw Error(ErrorKind::InvalidArgument, "regime has no rank function");
  const int kappa = resource_count(spec.constraint, total(counts));
  const auto weights = component_weights(spec);
  std::vector<WeightedAllocation> raw;
  for (std::size_t j = 0; j < spec.ranks.size(); ++j) {
    check_counts(counts, spec.ranks[j]);
    if (weights[j] == 0.0) continue;
    single_rank_allocations(counts, spec.ranks[j], kappa, spec.gate, weights[j], raw);
  }
  if (spec.ranks.size() == 1) return raw;
  std::map<Composition, double> merged;
  for (auto& a : raw) merged[a.treated] += a.weight;
  std::vector<WeightedAllocation> out;
  out.reserve(merged.size());
  for (auto& [t, w] : merged) out.push_back({t, w});
  return out;
}

double compositional_intervention_density(std::span<const int> b, std::span<const int> counts,
                                          const RegimeSpec& spec) {
  const std::size_t k = counts.size();
  if (b.size() != 2 * k) throw Error(ErrorKind::SizeMismatch, "joint composition must have 2 cells per level");
  Composition treated(k);
  for (std::size_t l = 0; l < k; ++l) {
    const int b0 = b[joint_cell(0, static_cast<int>(l), static_cast<int>(k))];
    const int b1 = b[joint_cell(1, static_cast<int>(l), static_cast<int>(k))];
    if (b0 < 0 || b1 < 0 || b0 + b1 != counts[l])
      throw Error(ErrorKind::IncompatibleComposition,
                  "joint composition margin differs from the covariate composition at level " + std::to_string(l));
    treated[l] = b1;
  }
  double p = 0.0;
  for (const auto& a : treatment_allocations(counts, spec))
    if (a.treated == treated) p += a.weight;
  return p;
}

LargeClusterDensity large_cluster_density(std::span<const double> mass, const RankFunction& rank, double kappa_star,
                                          bool gate) {
  if (mass.size() != rank.values.size()) throw Error(ErrorKind::SizeMismatch, "rank mass and rank function differ");
  if (!(kappa_star >= 0.0 && kappa_star <= 1.0)) throw Error(ErrorKind::InvalidArgument, "kappa_star must lie in [0, 1]");

  std::vector<std::pair<double, double>> groups;  // (rank value, mass), descending
  for (std::size_t l = 0; l < mass.size(); ++l) {
    if (!(mass[l] > 0.0)) continue;
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == rank.values[l]; });
    if (it == groups.end())
      groups.emplace_back(rank.values[l], mass[l]);
    else
      it->second += mass[l];
  }
  if (groups.empty()) throw Error(ErrorKind::InvalidArgument, "rank mass is identically zero");
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  // omega_0 = inf{c : P(rank > c) <= kappa*}: the lowest group whose strict
  // upper tail still fits in the budget.
  double above = 0.0;
  double omega = groups.front().first;
  double above_omega = 0.0;
  double at_omega = groups.front().second;
  for (const auto& [value, m] : groups) {
    if (above > kappa_star + kMassTolerance) break;
    omega = value;
    above_omega = above;
    at_omega = m;
    above += m;
  }
  const double fraction = std::clamp((kappa_star - above_omega) / at_omega, 0.0, 1.0);

  LargeClusterDensity out;
  out.density.treat.assign(mass.size(), 0.0);
  if (gate && omega <= 0.0) {
    out.threshold = 0.0;
    for (std::size_t l = 0; l < mass.size(); ++l) out.density.treat[l] = rank.values[l] > 0.0 ? 1.0 : 0.0;
    return out;
  }
  out.threshold = omega;
  for (std::size_t l = 0; l < mass.size(); ++l) {
    if (rank.values[l] > omega)
      out.density.treat[l] = 1.0;
    else if (rank.values[l] == omega)
      out.density.treat[l] = fraction;
  }
  return out;
}

LargeClusterDensity large_cluster_density(const DiscreteModel& model, const RegimeSpec& spec) {
  validate_regime(spec, model.levels());
  const auto* p = std::get_if<Proportion>(&spec.constraint);
  if (!p) throw Error(ErrorKind::InvalidArgument, "large-cluster density needs a kappa_star constraint");
  const auto mass = input_mass(model, spec);
  const auto weights = component_weights(spec);
  std::vector<double> mixed(mass.size(), 0.0);
  LargeClusterDensity out;
  for (std::size_t j = 0; j < spec.ranks.size(); ++j) {
    const auto part = large_cluster_density(mass, spec.ranks[j], p->kappa_star, spec.gate);
    kernels::axpy(weights[j], part.density.treat, mixed);
    out.threshold = part.threshold;
  }
  if (spec.ranks.size() > 1) out.threshold = std::numeric_limits<double>::quiet_NaN();
  out.density.treat.resize(static_cast<std::size_t>(model.levels()));
  for (int l = 0; l < model.levels(); ++l)
    out.density.treat[static_cast<std::size_t>(l)] = mixed[static_cast<std::size_t>(spec.input_level(l))];
  return out;
}

RegimeSpec optimal_regime(const DiscreteModel& model, const std::optional<Coarsening>& coarsening,
                          Constraint constraint, bool gated) {
  return RegimeSpec::rank_preserving(RankFunction{cate(model, coarsening).delta}, constraint, gated, coarsening);
}

std::vector<WeightedAllocation> decompose_fractional_allocation(std::span<const int> counts, std::span<const double> p) {
  const std::size_t k = counts.size();
  if (p.size() != k) throw Error(ErrorKind::SizeMismatch, "target density and composition differ in length");

  std::vector<double> target(k);
  double kappa_real = 0.0;
  for (std::size_t l = 0; l < k; ++l) {
    if (!(p[l] >= 0.0 && p[l] <= 1.0))
      throw Error(ErrorKind::InfeasibleTarget, "p(" + std::to_string(l) + ") outside [0, 1]");
    if (counts[l] < 0) throw Error(ErrorKind::InvalidArgument, "composition has a negative count");
    target[l] = counts[l] * p[l];
    if (std::abs(target[l] - std::round(target[l])) < 1e-9) target[l] = std::round(target[l]);
    kappa_real += target[l];
  }
  if (std::abs(kappa_real - std::round(kappa_real)) > 1e-9)
    throw Error(ErrorKind::InfeasibleTarget, "expected treated count " + std::to_string(kappa_real) + " is not an integer");

  Composition floor_part(k);
  std::vector<double> residual(k);  // fractional parts, scaled by the remaining weight
  for (std::size_t l = 0; l < k; ++l) {
    floor_part[l] = static_cast<int>(std::floor(target[l]));
    residual[l] = target[l] - floor_part[l];
  }
  const int extra = static_cast<int>(std::llround(kappa_real)) - total(floor_part);

  std::vector<WeightedAllocation> out;
  double remaining = 1.0;
  constexpr double kSnap = 1e-13;
  while (remaining > kSnap) {
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return residual[a] > residual[b]; });
    std::vector<bool> chosen(k, false);
    for (int j = 0; j < extra; ++j) chosen[order[static_cast<std::size_t>(j)]] = true;

    double step = remaining;
    for (std::size_t l = 0; l < k; ++l) step = std::min(step, chosen[l] ? residual[l] : remaining - residual[l]);
    if (step <= kSnap) step = remaining;  // only rounding noise left

    Composition vertex = floor_part;
    for (std::size_t l = 0; l < k; ++l)
      if (chosen[l]) ++vertex[l];
    out.push_back({std::move(vertex), step});

    remaining -= step;
    for (std::size_t l = 0; l < k; ++l) {
      if (chosen[l]) residual[l] -= step;
      if (std::abs(residual[l]) < kSnap) residual[l] = 0.0;
      if (std::abs(residual[l] - remaining) < kSnap) residual[l] = remaining;
      residual[l] = std::clamp(residual[l], 0.0, std::max(remaining, 0.0));
    }
  }
  return out;
}

std::vector<int> sample_allocation(std::span<const int> levels, const RegimeSpec& spec, Rng& rng) {
  if (spec.ranks.empty()) throw Error(ErrorKind::InvalidArgument, "regime has no rank function");
  const int n = static_cast<int>(levels.size());
  const int kappa = resource_count(spec.constraint, n);
  const std::uint64_t stream = rng.next_u64();
  Rng mixture_rng(child_seed(stream, 0));
  Rng tie_rng(child_seed(stream, 1));

  std::size_t component = 0;
  if (spec.ranks.size() > 1) component = static_cast<std::size_t>(mixture_rng.discrete(component_weights(spec)));
  const RankFunction& rank = spec.ranks[component];

  struct Entry {
    double rank;
    double key;
    int index;
  };
  std::vector<Entry> order;
  order.reserve(levels.size());
  for (int i = 0; i < n; ++i) {
    const int input = spec.input_level(levels[static_cast<std::size_t>(i)]);
    if (input < 0 || input >= rank.size()) throw Error(ErrorKind::SizeMismatch, "covariate level out of range");
    order.push_back({rank(input), tie_rng.uniform(), i});
  }
  std::sort(order.begin(), order.end(), [](const Entry& a, const Entry& b) {
    if (a.rank != b.rank) return a.rank > b.rank;
    if (a.key != b.key) return a.key < b.key;
    return a.index < b.index;
  });
  std::vector<int> treat(levels.size(), 0);
  int given = 0;
  for (const auto& e : order) {
    if (given == kappa) break;
    if (spec.gate && e.rank <= 0.0) break;
    treat[static_cast<std::size_t>(e.index)] = 1;
    ++given;
  }
  return treat;
}

}  // namespace clusterdyn
