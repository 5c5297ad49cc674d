#include "clusterdyn/gformula.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "clusterdyn/error.hpp"
#include "clusterdyn/kernels.hpp"
#include "clusterdyn/parallel.hpp"

namespace clusterdyn {

namespace {

struct Accumulator {
  std::vector<double> values;
  std::uint64_t support = 0;
};

Accumulator combine(Accumulator a, Accumulator b) {
  kernels::axpy(1.0, b.values, a.values);
  a.support += b.support;
  return a;
}

std::uint64_t saturating_count(int n, int k) {
  try {
    return composition_count(n, k);
  } catch (const Error&) {
    return std::numeric_limits<std::uint64_t>::max();
  }
}

std::uint64_t checked_index_size(int n, int k, std::uint64_t budget) {
  const std::uint64_t size = saturating_count(n, k);
  if (size > budget)
    throw Error(ErrorKind::BudgetExceeded,
                "evaluation ranges over " +
                    (size == std::numeric_limits<std::uint64_t>::max() ? std::string("more than 2^64")
                                                                       : std::to_string(size)) +
                    " terms, budget is " + std::to_string(budget));
  return size;
}

void check_functional(const Functional& h, int outcomes) {
  if (h.kind == Functional::Kind::Custom && !h.custom)
    throw Error(ErrorKind::InvalidArgument, "custom functional has no evaluator");
  if ((h.kind == Functional::Kind::OutcomeCountDistribution || h.kind == Functional::Kind::IndicatorAtLeast) &&
      (h.outcome < 0 || h.outcome >= outcomes))
    throw Error(ErrorKind::InvalidArgument, "functional outcome index out of range");
}

std::vector<double> binomial_pmf(int trials, double p) {
  std::vector<double> out(static_cast<std::size_t>(trials) + 1, 0.0);
  if (p <= 0.0) {
    out[0] = 1.0;
    return out;
  }
  if (p >= 1.0) {
    out.back() = 1.0;
    return out;
  }
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  for (int k = 0; k <= trials; ++k)
    out[static_cast<std::size_t>(k)] = std::exp(log_binomial(trials, k) + k * lp + (trials - k) * lq);
  return out;
}

// Law of #{Y = y} for independent outcome draws with b(a, l) individuals per cell.
std::vector<double> outcome_count_pmf(const DiscreteModel& model, std::span<const int> b, int y, int n) {
  const int k = model.levels();
  std::vector<double> dist{1.0};
  for (int a = 0; a < 2; ++a) {
    for (int l = 0; l < k; ++l) {
      const int count = b[static_cast<std::size_t>(joint_cell(a, l, k))];
      if (count == 0) continue;
      const auto cell = binomial_pmf(count, model.q_y(y, a, l));
      std::vector<double> next(dist.size() + cell.size() - 1, 0.0);
      kernels::convolve_accumulate(dist, cell, next);
      dist = std::move(next);
    }
  }
  dist.resize(static_cast<std::size_t>(n) + 1, 0.0);
  return dist;
}

// Visits every outcome composition o compatible with b (positive probability only).
void for_each_outcome_composition(const DiscreteModel& model, std::span<const int> b,
                                  const std::function<void(const Composition&, double)>& fn) {
  const int k = model.levels();
  const int m = model.outcomes();
  struct Cell {
    int offset;
    std::vector<std::pair<Composition, double>> options;
  };
  std::vector<Cell> cells;
  for (int a = 0; a < 2; ++a) {
    for (int l = 0; l < k; ++l) {
      const int count = b[static_cast<std::size_t>(joint_cell(a, l, k))];
      if (count == 0) continue;
      Cell cell{outcome_cell(0, a, l, k, m), {}};
      const auto row = model.q_y_row(a, l);
      for (const auto& z : Compositions(count, m)) {
        const double p = covariate_composition_pmf(z, row);
        if (p > 0.0) cell.options.emplace_back(z, p);
      }
      cells.push_back(std::move(cell));
    }
  }
  Composition o(static_cast<std::size_t>(2 * k * m), 0);
  std::function<void(std::size_t, double)> rec = [&](std::size_t c, double p) {
    if (c == cells.size()) {
      fn(o, p);
      return;
    }
    for (const auto& [z, pz] : cells[c].options) {
      std::copy(z.begin(), z.end(), o.begin() + cells[c].offset);
      rec(c + 1, p * pz);
    }
  };
  rec(0, 1.0);
}

}  // namespace

double individual_gformula_expectation(const DiscreteModel& model, const RegimeSpec& spec, int n,
                                       const ObservationScore& h, int threads) {
  const InterventionDensity q = marginal_intervention_density(model, spec, n, threads);
  const int k = model.levels();
  std::vector<double> per_level(static_cast<std::size_t>(k), 0.0);
  for (int l = 0; l < k; ++l) {
    double v = 0.0;
    for (int a = 0; a < 2; ++a) {
      double inner = 0.0;
      for (int y = 0; y < model.outcomes(); ++y)
        inner += (h ? h(y, a, l) : model.score(y)) * model.q_y(y, a, l);
      v += q(a, l) * inner;
    }
    per_level[static_cast<std::size_t>(l)] = v;
  }
  return kernels::dot(model.q_l(), per_level);
}

GFormulaReport compositional_gformula_expectation(const DiscreteModel& model, const RegimeSpec& spec, int n,
                                                  const Functional& h, const EvalOptions& options) {
  validate_regime(spec, model.levels());
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "cluster size must be at least 1");
  check_functional(h, model.outcomes());
  const RegimeSpec fine = lift_to_fine(spec);
  const int k = model.levels();
  const int m = model.outcomes();
  const bool custom = h.kind == Functional::Kind::Custom;

  GFormulaReport report;
  report.n = n;
  report.kappa = resource_count(spec.constraint, n);
  report.index_terms = checked_index_size(n, custom ? 2 * k * m : 2 * k, options.budget);
  report.full_terms = saturating_count(n, 2 * k * m);

  const std::size_t width = h.is_distribution() ? static_cast<std::size_t>(n) + 1 : 1;
  const Compositions covariates(n, k);
  const std::size_t shards = shard_count(covariates.size());
  std::vector<Accumulator> parts(shards, Accumulator{std::vector<double>(width, 0.0), 0});

  run_shards(shards, options.threads, [&](std::size_t s) {
    const auto [begin, end] = shard_range(covariates.size(), shards, s);
    Accumulator& acc = parts[s];
    Composition b(static_cast<std::size_t>(2 * k));
    for (const Composition& counts : covariates.slice(begin, end)) {
      const double w = covariate_composition_pmf(counts, model.q_l());
      if (w == 0.0) continue;
      for (const auto& alloc : treatment_allocations(counts, fine)) {
        const double p = w * alloc.weight;
        if (p == 0.0) continue;
        for (int l = 0; l < k; ++l) {
          const auto ul = static_cast<std::size_t>(l);
          b[static_cast<std::size_t>(joint_cell(0, l, k))] = counts[ul] - alloc.treated[ul];
          b[static_cast<std::size_t>(joint_cell(1, l, k))] = alloc.treated[ul];
        }
        switch (h.kind) {
          case Functional::Kind::MeanOutcome: {
            double sum = 0.0;
            for (int l = 0; l < k; ++l)
              for (int a = 0; a < 2; ++a) sum += b[static_cast<std::size_t>(joint_cell(a, l, k))] * model.mean_outcome(a, l);
            acc.values[0] += p * sum / n;
            ++acc.support;
            break;
          }
          case Functional::Kind::TreatedCountDistribution:
            acc.values[static_cast<std::size_t>(total(alloc.treated))] += p;
            ++acc.support;
            break;
          case Functional::Kind::OutcomeCountDistribution:
            kernels::axpy(p, outcome_count_pmf(model, b, h.outcome, n), acc.values);
            ++acc.support;
            break;
          case Functional::Kind::IndicatorAtLeast: {
            const auto dist = outcome_count_pmf(model, b, h.outcome, n);
            double tail = 0.0;
            for (int x = std::max(h.threshold, 0); x <= n; ++x) tail += dist[static_cast<std::size_t>(x)];
            acc.values[0] += p * tail;
            ++acc.support;
            break;
          }
          case Functional::Kind::Custom:
            for_each_outcome_composition(model, b, [&](const Composition& o, double po) {
              acc.values[0] += p * po * h.custom(o);
              ++acc.support;
            });
            break;
        }
      }
    }
  });

  Accumulator total_acc = pairwise_reduce(std::move(parts), combine);
  report.values = std::move(total_acc.values);
  report.support_terms = total_acc.support;
  report.pruned_terms = report.index_terms - std::min(report.index_terms, report.support_terms);
  return report;
}

GFormulaReport reduced_compositional_expectation(const DiscreteModel& model, const Coarsening& coarsening,
                                                 const RegimeSpec& spec, int n, const Functional& h,
                                                 const EvalOptions& options) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "cluster size must be at least 1");
  check_functional(h, model.outcomes());
  if (h.kind == Functional::Kind::TreatedCountDistribution)
    throw Error(ErrorKind::InvalidArgument, "the reduced g-formula sums out treatment; use the unreduced path");
  if (spec.coarsening && !std::equal(spec.coarsening->map().begin(), spec.coarsening->map().end(),
                                     coarsening.map().begin(), coarsening.map().end()))
    throw Error(ErrorKind::InvalidArgument, "regime reads a different coarsening");

  const CoarseModel coarse = coarsen_model(model, coarsening);
  RegimeSpec on_v = spec;
  on_v.coarsening.reset();
  validate_regime(on_v, coarsening.coarse_levels());
  const int nv = coarsening.coarse_levels();
  const int m = model.outcomes();
  const DiscreteModel& cm = coarse.model;

  GFormulaReport report;
  report.n = n;
  report.kappa = resource_count(spec.constraint, n);
  report.index_terms = checked_index_size(n, nv * m, options.budget);
  report.full_terms = saturating_count(n, 2 * model.levels() * m);

  const std::size_t width = h.is_distribution() ? static_cast<std::size_t>(n) + 1 : 1;
  const Compositions groups(n, nv);
  const std::size_t shards = shard_count(groups.size(), 16);
  std::vector<Accumulator> parts(shards, Accumulator{std::vector<double>(width, 0.0), 0});

  run_shards(shards, options.threads, [&](std::size_t s) {
    const auto [begin, end] = shard_range(groups.size(), shards, s);
    Accumulator& acc = parts[s];
    for (const Composition& counts : groups.slice(begin, end)) {
      const double w = covariate_composition_pmf(counts, coarse.q_v);
      if (w == 0.0) continue;
      const auto allocs = treatment_allocations(counts, on_v);

      // Per group: every outcome split of its members, and its probability
      // under each treated count allocation.
      std::vector<std::vector<Composition>> splits(static_cast<std::size_t>(nv));
      std::vector<std::vector<std::vector<double>>> prob(static_cast<std::size_t>(nv));
      for (int v = 0; v < nv; ++v) {
        const auto uv = static_cast<std::size_t>(v);
        for (const auto& z : Compositions(counts[uv], m)) splits[uv].push_back(z);
        prob[uv].assign(allocs.size(), std::vector<double>(splits[uv].size(), 0.0));
        for (std::size_t j = 0; j < allocs.size(); ++j) {
          const int treated = allocs[j].treated[uv];
          for (std::size_t zi = 0; zi < splits[uv].size(); ++zi) {
            const Composition& z = splits[uv][zi];
            double p = 0.0;
            for_each_bounded_composition(treated, z, [&](const Composition& part) {
              Composition rest(z);
              for (int y = 0; y < m; ++y) rest[static_cast<std::size_t>(y)] -= part[static_cast<std::size_t>(y)];
              p += covariate_composition_pmf(part, cm.q_y_row(1, v)) * covariate_composition_pmf(rest, cm.q_y_row(0, v));
            });
            prob[uv][j][zi] = p;
          }
        }
      }

      std::vector<std::size_t> index(static_cast<std::size_t>(nv), 0);
      Composition outcome_totals(static_cast<std::size_t>(m));
      Composition z_all(static_cast<std::size_t>(nv * m));
      for (;;) {
        double p = 0.0;
        for (std::size_t j = 0; j < allocs.size(); ++j) {
          double term = allocs[j].weight;
          for (int v = 0; v < nv && term > 0.0; ++v)
            term *= prob[static_cast<std::size_t>(v)][j][index[static_cast<std::size_t>(v)]];
          p += term;
        }
        p *= w;
        if (p > 0.0) {
          ++acc.support;
          std::fill(outcome_totals.begin(), outcome_totals.end(), 0);
          for (int v = 0; v < nv; ++v) {
            const Composition& z = splits[static_cast<std::size_t>(v)][index[static_cast<std::size_t>(v)]];
            for (int y = 0; y < m; ++y) {
              outcome_totals[static_cast<std::size_t>(y)] += z[static_cast<std::size_t>(y)];
              z_all[static_cast<std::size_t>(v * m + y)] = z[static_cast<std::size_t>(y)];
            }
          }
          switch (h.kind) {
            case Functional::Kind::MeanOutcome: {
              double sum = 0.0;
              for (int y = 0; y < m; ++y) sum += model.score(y) * outcome_totals[static_cast<std::size_t>(y)];
              acc.values[0] += p * sum / n;
              break;
            }
            case Functional::Kind::OutcomeCountDistribution:
              acc.values[static_cast<std::size_t>(outcome_totals[static_cast<std::size_t>(h.outcome)])] += p;
              break;
            case Functional::Kind::IndicatorAtLeast:
              if (outcome_totals[static_cast<std::size_t>(h.outcome)] >= h.threshold) acc.values[0] += p;
              break;
            case Functional::Kind::Custom:
              acc.values[0] += p * h.custom(z_all);
              break;
            case Functional::Kind::TreatedCountDistribution:
              break;
          }
        }
        // mixed-radix increment over groups
        int v = 0;
        for (; v < nv; ++v) {
          auto& i = index[static_cast<std::size_t>(v)];
          if (++i < splits[static_cast<std::size_t>(v)].size()) break;
          i = 0;
        }
        if (v == nv) break;
      }
    }
  });

  Accumulator total_acc = pairwise_reduce(std::move(parts), combine);
  report.values = std::move(total_acc.values);
  report.support_terms = total_acc.support;
  report.pruned_terms = report.index_terms - std::min(report.index_terms, report.support_terms);
  return report;
}

double large_cluster_value(const DiscreteModel& model, const RegimeSpec& spec) {
  const InterventionDensity q = large_cluster_density(model, spec).density;
  std::vector<double> per_level(static_cast<std::size_t>(model.levels()));
  for (int l = 0; l < model.levels(); ++l)
    per_level[static_cast<std::size_t>(l)] = q(0, l) * model.mean_outcome(0, l) + q(1, l) * model.mean_outcome(1, l);
  return kernels::dot(model.q_l(), per_level);
}

std::vector<ValuePoint> value_curve(const DiscreteModel& model, const RegimeSpec& spec,
                                    std::span<const double> kappa_grid) {
  std::vector<ValuePoint> out;
  out.reserve(kappa_grid.size());
  for (double kappa_star : kappa_grid) {
    const RegimeSpec at = spec.with_constraint(Proportion{kappa_star});
    const auto density = large_cluster_density(model, at);
    out.push_back({kappa_star, density.threshold, large_cluster_value(model, at)});
  }
  return out;
}

}  // namespace clusterdyn
