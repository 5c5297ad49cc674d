#include "clusterdyn/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "clusterdyn/error.hpp"

namespace clusterdyn {

namespace {

void check_pmf(std::span<const double> row, const std::string& name) {
  double sum = 0.0;
  for (double p : row) {
    if (!(p >= 0.0)) throw Error(ErrorKind::NegativeProbability, name + " has entry " + std::to_string(p));
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbabilityTolerance)
    throw Error(ErrorKind::NonStochastic, name + " sums to " + std::to_string(sum));
}

}  // namespace

DiscreteModel::DiscreteModel(std::vector<double> q_l, std::vector<double> scores, std::vector<double> q_y)
    : q_l_(std::move(q_l)), scores_(std::move(scores)), q_y_(std::move(q_y)) {}

double DiscreteModel::mean_outcome(int a, int l) const {
  auto row = q_y_row(a, l);
  double mean = 0.0;
  for (std::size_t y = 0; y < row.size(); ++y) mean += scores_[y] * row[y];
  return mean;
}

void validate_model(const DiscreteModel& model) {
  if (model.levels() < 1) throw Error(ErrorKind::SizeMismatch, "model needs at least one covariate level");
  if (model.outcomes() < 1) throw Error(ErrorKind::SizeMismatch, "model needs at least one outcome value");
  if (model.q_y().size() != static_cast<std::size_t>(2 * model.levels() * model.outcomes()))
    throw Error(ErrorKind::SizeMismatch, "q_y must hold 2*K*M entries");
  for (double s : model.scores())
    if (!std::isfinite(s)) throw Error(ErrorKind::InvalidArgument, "outcome scores must be finite");
  check_pmf(model.q_l(), "q_l");
  for (int a = 0; a < 2; ++a)
    for (int l = 0; l < model.levels(); ++l)
      check_pmf(model.q_y_row(a, l), "q_y[" + std::to_string(a) + "][" + std::to_string(l) + "]");
}

DiscreteModel make_model(std::vector<double> q_l, const std::vector<std::vector<std::vector<double>>>& q_y,
                         std::vector<double> scores) {
  const std::size_t k = q_l.size();
  const std::size_t m = scores.size();
  if (q_y.size() != 2) throw Error(ErrorKind::SizeMismatch, "q_y needs one table per treatment arm");
  std::vector<double> flat;
  flat.reserve(2 * k * m);
  for (const auto& arm : q_y) {
    if (arm.size() != k) throw Error(ErrorKind::SizeMismatch, "q_y arm must have one row per level");
    for (const auto& row : arm) {
      if (row.size() != m) throw Error(ErrorKind::SizeMismatch, "q_y row must have one entry per outcome");
      flat.insert(flat.end(), row.begin(), row.end());
    }
  }
  DiscreteModel model(std::move(q_l), std::move(scores), std::move(flat));
  validate_model(model);
  return model;
}

DiscreteModel make_binary_model(std::vector<double> q_l, const std::vector<std::vector<double>>& p1) {
  std::vector<std::vector<std::vector<double>>> q_y(2);
  if (p1.size() != 2) throw Error(ErrorKind::SizeMismatch, "p1 needs one row per treatment arm");
  for (int a = 0; a < 2; ++a)
    for (double p : p1[static_cast<std::size_t>(a)]) q_y[static_cast<std::size_t>(a)].push_back({1.0 - p, p});
  return make_model(std::move(q_l), q_y);
}

Coarsening::Coarsening(std::vector<int> map) : map_(std::move(map)) {
  if (map_.empty()) throw Error(ErrorKind::InvalidArgument, "coarsening map is empty");
  const int top = *std::max_element(map_.begin(), map_.end());
  std::vector<bool> hit(static_cast<std::size_t>(std::max(top + 1, 0)), false);
  for (int v : map_) {
    if (v < 0) throw Error(ErrorKind::InvalidArgument, "coarsening map has a negative entry");
    hit[static_cast<std::size_t>(v)] = true;
  }
  if (!std::all_of(hit.begin(), hit.end(), [](bool b) { return b; }))
    throw Error(ErrorKind::InvalidArgument, "coarsening map is not surjective onto 0..max");
  coarse_levels_ = top + 1;
}

Coarsening Coarsening::identity(int levels) {
  std::vector<int> map(static_cast<std::size_t>(levels));
  std::iota(map.begin(), map.end(), 0);
  return Coarsening(std::move(map));
}

std::vector<int> Coarsening::coarsen_counts(std::span<const int> counts) const {
  if (counts.size() != map_.size()) throw Error(ErrorKind::SizeMismatch, "counts do not match coarsening domain");
  std::vector<int> out(static_cast<std::size_t>(coarse_levels_), 0);
  for (std::size_t l = 0; l < counts.size(); ++l) out[static_cast<std::size_t>(map_[l])] += counts[l];
  return out;
}

std::vector<double> Coarsening::lift(std::span<const double> values) const {
  if (values.size() != static_cast<std::size_t>(coarse_levels_))
    throw Error(ErrorKind::SizeMismatch, "table does not match coarse levels");
  std::vector<double> out(map_.size());
  for (std::size_t l = 0; l < map_.size(); ++l) out[l] = values[static_cast<std::size_t>(map_[l])];
  return out;
}

CoarseModel coarsen_model(const DiscreteModel& model, const Coarsening& c) {
  const int k = model.levels();
  const int m = model.outcomes();
  if (c.fine_levels() != k) throw Error(ErrorKind::SizeMismatch, "coarsening domain does not match model levels");
  const int nv = c.coarse_levels();

  CoarseModel out;
  out.q_v.assign(static_cast<std::size_t>(nv), 0.0);
  for (int l = 0; l < k; ++l) out.q_v[static_cast<std::size_t>(c(l))] += model.q_l(l);
  for (int v = 0; v < nv; ++v)
    if (!(out.q_v[static_cast<std::size_t>(v)] > 0.0))
      throw Error(ErrorKind::EmptyCoarseLevel, "coarse level " + std::to_string(v) + " has zero mass");

  out.q_l_given_v.resize(static_cast<std::size_t>(k));
  for (int l = 0; l < k; ++l)
    out.q_l_given_v[static_cast<std::size_t>(l)] = model.q_l(l) / out.q_v[static_cast<std::size_t>(c(l))];

  std::vector<double> q_y(static_cast<std::size_t>(2 * nv * m), 0.0);
  for (int a = 0; a < 2; ++a)
    for (int l = 0; l < k; ++l)
      for (int y = 0; y < m; ++y)
        q_y[(static_cast<std::size_t>(a) * nv + c(l)) * m + y] +=
            model.q_y(y, a, l) * out.q_l_given_v[static_cast<std::size_t>(l)];

  std::vector<double> q_v = out.q_v;
  std::vector<double> scores(model.scores().begin(), model.scores().end());
  out.model = DiscreteModel(std::move(q_v), std::move(scores), std::move(q_y));
  return out;
}

CateTable cate(const DiscreteModel& model, const std::optional<Coarsening>& coarsening) {
  if (coarsening) return cate(coarsen_model(model, *coarsening).model);
  CateTable table;
  table.delta.resize(static_cast<std::size_t>(model.levels()));
  for (int l = 0; l < model.levels(); ++l)
  {
    double d = 0.0;
    for (int y = 0; y < model.outcomes(); ++y) d += model.score(y) * (model.q_y(y, 1, l) - model.q_y(y, 0, l));
    table.delta[static_cast<std::size_t>(l)] = d;
  }
  return table;
}

}  // namespace clusterdyn
