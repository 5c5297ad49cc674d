#include "clusterdyn/combinatorics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "clusterdyn/error.hpp"

namespace clusterdyn {

namespace {

__extension__ using u128 = unsigned __int128;

constexpr int kLogFactorialTable = 4096;

const std::array<double, kLogFactorialTable>& log_factorial_table() {
  static const auto table = [] {
    std::array<double, kLogFactorialTable> t{};
    t[0] = 0.0;
    for (int i = 1; i < kLogFactorialTable; ++i) t[static_cast<std::size_t>(i)] = std::lgamma(i + 1.0);
    return t;
  }();
  return table;
}

// x^c with 0^0 := 1, evaluated as exp(c ln x).
double log_power(double x, int c) {
  if (c == 0) return 0.0;
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  return c * std::log(x);
}

}  // namespace

int total(std::span<const int> counts) { return std::accumulate(counts.begin(), counts.end(), 0); }

std::uint64_t binomial(int n, int r) {
  if (r < 0 || n < 0 || r > n) return 0;
  r = std::min(r, n - r);
  u128 acc = 1;
  for (int i = 1; i <= r; ++i) {
    acc = acc * static_cast<unsigned>(n - r + i) / static_cast<unsigned>(i);
    if (acc > std::numeric_limits<std::uint64_t>::max())
      throw Error(ErrorKind::Overflow, "C(" + std::to_string(n) + "," + std::to_string(r) + ") exceeds uint64");
  }
  return static_cast<std::uint64_t>(acc);
}

std::uint64_t composition_count(int n, int k) {
  if (n < 0 || k < 1) throw Error(ErrorKind::InvalidArgument, "composition_count needs n >= 0 and k >= 1");
  return binomial(n + k - 1, n);
}

double log_factorial(int n) {
  if (n < 0) throw Error(ErrorKind::InvalidArgument, "log_factorial of a negative integer");
  if (n < kLogFactorialTable) return log_factorial_table()[static_cast<std::size_t>(n)];
  return std::lgamma(n + 1.0);
}

double log_binomial(int n, int r) {
  if (r < 0 || r > n) return -std::numeric_limits<double>::infinity();
  return log_factorial(n) - log_factorial(r) - log_factorial(n - r);
}

double log_multinomial(std::span<const int> counts) {
  double out = log_factorial(total(counts));
  for (int c : counts) out -= log_factorial(c);
  return out;
}

Composition unrank_composition(int n, int k, std::uint64_t index) {
  if (index >= composition_count(n, k)) throw Error(ErrorKind::InvalidArgument, "composition index out of range");
  Composition c(static_cast<std::size_t>(k), 0);
  int rest = n;
  for (int part = k - 1; part > 0; --part) {
    // Colex order groups by the last part ascending.
    int j = 0;
    for (;; ++j) {
      const std::uint64_t block = composition_count(rest - j, part);
      if (index < block) break;
      index -= block;
    }
    c[static_cast<std::size_t>(part)] = j;
    rest -= j;
  }
  c[0] = rest;
  return c;
}

Compositions::Compositions(int n, int k) : Compositions(n, k, 0, composition_count(n, k)) {}

Compositions::Compositions(int n, int k, std::uint64_t first, std::uint64_t last)
    : n_(n), k_(k), first_(first), last_(last) {
  if (first > last || last > composition_count(n, k))
    throw Error(ErrorKind::InvalidArgument, "composition slice out of range");
}

Compositions Compositions::slice(std::uint64_t first, std::uint64_t last) const {
  return Compositions(n_, k_, first_ + first, first_ + last);
}

Compositions::iterator Compositions::begin() const {
  if (first_ == last_) return end();
  return iterator(unrank_composition(n_, k_, first_), last_ - first_);
}

Compositions::iterator& Compositions::iterator::operator++() {
  if (--remaining_ == 0) return *this;
  std::size_t i = 0;
  while (current_[i] == 0) ++i;
  const int v = current_[i];
  current_[i] = 0;
  ++current_[i + 1];
  current_[0] = v - 1;
  return *this;
}

void for_each_bounded_composition(int total_count, std::span<const int> bounds,
                                  const std::function<void(const Composition&)>& fn) {
  const std::size_t k = bounds.size();
  if (k == 0) {
    if (total_count == 0) fn({});
    return;
  }
  // suffix capacity for pruning
  std::vector<int> cap(k + 1, 0);
  for (std::size_t j = k; j-- > 0;) cap[j] = cap[j + 1] + bounds[j];
  if (total_count < 0 || total_count > cap[0]) return;

  Composition t(k, 0);
  // Colex: iterate the last part slowest.
  std::function<void(std::size_t, int)> rec = [&](std::size_t part, int rest) {
    if (part == 0) {
      if (rest <= bounds[0]) {
        t[0] = rest;
        fn(t);
      }
      return;
    }
    const int lo = std::max(0, rest - cap[0] + cap[part]);
    const int hi = std::min(bounds[part], rest);
    for (int j = lo; j <= hi; ++j) {
      t[part] = j;
      rec(part - 1, rest - j);
    }
    t[part] = 0;
  };
  rec(k - 1, total_count);
}

double covariate_composition_pmf(std::span<const int> counts, std::span<const double> q_l) {
  if (counts.size() != q_l.size()) throw Error(ErrorKind::SizeMismatch, "composition length differs from q_l");
  double lp = log_multinomial(counts);
  for (std::size_t l = 0; l < counts.size(); ++l) lp += log_power(q_l[l], counts[l]);
  return std::exp(lp);
}

double conditional_covariate_composition_pmf(std::span<const int> counts, int l, std::span<const double> q_l) {
  if (counts.size() != q_l.size()) throw Error(ErrorKind::SizeMismatch, "composition length differs from q_l");
  if (l < 0 || static_cast<std::size_t>(l) >= counts.size())
    throw Error(ErrorKind::SizeMismatch, "level index out of range");
  if (counts[static_cast<std::size_t>(l)] < 1)
    throw Error(ErrorKind::IncompatibleComposition, "composition has no individual at level " + std::to_string(l));
  Composition others(counts.begin(), counts.end());
  --others[static_cast<std::size_t>(l)];
  return covariate_composition_pmf(others, q_l);
}

double outcome_composition_pmf(std::span<const int> o, std::span<const int> b, const DiscreteModel& model) {
  const int k = model.levels();
  const int m = model.outcomes();
  if (b.size() != static_cast<std::size_t>(2 * k) || o.size() != static_cast<std::size_t>(2 * k * m))
    throw Error(ErrorKind::SizeMismatch, "composition sizes do not match the model");
  double lp = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int l = 0; l < k; ++l) {
      const auto cell = o.subspan(static_cast<std::size_t>(outcome_cell(0, a, l, k, m)), static_cast<std::size_t>(m));
      if (total(cell) != b[static_cast<std::size_t>(joint_cell(a, l, k))])
        throw Error(ErrorKind::IncompatibleComposition,
                    "outcome counts do not sum to the treatment margin at cell (" + std::to_string(a) + "," +
                        std::to_string(l) + ")");
      lp += log_multinomial(cell);
      for (int y = 0; y < m; ++y) lp += log_power(model.q_y(y, a, l), cell[static_cast<std::size_t>(y)]);
    }
  }
  return std::exp(lp);
}

}  // namespace clusterdyn
