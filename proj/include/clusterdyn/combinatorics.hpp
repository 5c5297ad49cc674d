#pragma once

#include <cstdint>
#include <functional>
#include <iterator>
#include <span>
#include <vector>

#include "clusterdyn/model.hpp"

namespace clusterdyn {

// Non-negative count vector over a finite index set. Composite index sets use
// the layouts below so that every module agrees on cell order.
using Composition = std::vector<int>;

// Treatment-by-covariate cell (a, l) among 2*K cells.
inline int joint_cell(int a, int l, int levels) { return a * levels + l; }
// Outcome-by-treatment-by-covariate cell (y, a, l) among 2*K*M cells.
inline int outcome_cell(int y, int a, int l, int levels, int outcomes) {
  return (a * levels + l) * outcomes + y;
}

int total(std::span<const int> counts);

// C(n, r) as an exact integer; throws Overflow past uint64.
std::uint64_t binomial(int n, int r);
// Number of weak compositions of n into k parts, C(n+k-1, n).
std::uint64_t composition_count(int n, int k);

double log_factorial(int n);
double log_binomial(int n, int r);
// ln(n! / prod counts_j!)
double log_multinomial(std::span<const int> counts);

// The index-th weak composition of n into k parts in colexicographic order.
Composition unrank_composition(int n, int k, std::uint64_t index);

// Colexicographic range over weak compositions of n into k parts. A range may
// be restricted to [first, last) so enumerations can be split into shards.
class Compositions {
 public:
  Compositions(int n, int k);
  Compositions(int n, int k, std::uint64_t first, std::uint64_t last);

  std::uint64_t size() const noexcept { return last_ - first_; }
  int parts() const noexcept { return k_; }
  int total() const noexcept { return n_; }
  Compositions slice(std::uint64_t first, std::uint64_t last) const;

  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = Composition;
    using difference_type = std::ptrdiff_t;
    using pointer = const Composition*;
    using reference = const Composition&;

    iterator() = default;
    iterator(Composition current, std::uint64_t remaining)
        : current_(std::move(current)), remaining_(remaining) {}

    reference operator*() const { return current_; }
    pointer operator->() const { return &current_; }
    iterator& operator++();
    iterator operator++(int) {
      iterator tmp = *this;
      ++*this;
      return tmp;
    }
    friend bool operator==(const iterator& a, const iterator& b) { return a.remaining_ == b.remaining_; }

   private:
    Composition current_;
    std::uint64_t remaining_ = 0;
  };

  iterator begin() const;
  iterator end() const { return iterator({}, 0); }

 private:
  int n_;
  int k_;
  std::uint64_t first_;
  std::uint64_t last_;
};

// Calls fn for every t with sum(t) == total_count and 0 <= t[j] <= bounds[j],
// in colexicographic order.
void for_each_bounded_composition(int total_count, std::span<const int> bounds,
                                  const std::function<void(const Composition&)>& fn);

// Multinomial pmf of a covariate composition: n!/prod l! * prod Q_L(l)^l.
double covariate_composition_pmf(std::span<const int> counts, std::span<const double> q_l);

// Law of the other n-1 individuals' composition given that one individual
// has level l. Throws IncompatibleComposition if counts[l] == 0.
double conditional_covariate_composition_pmf(std::span<const int> counts, int l, std::span<const double> q_l);

// Product over (a, l) cells of multinomial outcome pmfs. o is laid out by
// outcome_cell, b by joint_cell.
double outcome_composition_pmf(std::span<const int> o, std::span<const int> b, const DiscreteModel& model);

}  // namespace clusterdyn
