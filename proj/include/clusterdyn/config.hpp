#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clusterdyn/model.hpp"
#include "clusterdyn/regimes.hpp"
#include "clusterdyn/simulator.hpp"

namespace clusterdyn {

// Target regime as written in the config. Optimal types are resolved against
// a law (true or empirical) when used.
struct RegimeConfig {
  enum class Type { RankPreserving, Mixture, Optimal, OptimalGated };
  Type type = Type::RankPreserving;
  std::vector<RankFunction> ranks;
  std::vector<double> weights;
  std::optional<int> kappa;
  std::optional<double> kappa_star;
  bool gate = false;

  bool optimal() const noexcept { return type == Type::Optimal || type == Type::OptimalGated; }
  bool gated() const noexcept { return type == Type::OptimalGated || gate; }
};

struct RunConfig {
  DiscreteModel model;
  std::optional<Coarsening> coarsening;
  std::optional<RegimeConfig> regime;
  std::optional<AssignmentMechanism> mechanism;
  int n = 0;
  std::optional<int> n_star;
  std::uint64_t seed = 0;
  std::uint64_t budget = 5'000'000;
  double alpha = 0.05;
  int burn_in = 0;
};

// Parses and validates a JSON config document. Unknown keys, missing fields
// and invalid tables throw Error{Config}.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Regime spec for a given constraint. Optimal types rank by the CATE of `law`.
// The target regime reads the config's coarsening when one is given.
RegimeSpec build_regime(const RegimeConfig& regime, const DiscreteModel& law,
                        const std::optional<Coarsening>& coarsening, Constraint constraint);

}  // namespace clusterdyn
