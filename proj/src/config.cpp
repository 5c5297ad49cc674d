#include "clusterdyn/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "clusterdyn/error.hpp"
#include "json.hpp"

namespace clusterdyn {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorKind::Config, what); }

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) fail(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) fail("unknown key '" + key + "' in " + where);
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) fail("missing '" + std::string(key) + "' in " + where);
  return obj.at(key);
}

template <class T>
T get(const json& value, const std::string& what) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    fail(what + " has the wrong type");
  }
}

std::vector<RankFunction> parse_ranks(const json& obj, const std::string& where, bool mixture) {
  std::vector<RankFunction> ranks;
  if (mixture) {
    for (auto& values : get<std::vector<std::vector<double>>>(require(obj, "lambdas", where), where + ".lambdas"))
      ranks.push_back(RankFunction{std::move(values)});
  } else {
    ranks.push_back(RankFunction{get<std::vector<double>>(require(obj, "lambda", where), where + ".lambda")});
  }
  return ranks;
}

RegimeConfig parse_regime(const json& obj, const std::string& where) {
  check_keys(obj, {"type", "lambda", "lambdas", "weights", "kappa", "kappa_star", "gate"}, where);
  RegimeConfig r;
  const auto type = get<std::string>(require(obj, "type", where), where + ".type");
  if (type == "rank_preserving") {
    r.type = RegimeConfig::Type::RankPreserving;
    r.ranks = parse_ranks(obj, where, false);
  } else if (type == "mixture") {
    r.type = RegimeConfig::Type::Mixture;
    r.ranks = parse_ranks(obj, where, true);
    r.weights = get<std::vector<double>>(require(obj, "weights", where), where + ".weights");
  } else if (type == "optimal") {
    r.type = RegimeConfig::Type::Optimal;
  } else if (type == "optimal_gated") {
    r.type = RegimeConfig::Type::OptimalGated;
  } else {
    fail(where + ".type must be rank_preserving, mixture, optimal or optimal_gated");
  }
  if (obj.contains("kappa")) r.kappa = get<int>(obj.at("kappa"), where + ".kappa");
  if (obj.contains("kappa_star")) r.kappa_star = get<double>(obj.at("kappa_star"), where + ".kappa_star");
  if (r.kappa && r.kappa_star) fail(where + " sets both kappa and kappa_star");
  if (obj.contains("gate")) r.gate = get<bool>(obj.at("gate"), where + ".gate");
  return r;
}

Constraint constraint_of(const RegimeConfig& r, const std::string& where) {
  if (r.kappa) return ExactCount{*r.kappa};
  if (r.kappa_star) return Proportion{*r.kappa_star};
  fail(where + " needs kappa or kappa_star");
}

AssignmentMechanism parse_mechanism(const json& obj, const RunConfig& cfg) {
  const std::string where = "mechanism";
  if (!obj.is_object()) fail("mechanism must be an object");
  const auto type = get<std::string>(require(obj, "type", where), "mechanism.type");
  if (type == "regime") {
    check_keys(obj, {"type", "regime"}, where);
    const RegimeConfig r = parse_regime(require(obj, "regime", where), "mechanism.regime");
    const Constraint c = constraint_of(r, "mechanism.regime");
    return RegimeBased{build_regime(r, cfg.model, std::nullopt, c)};
  }
  if (type == "bernoulli") {
    check_keys(obj, {"type", "p"}, where);
    return BernoulliAssignment{get<std::vector<double>>(require(obj, "p", where), "mechanism.p")};
  }
  if (type == "mixed_flip") {
    check_keys(obj, {"type", "lambda", "lambda_alt", "kappa", "kappa_star"}, where);
    MixedFlip m;
    m.first = RankFunction{get<std::vector<double>>(require(obj, "lambda", where), "mechanism.lambda")};
    m.second = RankFunction{get<std::vector<double>>(require(obj, "lambda_alt", where), "mechanism.lambda_alt")};
    if (obj.contains("kappa") && obj.contains("kappa_star")) fail("mechanism sets both kappa and kappa_star");
    if (obj.contains("kappa")) m.constraint = ExactCount{get<int>(obj.at("kappa"), "mechanism.kappa")};
    if (obj.contains("kappa_star"))
      m.constraint = Proportion{get<double>(obj.at("kappa_star"), "mechanism.kappa_star")};
    return m;
  }
  if (type == "sub_cluster") {
    check_keys(obj, {"type", "max_size", "size_law", "kappa_law", "lambda"}, where);
    SubCluster s;
    s.max_size = get<int>(require(obj, "max_size", where), "mechanism.max_size");
    s.size_law = get<std::vector<double>>(require(obj, "size_law", where), "mechanism.size_law");
    s.kappa_law = get<std::vector<std::vector<double>>>(require(obj, "kappa_law", where), "mechanism.kappa_law");
    s.rank = RankFunction{get<std::vector<double>>(require(obj, "lambda", where), "mechanism.lambda")};
    return s;
  }
  fail("mechanism.type must be regime, bernoulli, mixed_flip or sub_cluster");
}

DiscreteModel parse_model(const json& obj) {
  check_keys(obj, {"q_l", "scores", "q_y", "p1"}, "model");
  auto q_l = get<std::vector<double>>(require(obj, "q_l", "model"), "model.q_l");
  if (obj.contains("p1")) {
    if (obj.contains("q_y") || obj.contains("scores")) fail("model.p1 excludes q_y and scores");
    return make_binary_model(std::move(q_l), get<std::vector<std::vector<double>>>(obj.at("p1"), "model.p1"));
  }
  auto q_y = get<std::vector<std::vector<std::vector<double>>>>(require(obj, "q_y", "model"), "model.q_y");
  std::vector<double> scores = {0.0, 1.0};
  if (obj.contains("scores")) scores = get<std::vector<double>>(obj.at("scores"), "model.scores");
  return make_model(std::move(q_l), q_y, std::move(scores));
}

}  // namespace

RegimeSpec build_regime(const RegimeConfig& regime, const DiscreteModel& law,
                        const std::optional<Coarsening>& coarsening, Constraint constraint) {
  switch (regime.type) {
    case RegimeConfig::Type::Optimal:
    case RegimeConfig::Type::OptimalGated:
      return optimal_regime(law, coarsening, constraint, regime.gated());
    case RegimeConfig::Type::RankPreserving:
      return RegimeSpec::rank_preserving(regime.ranks.front(), constraint, regime.gate, coarsening);
    case RegimeConfig::Type::Mixture:
      return RegimeSpec::mixture(regime.ranks, regime.weights, constraint, regime.gate, coarsening);
  }
  return {};
}

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(std::string("malformed JSON: ") + e.what());
  }
  check_keys(doc, {"model", "coarsening", "regime", "mechanism", "n", "n_star", "seed", "budget", "alpha", "burn_in"},
             "config");
  RunConfig cfg;
  try {
    cfg.model = parse_model(require(doc, "model", "config"));
    if (doc.contains("coarsening")) {
      cfg.coarsening = Coarsening(get<std::vector<int>>(doc.at("coarsening"), "coarsening"));
      if (cfg.coarsening->fine_levels() != cfg.model.levels()) fail("coarsening length differs from model levels");
    }
    if (doc.contains("n")) cfg.n = get<int>(doc.at("n"), "n");
    if (doc.contains("n_star")) cfg.n_star = get<int>(doc.at("n_star"), "n_star");
    if (doc.contains("seed")) cfg.seed = get<std::uint64_t>(doc.at("seed"), "seed");
    if (doc.contains("budget")) cfg.budget = get<std::uint64_t>(doc.at("budget"), "budget");
    if (doc.contains("alpha")) cfg.alpha = get<double>(doc.at("alpha"), "alpha");
    if (doc.contains("burn_in")) cfg.burn_in = get<int>(doc.at("burn_in"), "burn_in");
    if (cfg.n < 0 || (cfg.n_star && *cfg.n_star < 1)) fail("cluster sizes must be positive");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) fail("alpha must lie in (0, 1)");
    if (doc.contains("regime")) {
      cfg.regime = parse_regime(doc.at("regime"), "regime");
      if (!cfg.regime->optimal()) {
        const int expect = cfg.coarsening ? cfg.coarsening->coarse_levels() : cfg.model.levels();
        for (const auto& r : cfg.regime->ranks)
          if (r.size() != expect) fail("regime rank tables need " + std::to_string(expect) + " entries");
        validate_regime(build_regime(*cfg.regime, cfg.model, cfg.coarsening, ExactCount{0}), cfg.model.levels());
      }
    }
    if (doc.contains("mechanism")) {
      cfg.mechanism = parse_mechanism(doc.at("mechanism"), cfg);
      validate_mechanism(*cfg.mechanism, cfg.model.levels());
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    fail(e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

}  // namespace clusterdyn
