#include "clusterdyn/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "clusterdyn/config.hpp"
#include "clusterdyn/error.hpp"
#include "clusterdyn/estimators.hpp"
#include "clusterdyn/gformula.hpp"
#include "clusterdyn/normal.hpp"
#include "clusterdyn/parallel.hpp"
#include "clusterdyn/rng.hpp"
#include "clusterdyn/simulator.hpp"
#include "json.hpp"

namespace clusterdyn {

namespace {

using nlohmann::json;

struct Flags {
  std::string config;
  std::string out;
  std::string data;
  std::string functional = "mean";
  std::optional<int> kappa;
  std::optional<double> kappa_star;
  std::string kappa_grid;
  std::string method;
  std::optional<double> alpha;
  int reps = 1;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::optional<int> burn_in;
  int bootstrap = 0;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::Config, what); }

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::PositivityViolated:
    case ErrorKind::InsufficientBurnIn:
      return 3;
    case ErrorKind::BudgetExceeded:
    case ErrorKind::Overflow:
      return 4;
    default:
      return 2;
  }
}

std::uint64_t effective_budget(const RunConfig& cfg) {
  const char* env = std::getenv("CLUSTERDYN_BUDGET");
  if (!env || !*env) return cfg.budget;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0') config_error("CLUSTERDYN_BUDGET is not an unsigned integer");
  return v;
}

Functional parse_functional(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  auto as_int = [&](const std::string& s) {
    try {
      std::size_t pos = 0;
      const int v = std::stoi(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      config_error("bad integer '" + s + "' in --functional");
    }
  };
  if (parts.empty()) config_error("empty --functional");
  const std::string& name = parts[0];
  if (name == "mean" && parts.size() == 1) return Functional::mean_outcome();
  if (name == "treated_count" && parts.size() == 1) return Functional::treated_count();
  if (name == "outcome_count" && parts.size() <= 2)
    return Functional::outcome_count(parts.size() == 2 ? as_int(parts[1]) : 1);
  if (name == "at_least" && parts.size() == 2) return Functional::at_least(1, as_int(parts[1]));
  if (name == "at_least" && parts.size() == 3) return Functional::at_least(as_int(parts[1]), as_int(parts[2]));
  config_error("unknown functional '" + text +
               "' (mean, treated_count, outcome_count[:y], at_least:x, at_least:y:x)");
}

std::vector<double> parse_grid(const std::string& text) {
  double lo = 0, hi = 0, step = 0;
  char c1 = 0, c2 = 0;
  std::istringstream in(text);
  if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || !in.eof())
    config_error("--kappa-grid must be LO:HI:STEP");
  if (!(step > 0.0) || hi < lo) config_error("--kappa-grid needs STEP > 0 and HI >= LO");
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> grid;
  for (long i = 0; i < count; ++i) grid.push_back(std::min(lo + static_cast<double>(i) * step, hi));
  return grid;
}

const RegimeConfig& need_regime(const RunConfig& cfg) {
  if (!cfg.regime) config_error("config has no regime block");
  return *cfg.regime;
}

int cluster_size(const RunConfig& cfg, bool prefer_star) {
  const int n = prefer_star && cfg.n_star ? *cfg.n_star : cfg.n;
  if (n < 1) config_error(prefer_star ? "config needs n_star or n" : "config needs n");
  return n;
}

// Resource counts to evaluate at cluster size n.
std::vector<int> kappa_sweep(const Flags& f, const RegimeConfig& r, int n) {
  if (f.kappa) return {*f.kappa};
  if (f.kappa_star) return {resource_count(Proportion{*f.kappa_star}, n)};
  if (r.kappa) return {*r.kappa};
  if (r.kappa_star) return {resource_count(Proportion{*r.kappa_star}, n)};
  std::vector<int> all;
  for (int k = 0; k <= n; ++k) all.push_back(k);
  return all;
}

void emit_finite_rows(std::ostream& os, int kappa, const std::vector<double>& values, const Functional& h,
                      const std::string& label) {
  if (h.is_distribution()) {
    for (std::size_t x = 0; x < values.size(); ++x) os << kappa << ',' << x << ',' << num(values[x]) << '\n';
  } else {
    os << kappa << ',' << label << ',' << num(values.front()) << '\n';
  }
}

int cmd_evaluate_finite(const Flags& f, const RunConfig& cfg, std::ostream& os, std::ostream& log) {
  const RegimeConfig& r = need_regime(cfg);
  const int n = cluster_size(cfg, true);
  const Functional h = parse_functional(f.functional);
  const EvalOptions opts{effective_budget(cfg), f.threads};
  os << "kappa,x_or_metric,value\n";
  for (int kappa : kappa_sweep(f, r, n)) {
    const RegimeSpec spec = build_regime(r, cfg.model, cfg.coarsening, ExactCount{kappa});
    GFormulaReport rep;
    if (cfg.coarsening && h.kind != Functional::Kind::TreatedCountDistribution) {
      rep = reduced_compositional_expectation(cfg.model, *cfg.coarsening, spec, n, h, opts);
      log << "reduced evaluation n=" << n << " kappa=" << kappa << " index_terms=" << rep.index_terms
          << " support_terms=" << rep.support_terms << " pruned_terms=" << rep.pruned_terms
          << " full_terms=" << rep.full_terms << '\n';
    } else {
      rep = compositional_gformula_expectation(cfg.model, spec, n, h, opts);
      log << "compositional evaluation n=" << n << " kappa=" << kappa << " index_terms=" << rep.index_terms
          << " support_terms=" << rep.support_terms << '\n';
    }
    emit_finite_rows(os, kappa, rep.values, h, f.functional);
  }
  return 0;
}

int cmd_evaluate_large(const Flags& f, const RunConfig& cfg, std::ostream& os) {
  const RegimeConfig& r = need_regime(cfg);
  std::vector<double> grid;
  if (!f.kappa_grid.empty())
    grid = parse_grid(f.kappa_grid);
  else if (f.kappa_star)
    grid = {*f.kappa_star};
  else if (r.kappa_star)
    grid = {*r.kappa_star};
  else
    config_error("evaluate-large needs --kappa-grid, --kappa-star or regime.kappa_star");
  os << "kappa_star,omega_or_eta,value\n";
  for (double ks : grid) {
    const RegimeSpec spec = build_regime(r, cfg.model, cfg.coarsening, Proportion{ks});
    const auto density = large_cluster_density(cfg.model, spec);
    os << num(ks) << ',' << num(density.threshold) << ',' << num(large_cluster_value(cfg.model, spec)) << '\n';
  }
  return 0;
}

int cmd_oracle(const Flags& f, const RunConfig& cfg, std::ostream& os) {
  const RegimeConfig& r = need_regime(cfg);
  const int n = cluster_size(cfg, true);
  const Functional h = parse_functional(f.functional);
  os << "kappa,x_or_metric,value\n";
  for (int kappa : kappa_sweep(f, r, n)) {
    const RegimeSpec spec = build_regime(r, cfg.model, cfg.coarsening, ExactCount{kappa});
    emit_finite_rows(os, kappa, exact_oracle(cfg.model, spec, n, h), h, f.functional);
  }
  return 0;
}

const AssignmentMechanism& need_mechanism(const RunConfig& cfg) {
  if (!cfg.mechanism) config_error("config has no mechanism block");
  return *cfg.mechanism;
}

bool uses_blocks(const AssignmentMechanism& m) { return std::holds_alternative<SubCluster>(m); }

void write_dataset(std::ostream& os, const std::vector<ClusterData>& reps, bool blocks) {
  os << "rep,i,l,a,y" << (blocks ? ",w_block" : "") << '\n';
  for (std::size_t r = 0; r < reps.size(); ++r) {
    const ClusterData& d = reps[r];
    for (int i = 0; i < d.size(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      os << r << ',' << i << ',' << d.l[k] << ',' << d.a[k] << ',' << d.y[k];
      if (blocks) os << ',' << (d.block.empty() ? 0 : d.block[k]);
      os << '\n';
    }
  }
}

std::vector<ClusterData> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot read dataset " + path);
  std::string line;
  if (!std::getline(in, line)) config_error("dataset " + path + " is empty");
  if (line != "rep,i,l,a,y" && line != "rep,i,l,a,y,w_block")
    config_error("dataset header must be rep,i,l,a,y[,w_block]");
  const bool blocks = line.size() > 11;
  std::vector<ClusterData> out;
  std::map<long, std::size_t> index;
  for (int row = 2; std::getline(in, line); ++row) {
    if (line.empty()) continue;
    std::vector<long> v;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      try {
        std::size_t pos = 0;
        v.push_back(std::stol(cell, &pos));
        if (pos != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        config_error("dataset row " + std::to_string(row) + " has a non-integer field");
      }
    }
    if (v.size() != (blocks ? 6u : 5u)) config_error("dataset row " + std::to_string(row) + " has the wrong width");
    auto [it, fresh] = index.emplace(v[0], out.size());
    if (fresh) out.emplace_back();
    ClusterData& d = out[it->second];
    d.l.push_back(static_cast<int>(v[2]));
    d.a.push_back(static_cast<int>(v[3]));
    d.y.push_back(static_cast<int>(v[4]));
    if (blocks) d.block.push_back(static_cast<int>(v[5]));
  }
  return out;
}

std::uint64_t seed_of(const Flags& f, const RunConfig& cfg) { return f.seed.value_or(cfg.seed); }

int cmd_simulate(const Flags& f, const RunConfig& cfg, std::ostream& os) {
  const auto& mech = need_mechanism(cfg);
  const int n = cluster_size(cfg, false);
  if (f.reps < 0) config_error("--reps must be non-negative");
  write_dataset(os, replicate(cfg.model, mech, n, f.reps, seed_of(f, cfg), f.threads), uses_blocks(mech));
  return 0;
}

// Target parameter from config plus overrides. Finite when n_star is set.
Estimand make_estimand(const Flags& f, const RunConfig& cfg, const Functional& h) {
  const RegimeConfig& r = need_regime(cfg);
  Constraint c;
  if (f.kappa)
    c = ExactCount{*f.kappa};
  else if (f.kappa_star)
    c = Proportion{*f.kappa_star};
  else if (r.kappa)
    c = ExactCount{*r.kappa};
  else if (r.kappa_star)
    c = Proportion{*r.kappa_star};
  else
    config_error("target needs kappa or kappa_star");
  Estimand e;
  e.functional = h;
  e.n_star = cfg.n_star;
  if (!e.n_star && std::holds_alternative<ExactCount>(c)) config_error("an exact kappa target needs n_star");
  e.optimal = r.optimal();
  if (e.optimal) {
    e.regime.constraint = c;
    e.regime.gate = r.gated();
    e.regime.coarsening = cfg.coarsening;
  } else {
    e.regime = build_regime(r, cfg.model, cfg.coarsening, c);
  }
  return e;
}

double truth_of(const Estimand& e, const RunConfig& cfg, const EvalOptions& opts) {
  const RegimeSpec spec =
      e.optimal ? optimal_regime(cfg.model, cfg.coarsening, e.regime.constraint, e.regime.gate) : e.regime;
  if (e.large()) return large_cluster_value(cfg.model, spec);
  if (e.functional.kind == Functional::Kind::MeanOutcome)
    return individual_gformula_expectation(cfg.model, spec, *e.n_star, nullptr, opts.threads);
  return compositional_gformula_expectation(cfg.model, spec, *e.n_star, e.functional, opts).value();
}

struct MethodContext {
  const RunConfig& cfg;
  const Flags& flags;
  Estimand estimand;
  double alpha;
  EvalOptions opts;
  int burn_in;
};

std::vector<double> scores_of(const DiscreteModel& m) { return {m.scores().begin(), m.scores().end()}; }

EstimateReport point_estimate(const std::string& method, const ClusterData& data, const EmpiricalLaw& emp,
                              const MethodContext& ctx) {
  if (method == "plugin") return plugin_estimate(emp, ctx.estimand, ctx.opts);
  return ipw_estimate(data, emp, ctx.estimand, ctx.opts.threads);
}

EstimateReport run_method(const std::string& method, const ClusterData& data, std::uint64_t stream,
                          const MethodContext& ctx) {
  const int k = ctx.cfg.model.levels();
  if (method == "online") {
    OnlineOptions o;
    o.burn_in = ctx.burn_in;
    return online_estimate(data, k, scores_of(ctx.cfg.model), ctx.estimand, ctx.alpha, o);
  }
  const EmpiricalLaw emp = fit_empirical(data, k, scores_of(ctx.cfg.model));
  if (method == "onestep") return one_step_estimate(data, emp, ctx.estimand, ctx.alpha);
  if (method != "plugin" && method != "ipw") config_error("unknown method '" + method + "'");

  EstimateReport report = point_estimate(method, data, emp, ctx);
  const int b_total = ctx.flags.bootstrap;
  if (b_total <= 0) return report;

  // Nonparametric bootstrap over individuals; resample b uses its own stream.
  std::vector<std::optional<double>> draws(static_cast<std::size_t>(b_total));
  const int n = data.size();
  for (int b = 0; b < b_total; ++b) {
    Rng rng(child_seed(stream, static_cast<std::uint64_t>(b)));
    ClusterData resample;
    for (int i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n)));
      resample.l.push_back(data.l[j]);
      resample.a.push_back(data.a[j]);
      resample.y.push_back(data.y[j]);
    }
    try {
      const EmpiricalLaw e = fit_empirical(resample, k, scores_of(ctx.cfg.model));
      draws[static_cast<std::size_t>(b)] = point_estimate(method, resample, e, ctx).point;
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::PositivityViolated) throw;
    }
  }
  double sum = 0.0, sq = 0.0;
  int ok = 0;
  for (const auto& d : draws)
    if (d) {
      sum += *d;
      ++ok;
    }
  const double mean = ok ? sum / ok : 0.0;
  for (const auto& d : draws)
    if (d) sq += (*d - mean) * (*d - mean);
  report.diagnostics.emplace_back("bootstrap_ok", ok);
  report.diagnostics.emplace_back("bootstrap_failed", b_total - ok);
  if (ok >= 2) {
    const double se = std::sqrt(sq / (ok - 1));
    const double z = two_sided_z(ctx.alpha);
    report.se = se;
    report.ci = std::make_pair(report.point - z * se, report.point + z * se);
  }
  return report;
}

json report_json(const EstimateReport& r, std::size_t rep) {
  json diag = json::object();
  for (const auto& [k, v] : r.diagnostics) diag[k] = std::isfinite(v) ? json(v) : json(nullptr);
  if (r.values.size() > 1) diag["values"] = r.values;
  if (!r.notes.empty()) diag["notes"] = r.notes;
  json row;
  row["rep"] = rep;
  row["method"] = r.method;
  row["point"] = r.point;
  row["se"] = r.se ? json(*r.se) : json(nullptr);
  row["ci_lo"] = r.ci ? json(r.ci->first) : json(nullptr);
  row["ci_hi"] = r.ci ? json(r.ci->second) : json(nullptr);
  row["diagnostics"] = diag;
  return row;
}

MethodContext make_context(const Flags& f, const RunConfig& cfg) {
  const Functional h = parse_functional(f.functional);
  MethodContext ctx{cfg, f, make_estimand(f, cfg, h), f.alpha.value_or(cfg.alpha), EvalOptions{}, 0};
  ctx.opts = EvalOptions{effective_budget(cfg), f.threads};
  ctx.burn_in = f.burn_in.value_or(cfg.burn_in);
  if (!(ctx.alpha > 0.0 && ctx.alpha < 1.0)) config_error("alpha must lie in (0, 1)");
  return ctx;
}

int cmd_estimate(const Flags& f, const RunConfig& cfg, std::ostream& os) {
  const MethodContext ctx = make_context(f, cfg);
  const std::string method = f.method.empty() ? "plugin" : f.method;
  std::vector<ClusterData> datasets;
  if (!f.data.empty()) {
    datasets = read_dataset(f.data);
  } else {
    if (f.reps < 0) config_error("--reps must be non-negative");
    datasets = replicate(cfg.model, need_mechanism(cfg), cluster_size(cfg, false), f.reps, seed_of(f, cfg), f.threads);
  }
  const std::uint64_t boot_seed = child_seed(seed_of(f, cfg), 0xB0075);
  for (std::size_t r = 0; r < datasets.size(); ++r)
    os << report_json(run_method(method, datasets[r], child_seed(boot_seed, r), ctx), r).dump() << '\n';
  return 0;
}

std::vector<std::string> split_methods(const std::string& text, const Estimand& e) {
  if (text.empty()) {
    if (e.large()) return {"plugin", "ipw", "onestep", "online"};
    return {"plugin", "ipw"};
  }
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string m; std::getline(ss, m, ',');) {
    if (m != "plugin" && m != "ipw" && m != "onestep" && m != "online") config_error("unknown method '" + m + "'");
    out.push_back(m);
  }
  return out;
}

int cmd_replicate(const Flags& f, const RunConfig& cfg, std::ostream& os, std::ostream& log) {
  if (f.reps < 0) config_error("--reps must be non-negative");
  const MethodContext ctx = make_context(f, cfg);
  const auto methods = split_methods(f.method, ctx.estimand);
  const auto& mech = need_mechanism(cfg);
  const int n = cluster_size(cfg, false);
  const std::uint64_t seed = seed_of(f, cfg);
  os << "method,truth,mean_point,emp_se,mean_se,coverage\n";
  if (f.reps == 0) return 0;
  const double truth = truth_of(ctx.estimand, cfg, ctx.opts);

  MethodContext serial = ctx;
  serial.opts.threads = 1;
  const std::size_t reps = static_cast<std::size_t>(f.reps);
  std::vector<std::vector<std::optional<EstimateReport>>> results(reps);
  run_shards(reps, f.threads, [&](std::size_t r) {
    const ClusterData data = simulate_cluster(cfg.model, mech, n, child_seed(seed, r));
    const std::uint64_t boot = child_seed(child_seed(seed, 0xB0075), r);
    auto& row = results[r];
    row.resize(methods.size());
    for (std::size_t m = 0; m < methods.size(); ++m) {
      try {
        row[m] = run_method(methods[m], data, boot, serial);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::PositivityViolated && e.kind() != ErrorKind::InsufficientBurnIn) throw;
      }
    }
  });

  for (std::size_t m = 0; m < methods.size(); ++m) {
    double sum = 0.0, se_sum = 0.0;
    int ok = 0, with_se = 0, covered = 0;
    for (const auto& row : results)
      if (row[m]) {
        sum += row[m]->point;
        ++ok;
        if (row[m]->se) {
          se_sum += *row[m]->se;
          ++with_se;
        }
        if (row[m]->ci && row[m]->ci->first <= truth && truth <= row[m]->ci->second) ++covered;
      }
    const double mean = ok ? sum / ok : std::nan("");
    double sq = 0.0;
    for (const auto& row : results)
      if (row[m]) sq += (row[m]->point - mean) * (row[m]->point - mean);
    const double emp_se = ok > 1 ? std::sqrt(sq / (ok - 1)) : std::nan("");
    const double mean_se = with_se ? se_sum / with_se : std::nan("");
    const double coverage = with_se ? static_cast<double>(covered) / with_se : std::nan("");
    if (ok < f.reps) log << methods[m] << ": " << (f.reps - ok) << " of " << f.reps << " reps failed positivity\n";
    os << methods[m] << ',' << num(truth) << ',' << num(mean) << ',' << num(emp_se) << ',' << num(mean_se) << ','
       << num(coverage) << '\n';
  }
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) { return run_cli(argc, argv, std::cout, std::cerr); }

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"clusterdyn: cluster-level dynamic treatment regimes under resource limits"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config path")->required();
    sub->add_option("--out", f.out, "output path (default stdout)");
    sub->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
  };
  auto finite = [&](CLI::App* sub) {
    sub->add_option("--functional", f.functional, "mean | treated_count | outcome_count[:y] | at_least[:y]:x");
    sub->add_option("--kappa", f.kappa, "resource count");
    sub->add_option("--kappa-star", f.kappa_star, "resource proportion");
  };
  auto estimation = [&](CLI::App* sub) {
    sub->add_option("--method", f.method, "plugin | ipw | onestep | online");
    sub->add_option("--alpha", f.alpha, "1 - confidence level");
    sub->add_option("--reps", f.reps, "replications");
    sub->add_option("--seed", f.seed, "base seed");
    sub->add_option("--burn-in", f.burn_in, "online burn-in length");
    sub->add_option("--bootstrap", f.bootstrap, "bootstrap resamples for plugin/ipw SEs");
  };

  auto* ef = app.add_subcommand("evaluate-finite", "finite-cluster g-formula values per kappa");
  common(ef);
  finite(ef);
  auto* el = app.add_subcommand("evaluate-large", "large-cluster value curve");
  common(el);
  el->add_option("--kappa-star", f.kappa_star, "resource proportion");
  el->add_option("--kappa-grid", f.kappa_grid, "LO:HI:STEP");
  auto* sim = app.add_subcommand("simulate", "simulate clusters to CSV");
  common(sim);
  sim->add_option("--reps", f.reps, "replications");
  sim->add_option("--seed", f.seed, "base seed");
  auto* est = app.add_subcommand("estimate", "estimate a target from data (JSON lines)");
  common(est);
  finite(est);
  estimation(est);
  est->add_option("--data", f.data, "dataset CSV (default: simulate from config)");
  auto* orc = app.add_subcommand("oracle", "brute-force expectation for tiny clusters");
  common(orc);
  finite(orc);
  auto* rep = app.add_subcommand("replicate", "replication study summary");
  common(rep);
  finite(rep);
  estimation(rep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return 2;
  }

  try {
    const RunConfig cfg = load_config(f.config);
    std::ostringstream buffer;
    std::ostream& os = f.out.empty() ? out : static_cast<std::ostream&>(buffer);
    int rc = 0;
    if (*ef)
      rc = cmd_evaluate_finite(f, cfg, os, err);
    else if (*el)
      rc = cmd_evaluate_large(f, cfg, os);
    else if (*sim)
      rc = cmd_simulate(f, cfg, os);
    else if (*est)
      rc = cmd_estimate(f, cfg, os);
    else if (*orc)
      rc = cmd_oracle(f, cfg, os);
    else
      rc = cmd_replicate(f, cfg, os, err);
    if (!f.out.empty()) {
      std::ofstream file(f.out, std::ios::binary);
      if (!file) config_error("cannot write " + f.out);
      file << buffer.str();
    }
    return rc;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace clusterdyn
