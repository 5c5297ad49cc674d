#include "doctest.h"

#include <sstream>

#include "cli_helpers.hpp"

using cli_test::config;
using cli_test::run;

namespace {

std::vector<std::vector<std::string>> csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) row.push_back(field);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("exit codes") {
  CHECK(run({"evaluate-finite", "--config", "/nonexistent.json"}).code == 2);
  const auto unknown = cli_test::temp_file("unknown.json", R"({"model": {"q_l": [1.0], "p1": [[0.5], [0.5]]}, "n": 5, "bogus": 1})");
  CHECK(run({"simulate", "--config", unknown}).code == 2);
  CHECK(run({"evaluate-finite", "--config", config("small_finite.json"), "--kappa", "9"}).code == 2);
  CHECK(run({"no-such-command"}).code == 2);
  CHECK(run({"--help"}).code == 0);

  const auto holes = cli_test::temp_file("holes.csv", "rep,i,l,a,y\n0,0,0,0,1\n0,1,1,0,0\n0,2,0,1,1\n");
  CHECK(run({"estimate", "--config", config("small_finite.json"), "--data", holes, "--kappa", "4", "--method", "plugin"})
            .code == 3);

  const auto budget = run({"evaluate-finite", "--config", config("reduced_n20.json"), "--functional", "treated_count",
                           "--kappa", "5"});
  setenv("CLUSTERDYN_BUDGET", "10", 1);
  CHECK(run({"evaluate-finite", "--config", config("small_finite.json"), "--functional", "outcome_count"}).code == 4);
  unsetenv("CLUSTERDYN_BUDGET");
  CHECK(budget.code == 4);
}

TEST_CASE("oracle and evaluate-finite agree") {
  const auto a = csv(run({"evaluate-finite", "--config", config("small_finite.json")}).out);
  const auto b = csv(run({"oracle", "--config", config("small_finite.json")}).out);
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() == 6);
  CHECK(a[0] == std::vector<std::string>{"kappa", "x_or_metric", "value"});
  for (std::size_t i = 1; i < a.size(); ++i) {
    CHECK(a[i][0] == b[i][0]);
    CHECK(std::stod(a[i][2]) == doctest::Approx(std::stod(b[i][2])).epsilon(1e-10));
  }
  const auto dist = csv(run({"oracle", "--config", config("small_finite.json"), "--kappa", "2", "--functional",
                             "outcome_count"}).out);
  CHECK(dist.size() == 6);
}

TEST_CASE("evaluate-large reports the curve") {
  const auto r = run({"evaluate-large", "--config", config("subcluster_optimal.json"), "--kappa-grid", "0:1:0.25"});
  REQUIRE(r.code == 0);
  const auto rows = csv(r.out);
  CHECK(rows[0] == std::vector<std::string>{"kappa_star", "omega_or_eta", "value"});
  CHECK(rows.size() == 6);
  CHECK(std::stod(rows[5][2]) == doctest::Approx(std::stod(rows[4][2])));
}

TEST_CASE("simulate and estimate round trip") {
  const auto out = cli_test::temp_file("sim.csv", "");
  REQUIRE(run({"simulate", "--config", config("subcluster_optimal.json"), "--out", out, "--seed", "3"}).code == 0);
  const auto rows = csv(cli_test::slurp(out));
  CHECK(rows[0] == std::vector<std::string>{"rep", "i", "l", "a", "y", "w_block"});
  CHECK(rows.size() == 2001);
  const auto est = run({"estimate", "--config", config("subcluster_optimal.json"), "--data", out, "--method", "onestep"});
  REQUIRE(est.code == 0);
  CHECK(est.out.find("\"method\":\"onestep\"") != std::string::npos);
  CHECK(est.out.find("\"ci_lo\"") != std::string::npos);
  const auto boot = run({"estimate", "--config", config("small_finite.json"), "--kappa", "2", "--method", "ipw",
                         "--bootstrap", "20"});
  REQUIRE(boot.code == 0);
  CHECK(boot.out.find("\"se\":null") == std::string::npos);
}

TEST_CASE("replicate summaries") {
  const auto empty = run({"replicate", "--config", config("subcluster_optimal.json"), "--reps", "0"});
  REQUIRE(empty.code == 0);
  CHECK(empty.out == "method,truth,mean_point,emp_se,mean_se,coverage\n");
  const auto one = run({"replicate", "--config", config("subcluster_optimal.json"), "--reps", "4", "--threads", "1"});
  const auto eight = run({"replicate", "--config", config("subcluster_optimal.json"), "--reps", "4", "--threads", "8"});
  REQUIRE(one.code == 0);
  CHECK(one.out == eight.out);
  CHECK(csv(one.out).size() == 5);
}
