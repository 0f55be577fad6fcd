#include <cmath>
#include <sstream>

#include "doctest.h"
#include "longci/error.hpp"
#include "longci/harness.hpp"

using namespace longci;

namespace {

SweepConfig tiny() {
  SweepConfig c;
  c.n = 150;
  c.replications = 4;
  c.t_star = 17;
  c.deltas = {1, 4, 16};
  c.truth_m = 2000;
  return c;
}

std::string body(const ExperimentReport& r) {
  std::ostringstream out;
  write_report_csv(r, out);
  return out.str();
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("config parsing") {
    std::istringstream in(R"(# desk run
n = 500
replications = 10
deltas = 1, 2, 8
estimators = ipw, tmle
clip_alphas = 0.5
regime = jump:3
)");
    const auto c = parse_config(in);
    CHECK(c.n == 500);
    CHECK(c.replications == 10);
    CHECK(c.deltas == std::vector<int>{1, 2, 8});
    CHECK(c.estimators == std::vector<Method>{Method::Ipw, Method::Tmle});
    CHECK(c.clip_alphas == std::vector<double>{0.5});
    CHECK(c.regime == "jump:3");
    std::istringstream bad("colour = blue\n");
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
  }

  TEST_CASE("config validation") {
    auto c = tiny();
    c.replications = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny();
    c.deltas = {17};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny();
    c.regime = "sometimes";
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("summary identities") {
    ReportRow row;
    row.psi = {1.0, 2.0, std::nan(""), 4.0};
    summarize(row, 2.0, 0.1);
    CHECK(row.n_ok == 3);
    CHECK(row.mean_psi == doctest::Approx(7.0 / 3));
    CHECK(row.bias == doctest::Approx(1.0 / 3));
    const double var = (std::pow(1 - 7.0 / 3, 2) + std::pow(2 - 7.0 / 3, 2) + std::pow(4 - 7.0 / 3, 2)) / 2;
    CHECK(row.variance == doctest::Approx(var));
    const double mse = (1.0 + 0.0 + 4.0) / 3;
    CHECK(row.mse == doctest::Approx(mse).epsilon(1e-12));
    CHECK(row.mse == doctest::Approx(row.bias * row.bias + 2.0 / 3 * row.variance).epsilon(1e-12));
    CHECK(row.mc_se_bias == doctest::Approx(std::sqrt(var / 3 + 0.01)));
    ReportRow flat;
    flat.psi = {3.0, 3.0};
    summarize(flat, 3.0, 0.0);
    CHECK(flat.bias == 0.0);
    CHECK(flat.variance == 0.0);
  }

  TEST_CASE("sweep rows and determinism across worker counts") {
    auto c = tiny();
    const auto one = run_sweep(c);
    CHECK(one.rows.size() == 9);
    const auto& row = one.find("ipw", "baseline", 4);
    CHECK(row.t == 5);
    CHECK(row.psi.size() == 4);
    c.workers = 3;
    CHECK(body(run_sweep(c)) == body(one));
    // one truth per sweep
    for (const auto& r : one.rows) CHECK(r.truth == one.rows.front().truth);
    CHECK_THROWS_AS(one.find("ipw", "baseline", 2), std::out_of_range);
  }

  TEST_CASE("variance reduction rows") {
    auto c = tiny();
    c.clip_alphas = {0.1, 2.5};
    const auto r = run_varred(c);
    for (const char* m : {"baseline", "clip:0.1", "clip:2.5", "pool-time"}) {
      CHECK_NOTHROW(r.find("ipw", m, 1));
      CHECK_NOTHROW(r.find("tmle", m, 1));
    }
    CHECK_NOTHROW(r.find("ir", "pool-regimes", 1));
    CHECK_NOTHROW(r.find("tmle", "pool-regimes", 1));
    CHECK_THROWS(r.find("ipw", "pool-regimes", 1));
  }

  TEST_CASE("rct and effect-delay reports") {
    auto c = tiny();
    c.deltas = {1, 16};
    const auto rct = run_rct(c);
    CHECK_NOTHROW(rct.find("naive", "baseline", 1));
    c.omegas = {1, 4};
    const auto ed = run_effect_delay(c);
    CHECK(ed.rows.size() == 8);
    CHECK(ed.find("ir", "baseline", 16, 4).omega == 4);
    CHECK(ed.find("ir", "baseline", 1, 1).truth != ed.find("ir", "baseline", 1, 4).truth);
  }

  TEST_CASE("csv and gnuplot output") {
    auto c = tiny();
    c.deltas = {1};
    c.estimators = {Method::Ir};
    const auto r = run_sweep(c);
    const std::string csv = body(r);
    CHECK(csv.rfind("# kind=sweep", 0) == 0);
    CHECK(csv.find("estimator,method,delta,omega,t,n_ok,mean_psi") != std::string::npos);
    CHECK(csv.find("\nir,baseline,1,1,17,4,") != std::string::npos);
    std::ostringstream plot;
    write_gnuplot(r, "out.csv", plot);
    CHECK(plot.str().find("'out.csv'") != std::string::npos);
    CHECK(plot.str().find("set logscale x 2") != std::string::npos);
  }
}
