#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "longci/error.hpp"
#include "longci/regress.hpp"
#include "oracles.hpp"

using namespace longci;

namespace {

struct Problem {
  Matrix x;
  std::vector<double> y, w;
  oracle::Mat rows;
};

Problem random_linear(std::size_t n, std::size_t p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  Problem pr{Matrix(n, p), std::vector<double>(n), std::vector<double>(n), {}};
  for (std::size_t i = 0; i < n; ++i) {
    pr.x(i, 0) = 1.0;
    for (std::size_t j = 1; j < p; ++j) pr.x(i, j) = z(rng);
    pr.y[i] = 0.5 - pr.x(i, 1) + z(rng);
    pr.w[i] = u(rng);
    pr.rows.emplace_back();
    for (std::size_t j = 0; j < p; ++j) pr.rows.back().push_back(pr.x(i, j));
  }
  return pr;
}

Problem random_logistic(std::size_t n, std::size_t p, std::uint64_t seed) {
  Problem pr = random_linear(n, p, seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double eta = -0.3;
    for (std::size_t j = 1; j < p; ++j) eta += 0.8 * pr.x(i, j) / static_cast<double>(j);
    pr.y[i] = u(rng) < expit(eta) ? 1.0 : 0.0;
  }
  return pr;
}

}  // namespace

TEST_SUITE("regress") {
  TEST_CASE("wls intercept only is the weighted mean") {
    Matrix x = Matrix::Ones(2, 1);
    const std::vector<double> y{1, 3}, w{1, 1};
    CHECK(wls_fit(x, y, w).coefficients[0] == doctest::Approx(2.0));
  }

  TEST_CASE("wls reproduces an exact linear response") {
    Problem pr = random_linear(30, 3, 1);
    for (std::size_t i = 0; i < 30; ++i) pr.y[i] = 1.0 + 2.0 * pr.x(i, 1) - 3.0 * pr.x(i, 2);
    const auto fit = wls_fit(pr.x, pr.y, pr.w);
    const Vector pred = fit.predict(pr.x);
    for (std::size_t i = 0; i < 30; ++i) CHECK(std::abs(pred[i] - pr.y[i]) < 1e-12);
  }

  TEST_CASE("wls matches the normal equations on random instances") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Problem pr = random_linear(50, 4, seed);
      const auto fit = wls_fit(pr.x, pr.y, pr.w);
      const auto ref = oracle::normal_equations(pr.rows, pr.y, pr.w);
      for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(fit.coefficients[j] - ref[j]) < 1e-8);
      CHECK_FALSE(fit.degenerate);
    }
  }

  TEST_CASE("wls zero weights drop rows and rank deficiency is flagged") {
    Matrix x(4, 3);
    x << 1, 1, 2, 1, 2, 4, 1, 3, 6, 1, 4, 8;  // third column = 2 * second
    const std::vector<double> y{1, 2, 3, 4}, w{1, 1, 1, 0};
    const auto fit = wls_fit(x, y, w);
    CHECK(fit.degenerate);
    CHECK(fit.n_used == 3);
    CHECK(fit.rank == 2);
    const Vector pred = fit.predict(x);
    for (int i = 0; i < 4; ++i) CHECK(pred[i] == doctest::Approx(y[i]).epsilon(1e-10));
  }

  TEST_CASE("wls input errors") {
    Matrix x = Matrix::Ones(2, 1);
    CHECK_THROWS_AS(wls_fit(x, std::vector<double>{1, 2}, std::vector<double>{0, 0}), DataError);
    CHECK_THROWS_AS(wls_fit(x, std::vector<double>{1, 2}, std::vector<double>{-1, 1}), DataError);
    CHECK_THROWS_AS(wls_fit(x, std::vector<double>{1}, std::vector<double>{1}), DataError);
  }

  TEST_CASE("logit intercept only with half events") {
    Matrix x = Matrix::Ones(4, 1);
    const std::vector<double> y{1, 0, 1, 0}, w{1, 1, 1, 1};
    const auto fit = logit_fit(x, y, w);
    CHECK(fit.converged);
    CHECK(std::abs(fit.coefficients[0]) < 1e-12);
  }

  TEST_CASE("logit all zero responses fall back to the floor") {
    Matrix x(3, 2);
    x << 1, 0.1, 1, 0.2, 1, 0.3;
    const std::vector<double> y{0, 0, 0}, w{1, 1, 1};
    const auto fit = logit_fit(x, y, w);
    CHECK(fit.fallback == LogitFallback::ConstantResponse);
    const std::vector<double> row{1, 0.2};
    CHECK(fit.predict(row) == kProbabilityFloor);
  }

  TEST_CASE("logit separation is detected") {
    Matrix x(6, 2);
    x << 1, -3, 1, -2, 1, -1, 1, 1, 1, 2, 1, 3;
    const std::vector<double> y{0, 0, 0, 1, 1, 1}, w(6, 1.0);
    const auto fit = logit_fit(x, y, w);
    CHECK(fit.fallback == LogitFallback::Separation);
    CHECK(fit.fallback_rate == doctest::Approx(0.5));
  }

  TEST_CASE("logit matches an independent Newton solve") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Problem pr = random_logistic(200, 3, seed);
      const auto fit = logit_fit(pr.x, pr.y, pr.w);
      REQUIRE(fit.fallback == LogitFallback::None);
      const auto ref = oracle::newton_logit(pr.rows, pr.y, pr.w);
      for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(fit.coefficients[j] - ref[j]) < 1e-6);
      CHECK(fit.score_max_norm < 1e-6);
    }
  }

  TEST_CASE("logit score is the gradient of the log-likelihood") {
    const Problem pr = random_logistic(80, 3, 9);
    Vector beta(3);
    beta << 0.2, -0.4, 0.1;
    const Vector score = logit_score(pr.x, pr.y, pr.w, beta);
    for (int j = 0; j < 3; ++j) {
      Vector up = beta, dn = beta;
      const double h = 1e-6;
      up[j] += h;
      dn[j] -= h;
      const double fd = (logit_log_likelihood(pr.x, pr.y, pr.w, up) -
                         logit_log_likelihood(pr.x, pr.y, pr.w, dn)) / (2 * h);
      CHECK(score[j] == doctest::Approx(fd).epsilon(1e-6));
    }
  }

  TEST_CASE("logit standard errors come from the Fisher information") {
    const Problem pr = random_logistic(300, 2, 3);
    const auto fit = logit_fit(pr.x, pr.y, pr.w);
    REQUIRE(fit.standard_errors.size() == 2);
    double i00 = 0, i01 = 0, i11 = 0;
    for (int i = 0; i < 300; ++i) {
      const double row[2] = {pr.x(i, 0), pr.x(i, 1)};
      const double p = fit.predict_raw(row);
      const double v = pr.w[i] * p * (1 - p);
      i00 += v;
      i01 += v * pr.x(i, 1);
      i11 += v * pr.x(i, 1) * pr.x(i, 1);
    }
    const double det = i00 * i11 - i01 * i01;
    CHECK(fit.standard_errors[0] == doctest::Approx(std::sqrt(i11 / det)).epsilon(1e-8));
    CHECK(fit.standard_errors[1] == doctest::Approx(std::sqrt(i00 / det)).epsilon(1e-8));
  }

  TEST_CASE("logit rejects non-binary responses") {
    Matrix x = Matrix::Ones(2, 1);
    CHECK_THROWS_AS(logit_fit(x, std::vector<double>{0, 0.5}, std::vector<double>{1, 1}),
                    DataError);
  }

  TEST_CASE("offset intercept fit") {
    CHECK(offset_intercept_fit(std::vector<double>{2, 4}, std::vector<double>{1, 1},
                               std::vector<double>{1, 1}) == doctest::Approx(2.0));
    CHECK(offset_intercept_fit(std::vector<double>{0.3, -1}, std::vector<double>{0.3, -1},
                               std::vector<double>{1, 2}) == 0.0);
    CHECK(offset_intercept_fit(std::vector<double>{0, 4}, std::vector<double>{0, 0},
                               std::vector<double>{1, 3}) == doctest::Approx(3.0));
    CHECK_THROWS_AS(offset_intercept_fit(std::vector<double>{1}, std::vector<double>{0},
                                         std::vector<double>{0}),
                    DataError);
  }

  TEST_CASE("expit and logit") {
    CHECK(expit(0.0) == 0.5);
    CHECK(expit(-800.0) >= 0.0);
    CHECK(expit(800.0) == 1.0);
    CHECK(logit(expit(1.7)) == doctest::Approx(1.7));
  }
}
