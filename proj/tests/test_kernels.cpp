#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "longci/kernels.hpp"

using namespace longci::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = z(rng);
  return v;
}

double abs_sum(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] * b[i]);
  return s;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("scalar backend is always available") {
    CHECK(backend_supported(Backend::Scalar));
    ScopedBackend pin(Backend::Scalar);
    CHECK(active_backend() == Backend::Scalar);
    const std::vector<double> x{1, 2, 3}, y{4, 5, 6}, w{1, 0, 2};
    CHECK(dot(x, y) == 32.0);
    CHECK(wdot(w, x, y) == 40.0);
    CHECK(sum(x) == 6.0);
    CHECK(sumsq(x) == 14.0);
    std::vector<double> z{1, 1, 1};
    axpy(2.0, x, z);
    CHECK(z == std::vector<double>{3, 5, 7});
    mul(x, y, z);
    CHECK(z == std::vector<double>{4, 10, 18});
  }

  TEST_CASE("vector backends agree with scalar") {
    std::mt19937_64 rng(42);
    for (Backend b : {Backend::Avx2, Backend::Neon}) {
      if (!backend_supported(b)) continue;
      CAPTURE(backend_name(b));
      for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 64u, 67u, 1001u}) {
        CAPTURE(n);
        const auto x = random_vec(n, rng), y = random_vec(n, rng);
        auto w = random_vec(n, rng);
        for (auto& v : w) v = std::abs(v);
        double d0, wd0, s0, ss0;
        std::vector<double> ax0 = y, m0(n);
        {
          ScopedBackend pin(Backend::Scalar);
          d0 = dot(x, y);
          wd0 = wdot(w, x, y);
          s0 = sum(x);
          ss0 = sumsq(x);
          axpy(0.7, x, ax0);
          mul(x, y, m0);
        }
        ScopedBackend pin(b);
        const double tol = 1e-13 * (1.0 + abs_sum(x, y) + abs_sum(w, x) * 3);
        CHECK(std::abs(dot(x, y) - d0) <= tol);
        CHECK(std::abs(wdot(w, x, y) - wd0) <= tol);
        CHECK(std::abs(sum(x) - s0) <= tol);
        CHECK(std::abs(sumsq(x) - ss0) <= tol);
        std::vector<double> ax = y, m(n);
        axpy(0.7, x, ax);
        mul(x, y, m);
        for (std::size_t i = 0; i < n; ++i) {
          CHECK(ax[i] == doctest::Approx(ax0[i]).epsilon(1e-15));
          CHECK(m[i] == m0[i]);
        }
      }
    }
  }

  TEST_CASE("mul may alias its input") {
    std::vector<double> x{1, 2, 3, 4, 5}, y{2, 2, 2, 2, 2};
    mul(x, y, x);
    CHECK(x == std::vector<double>{2, 4, 6, 8, 10});
  }

  TEST_CASE("unsupported backend is rejected") {
    for (Backend b : {Backend::Avx2, Backend::Neon}) {
      if (!backend_supported(b)) CHECK_THROWS_AS(force_backend(b), std::invalid_argument);
    }
  }
}
