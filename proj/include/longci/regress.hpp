#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace longci {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Lower clamp applied to every predicted propensity before it is inverted.
inline constexpr double kProbabilityFloor = 1e-6;

struct LinearFit {
  Vector coefficients;  // intercept first when the design has one
  std::vector<std::string> column_names;
  std::size_t n_used = 0;
  std::size_t rank = 0;
  /// Set when the weighted design was rank deficient; coefficients are then
  /// the minimum-norm least-squares solution.
  bool degenerate = false;

  double predict(std::span<const double> row) const;
  Vector predict(const Matrix& design) const;
};

/// Weighted least squares via column-pivoted Householder QR on the
/// sqrt(weight)-scaled system. Rows with zero weight are ignored.
/// Throws DataError on shape mismatch, negative weights, or no positive
/// weight.
LinearFit wls_fit(const Matrix& design, std::span<const double> response,
                  std::span<const double> weights,
                  std::vector<std::string> column_names = {});

enum class LogitFallback {
  None,
  ConstantResponse,  // every positive-weight response equal
  Separation,        // fitted linear predictor diverged
  NoConvergence,     // iteration cap reached
};

std::string to_string(LogitFallback f);

struct LogisticFit {
  Vector coefficients;  // log-odds; zero vector for fallbacks
  bool converged = false;
  LogitFallback fallback = LogitFallback::None;
  /// Intercept-only event rate used for every prediction when a fallback is
  /// set, clamped to [kProbabilityFloor, 1 - kProbabilityFloor].
  double fallback_rate = 0.0;
  int iterations = 0;
  double log_likelihood = 0.0;
  double score_max_norm = 0.0;
  /// sqrt(diag(inverse Fisher information)); empty for fallbacks.
  Vector standard_errors;
  std::size_t n_used = 0;

  /// Unclamped probability.
  double predict_raw(std::span<const double> row) const;
  /// Probability clamped to [kProbabilityFloor, 1 - kProbabilityFloor].
  double predict(std::span<const double> row) const;
};

struct LogitOptions {
  int max_iterations = 100;
  double rel_loglik_tol = 1e-10;
  double score_tol = 1e-8;
  /// |eta| beyond this at the optimum is treated as separation.
  double separation_eta = 30.0;
};

/// Weighted Bernoulli maximum likelihood by iteratively reweighted least
/// squares with step halving. Responses must be 0 or 1.
LogisticFit logit_fit(const Matrix& design, std::span<const double> response,
                      std::span<const double> weights,
                      const LogitOptions& options = {});

/// Weighted log-likelihood and score X'W(y - p) at `beta`; shared with tests.
double logit_log_likelihood(const Matrix& design, std::span<const double> response,
                            std::span<const double> weights, const Vector& beta);
Vector logit_score(const Matrix& design, std::span<const double> response,
                   std::span<const double> weights, const Vector& beta);

/// Intercept of a weighted linear regression of `response` on a constant with
/// `offset` held fixed: sum w (response - offset) / sum w. Throws DataError if
/// the total weight is zero.
double offset_intercept_fit(std::span<const double> response,
                            std::span<const double> offset,
                            std::span<const double> weights);

inline double expit(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace longci
