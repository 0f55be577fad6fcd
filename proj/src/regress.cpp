#include "longci/regress.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "longci/error.hpp"
#include "longci/kernels.hpp"

namespace longci {
namespace {

std::span<const double> col(const Matrix& m, Eigen::Index j) {
  return {m.col(j).data(), static_cast<std::size_t>(m.rows())};
}

void check_shapes(const Matrix& design, std::span<const double> response,
                  std::span<const double> weights, const char* who) {
  if (static_cast<std::size_t>(design.rows()) != response.size() ||
      response.size() != weights.size()) {
    throw DataError(std::string(who) + ": design, response and weights differ in length");
  }
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw DataError(std::string(who) + ": weights must be finite and non-negative");
    }
  }
}

/// Rows with positive weight, gathered into contiguous storage.
struct Compact {
  Matrix x;
  std::vector<double> y;
  std::vector<double> w;
};

Compact gather_positive(const Matrix& design, std::span<const double> response,
                        std::span<const double> weights) {
  std::vector<Eigen::Index> rows;
  rows.reserve(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) rows.push_back(static_cast<Eigen::Index>(i));
  }
  Compact c;
  const auto m = static_cast<Eigen::Index>(rows.size());
  if (m == design.rows()) {
    c.x = design;
    c.y.assign(response.begin(), response.end());
    c.w.assign(weights.begin(), weights.end());
    return c;
  }
  c.x.resize(m, design.cols());
  c.y.resize(rows.size());
  c.w.resize(rows.size());
  for (Eigen::Index r = 0; r < m; ++r) {
    c.x.row(r) = design.row(rows[r]);
    c.y[r] = response[rows[r]];
    c.w[r] = weights[rows[r]];
  }
  return c;
}

/// eta = X beta, accumulated column by column.
void linear_predictor(const Matrix& x, const Vector& beta, std::span<double> eta) {
  std::fill(eta.begin(), eta.end(), 0.0);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (beta[j] != 0.0) kernels::axpy(beta[j], col(x, j), eta);
  }
}

/// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double loglik_from_eta(std::span<const double> eta, std::span<const double> y,
                       std::span<const double> w) {
  double ll = 0.0;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    // y log p + (1 - y) log(1 - p) = y eta - log(1 + e^eta)
    ll += w[i] * (y[i] * eta[i] - softplus(eta[i]));
  }
  return ll;
}

Vector score_from_eta(const Matrix& x, std::span<const double> eta,
                      std::span<const double> y, std::span<const double> w) {
  std::vector<double> r(eta.size());
  for (std::size_t i = 0; i < eta.size(); ++i) r[i] = w[i] * (y[i] - expit(eta[i]));
  Vector s(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) s[j] = kernels::dot(col(x, j), r);
  return s;
}

/// Solves the sqrt(w)-scaled least-squares problem; returns rank.
Vector solve_scaled(const Matrix& x, std::span<const double> y,
                    std::span<const double> w, std::size_t& rank) {
  const auto m = x.rows();
  std::vector<double> sw(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) sw[i] = std::sqrt(w[i]);
  Matrix xs(m, x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    kernels::mul(col(x, j), sw, {xs.col(j).data(), static_cast<std::size_t>(m)});
  }
  Vector ys(m);
  kernels::mul(y, sw, {ys.data(), static_cast<std::size_t>(m)});

  Eigen::ColPivHouseholderQR<Matrix> qr(xs);
  rank = static_cast<std::size_t>(qr.rank());
  if (rank == static_cast<std::size_t>(x.cols())) return qr.solve(ys);
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(xs);
  return cod.solve(ys);
}

bool is_constant_one(const Matrix& x, Eigen::Index j) {
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (x(i, j) != 1.0) return false;
  }
  return x.rows() > 0;
}

}  // namespace

double LinearFit::predict(std::span<const double> row) const {
  return kernels::dot(row, {coefficients.data(), static_cast<std::size_t>(coefficients.size())});
}

Vector LinearFit::predict(const Matrix& design) const {
  Vector out(design.rows());
  linear_predictor(design, coefficients, {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

LinearFit wls_fit(const Matrix& design, std::span<const double> response,
                  std::span<const double> weights,
                  std::vector<std::string> column_names) {
  check_shapes(design, response, weights, "wls_fit");
  Compact c = gather_positive(design, response, weights);
  if (c.y.empty()) throw DataError("wls_fit: no observation has positive weight");

  LinearFit fit;
  fit.column_names = std::move(column_names);
  fit.n_used = c.y.size();
  fit.coefficients = solve_scaled(c.x, c.y, c.w, fit.rank);
  fit.degenerate = fit.rank < static_cast<std::size_t>(design.cols());
  return fit;
}

std::string to_string(LogitFallback f) {
  switch (f) {
    case LogitFallback::None: return "none";
    case LogitFallback::ConstantResponse: return "constant-response";
    case LogitFallback::Separation: return "separation";
    case LogitFallback::NoConvergence: return "no-convergence";
  }
  return "unknown";
}

double LogisticFit::predict_raw(std::span<const double> row) const {
  if (fallback != LogitFallback::None) return fallback_rate;
  return expit(kernels::dot(
      row, {coefficients.data(), static_cast<std::size_t>(coefficients.size())}));
}

double LogisticFit::predict(std::span<const double> row) const {
  return std::clamp(predict_raw(row), kProbabilityFloor, 1.0 - kProbabilityFloor);
}

double logit_log_likelihood(const Matrix& design, std::span<const double> response,
                            std::span<const double> weights, const Vector& beta) {
  std::vector<double> eta(response.size());
  linear_predictor(design, beta, eta);
  return loglik_from_eta(eta, response, weights);
}

Vector logit_score(const Matrix& design, std::span<const double> response,
                   std::span<const double> weights, const Vector& beta) {
  std::vector<double> eta(response.size());
  linear_predictor(design, beta, eta);
  return score_from_eta(design, eta, response, weights);
}

LogisticFit logit_fit(const Matrix& design, std::span<const double> response,
                      std::span<const double> weights, const LogitOptions& options) {
  check_shapes(design, response, weights, "logit_fit");
  for (double y : response) {
    if (y != 0.0 && y != 1.0) throw DataError("logit_fit: responses must be 0 or 1");
  }
  Compact c = gather_positive(design, response, weights);
  if (c.y.empty()) throw DataError("logit_fit: no observation has positive weight");

  LogisticFit fit;
  fit.n_used = c.y.size();
  fit.coefficients = Vector::Zero(design.cols());
  const double total = kernels::sum(c.w);
  const double events = kernels::dot(c.w, c.y);
  const double rate = events / total;
  fit.fallback_rate = std::clamp(rate, kProbabilityFloor, 1.0 - kProbabilityFloor);

  if (events <= 0.0 || events >= total) {
    fit.fallback = LogitFallback::ConstantResponse;
    return fit;
  }

  const auto m = static_cast<std::size_t>(c.x.rows());
  Vector beta = Vector::Zero(design.cols());
  for (Eigen::Index j = 0; j < c.x.cols(); ++j) {
    if (is_constant_one(c.x, j)) {
      beta[j] = logit(rate);
      break;
    }
  }

  std::vector<double> eta(m), trial(m), work_w(m), work_u(m);
  linear_predictor(c.x, beta, eta);
  double ll = loglik_from_eta(eta, c.y, c.w);
  Vector score = score_from_eta(c.x, eta, c.y, c.w);
  bool converged = score.cwiseAbs().maxCoeff() < options.score_tol;
  int iter = 0;

  while (!converged && iter < options.max_iterations) {
    ++iter;
    for (std::size_t i = 0; i < m; ++i) {
      const double p = expit(eta[i]);
      const double v = std::max(p * (1.0 - p), std::numeric_limits<double>::min());
      work_w[i] = c.w[i] * v;
      work_u[i] = (c.y[i] - p) / v;
    }
    std::size_t rank = 0;
    Vector step = solve_scaled(c.x, work_u, work_w, rank);
    if (!step.allFinite()) break;

    double ll_new = ll;
    Vector beta_new = beta;
    for (int halving = 0; halving < 40; ++halving) {
      beta_new = beta + step;
      linear_predictor(c.x, beta_new, trial);
      ll_new = loglik_from_eta(trial, c.y, c.w);
      if (ll_new >= ll - 1e-12 * std::abs(ll)) break;
      step *= 0.5;
    }
    const double rel_change = std::abs(ll_new - ll) / std::max(std::abs(ll), 1e-300);
    beta = beta_new;
    eta.swap(trial);
    ll = ll_new;
    score = score_from_eta(c.x, eta, c.y, c.w);
    if (score.cwiseAbs().maxCoeff() < options.score_tol ||
        rel_change < options.rel_loglik_tol) {
      converged = true;
    }
  }

  fit.iterations = iter;
  fit.log_likelihood = ll;
  fit.score_max_norm = score.cwiseAbs().maxCoeff();

  double max_eta = 0.0;
  for (double e : eta) max_eta = std::max(max_eta, std::abs(e));
  if (max_eta > options.separation_eta || !beta.allFinite()) {
    fit.fallback = LogitFallback::Separation;
    return fit;
  }
  if (!converged) {
    fit.fallback = LogitFallback::NoConvergence;
    return fit;
  }

  fit.converged = true;
  fit.coefficients = beta;
  Matrix info = Matrix::Zero(c.x.cols(), c.x.cols());
  for (std::size_t i = 0; i < m; ++i) {
    const double p = expit(eta[i]);
    work_w[i] = c.w[i] * p * (1.0 - p);
  }
  for (Eigen::Index j = 0; j < c.x.cols(); ++j) {
    for (Eigen::Index k = 0; k <= j; ++k) {
      info(j, k) = info(k, j) = kernels::wdot(work_w, col(c.x, j), col(c.x, k));
    }
  }
  Eigen::LDLT<Matrix> ldlt(info);
  if (ldlt.info() == Eigen::Success) {
    Matrix cov = ldlt.solve(Matrix::Identity(info.rows(), info.cols()));
    fit.standard_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  }
  return fit;
}

double offset_intercept_fit(std::span<const double> response,
                            std::span<const double> offset,
                            std::span<const double> weights) {
  if (response.size() != offset.size() || offset.size() != weights.size()) {
    throw DataError("offset_intercept_fit: inputs differ in length");
  }
  const double total = kernels::sum(weights);
  if (!(total > 0.0)) throw DataError("offset_intercept_fit: total weight is zero");
  std::vector<double> resid(response.size());
  for (std::size_t i = 0; i < resid.size(); ++i) resid[i] = response[i] - offset[i];
  return kernels::dot(weights, resid) / total;
}

}  // namespace longci
