#include <algorithm>
#include <cmath>

#include "common.hpp"
#include "longci/error.hpp"
#include "longci/estimators.hpp"

namespace longci {
namespace detail {

void feature_row(const Panel& panel, std::size_t i, std::size_t k,
                 const std::optional<std::size_t>& death, std::vector<double>& out) {
  out.clear();
  const auto v = panel.v(i);
  out.insert(out.end(), v.begin(), v.end());
  const auto l = panel.l(i, k);
  for (std::size_t d = 0; d < l.size(); ++d) {
    if (death && *death == d) continue;
    out.push_back(l[d]);
  }
}

std::vector<std::size_t> follow_until(const Panel& panel, const TreatmentRegime& regime,
                                      const std::optional<std::size_t>& death) {
  std::vector<std::size_t> out(panel.n());
  const std::size_t spec = regime.specified();
  for (std::size_t i = 0; i < panel.n(); ++i) {
    std::size_t s = 0;
    for (; s < panel.t(); ++s) {
      if (panel.censored(i, s)) break;
      if (s < spec && !is_dead(panel, i, s, death) && panel.a(i, s) != regime.at(s)) break;
    }
    out[i] = s;
  }
  return out;
}

void check_regime(const Panel& panel, const TreatmentRegime& regime) {
  if (regime.length() != panel.t()) {
    throw DataError("regime length " + std::to_string(regime.length()) +
                    " does not match panel length " + std::to_string(panel.t()));
  }
}

}  // namespace detail

namespace {

using detail::feature_row;

Matrix design_matrix(const std::vector<std::vector<double>>& rows) {
  const std::size_t p = rows.empty() ? 1 : rows.front().size() + 1;
  Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    x(static_cast<Eigen::Index>(r), 0) = 1.0;
    for (std::size_t j = 0; j + 1 < p; ++j) {
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j + 1)) = rows[r][j];
    }
  }
  return x;
}

PropensityModel::HazardFit fit_hazard(const std::vector<std::vector<double>>& rows,
                                      const std::vector<double>& response,
                                      const std::vector<double>& weights,
                                      const PropensityOptions& options) {
  PropensityModel::HazardFit fit;
  fit.at_risk = rows.size();
  double total = 0.0, events = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    total += weights[r];
    events += weights[r] * response[r];
  }
  if (!(total > 0.0)) {
    fit.logistic.fallback = LogitFallback::ConstantResponse;
    fit.logistic.fallback_rate = kProbabilityFloor;
    fit.cells.fallback = kProbabilityFloor;
    return fit;
  }
  const double rate = std::clamp(events / total, kProbabilityFloor, 1.0 - kProbabilityFloor);
  switch (options.design) {
    case DesignKind::Saturated: {
      std::map<std::vector<double>, std::pair<double, double>> acc;
      for (std::size_t r = 0; r < rows.size(); ++r) {
        auto& cell = acc[rows[r]];
        cell.first += weights[r] * response[r];
        cell.second += weights[r];
      }
      for (const auto& [key, cell] : acc) {
        if (cell.second > 0.0) fit.cells.rate[key] = cell.first / cell.second;
      }
      fit.cells.fallback = rate;
      fit.logistic.converged = true;
      return fit;
    }
    case DesignKind::InterceptOnly: {
      std::vector<std::vector<double>> ones(rows.size());
      fit.logistic = logit_fit(design_matrix(ones), response, weights, options.logit);
      return fit;
    }
    case DesignKind::Linear:
      fit.logistic = logit_fit(design_matrix(rows), response, weights, options.logit);
      return fit;
  }
  return fit;
}

double predict_hazard(const PropensityModel::HazardFit& fit, DesignKind design,
                      const std::vector<double>& row) {
  double p = 0.0;
  if (design == DesignKind::Saturated) {
    p = fit.cells.predict(row);
  } else if (fit.logistic.fallback != LogitFallback::None) {
    p = fit.logistic.fallback_rate;
  } else if (design == DesignKind::InterceptOnly) {
    p = expit(fit.logistic.coefficients[0]);
  } else {
    double eta = fit.logistic.coefficients[0];
    for (std::size_t j = 0; j < row.size(); ++j) {
      eta += fit.logistic.coefficients[static_cast<Eigen::Index>(j + 1)] * row[j];
    }
    p = expit(eta);
  }
  return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
}

}  // namespace

double PropensityModel::CellRates::predict(const std::vector<double>& key) const {
  const auto it = rate.find(key);
  return it == rate.end() ? fallback : it->second;
}

std::size_t PropensityModel::fallbacks() const {
  std::size_t n = 0;
  for (const auto& f : treatment) n += f.fallback();
  for (const auto& f : censoring) n += f.fallback();
  return n;
}

double PropensityModel::treat_prob(const Panel& panel, std::size_t i, std::size_t k) const {
  std::vector<double> row;
  feature_row(panel, i, k, options.death_feature, row);
  const auto& fit = options.pool_time ? treatment.front() : treatment.at(k);
  return predict_hazard(fit, options.design, row);
}

double PropensityModel::censor_prob(const Panel& panel, std::size_t i, std::size_t k) const {
  if (censoring.empty()) return 0.0;
  std::vector<double> row;
  feature_row(panel, i, k, options.death_feature, row);
  const auto& fit = options.pool_time ? censoring.front() : censoring.at(k);
  return predict_hazard(fit, options.design, row);
}

bool is_dead(const Panel& panel, std::size_t i, std::size_t k,
             const std::optional<std::size_t>& death_feature) {
  if (!death_feature || panel.censored_before(i, k)) return false;
  const double d = panel.l(i, k)[*death_feature];
  return !std::isnan(d) && d != 0.0;
}

bool follows(const Panel& panel, std::size_t i, const TreatmentRegime& regime,
             std::size_t k, const std::optional<std::size_t>& death_feature) {
  detail::check_regime(panel, regime);
  for (std::size_t s = 0; s <= k && s < panel.t(); ++s) {
    if (panel.censored(i, s)) return false;
    if (s < regime.specified() && !is_dead(panel, i, s, death_feature) &&
        panel.a(i, s) != regime.at(s)) {
      return false;
    }
  }
  return true;
}

PropensityModel fit_propensity(const Panel& panel, const PropensityOptions& options) {
  if (panel.n() == 0) throw DataError("cannot fit propensities on an empty panel");
  if (options.death_feature && *options.death_feature >= panel.l_dim()) {
    throw ConfigError("death feature index out of range");
  }
  PropensityModel model;
  model.options = options;
  model.t = panel.t();
  const auto& death = options.death_feature;

  struct Stack {
    std::vector<std::vector<double>> rows;
    std::vector<double> response, weights;
    void clear() {
      rows.clear();
      response.clear();
      weights.clear();
    }
  };
  Stack treat, cens;
  std::vector<double> row;
  for (std::size_t k = 0; k < panel.t(); ++k) {
    for (std::size_t i = 0; i < panel.n(); ++i) {
      if (panel.censored_before(i, k) || is_dead(panel, i, k, death)) continue;
      feature_row(panel, i, k, death, row);
      if (panel.has_censoring()) {
        cens.rows.push_back(row);
        cens.response.push_back(panel.censored(i, k) ? 1.0 : 0.0);
        cens.weights.push_back(panel.weight(i));
      }
      if (panel.a_prev(i, k) == 0 && !panel.censored(i, k)) {
        treat.rows.push_back(row);
        treat.response.push_back(panel.a(i, k));
        treat.weights.push_back(panel.weight(i));
      }
    }
    if (!options.pool_time) {
      model.treatment.push_back(fit_hazard(treat.rows, treat.response, treat.weights, options));
      if (panel.has_censoring()) {
        model.censoring.push_back(fit_hazard(cens.rows, cens.response, cens.weights, options));
      }
      treat.clear();
      cens.clear();
    }
  }
  if (options.pool_time) {
    model.treatment.push_back(fit_hazard(treat.rows, treat.response, treat.weights, options));
    if (panel.has_censoring()) {
      model.censoring.push_back(fit_hazard(cens.rows, cens.response, cens.weights, options));
    }
  }
  return model;
}

double cumulative_prob(const PropensityModel& model, const Panel& panel, std::size_t i,
                       const TreatmentRegime& regime, std::optional<std::size_t> through) {
  detail::check_regime(panel, regime);
  if (model.t != panel.t()) throw DataError("propensity model fitted on another grid");
  const std::size_t last = through.value_or(panel.t() - 1);
  const auto& death = model.options.death_feature;
  if (!follows(panel, i, regime, last, death)) {
    throw DataError("subject " + std::to_string(i) + " does not follow the regime");
  }
  double g = 1.0;
  for (std::size_t k = 0; k <= last; ++k) {
    if (is_dead(panel, i, k, death)) break;  // absorbing: every later factor is 1
    if (panel.has_censoring()) g *= 1.0 - model.censor_prob(panel, i, k);
    if (k < regime.specified() && (k == 0 || regime.at(k - 1) == 0)) {
      const double p = model.treat_prob(panel, i, k);
      g *= regime.at(k) == 1 ? p : 1.0 - p;
    }
  }
  return g;
}

}  // namespace longci
