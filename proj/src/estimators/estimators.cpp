#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "common.hpp"
#include "longci/error.hpp"
#include "longci/estimators.hpp"

namespace longci {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Running product of the regime's probability factors for each column the
/// subject follows; NaN after that.
std::vector<double> cumulative_path(const PropensityModel& model, const Panel& panel,
                                    std::size_t i, const TreatmentRegime& regime,
                                    std::size_t until) {
  std::vector<double> out(panel.t(), kNaN);
  const auto& death = model.options.death_feature;
  double g = 1.0;
  bool dead = false;
  for (std::size_t k = 0; k < until; ++k) {
    dead = dead || is_dead(panel, i, k, death);
    if (!dead) {
      if (panel.has_censoring()) g *= 1.0 - model.censor_prob(panel, i, k);
      if (k < regime.specified() && (k == 0 || regime.at(k - 1) == 0)) {
        const double p = model.treat_prob(panel, i, k);
        g *= regime.at(k) == 1 ? p : 1.0 - p;
      }
    }
    out[k] = g;
  }
  return out;
}

struct WeightSummary {
  double ess = 0.0, min = 0.0, max = 0.0;
};

WeightSummary summarize_weights(const std::vector<double>& inv, const std::vector<double>& cw) {
  WeightSummary s;
  if (inv.empty()) return s;
  double sum = 0.0, sumsq = 0.0;
  s.min = s.max = inv.front();
  for (std::size_t j = 0; j < inv.size(); ++j) {
    const double w = inv[j] * cw[j];
    sum += w;
    sumsq += w * w;
    s.min = std::min(s.min, inv[j]);
    s.max = std::max(s.max, inv[j]);
  }
  s.ess = sumsq > 0.0 ? sum * sum / sumsq : 0.0;
  return s;
}

std::size_t apply_clip(std::vector<double>& inv, const std::optional<double>& alpha) {
  if (!alpha || inv.empty()) return 0;
  auto clipped = clip_weights(inv, *alpha);
  std::size_t changed = 0;
  for (std::size_t j = 0; j < inv.size(); ++j) changed += clipped[j] != inv[j];
  inv = std::move(clipped);
  return changed;
}

/// One fitted Q_k.
class OutcomeFit {
 public:
  void fit(DesignKind kind, const std::vector<std::vector<double>>& rows,
           const std::vector<double>& response, const std::vector<double>& weights,
           bool& degenerate) {
    kind_ = kind;
    degenerate = false;
    if (kind == DesignKind::Saturated) {
      std::map<std::vector<double>, std::pair<double, double>> acc;
      for (std::size_t r = 0; r < rows.size(); ++r) {
        auto& c = acc[rows[r]];
        c.first += weights[r] * response[r];
        c.second += weights[r];
      }
      cells_.clear();
      for (const auto& [key, c] : acc) {
        if (c.second > 0.0) cells_[key] = c.first / c.second;
      }
      return;
    }
    const std::size_t p = kind == DesignKind::InterceptOnly ? 1 : rows.front().size() + 1;
    Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto rr = static_cast<Eigen::Index>(r);
      x(rr, 0) = 1.0;
      for (std::size_t j = 1; j < p; ++j) x(rr, static_cast<Eigen::Index>(j)) = rows[r][j - 1];
    }
    linear_ = wls_fit(x, response, weights);
    degenerate = linear_.degenerate;
  }

  double predict(const std::vector<double>& row) const {
    if (kind_ == DesignKind::Saturated) {
      const auto it = cells_.find(row);
      return it == cells_.end() ? 0.0 : it->second;
    }
    const auto& b = linear_.coefficients;
    double y = b[0];
    if (kind_ == DesignKind::Linear) {
      for (std::size_t j = 0; j < row.size(); ++j) y += b[static_cast<Eigen::Index>(j + 1)] * row[j];
    }
    return y;
  }

 private:
  DesignKind kind_ = DesignKind::Linear;
  LinearFit linear_;
  std::map<std::vector<double>, double> cells_;
};

Estimate iterate(const Panel& panel, const TreatmentRegime& regime,
                 const EstimatorOptions& options, const PropensityModel* model) {
  detail::check_regime(panel, regime);
  const auto& death = options.propensity.death_feature;
  if (death && *death >= panel.l_dim()) throw ConfigError("death feature index out of range");
  const bool targeted = model != nullptr;
  if (targeted && model->t != panel.t()) {
    throw DataError("propensity model fitted on another grid");
  }
  const std::size_t n = panel.n(), t = panel.t(), spec = regime.specified();

  Estimate est;
  est.method = targeted ? Method::Tmle : Method::Ir;
  const auto until = detail::follow_until(panel, regime, death);
  for (std::size_t i = 0; i < n; ++i) est.n_followers += until[i] == t;
  if (targeted) {
    est.g_fits = model->fits();
    est.g_fallbacks = model->fallbacks();
    est.fluctuation.assign(t, 0.0);
  }

  std::vector<std::vector<double>> gcum;
  if (targeted) {
    gcum.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (until[i] > 0) gcum[i] = cumulative_path(*model, panel, i, regime, until[i]);
    }
  }

  // pooled fits see the observed A_k; predictions set it to the regime
  auto row_for = [&](std::size_t i, std::size_t k, std::vector<double>& row, bool observed) {
    detail::feature_row(panel, i, k, death, row);
    if (options.pool_regimes) {
      row.push_back(observed || k >= spec ? panel.a(i, k) : regime.at(k));
    }
  };

  std::vector<double> next(n, kNaN), cur(n, kNaN);
  for (std::size_t i = 0; i < n; ++i) next[i] = panel.y(i);

  OutcomeFit q;
  bool have_fit = false;
  std::vector<std::vector<double>> rows;
  std::vector<double> response, weights, row;
  for (std::size_t kk = t; kk-- > 0;) {
    rows.clear();
    response.clear();
    weights.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const bool in_set = options.pool_regimes ? !panel.censored(i, kk) : until[i] > kk;
      if (!in_set || is_dead(panel, i, kk, death) || panel.weight(i) <= 0.0) continue;
      if (std::isnan(next[i])) {
        throw DataError("subject " + std::to_string(i) + " has no outcome to regress");
      }
      row_for(i, kk, row, true);
      rows.push_back(row);
      response.push_back(next[i]);
      weights.push_back(panel.weight(i));
    }
    if (rows.empty()) {
      if (!have_fit) {
        est.defined = false;
        est.psi = kNaN;
        return est;
      }
      ++est.q_degenerate;  // carry the later fit back
    } else {
      bool degenerate = false;
      q.fit(options.q_design, rows, response, weights, degenerate);
      est.q_degenerate += degenerate;
      have_fit = true;
    }

    for (std::size_t i = 0; i < n; ++i) {
      if (panel.censored_before(i, kk)) {
        cur[i] = kNaN;
      } else if (is_dead(panel, i, kk, death)) {
        cur[i] = panel.y(i);
      } else {
        row_for(i, kk, row, false);
        cur[i] = q.predict(row);
      }
    }

    if (targeted) {
      std::vector<std::size_t> idx;
      std::vector<double> inv, r, off, cw;
      for (std::size_t i = 0; i < n; ++i) {
        if (until[i] <= kk || is_dead(panel, i, kk, death) || panel.weight(i) <= 0.0) continue;
        idx.push_back(i);
        inv.push_back(1.0 / gcum[i][kk]);
        r.push_back(next[i]);
        off.push_back(cur[i]);
        cw.push_back(panel.weight(i));
      }
      const std::size_t changed = apply_clip(inv, options.clip_alpha);
      if (kk + 1 == t) {
        const auto s = summarize_weights(inv, cw);
        est.ess = s.ess;
        est.min_weight = s.min;
        est.max_weight = s.max;
        est.clipped = changed;
      }
      double eps = 0.0;
      if (!idx.empty() && !options.zero_fluctuation) {
        for (std::size_t j = 0; j < inv.size(); ++j) inv[j] *= cw[j];
        eps = offset_intercept_fit(r, off, inv);
      }
      est.fluctuation[kk] = eps;
      if (eps != 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
          if (!panel.censored_before(i, kk) && !is_dead(panel, i, kk, death)) cur[i] += eps;
        }
      }
    }
    std::swap(next, cur);
  }

  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += panel.weight(i) * next[i];
    den += panel.weight(i);
  }
  est.psi = den > 0.0 ? num / den : kNaN;
  est.defined = den > 0.0;
  return est;
}

}  // namespace

Method parse_method(std::string_view name) {
  if (name == "ipw") return Method::Ipw;
  if (name == "ir") return Method::Ir;
  if (name == "tmle") return Method::Tmle;
  if (name == "naive") return Method::Naive;
  throw ConfigError("unknown estimator '" + std::string(name) + "'");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Ipw: return "ipw";
    case Method::Ir: return "ir";
    case Method::Tmle: return "tmle";
    case Method::Naive: return "naive";
  }
  return "unknown";
}

DesignKind parse_design(std::string_view name) {
  if (name == "linear") return DesignKind::Linear;
  if (name == "saturated") return DesignKind::Saturated;
  if (name == "intercept") return DesignKind::InterceptOnly;
  throw ConfigError("unknown design '" + std::string(name) + "'");
}

std::string to_string(DesignKind d) {
  switch (d) {
    case DesignKind::Linear: return "linear";
    case DesignKind::Saturated: return "saturated";
    case DesignKind::InterceptOnly: return "intercept";
  }
  return "unknown";
}

std::string Estimate::flags() const {
  std::string s;
  auto add = [&](const std::string& tag) {
    if (!s.empty()) s += ' ';
    s += tag;
  };
  if (!defined) add("undefined");
  if (g_fallbacks) add("g-fallback:" + std::to_string(g_fallbacks));
  if (q_degenerate) add("q-degenerate:" + std::to_string(q_degenerate));
  if (clipped) add("clipped:" + std::to_string(clipped));
  return s.empty() ? "ok" : s;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw DataError("percentile of an empty sample");
  if (!(p >= 0.0 && p <= 100.0)) throw ConfigError("percentile must be in [0, 100]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

std::vector<double> clip_weights(const std::vector<double>& weights, double alpha) {
  if (!(alpha >= 0.0 && alpha < 50.0)) throw ConfigError("clip alpha must be in [0, 50)");
  if (weights.empty()) throw DataError("cannot clip an empty weight vector");
  const double lo = percentile(weights, alpha);
  const double hi = percentile(weights, 100.0 - alpha);
  std::vector<double> out(weights.size());
  for (std::size_t j = 0; j < weights.size(); ++j) out[j] = std::clamp(weights[j], lo, hi);
  return out;
}

Estimate ipw(const Panel& panel, const TreatmentRegime& regime, const PropensityModel& model,
             std::optional<double> clip_alpha) {
  detail::check_regime(panel, regime);
  if (model.t != panel.t()) throw DataError("propensity model fitted on another grid");
  const auto until = detail::follow_until(panel, regime, model.options.death_feature);
  Estimate est;
  est.method = Method::Ipw;
  est.g_fits = model.fits();
  est.g_fallbacks = model.fallbacks();
  std::vector<double> inv, y, cw;
  for (std::size_t i = 0; i < panel.n(); ++i) {
    if (until[i] != panel.t() || panel.weight(i) <= 0.0) continue;
    const auto g = cumulative_path(model, panel, i, regime, until[i]);
    if (std::isnan(panel.y(i))) throw DataError("follower " + std::to_string(i) + " has no outcome");
    inv.push_back(1.0 / g.back());
    y.push_back(panel.y(i));
    cw.push_back(panel.weight(i));
  }
  est.n_followers = inv.size();
  if (inv.empty()) {
    est.defined = false;
    est.psi = kNaN;
    return est;
  }
  est.clipped = apply_clip(inv, clip_alpha);
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < inv.size(); ++j) {
    num += cw[j] * inv[j] * y[j];
    den += cw[j] * inv[j];
  }
  est.psi = num / den;
  const auto s = summarize_weights(inv, cw);
  est.ess = s.ess;
  est.min_weight = s.min;
  est.max_weight = s.max;
  return est;
}

Estimate naive(const Panel& panel, const TreatmentRegime& regime,
               const std::optional<std::size_t>& death_feature) {
  detail::check_regime(panel, regime);
  const auto until = detail::follow_until(panel, regime, death_feature);
  Estimate est;
  est.method = Method::Naive;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < panel.n(); ++i) {
    if (until[i] != panel.t()) continue;
    ++est.n_followers;
    num += panel.weight(i) * panel.y(i);
    den += panel.weight(i);
  }
  est.defined = den > 0.0;
  est.psi = est.defined ? num / den : kNaN;
  est.ess = static_cast<double>(est.n_followers);
  return est;
}

Estimate ir(const Panel& panel, const TreatmentRegime& regime, const EstimatorOptions& options) {
  return iterate(panel, regime, options, nullptr);
}

Estimate tmle(const Panel& panel, const TreatmentRegime& regime, const PropensityModel& model,
              const EstimatorOptions& options) {
  return iterate(panel, regime, options, &model);
}

Estimate estimate(const Panel& panel, const TreatmentRegime& regime,
                  const EstimatorOptions& options) {
  switch (options.method) {
    case Method::Ir: return ir(panel, regime, options);
    case Method::Naive: return naive(panel, regime, options.propensity.death_feature);
    case Method::Ipw:
      return ipw(panel, regime, fit_propensity(panel, options.propensity), options.clip_alpha);
    case Method::Tmle:
      return tmle(panel, regime, fit_propensity(panel, options.propensity), options);
  }
  throw ConfigError("unknown estimator");
}

AteEstimate ate(const Panel& panel, const TreatmentRegime& control,
                const TreatmentRegime& treated, const EstimatorOptions& options) {
  AteEstimate out;
  out.control = estimate(panel, control, options);
  out.treated = estimate(panel, treated, options);
  out.ate = out.control.psi - out.treated.psi;
  return out;
}

}  // namespace longci
