#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "longci/panel.hpp"
#include "longci/regime.hpp"
#include "longci/regress.hpp"

namespace longci {

enum class Method { Ipw, Ir, Tmle, Naive };

Method parse_method(std::string_view name);
std::string to_string(Method m);

/// How a regression row is built from (V, L_t[, A_t]).
///  Linear:        intercept plus the raw features.
///  Saturated:     one indicator per distinct feature tuple (discrete data).
///  InterceptOnly: a single constant column.
enum class DesignKind { Linear, Saturated, InterceptOnly };

DesignKind parse_design(std::string_view name);
std::string to_string(DesignKind d);

struct PropensityOptions {
  bool pool_time = false;
  DesignKind design = DesignKind::Linear;
  /// Column of L holding the death/discharge indicator D_t. That column is
  /// left out of every design; rows with D_t = 1 never enter a fit.
  std::optional<std::size_t> death_feature;
  LogitOptions logit;
};

/// Fitted treatment (and, with censoring, censoring) hazards.
class PropensityModel {
 public:
  /// Weighted event rate per distinct feature tuple; used for Saturated.
  struct CellRates {
    std::map<std::vector<double>, double> rate;
    double fallback = 0.5;
    double predict(const std::vector<double>& key) const;
  };

  struct HazardFit {
    LogisticFit logistic;
    CellRates cells;
    std::size_t at_risk = 0;
    bool fallback() const { return logistic.fallback != LogitFallback::None; }
  };

  PropensityOptions options;
  std::size_t t = 0;
  /// One per time point, or a single entry when pooled over time.
  std::vector<HazardFit> treatment;
  /// Same layout; empty when the panel has no censoring column.
  std::vector<HazardFit> censoring;

  /// P(A_k = 1 | A_{k-1} = 0, history), clamped to the probability floor.
  double treat_prob(const Panel& panel, std::size_t i, std::size_t k) const;
  /// P(C_k = 1 | C_{k-1} = 0, history), clamped.
  double censor_prob(const Panel& panel, std::size_t i, std::size_t k) const;

  std::size_t fits() const { return treatment.size() + censoring.size(); }
  std::size_t fallbacks() const;
};

/// Throws DataError on an empty panel.
PropensityModel fit_propensity(const Panel& panel, const PropensityOptions& options = {});

/// D_t for subject i at column k (false when no death feature is set or L is
/// unobserved).
bool is_dead(const Panel& panel, std::size_t i, std::size_t k,
             const std::optional<std::size_t>& death_feature);

/// True when subject i is uncensored through column k and, at every specified
/// column s <= k, either A_s = a_s or D_s = 1.
bool follows(const Panel& panel, std::size_t i, const TreatmentRegime& regime,
             std::size_t k, const std::optional<std::size_t>& death_feature = {});

/// Product of treatment factors over the specified prefix (through column k)
/// and of (1 - censoring hazard) over every column through k. Throws
/// DataError if the subject does not follow the regime through k.
double cumulative_prob(const PropensityModel& model, const Panel& panel,
                       std::size_t i, const TreatmentRegime& regime,
                       std::optional<std::size_t> through = {});

/// Type-7 percentile (linear interpolation between order statistics) for
/// p in [0, 100]. Throws DataError on empty input.
double percentile(std::vector<double> values, double p);

/// Clamps each weight into [P_alpha, P_{100-alpha}] of the input.
/// Throws ConfigError unless 0 <= alpha < 50; DataError on empty input.
std::vector<double> clip_weights(const std::vector<double>& weights, double alpha);

struct EstimatorOptions {
  Method method = Method::Ir;
  std::optional<double> clip_alpha;
  bool pool_regimes = false;
  DesignKind q_design = DesignKind::Linear;
  PropensityOptions propensity;
  /// Test hook: TMLE with every fluctuation intercept forced to zero.
  bool zero_fluctuation = false;
};

struct Estimate {
  Method method = Method::Ir;
  double psi = 0.0;
  bool defined = true;
  std::size_t n_followers = 0;  // followers through the last column
  double ess = 0.0;             // IPW and TMLE final-step weights
  double min_weight = 0.0;
  double max_weight = 0.0;
  std::size_t clipped = 0;
  std::size_t g_fits = 0;
  std::size_t g_fallbacks = 0;
  std::size_t q_degenerate = 0;  // rank-deficient or carried-forward Q fits
  std::vector<double> fluctuation;  // TMLE epsilon per column

  double fallback_rate() const {
    return g_fits == 0 ? 0.0 : static_cast<double>(g_fallbacks) / g_fits;
  }
  /// Space-separated tags, "ok" when nothing to report.
  std::string flags() const;
};

/// Hajek-weighted follower mean. Case weights multiply the inverse weights.
Estimate ipw(const Panel& panel, const TreatmentRegime& regime,
             const PropensityModel& model, std::optional<double> clip_alpha = {});

/// Unweighted mean outcome of followers.
Estimate naive(const Panel& panel, const TreatmentRegime& regime,
               const std::optional<std::size_t>& death_feature = {});

/// Backward iterated regression.
Estimate ir(const Panel& panel, const TreatmentRegime& regime,
            const EstimatorOptions& options = {});

/// Iterated regression with an offset-intercept targeting step per column.
Estimate tmle(const Panel& panel, const TreatmentRegime& regime,
              const PropensityModel& model, const EstimatorOptions& options = {});

/// Dispatches on options.method, fitting the propensity model when needed.
Estimate estimate(const Panel& panel, const TreatmentRegime& regime,
                  const EstimatorOptions& options);

struct BootstrapResult {
  Estimate point;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> replicates;  // defined replicate estimates, in order
  std::size_t skipped = 0;         // replicates with an undefined estimate
};

/// Percentile bootstrap over subjects. Each replicate refits every model.
/// Throws ConfigError unless b >= 2 and 0 < level < 100.
BootstrapResult bootstrap_ci(const Panel& panel, const TreatmentRegime& regime,
                             const EstimatorOptions& options, std::size_t b,
                             double level, std::uint64_t seed, unsigned workers = 1);

struct AteEstimate {
  Estimate control;  // regime "a"
  Estimate treated;  // regime "b"
  double ate = 0.0;  // control.psi - treated.psi
};

AteEstimate ate(const Panel& panel, const TreatmentRegime& control,
                const TreatmentRegime& treated, const EstimatorOptions& options);

}  // namespace longci
