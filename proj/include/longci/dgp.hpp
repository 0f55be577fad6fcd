#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "longci/panel.hpp"
#include "longci/regime.hpp"

namespace longci {

/// Seed used by every documented experiment; sample_params(kDefaultParamSeed)
/// gives a never-treat follower fraction close to 25%.
inline constexpr std::uint64_t kDefaultParamSeed = 20200842;

/// One structural equation for a time-varying feature:
/// L_{t,d} = intercept + v.V + lag.L_{t-1} + treat * A_{t-omega} + eps.
struct FeatureEquation {
  double intercept = 0.0;
  std::array<double, 2> v{};
  std::array<double, 3> lag{};
  double treat = 0.0;
};

/// Logistic hazard expit(intercept + v.V + l.L_t).
struct Hazard {
  double intercept = 0.0;
  std::array<double, 2> v{};
  std::array<double, 3> l{};
};

struct DgpParams {
  /// Equations for L_1, L_2, L_3. The outcome reuses the L_3 equation one
  /// step past the horizon.
  std::array<FeatureEquation, 3> beta{};
  /// Treatment hazard while A_{t-1} = 0.
  Hazard gamma{};
  int omega = 1;
  double noise_sd = 0.05;
  int t_star = 257;
  bool confounded = true;
  std::optional<Hazard> censoring;

  /// Throws ConfigError when omega < 1, t_star < 2, noise_sd <= 0, or an
  /// unconfounded parameter set has non-zero feature coefficients.
  void validate() const;

  /// RCT variant: treatment hazard no longer depends on V or L, and the
  /// intercept is recalibrated so that 25% of subjects never start treatment.
  DgpParams unconfounded() const;
};

/// gamma intercept -5.5, gamma_{3,3} = 0.5, beta_{3,1} = 0.006 (reused, with
/// a minus sign, as the L_3 treatment coefficient), L_3 lag on itself fixed
/// at 1; every other coefficient drawn i.i.d. N(0, 0.005^2).
DgpParams sample_params(std::uint64_t seed);

/// Observational panel at delta = 1 with t = t_star.
Panel generate_panel(const DgpParams& params, std::size_t n, std::uint64_t seed);

/// Same noise draws as generate_panel for equal seeds, with every subject's
/// treatment set to `regime` and no censoring.
Panel generate_intervened(const DgpParams& params, const TreatmentRegime& regime,
                          std::size_t n, std::uint64_t seed);

struct TruthEstimate {
  double psi = 0.0;
  double mc_se = 0.0;
  std::size_t m = 0;
};

/// Monte Carlo E[Y^regime] over m intervened trajectories (m >= 1000).
/// Streams subjects, so memory does not grow with t_star.
TruthEstimate truth_mc(const DgpParams& params, const TreatmentRegime& regime,
                       std::size_t m, std::uint64_t seed, unsigned workers = 1);

/// Flat "key = value" text, one coefficient per line.
void write_params(const DgpParams& params, std::ostream& out);
DgpParams read_params(std::istream& in);
DgpParams read_params_file(const std::string& path);

}  // namespace longci
