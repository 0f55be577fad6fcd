#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "longci/dgp.hpp"
#include "longci/estimators.hpp"

namespace longci {

struct SweepConfig {
  std::uint64_t param_seed = kDefaultParamSeed;
  std::uint64_t root_seed = 1;
  std::size_t n = 1000;
  std::size_t replications = 200;
  int t_star = 257;
  double noise_sd = 0.05;
  std::vector<int> deltas{1, 2, 4, 8, 16, 32, 64, 128, 256};
  std::vector<int> omegas{1};
  std::vector<Method> estimators{Method::Ipw, Method::Ir, Method::Tmle};
  std::vector<double> clip_alphas{0.1, 1.0, 2.5};
  std::string regime = "never";
  std::size_t truth_m = 200000;
  unsigned workers = 1;
  std::string output;

  /// Throws ConfigError on R < 2, n < 1, delta outside [1, t_star - 1],
  /// omega < 1, truth_m < 1000, or an unparsable regime.
  void validate() const;
};

/// key = value lines; '#' comments. Unknown keys throw ConfigError.
/// Keys: param_seed seed n replications t_star noise_sd deltas omegas
/// estimators clip_alphas regime truth_m workers output. Lists are
/// comma-separated.
SweepConfig parse_config(std::istream& in, SweepConfig base = {});
SweepConfig read_config_file(const std::string& path, SweepConfig base = {});

struct ReportRow {
  std::string estimator;
  std::string method = "baseline";
  int delta = 1;
  int omega = 1;
  std::size_t t = 0;  // coarse sequence length
  std::size_t n_ok = 0;
  double mean_psi = 0.0;
  double truth = 0.0;
  double truth_se = 0.0;
  double bias = 0.0;
  double abs_bias = 0.0;
  double variance = 0.0;  // sample variance, divisor n_ok - 1
  double mse = 0.0;       // mean squared error = bias^2 + (n_ok-1)/n_ok * variance
  double mc_se_bias = 0.0;  // sqrt(variance / n_ok + truth_se^2)
  double mean_ess = 0.0;
  double fallback_rate = 0.0;
  /// Per-replicate estimates in replicate order; NaN where undefined.
  std::vector<double> psi;
};

struct ExperimentReport {
  std::string kind;
  SweepConfig config;
  std::vector<ReportRow> rows;

  /// Throws std::out_of_range when no row matches.
  const ReportRow& find(const std::string& estimator, const std::string& method,
                        int delta, int omega = 1) const;
};

/// Replicates of the observational design coarsened to every delta.
ExperimentReport run_sweep(const SweepConfig& config);
/// IR and TMLE over (omega, delta); a separate truth per omega.
ExperimentReport run_effect_delay(const SweepConfig& config);
/// Unconfounded treatment assignment; adds the naive follower mean.
ExperimentReport run_rct(const SweepConfig& config);
/// delta = 1 only: baseline, clip:<alpha>, pool-time and pool-regimes rows.
ExperimentReport run_varred(const SweepConfig& config);

/// Fills the summary fields of `row` from row.psi and the truth.
void summarize(ReportRow& row, double truth, double truth_se);

/// '#' metadata lines, then one header and one line per row. Numbers are
/// printed with 17 significant digits.
void write_report_csv(const ExperimentReport& report, std::ostream& out);
void write_report_csv(const ExperimentReport& report, const std::string& path);

/// gnuplot script plotting abs_bias and variance against delta from the CSV.
void write_gnuplot(const ExperimentReport& report, const std::string& csv_path,
                   std::ostream& out);

}  // namespace longci
