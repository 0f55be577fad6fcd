#include "longci/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "longci/coarsen.hpp"
#include "longci/error.hpp"
#include "longci/parallel.hpp"
#include "longci/rng.hpp"

namespace longci {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream ss(v);
  T x{};
  ss >> x;
  if (!ss || !(ss >> std::ws).eof()) throw ConfigError("bad value for " + key + ": '" + v + "'");
  return x;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct Variant {
  std::string estimator;
  std::string method = "baseline";
  EstimatorOptions options;
};

struct Cell {
  double psi = std::nan("");
  double ess = 0.0;
  double fallback = 0.0;
};

DgpParams base_params(const SweepConfig& c, int omega) {
  DgpParams p = sample_params(c.param_seed);
  p.t_star = c.t_star;
  p.noise_sd = c.noise_sd;
  p.omega = omega;
  p.validate();
  return p;
}

bool needs_g(Method m) { return m == Method::Ipw || m == Method::Tmle; }

Cell run_one(const Panel& panel, const TreatmentRegime& regime, const Variant& v,
             const PropensityModel* model) {
  Cell cell;
  try {
    Estimate e;
    switch (v.options.method) {
      case Method::Ipw: e = ipw(panel, regime, *model, v.options.clip_alpha); break;
      case Method::Ir: e = ir(panel, regime, v.options); break;
      case Method::Tmle: e = tmle(panel, regime, *model, v.options); break;
      case Method::Naive: e = naive(panel, regime, v.options.propensity.death_feature); break;
    }
    if (e.defined) cell.psi = e.psi;
    cell.ess = e.ess;
    cell.fallback = e.fallback_rate();
  } catch (const Error&) {
    // recorded as undefined
  }
  return cell;
}

/// Replicates x deltas x variants; rows ordered by variant, then delta.
std::vector<ReportRow> replicate_grid(const SweepConfig& c, const DgpParams& params,
                                      const std::vector<int>& deltas,
                                      const std::vector<Variant>& variants) {
  const TreatmentRegime regime = TreatmentRegime::parse(c.regime, c.t_star);
  const auto truth_seed = substream_seed(c.root_seed, Stream::Truth,
                                         static_cast<std::uint64_t>(params.omega));
  const TruthEstimate truth = truth_mc(params, regime, c.truth_m, truth_seed, c.workers);

  const std::size_t nd = deltas.size(), nv = variants.size();
  std::vector<CoarseGrid> grids;
  std::vector<TreatmentRegime> regimes;
  for (int d : deltas) {
    grids.push_back(coarse_indices(static_cast<std::size_t>(c.t_star), d));
    regimes.push_back(coarsen_regime(regime, grids.back()));
  }
  // distinct propensity settings that need a fit
  std::vector<bool> pooled_g;
  for (const auto& v : variants) {
    if (!needs_g(v.options.method)) continue;
    if (std::find(pooled_g.begin(), pooled_g.end(), v.options.propensity.pool_time) ==
        pooled_g.end()) {
      pooled_g.push_back(v.options.propensity.pool_time);
    }
  }

  std::vector<Cell> cells(c.replications * nd * nv);
  parallel_for(c.replications, c.workers, [&](std::size_t r) {
    const Panel fine = generate_panel(params, c.n, substream_seed(c.root_seed, Stream::Replicate, r));
    for (std::size_t di = 0; di < nd; ++di) {
      const Panel panel = deltas[di] == 1 ? fine : coarsen_panel(fine, grids[di]);
      std::vector<std::optional<PropensityModel>> models(pooled_g.size());
      for (std::size_t g = 0; g < pooled_g.size(); ++g) {
        PropensityOptions po;
        po.pool_time = pooled_g[g];
        try {
          models[g] = fit_propensity(panel, po);
        } catch (const Error&) {
        }
      }
      for (std::size_t vi = 0; vi < nv; ++vi) {
        const Variant& v = variants[vi];
        const PropensityModel* model = nullptr;
        if (needs_g(v.options.method)) {
          const auto g = static_cast<std::size_t>(
              std::find(pooled_g.begin(), pooled_g.end(), v.options.propensity.pool_time) -
              pooled_g.begin());
          if (!models[g]) continue;
          model = &*models[g];
        }
        cells[(r * nd + di) * nv + vi] = run_one(panel, regimes[di], v, model);
      }
    }
  });

  std::vector<ReportRow> rows;
  for (std::size_t vi = 0; vi < nv; ++vi) {
    for (std::size_t di = 0; di < nd; ++di) {
      ReportRow row;
      row.estimator = variants[vi].estimator;
      row.method = variants[vi].method;
      row.delta = deltas[di];
      row.omega = params.omega;
      row.t = grids[di].size();
      double ess = 0.0, fb = 0.0;
      std::size_t ok = 0;
      for (std::size_t r = 0; r < c.replications; ++r) {
        const Cell& cell = cells[(r * nd + di) * nv + vi];
        row.psi.push_back(cell.psi);
        if (std::isfinite(cell.psi)) {
          ess += cell.ess;
          fb += cell.fallback;
          ++ok;
        }
      }
      summarize(row, truth.psi, truth.mc_se);
      row.mean_ess = ok ? ess / ok : 0.0;
      row.fallback_rate = ok ? fb / ok : 0.0;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

Variant make_variant(Method m, const std::string& method = "baseline") {
  Variant v;
  v.estimator = to_string(m);
  v.method = method;
  v.options.method = m;
  return v;
}

}  // namespace

void SweepConfig::validate() const {
  if (replications < 2) throw ConfigError("replications must be >= 2");
  if (n < 1) throw ConfigError("n must be >= 1");
  if (t_star < 2) throw ConfigError("t_star must be >= 2");
  if (!(noise_sd > 0.0)) throw ConfigError("noise_sd must be > 0");
  if (deltas.empty()) throw ConfigError("deltas must not be empty");
  for (int d : deltas) {
    if (d < 1 || d > t_star - 1) {
      throw ConfigError("delta " + std::to_string(d) + " outside [1, t_star - 1]");
    }
  }
  if (omegas.empty()) throw ConfigError("omegas must not be empty");
  for (int w : omegas) {
    if (w < 1) throw ConfigError("omega must be >= 1");
  }
  if (estimators.empty()) throw ConfigError("estimators must not be empty");
  for (double a : clip_alphas) {
    if (!(a >= 0.0 && a < 50.0)) throw ConfigError("clip alpha must be in [0, 50)");
  }
  if (truth_m < 1000) throw ConfigError("truth_m must be >= 1000");
  TreatmentRegime::parse(regime, static_cast<std::size_t>(t_star));
}

SweepConfig parse_config(std::istream& in, SweepConfig c) {
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto h = raw.find('#'); h != std::string::npos) raw.erase(h);
    raw = trim(raw);
    if (raw.empty()) continue;
    const auto eq = raw.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line) + ": expected key = value");
    }
    const std::string key = trim(raw.substr(0, eq)), val = trim(raw.substr(eq + 1));
    if (key == "param_seed") c.param_seed = parse_number<std::uint64_t>(key, val);
    else if (key == "seed") c.root_seed = parse_number<std::uint64_t>(key, val);
    else if (key == "n") c.n = parse_number<std::size_t>(key, val);
    else if (key == "replications") c.replications = parse_number<std::size_t>(key, val);
    else if (key == "t_star") c.t_star = parse_number<int>(key, val);
    else if (key == "noise_sd") c.noise_sd = parse_number<double>(key, val);
    else if (key == "truth_m") c.truth_m = parse_number<std::size_t>(key, val);
    else if (key == "workers") c.workers = parse_number<unsigned>(key, val);
    else if (key == "regime") c.regime = val;
    else if (key == "output") c.output = val;
    else if (key == "deltas" || key == "omegas") {
      std::vector<int> xs;
      for (const auto& s : split_list(val)) xs.push_back(parse_number<int>(key, s));
      (key == "deltas" ? c.deltas : c.omegas) = xs;
    } else if (key == "clip_alphas") {
      c.clip_alphas.clear();
      for (const auto& s : split_list(val)) c.clip_alphas.push_back(parse_number<double>(key, s));
    } else if (key == "estimators") {
      c.estimators.clear();
      for (const auto& s : split_list(val)) {
        try {
          c.estimators.push_back(parse_method(s));
        } catch (const Error& e) {
          throw ConfigError(e.what());
        }
      }
    } else {
      throw ConfigError("config line " + std::to_string(line) + ": unknown key '" + key + "'");
    }
  }
  return c;
}

SweepConfig read_config_file(const std::string& path, SweepConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return parse_config(in, std::move(base));
}

const ReportRow& ExperimentReport::find(const std::string& estimator, const std::string& method,
                                        int delta, int omega) const {
  for (const auto& r : rows) {
    if (r.estimator == estimator && r.method == method && r.delta == delta && r.omega == omega) {
      return r;
    }
  }
  throw std::out_of_range("no report row for " + estimator + "/" + method + " delta=" +
                          std::to_string(delta) + " omega=" + std::to_string(omega));
}

void summarize(ReportRow& row, double truth, double truth_se) {
  std::vector<double> ok;
  for (double x : row.psi) {
    if (std::isfinite(x)) ok.push_back(x);
  }
  row.n_ok = ok.size();
  row.truth = truth;
  row.truth_se = truth_se;
  if (ok.empty()) {
    row.mean_psi = row.bias = row.abs_bias = row.variance = row.mse = row.mc_se_bias =
        std::nan("");
    return;
  }
  const double n = static_cast<double>(ok.size());
  double sum = 0.0;
  for (double x : ok) sum += x;
  row.mean_psi = sum / n;
  double ss = 0.0;
  for (double x : ok) ss += (x - row.mean_psi) * (x - row.mean_psi);
  row.variance = ok.size() > 1 ? ss / (n - 1.0) : 0.0;
  row.bias = row.mean_psi - truth;
  row.abs_bias = std::abs(row.bias);
  row.mse = row.bias * row.bias + ss / n;
  row.mc_se_bias = std::sqrt(row.variance / n + truth_se * truth_se);
}

ExperimentReport run_sweep(const SweepConfig& config) {
  config.validate();
  std::vector<Variant> variants;
  for (Method m : config.estimators) variants.push_back(make_variant(m));
  ExperimentReport report{"sweep", config, {}};
  for (int omega : config.omegas) {
    auto rows = replicate_grid(config, base_params(config, omega), config.deltas, variants);
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  }
  return report;
}

ExperimentReport run_effect_delay(const SweepConfig& config) {
  config.validate();
  std::vector<Variant> variants;
  for (Method m : config.estimators) {
    if (m == Method::Ir || m == Method::Tmle) variants.push_back(make_variant(m));
  }
  if (variants.empty()) variants = {make_variant(Method::Ir), make_variant(Method::Tmle)};
  ExperimentReport report{"effect-delay", config, {}};
  for (int omega : config.omegas) {
    auto rows = replicate_grid(config, base_params(config, omega), config.deltas, variants);
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  }
  return report;
}

ExperimentReport run_rct(const SweepConfig& config) {
  config.validate();
  std::vector<Variant> variants;
  for (Method m : config.estimators) variants.push_back(make_variant(m));
  if (std::none_of(config.estimators.begin(), config.estimators.end(),
                   [](Method m) { return m == Method::Naive; })) {
    variants.push_back(make_variant(Method::Naive));
  }
  ExperimentReport report{"rct", config, {}};
  for (int omega : config.omegas) {
    DgpParams p = base_params(config, omega).unconfounded();
    auto rows = replicate_grid(config, p, config.deltas, variants);
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  }
  return report;
}

ExperimentReport run_varred(const SweepConfig& input) {
  SweepConfig config = input;
  config.deltas = {1};  // the delta list is not used here
  config.validate();
  std::vector<Variant> variants;
  for (Method m : config.estimators) variants.push_back(make_variant(m));
  for (Method m : {Method::Ipw, Method::Tmle}) {
    for (double a : config.clip_alphas) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "clip:%g", a);
      Variant v = make_variant(m, buf);
      v.options.clip_alpha = a;
      variants.push_back(v);
    }
  }
  for (Method m : {Method::Ipw, Method::Tmle}) {
    Variant v = make_variant(m, "pool-time");
    v.options.propensity.pool_time = true;
    variants.push_back(v);
  }
  for (Method m : {Method::Ir, Method::Tmle}) {
    Variant v = make_variant(m, "pool-regimes");
    v.options.pool_regimes = true;
    variants.push_back(v);
  }
  ExperimentReport report{"varred", config, {}};
  for (int omega : config.omegas) {
    auto rows = replicate_grid(config, base_params(config, omega), {1}, variants);
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  }
  return report;
}

void write_report_csv(const ExperimentReport& report, std::ostream& out) {
  const SweepConfig& c = report.config;
  out << "# kind=" << report.kind << '\n'
      << "# param_seed=" << c.param_seed << " seed=" << c.root_seed << " n=" << c.n
      << " replications=" << c.replications << " t_star=" << c.t_star
      << " noise_sd=" << fmt(c.noise_sd) << " regime=" << c.regime << " truth_m=" << c.truth_m
      << '\n'
      << "# variance: sample variance over defined replicates (divisor n_ok - 1)\n"
      << "# mse = bias^2 + (n_ok - 1) / n_ok * variance = mean((psi - truth)^2)\n"
      << "# mc_se_bias = sqrt(variance / n_ok + truth_se^2)\n"
      << "estimator,method,delta,omega,t,n_ok,mean_psi,truth,truth_se,bias,abs_bias,"
         "variance,mse,mc_se_bias,mean_ess,fallback_rate\n";
  for (const auto& r : report.rows) {
    out << r.estimator << ',' << r.method << ',' << r.delta << ',' << r.omega << ',' << r.t
        << ',' << r.n_ok << ',' << fmt(r.mean_psi) << ',' << fmt(r.truth) << ','
        << fmt(r.truth_se) << ',' << fmt(r.bias) << ',' << fmt(r.abs_bias) << ','
        << fmt(r.variance) << ',' << fmt(r.mse) << ',' << fmt(r.mc_se_bias) << ','
        << fmt(r.mean_ess) << ',' << fmt(r.fallback_rate) << '\n';
  }
}

void write_report_csv(const ExperimentReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  write_report_csv(report, out);
}

void write_gnuplot(const ExperimentReport& report, const std::string& csv_path,
                   std::ostream& out) {
  std::vector<std::pair<std::string, std::string>> series;
  std::vector<int> omegas;
  for (const auto& r : report.rows) {
    auto key = std::make_pair(r.estimator, r.method);
    if (std::find(series.begin(), series.end(), key) == series.end()) series.push_back(key);
    if (std::find(omegas.begin(), omegas.end(), r.omega) == omegas.end()) omegas.push_back(r.omega);
  }
  out << "# " << report.kind << " report\n"
      << "set datafile separator ','\n"
      << "set logscale x 2\n"
      << "set xlabel 'delta'\n"
      << "set key outside right\n"
      << "set terminal pngcairo size 1200,500\n"
      << "set output '" << csv_path << ".png'\n"
      << "set multiplot layout 1,2\n";
  for (const char* col : {"abs_bias", "variance"}) {
    const int field = std::string(col) == "abs_bias" ? 11 : 12;
    out << "set title '" << col << "'\n";
    if (std::string(col) == "abs_bias") out << "set ylabel 'absolute bias'\n";
    else out << "set ylabel 'variance'\nset logscale y\n";
    out << "plot ";
    bool first = true;
    for (const auto& [est, method] : series) {
      for (int w : omegas) {
        if (!first) out << ", \\\n     ";
        first = false;
        std::string title = est;
        if (method != "baseline") title += " " + method;
        if (omegas.size() > 1) title += " w=" + std::to_string(w);
        out << "'" << csv_path << "' every ::1 using "
            << "((strcol(1) eq '" << est << "' && strcol(2) eq '" << method
            << "' && $4 == " << w << ") ? $3 : 1/0):" << field
            << (std::string(col) == "abs_bias" ? ":14" : "") << " with "
            << (std::string(col) == "abs_bias" ? "yerrorlines" : "linespoints") << " title '"
            << title << "'";
      }
    }
    out << '\n';
  }
  out << "unset multiplot\n";
}

}  // namespace longci
