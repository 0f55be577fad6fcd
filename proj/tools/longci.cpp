// Command-line front end: data generation, estimation, exact g-formula
// evaluation and the simulation sweeps.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "longci/coarsen.hpp"
#include "longci/dgp.hpp"
#include "longci/error.hpp"
#include "longci/estimators.hpp"
#include "longci/exactg.hpp"
#include "longci/harness.hpp"
#include "longci/kernels.hpp"

using namespace longci;

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Writes to `path`, or stdout when empty or "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw ConfigError("cannot write " + path);
    }
  }
  std::ostream& get() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

template <class T>
std::vector<T> parse_list(const std::string& s) {
  std::vector<T> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    std::istringstream is(item);
    T x{};
    if (!(is >> x)) throw ConfigError("bad list item '" + item + "'");
    out.push_back(x);
  }
  return out;
}

struct SimulateArgs {
  std::string params_file, write_params, rows = "panel.csv", outcomes = "outcomes.csv";
  std::uint64_t param_seed = kDefaultParamSeed, seed = 1;
  std::size_t n = 1000;
  int t_star = 257, omega = 1, delta = 1;
  double noise_sd = 0.05;
  bool rct = false;
  std::string regime;
};

void simulate(const SimulateArgs& a) {
  DgpParams p = a.params_file.empty() ? sample_params(a.param_seed) : read_params_file(a.params_file);
  if (a.params_file.empty()) {
    p.t_star = a.t_star;
    p.omega = a.omega;
    p.noise_sd = a.noise_sd;
    if (a.rct) p = p.unconfounded();
  }
  p.validate();
  if (!a.write_params.empty()) {
    Output out(a.write_params);
    write_params(p, out.get());
  }
  Panel panel = a.regime.empty()
                    ? generate_panel(p, a.n, a.seed)
                    : generate_intervened(p, TreatmentRegime::parse(a.regime, p.t_star), a.n, a.seed);
  if (a.delta != 1) {
    panel = coarsen_panel(panel, coarse_indices(static_cast<std::size_t>(p.t_star), a.delta));
  }
  write_panel_csv(panel, a.rows, a.outcomes);
}

struct EstimateArgs {
  std::string rows, outcomes, method = "ir", regime = "never", q_design = "linear",
                           g_design = "linear", out, death, replicates;
  int delta = 1;
  std::optional<double> clip;
  bool pool_time = false, pool_regimes = false;
  std::size_t bootstrap = 0;
  double level = 95.0;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

std::optional<std::size_t> death_column(const Panel& p, const std::string& name) {
  if (name.empty()) return std::nullopt;
  for (std::size_t j = 0; j < p.l_dim(); ++j) {
    if (p.l_names()[j] == name) return j;
  }
  throw ConfigError("no time-varying column named '" + name + "'");
}

void estimate_cmd(const EstimateArgs& a, bool force_bootstrap) {
  Panel panel = read_panel_csv(a.rows, a.outcomes);
  const std::size_t fine_t = panel.grid().empty() ? panel.t() : panel.grid().back();
  TreatmentRegime regime = TreatmentRegime::parse(a.regime, fine_t);
  if (a.delta != 1 || !panel.grid().empty()) {
    const CoarseGrid grid = panel.grid().empty()
                                ? coarse_indices(panel.t(), a.delta)
                                : custom_grid(fine_t, panel.grid(), panel.delta());
    if (a.delta != 1 && !panel.grid().empty()) {
      throw ConfigError("panel is already coarsened; omit --delta");
    }
    if (panel.grid().empty()) panel = coarsen_panel(panel, grid);
    regime = coarsen_regime(regime, grid);
  }
  EstimatorOptions o;
  o.method = parse_method(a.method);
  o.clip_alpha = a.clip;
  o.pool_regimes = a.pool_regimes;
  o.q_design = parse_design(a.q_design);
  o.propensity.pool_time = a.pool_time;
  o.propensity.design = parse_design(a.g_design);
  o.propensity.death_feature = death_column(panel, a.death);

  Estimate e;
  double lo = std::nan(""), hi = std::nan("");
  const std::size_t b = force_bootstrap && a.bootstrap == 0 ? 500 : a.bootstrap;
  if (b > 0) {
    const BootstrapResult r = bootstrap_ci(panel, regime, o, b, a.level, a.seed, a.workers);
    e = r.point;
    lo = r.lo;
    hi = r.hi;
    if (!a.replicates.empty()) {
      Output rep(a.replicates);
      rep.get() << "replicate,psi\n";
      for (std::size_t i = 0; i < r.replicates.size(); ++i) {
        rep.get() << i << ',' << fmt(r.replicates[i]) << '\n';
      }
    }
    if (r.skipped > 0) std::cerr << "bootstrap: " << r.skipped << " replicates undefined\n";
  } else {
    e = estimate(panel, regime, o);
  }
  Output out(a.out);
  out.get() << "psi_hat,ci_lo,ci_hi,n_followers,ess,flags\n"
            << (e.defined ? fmt(e.psi) : "NA") << ',' << (b > 0 ? fmt(lo) : "NA") << ','
            << (b > 0 ? fmt(hi) : "NA") << ',' << e.n_followers << ',' << fmt(e.ess) << ','
            << e.flags() << '\n';
}

struct SweepArgs {
  std::string config, out, gnuplot, deltas, omegas, estimators, clip_alphas, regime;
  std::optional<std::size_t> n, replications, truth_m;
  std::optional<int> t_star;
  std::optional<double> noise_sd;
  std::optional<std::uint64_t> seed, param_seed;
  std::optional<unsigned> workers;
};

SweepConfig build_config(const SweepArgs& a) {
  SweepConfig c = a.config.empty() ? SweepConfig{} : read_config_file(a.config);
  if (a.n) c.n = *a.n;
  if (a.replications) c.replications = *a.replications;
  if (a.truth_m) c.truth_m = *a.truth_m;
  if (a.t_star) c.t_star = *a.t_star;
  if (a.noise_sd) c.noise_sd = *a.noise_sd;
  if (a.seed) c.root_seed = *a.seed;
  if (a.param_seed) c.param_seed = *a.param_seed;
  if (a.workers) c.workers = *a.workers;
  if (!a.deltas.empty()) c.deltas = parse_list<int>(a.deltas);
  if (!a.omegas.empty()) c.omegas = parse_list<int>(a.omegas);
  if (!a.clip_alphas.empty()) c.clip_alphas = parse_list<double>(a.clip_alphas);
  if (!a.regime.empty()) c.regime = a.regime;
  if (!a.estimators.empty()) {
    c.estimators.clear();
    std::stringstream ss(a.estimators);
    for (std::string m; std::getline(ss, m, ',');) c.estimators.push_back(parse_method(m));
  }
  if (!a.out.empty()) c.output = a.out;
  return c;
}

void sweep_cmd(const std::string& kind, const SweepArgs& a) {
  const SweepConfig c = build_config(a);
  ExperimentReport r;
  if (kind == "sweep") r = run_sweep(c);
  else if (kind == "effect-delay") r = run_effect_delay(c);
  else if (kind == "rct") r = run_rct(c);
  else r = run_varred(c);
  Output out(c.output);
  write_report_csv(r, out.get());
  if (!a.gnuplot.empty()) {
    if (c.output.empty() || c.output == "-") {
      throw ConfigError("--emit-gnuplot needs --out so the script can name the CSV");
    }
    Output plot(a.gnuplot);
    write_gnuplot(r, c.output, plot.get());
  }
}

struct ExactArgs {
  std::string mdp, regime = "never", grid, action = "value", out;
  int delta = 1;
  std::size_t max_policies = 1000000;
};

void exact_cmd(const ExactArgs& a) {
  const DiscreteMdp m = read_mdp_file(a.mdp);
  const TreatmentRegime r = TreatmentRegime::parse(a.regime, m.horizon);
  const CoarseGrid g = a.grid.empty()
                           ? coarse_indices(m.horizon, a.delta)
                           : custom_grid(m.horizon, parse_list<std::size_t>(a.grid), a.delta);
  Output out(a.out);
  auto& os = out.get();
  if (a.action == "value") {
    os << "uncoarsened\n" << fmt(gform_uncoarsened(m, r)) << '\n';
  } else if (a.action == "coarsened") {
    os << "uncoarsened,coarsened,stochastic_policy\n"
       << fmt(gform_uncoarsened(m, r)) << ',' << fmt(gform_coarsened(m, r, g)) << ','
       << fmt(stochastic_policy_value(m, r, g)) << '\n';
  } else if (a.action == "bound") {
    const BiasBound b = bias_bound(m, r, g, a.max_policies);
    os << "gap,lo,hi,policies\n"
       << fmt(gform_uncoarsened(m, r) - gform_coarsened(m, r, g)) << ',' << fmt(b.lo) << ','
       << fmt(b.hi) << ',' << b.policies << '\n';
  } else if (a.action == "check") {
    const ConditionReport c = check_conditions(m, r, g);
    os << "condition_i,condition_ii,uncoarsened,coarsened,values_agree\n"
       << c.condition_i << ',' << c.condition_ii << ',' << fmt(c.uncoarsened) << ','
       << fmt(c.coarsened) << ',' << c.values_agree << '\n';
  } else {
    throw ConfigError("unknown exact action '" + a.action + "'");
  }
}

void add_sweep_options(CLI::App* cmd, SweepArgs& a) {
  cmd->add_option("--config", a.config, "key = value config file");
  cmd->add_option("--out", a.out, "CSV report path (default stdout)");
  cmd->add_option("--emit-gnuplot", a.gnuplot, "write a gnuplot script for the report");
  cmd->add_option("--n", a.n, "subjects per dataset");
  cmd->add_option("--replications", a.replications, "number of datasets");
  cmd->add_option("--t-star", a.t_star, "finest sequence length");
  cmd->add_option("--noise-sd", a.noise_sd, "structural noise standard deviation");
  cmd->add_option("--deltas", a.deltas, "comma-separated bin widths");
  cmd->add_option("--omegas", a.omegas, "comma-separated effect delays");
  cmd->add_option("--estimators", a.estimators, "comma-separated: ipw,ir,tmle,naive");
  cmd->add_option("--clip-alphas", a.clip_alphas, "comma-separated clipping percentiles");
  cmd->add_option("--regime", a.regime, "never | immediate | jump:<j> | no-treat-before:<k>");
  cmd->add_option("--truth-m", a.truth_m, "Monte Carlo draws for the true value");
  cmd->add_option("--seed", a.seed, "root seed");
  cmd->add_option("--param-seed", a.param_seed, "seed for the structural parameters");
  cmd->add_option("--workers", a.workers, "worker threads");
}

int exit_code(const Error& e) { return static_cast<int>(e.kind()); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Longitudinal causal estimators under time coarsening"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "generate a panel from the structural model");
  c_sim->add_option("--params", sim.params_file, "parameter file (overrides the seed options)");
  c_sim->add_option("--write-params", sim.write_params, "save the parameters used");
  c_sim->add_option("--param-seed", sim.param_seed, "seed for sample_params");
  c_sim->add_option("--seed", sim.seed, "subject seed");
  c_sim->add_option("--n", sim.n, "subjects");
  c_sim->add_option("--t-star", sim.t_star, "sequence length");
  c_sim->add_option("--omega", sim.omega, "effect delay");
  c_sim->add_option("--noise-sd", sim.noise_sd, "noise standard deviation");
  c_sim->add_flag("--rct", sim.rct, "unconfounded treatment assignment");
  c_sim->add_option("--regime", sim.regime, "intervene instead of observing");
  c_sim->add_option("--delta", sim.delta, "coarsen before writing");
  c_sim->add_option("--rows", sim.rows, "long-format panel CSV");
  c_sim->add_option("--outcomes", sim.outcomes, "outcome CSV");

  EstimateArgs est;
  auto add_estimate = [&](CLI::App* cmd) {
    cmd->add_option("--panel", est.rows, "long-format panel CSV")->required();
    cmd->add_option("--outcomes", est.outcomes, "outcome CSV")->required();
    cmd->add_option("--method", est.method, "ipw | ir | tmle | naive");
    cmd->add_option("--regime", est.regime, "never | immediate | jump:<j> | no-treat-before:<k>");
    cmd->add_option("--delta", est.delta, "bin width applied before estimation");
    cmd->add_option("--clip", est.clip, "clip inverse weights at this percentile");
    cmd->add_flag("--pool-time", est.pool_time, "one propensity model over all times");
    cmd->add_flag("--pool-regimes", est.pool_regimes, "fit Q on all uncensored subjects");
    cmd->add_option("--q-design", est.q_design, "linear | saturated | intercept");
    cmd->add_option("--g-design", est.g_design, "linear | saturated | intercept");
    cmd->add_option("--death-feature", est.death, "time-varying column holding D_t");
    cmd->add_option("--level", est.level, "interval level in percent");
    cmd->add_option("--seed", est.seed, "bootstrap seed");
    cmd->add_option("--workers", est.workers, "bootstrap worker threads");
    cmd->add_option("--replicates", est.replicates, "write bootstrap replicates here");
    cmd->add_option("--out", est.out, "result CSV (default stdout)");
  };
  auto* c_est = app.add_subcommand("estimate", "estimate E[Y] under a regime from a panel");
  add_estimate(c_est);
  c_est->add_option("--bootstrap", est.bootstrap, "percentile bootstrap replicates");
  auto* c_boot = app.add_subcommand("bootstrap", "estimate with a percentile bootstrap interval");
  add_estimate(c_boot);
  c_boot->add_option("--b", est.bootstrap, "replicates (default 500)");

  SweepArgs sw;
  std::string sweep_kind;
  for (const char* kind : {"sweep", "effect-delay", "rct", "varred"}) {
    const std::string k = kind;
    const char* help = k == "sweep"          ? "bias and variance over bin widths"
                       : k == "effect-delay" ? "IR and TMLE over (effect delay, bin width)"
                       : k == "rct"          ? "sweep with randomized treatment"
                                             : "clipping and pooling at the finest grid";
    auto* cmd = app.add_subcommand(k, help);
    add_sweep_options(cmd, sw);
    cmd->callback([&sweep_kind, k] { sweep_kind = k; });
  }

  ExactArgs ex;
  auto* c_exact = app.add_subcommand("exact", "exact g-formula on a discrete process");
  c_exact->add_option("--mdp", ex.mdp, "table file")->required();
  c_exact->add_option("--regime", ex.regime, "regime on the fine grid");
  c_exact->add_option("--delta", ex.delta, "bin width");
  c_exact->add_option("--grid", ex.grid, "explicit comma-separated 1-based grid");
  c_exact->add_option("--max-policies", ex.max_policies, "enumeration limit for bound");
  c_exact->add_option("--out", ex.out, "result CSV (default stdout)");
  c_exact->add_option("action", ex.action, "value | coarsened | bound | check")
      ->check(CLI::IsMember({"value", "coarsened", "bound", "check"}));

  auto* c_info = app.add_subcommand("info", "show the active kernel backend");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorKind::Config);
  }

  try {
    if (c_sim->parsed()) simulate(sim);
    else if (c_est->parsed()) estimate_cmd(est, false);
    else if (c_boot->parsed()) estimate_cmd(est, true);
    else if (c_exact->parsed()) exact_cmd(ex);
    else if (c_info->parsed()) {
      std::cout << "kernels " << kernels::backend_name(kernels::active_backend()) << '\n';
      for (auto b : {kernels::Backend::Scalar, kernels::Backend::Avx2, kernels::Backend::Neon}) {
        std::cout << kernels::backend_name(b) << ' '
                  << (kernels::backend_supported(b) ? "supported" : "unavailable") << '\n';
      }
    } else if (!sweep_kind.empty()) {
      sweep_cmd(sweep_kind, sw);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
