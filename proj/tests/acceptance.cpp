// Acceptance criteria. Usage: longci_acceptance <criterion 1..9>
// Prints one PASS/FAIL line for the criterion plus indented detail lines;
// exit status 0 on PASS. Reports are written next to the binary's working
// directory as acceptance_c<N>.csv where a sweep is involved.

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "longci/coarsen.hpp"
#include "longci/dgp.hpp"
#include "longci/estimators.hpp"
#include "longci/exactg.hpp"
#include "longci/harness.hpp"
#include "longci/parallel.hpp"
#include "longci/regress.hpp"
#include "longci/rng.hpp"
#include "oracles.hpp"

using namespace longci;

namespace {

void detail(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
void detail(const char* fmt, ...) {
  va_list ap;
  va_start(ap, fmt);
  std::printf("    ");
  std::vprintf(fmt, ap);
  std::printf("\n");
  va_end(ap);
}

unsigned workers() {
  if (const char* w = std::getenv("LONGCI_WORKERS")) return static_cast<unsigned>(std::atoi(w));
  return default_workers();
}

SweepConfig desk() {
  SweepConfig c;
  c.workers = workers();
  return c;
}

void save(const ExperimentReport& r, int criterion) {
  write_report_csv(r, "acceptance_c" + std::to_string(criterion) + ".csv");
}

void show(const ReportRow& r) {
  detail("%-5s %-13s delta=%-3d omega=%d bias=% .5f mc_se=%.5f ratio=%6.2f var=%.3g n_ok=%zu",
         r.estimator.c_str(), r.method.c_str(), r.delta, r.omega, r.bias, r.mc_se_bias,
         r.abs_bias / r.mc_se_bias, r.variance, r.n_ok);
}

double sample_var(const std::vector<double>& x, const std::vector<std::size_t>& idx) {
  double m = 0.0;
  for (auto i : idx) m += x[i];
  m /= static_cast<double>(idx.size());
  double s = 0.0;
  for (auto i : idx) s += (x[i] - m) * (x[i] - m);
  return s / static_cast<double>(idx.size() - 1);
}

bool c1() {
  const DgpParams p = sample_params(kDefaultParamSeed);
  const auto never = TreatmentRegime::never(static_cast<std::size_t>(p.t_star));
  const std::size_t reps = 50, n = 1000;
  std::vector<double> frac(reps);
  parallel_for(reps, workers(), [&](std::size_t r) {
    const Panel panel = generate_panel(p, n, substream_seed(1, Stream::Replicate, r));
    std::size_t f = 0;
    for (std::size_t i = 0; i < n; ++i) f += follows(panel, i, never, panel.t() - 1);
    frac[r] = static_cast<double>(f) / static_cast<double>(n);
  });
  double mean = 0.0;
  for (double f : frac) mean += f / static_cast<double>(reps);
  detail("param_seed=%llu mean never-treat follower fraction over %zu replicates: %.4f",
         static_cast<unsigned long long>(kDefaultParamSeed), reps, mean);
  return mean >= 0.22 && mean <= 0.28;
}

bool c2() {
  double worst_ir = 0, worst_id = 0, worst_sp = 0;
  std::size_t instances = 0, checks = 0;
  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    RandomMdpOptions o;
    o.horizon = 3 + seed % 3;
    o.omega = seed % 4 == 3 ? 2 : 1;
    o.death = seed % 3 == 2;
    const DiscreteMdp m = random_mdp(o, 9000 + seed);
    const Panel pop = population_panel(m);
    EstimatorOptions eo;
    eo.q_design = DesignKind::Saturated;
    if (m.death) eo.propensity.death_feature = 1;
    ++instances;
    const std::size_t t = m.horizon;
    for (const auto& r : {TreatmentRegime::never(t), TreatmentRegime::immediate(t),
                          TreatmentRegime::jump_at(2, t)}) {
      for (int d = 1; d < static_cast<int>(t); ++d) {
        const CoarseGrid g = coarse_indices(t, d);
        const double coarse = gform_coarsened(m, r, g);
        const double est = ir(coarsen_panel(pop, g), coarsen_regime(r, g), eo).psi;
        worst_ir = std::max(worst_ir, std::abs(est - coarse));
        if (o.omega == 1) {
          worst_sp = std::max(worst_sp, std::abs(stochastic_policy_value(m, r, g) - coarse));
        }
        ++checks;
      }
      worst_id = std::max(worst_id, std::abs(gform_coarsened(m, r, identity_grid(t)) -
                                             gform_uncoarsened(m, r)));
    }
  }
  detail("%zu instances, %zu (regime, grid) pairs", instances, checks);
  detail("max |IR(saturated, population law) - gform_coarsened| = %.3g", worst_ir);
  detail("max |gform_coarsened(identity) - gform_uncoarsened|   = %.3g", worst_id);
  detail("max |stochastic_policy_value - gform_coarsened| (omega=1) = %.3g", worst_sp);
  return worst_ir < 1e-10 && worst_id < 1e-12 && worst_sp < 1e-12;
}

bool c3() {
  SweepConfig c = desk();
  c.omegas = {8};
  c.deltas = {1, 2, 4, 8, 64, 128, 256};
  c.estimators = {Method::Ir, Method::Tmle};
  const auto r = run_effect_delay(c);
  save(r, 3);
  bool ok = true;
  for (const char* est : {"ir", "tmle"}) {
    for (int d : c.deltas) {
      const auto& row = r.find(est, "baseline", d, 8);
      show(row);
      const double ratio = row.abs_bias / row.mc_se_bias;
      ok = ok && (d <= 8 ? ratio < 3.0 : ratio > 5.0);
    }
  }
  return ok;
}

bool c4() {
  SweepConfig c = desk();
  c.deltas = {1, 256};
  const auto r = run_sweep(c);
  save(r, 4);
  const auto& ipw1 = r.find("ipw", "baseline", 1);
  const auto& tmle1 = r.find("tmle", "baseline", 1);
  const auto& ir1 = r.find("ir", "baseline", 1);
  for (const auto* row : {&ipw1, &tmle1, &ir1}) show(*row);
  for (const char* est : {"ipw", "ir", "tmle"}) show(r.find(est, "baseline", 256));
  // paired bootstrap over replicates with all three estimates defined
  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < ipw1.psi.size(); ++i) {
    if (std::isfinite(ipw1.psi[i]) && std::isfinite(tmle1.psi[i]) && std::isfinite(ir1.psi[i])) {
      ok.push_back(i);
    }
  }
  std::mt19937_64 rng(substream_seed(c.root_seed, Stream::Bootstrap, 4));
  std::uniform_int_distribution<std::size_t> pick(0, ok.size() - 1);
  std::vector<double> gap_it, gap_ti;
  for (int b = 0; b < 2000; ++b) {
    std::vector<std::size_t> idx(ok.size());
    for (auto& i : idx) i = ok[pick(rng)];
    const double vi = sample_var(ipw1.psi, idx), vt = sample_var(tmle1.psi, idx),
                 vr = sample_var(ir1.psi, idx);
    gap_it.push_back(vi - vt);
    gap_ti.push_back(vt - vr);
  }
  const double lo_it = percentile(gap_it, 2.5), lo_ti = percentile(gap_ti, 2.5);
  detail("Var(IPW)-Var(TMLE): point %.4g, bootstrap 2.5%% %.4g", ipw1.variance - tmle1.variance, lo_it);
  detail("Var(TMLE)-Var(IR):  point %.4g, bootstrap 2.5%% %.4g", tmle1.variance - ir1.variance, lo_ti);
  for (const char* est : {"ipw", "ir", "tmle"}) {
    const auto& a = r.find(est, "baseline", 1);
    const auto& b = r.find(est, "baseline", 256);
    detail("%s: abs_bias(256) - abs_bias(1) = %.4f (%.1f x mc_se)", est, b.abs_bias - a.abs_bias,
           (b.abs_bias - a.abs_bias) / std::hypot(a.mc_se_bias, b.mc_se_bias));
  }
  return lo_it > 0.0 && lo_ti > 0.0;
}

bool c5() {
  SweepConfig c = desk();
  c.deltas = {1, 256};
  const auto r = run_rct(c);
  save(r, 5);
  bool ok = true;
  for (const char* est : {"ipw", "ir", "tmle"}) {
    const auto& fine = r.find(est, "baseline", 1);
    const auto& wide = r.find(est, "baseline", 256);
    show(fine);
    show(wide);
    ok = ok && fine.abs_bias < 3 * fine.mc_se_bias && wide.abs_bias > 5 * wide.mc_se_bias;
  }
  show(r.find("naive", "baseline", 1));
  return ok;
}

bool c6() {
  std::mt19937_64 rng(6);
  std::size_t contained = 0, total = 0, policies = 0, escaped_lag2 = 0;
  double slack = 0.0;
  // first 100 instances have omega = 1; 20 more with omega = 2 are reported only
  for (std::uint64_t seed = 0; seed < 120; ++seed) {
    RandomMdpOptions o;
    o.horizon = 3 + seed % 4;
    o.omega = seed < 100 ? 1 : 2;
    o.death = seed % 7 == 6;
    const DiscreteMdp m = random_mdp(o, 7000 + seed);
    const std::size_t t = m.horizon;
    // random grid keeping both endpoints
    std::vector<std::size_t> idx{1};
    for (std::size_t k = 2; k < t; ++k) {
      if (rng() % 2) idx.push_back(k);
    }
    idx.push_back(t);
    const CoarseGrid g = custom_grid(t, idx, 1);
    const TreatmentRegime r = seed % 2 ? TreatmentRegime::never(t) : TreatmentRegime::immediate(t);
    const BiasBound b = bias_bound(m, r, g);
    const double gap = gform_uncoarsened(m, r) - gform_coarsened(m, r, g);
    const bool inside = b.lo - 1e-12 <= gap && gap <= b.hi + 1e-12;
    if (o.omega != 1) {
      escaped_lag2 += !inside;
      continue;
    }
    ++total;
    policies += b.policies;
    if (inside) {
      ++contained;
    } else {
      detail("seed %llu death=%d T=%zu grid size %zu: gap %.5g outside [%.5g, %.5g]",
             static_cast<unsigned long long>(seed), int(o.death), t, g.size(), gap, b.lo, b.hi);
    }
    slack = std::min(slack, std::min(gap - b.lo, b.hi - gap));
  }
  detail("%zu/%zu instances contained; %zu policies enumerated; min slack %.3g", contained, total,
         policies, slack);
  detail("info: omega=2 instances outside the interval: %zu/20", escaped_lag2);
  return contained == total;
}

bool c7() {
  SweepConfig c = desk();
  c.clip_alphas = {0.1, 1.0, 2.5};
  const auto r = run_varred(c);
  save(r, 7);
  for (const auto& row : r.rows) show(row);
  const auto& base = r.find("ipw", "baseline", 1);
  const auto& clip = r.find("ipw", "clip:2.5", 1);
  detail("IPW variance %.4g -> %.4g; |bias| %.4g -> %.4g", base.variance, clip.variance,
         base.abs_bias, clip.abs_bias);
  return clip.variance < base.variance && clip.abs_bias > base.abs_bias;
}

bool c8() {
  DgpParams p = sample_params(kDefaultParamSeed);
  p.t_star = 17;
  const auto regime = TreatmentRegime::never(17);
  const TruthEstimate truth = truth_mc(p, regime, 1000000, substream_seed(8, Stream::Truth, 0), workers());
  const std::size_t outer = 200, b = 500;
  std::vector<int> covered(outer, 0);
  std::vector<double> width(outer, 0.0);
  parallel_for(outer, workers(), [&](std::size_t r) {
    const Panel panel = generate_panel(p, 500, substream_seed(8, Stream::Replicate, r));
    EstimatorOptions o;
    o.method = Method::Ir;
    const BootstrapResult res = bootstrap_ci(panel, regime, o, b, 95.0, substream_seed(8, Stream::Bootstrap, r));
    covered[r] = res.lo <= truth.psi && truth.psi <= res.hi;
    width[r] = res.hi - res.lo;
  });
  double cov = 0.0, w = 0.0;
  for (std::size_t r = 0; r < outer; ++r) {
    cov += covered[r];
    w += width[r];
  }
  cov /= static_cast<double>(outer);
  detail("truth %.5f (se %.2g); coverage %.3f over %zu outer replications; mean width %.4f",
         truth.psi, truth.mc_se, cov, outer, w / static_cast<double>(outer));
  return cov >= 0.90 && cov <= 0.98;
}

bool c9() {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_score = 0.0, worst_wls = 0.0;
  std::size_t logit_ok = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 100 + inst * 5, p = 2 + inst % 4;
    Matrix x(n, p);
    std::vector<double> y(n), w(n), yl(n);
    oracle::Mat rows;
    for (std::size_t i = 0; i < n; ++i) {
      x(i, 0) = 1.0;
      for (std::size_t j = 1; j < p; ++j) x(i, j) = z(rng);
      double eta = -0.5;
      for (std::size_t j = 1; j < p; ++j) eta += 0.7 * x(i, j) / static_cast<double>(j);
      y[i] = u(rng) < expit(eta) ? 1.0 : 0.0;
      yl[i] = eta + z(rng);
      w[i] = 0.2 + u(rng);
      rows.emplace_back();
      for (std::size_t j = 0; j < p; ++j) rows.back().push_back(x(i, j));
    }
    const LogisticFit lf = logit_fit(x, y, w);
    if (lf.fallback == LogitFallback::None && lf.converged) {
      ++logit_ok;
      worst_score = std::max(worst_score, lf.score_max_norm);
    }
    const LinearFit wf = wls_fit(x, yl, w);
    const auto ref = oracle::normal_equations(rows, yl, w);
    for (std::size_t j = 0; j < p; ++j) {
      worst_wls = std::max(worst_wls, std::abs(wf.coefficients[static_cast<Eigen::Index>(j)] - ref[j]));
    }
  }
  detail("logistic: %zu/100 converged without fallback, max score norm %.3g", logit_ok, worst_score);
  detail("wls: max |coef - normal equations| %.3g", worst_wls);

  SweepConfig c;
  c.n = 200;
  c.replications = 6;
  c.t_star = 33;
  c.deltas = {1, 4, 32};
  c.truth_m = 5000;
  auto csv = [](const ExperimentReport& r) {
    std::ostringstream s;
    write_report_csv(r, s);
    return s.str();
  };
  c.workers = 1;
  const std::string one = csv(run_sweep(c));
  c.workers = 4;
  const std::string four = csv(run_sweep(c));
  const bool same = one == four;
  c.workers = 1;
  const std::string vr1 = csv(run_varred(c));
  c.workers = 3;
  const bool same_vr = vr1 == csv(run_varred(c));
  detail("sweep CSV identical across 1 and 4 workers: %s; varred across 1 and 3: %s",
         same ? "yes" : "no", same_vr ? "yes" : "no");
  return logit_ok == 100 && worst_score < 1e-6 && worst_wls < 1e-8 && same && same_vr;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <criterion 1..9>\n", argv[0]);
    return 2;
  }
  const int which = std::atoi(argv[1]);
  static const char* names[] = {"",
                                "follower calibration",
                                "oracle equivalence (exact)",
                                "effect-delay bias pattern",
                                "variance ordering at the finest grid",
                                "RCT bias persistence",
                                "bias-bound containment",
                                "clipping effect",
                                "bootstrap coverage",
                                "numerical core and determinism"};
  static const std::function<bool()> run[] = {nullptr, c1, c2, c3, c4, c5, c6, c7, c8, c9};
  if (which < 1 || which > 9) {
    std::fprintf(stderr, "criterion must be in 1..9\n");
    return 2;
  }
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = false;
  try {
    pass = run[which]();
  } catch (const std::exception& e) {
    detail("exception: %s", e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s criterion %d: %s (%.1f s)\n", pass ? "PASS" : "FAIL", which, names[which], secs);
  return pass ? 0 : 1;
}
