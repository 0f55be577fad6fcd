#include "longci/dgp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "longci/error.hpp"
#include "longci/parallel.hpp"
#include "longci/regress.hpp"
#include "longci/rng.hpp"

namespace longci {
namespace {

constexpr double kNeverTreatTarget = 0.25;

double hazard_eta(const Hazard& h, const double* v, const double* l) {
  return h.intercept + h.v[0] * v[0] + h.v[1] * v[1] + h.l[0] * l[0] + h.l[1] * l[1] +
         h.l[2] * l[2];
}

double feature(const FeatureEquation& e, const double* v, const double* lag, int a) {
  return e.intercept + e.v[0] * v[0] + e.v[1] * v[1] + e.lag[0] * lag[0] +
         e.lag[1] * lag[1] + e.lag[2] * lag[2] + e.treat * a;
}

/// Output buffers for one subject; any may be null.
struct SubjectOut {
  double* v = nullptr;  // 2
  double* l = nullptr;  // t * 3
  std::uint8_t* a = nullptr;
  std::uint8_t* c = nullptr;
};

/// Simulates one subject. Draw order is fixed: V1, V2, then per step
/// eps_1, eps_2, eps_3, [censoring uniform], treatment uniform; then eps_Y.
double simulate_subject(const DgpParams& p, Rng& rng, const TreatmentRegime* regime,
                        SubjectOut out) {
  const std::size_t t = static_cast<std::size_t>(p.t_star);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, p.noise_sd);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  double v[2];
  v[0] = std_normal(rng);
  v[1] = std_normal(rng);
  if (out.v) {
    out.v[0] = v[0];
    out.v[1] = v[1];
  }

  std::vector<std::uint8_t> a(t, 0);
  double lag[3] = {0.0, 0.0, 0.0};
  double cur[3];
  bool censored = false;
  int a_prev = 0;
  const auto omega = static_cast<std::size_t>(p.omega);
  for (std::size_t k = 0; k < t; ++k) {
    const int a_eff = k >= omega ? a[k - omega] : 0;
    for (int d = 0; d < 3; ++d) cur[d] = feature(p.beta[d], v, lag, a_eff) + noise(rng);

    bool censor_now = false;
    if (p.censoring) {
      const double u = unif(rng);
      censor_now = regime == nullptr && !censored &&
                   u < expit(hazard_eta(*p.censoring, v, cur));
    }
    const double u = unif(rng);
    int ak;
    if (regime) {
      ak = regime->at(k);
    } else if (a_prev == 1) {
      ak = 1;
    } else {
      ak = u < expit(hazard_eta(p.gamma, v, cur)) ? 1 : 0;
    }
    a[k] = static_cast<std::uint8_t>(ak);

    const bool observed = !censored;
    if (censor_now) censored = true;
    if (out.l) {
      for (int d = 0; d < 3; ++d) out.l[k * 3 + d] = observed ? cur[d] : std::nan("");
    }
    if (out.c) out.c[k] = censored ? 1 : 0;
    if (out.a) {
      // after censoring the recorded treatment carries forward
      out.a[k] = censored ? (k > 0 ? out.a[k - 1] : 0) : a[k];
    }
    a_prev = ak;
    for (int d = 0; d < 3; ++d) lag[d] = cur[d];
  }
  const int a_y = t + 1 > omega ? a[t - omega] : 0;
  const double y = feature(p.beta[2], v, lag, a_y) + noise(rng);
  return censored ? std::nan("") : y;
}

Panel::Data empty_panel(const DgpParams& p, std::size_t n, bool with_c) {
  Panel::Data d;
  d.n = n;
  d.t = static_cast<std::size_t>(p.t_star);
  d.delta = 1;
  d.v_names = {"v1", "v2"};
  d.l_names = {"l1", "l2", "l3"};
  d.v.resize(n * 2);
  d.l.resize(n * d.t * 3);
  d.a.resize(n * d.t);
  if (with_c) d.c.resize(n * d.t);
  d.y.resize(n);
  return d;
}

}  // namespace

void DgpParams::validate() const {
  if (omega < 1) throw ConfigError("omega must be >= 1");
  if (t_star < 2) throw ConfigError("t_star must be >= 2");
  if (!(noise_sd > 0.0)) throw ConfigError("noise_sd must be > 0");
  if (!confounded) {
    for (double x : gamma.v) {
      if (x != 0.0) throw ConfigError("unconfounded parameters need zero V coefficients");
    }
    for (double x : gamma.l) {
      if (x != 0.0) throw ConfigError("unconfounded parameters need zero L coefficients");
    }
  }
}

DgpParams DgpParams::unconfounded() const {
  DgpParams p = *this;
  p.confounded = false;
  p.gamma.v = {0.0, 0.0};
  p.gamma.l = {0.0, 0.0, 0.0};
  const double h = 1.0 - std::pow(kNeverTreatTarget, 1.0 / t_star);
  p.gamma.intercept = logit(h);
  return p;
}

DgpParams sample_params(std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::Params, 0);
  std::normal_distribution<double> draw(0.0, 0.005);
  DgpParams p;
  for (int d = 0; d < 2; ++d) {
    auto& e = p.beta[d];
    e.intercept = draw(rng);
    e.v[0] = draw(rng);
    e.v[1] = draw(rng);
    e.lag[0] = draw(rng);
    e.lag[1] = draw(rng);
    e.lag[2] = draw(rng);
    e.treat = draw(rng);
  }
  auto& e3 = p.beta[2];
  e3.intercept = 0.006;
  e3.v[0] = draw(rng);
  e3.v[1] = draw(rng);
  e3.lag[0] = draw(rng);
  e3.lag[1] = draw(rng);
  e3.lag[2] = 1.0;
  e3.treat = -0.006;
  p.gamma.intercept = -5.5;
  p.gamma.v[0] = draw(rng);
  p.gamma.v[1] = draw(rng);
  p.gamma.l[0] = draw(rng);
  p.gamma.l[1] = draw(rng);
  p.gamma.l[2] = 0.5;
  return p;
}

Panel generate_panel(const DgpParams& params, std::size_t n, std::uint64_t seed) {
  params.validate();
  if (n < 1) throw ConfigError("n must be >= 1");
  const bool with_c = params.censoring.has_value();
  Panel::Data d = empty_panel(params, n, with_c);
  const std::size_t t = d.t;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_rng(seed, Stream::Subject, i);
    SubjectOut out{d.v.data() + i * 2, d.l.data() + i * t * 3, d.a.data() + i * t,
                   with_c ? d.c.data() + i * t : nullptr};
    d.y[i] = simulate_subject(params, rng, nullptr, out);
  }
  return Panel(std::move(d));
}

Panel generate_intervened(const DgpParams& params, const TreatmentRegime& regime,
                          std::size_t n, std::uint64_t seed) {
  params.validate();
  if (n < 1) throw ConfigError("n must be >= 1");
  if (!regime.fully_specified() || regime.length() != static_cast<std::size_t>(params.t_star)) {
    throw ConfigError("intervention needs a fully specified regime of length t_star");
  }
  Panel::Data d = empty_panel(params, n, false);
  const std::size_t t = d.t;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_rng(seed, Stream::Subject, i);
    SubjectOut out{d.v.data() + i * 2, d.l.data() + i * t * 3, d.a.data() + i * t, nullptr};
    d.y[i] = simulate_subject(params, rng, &regime, out);
  }
  return Panel(std::move(d));
}

TruthEstimate truth_mc(const DgpParams& params, const TreatmentRegime& regime,
                       std::size_t m, std::uint64_t seed, unsigned workers) {
  params.validate();
  if (m < 1000) throw ConfigError("truth_mc needs m >= 1000");
  if (!regime.fully_specified() || regime.length() != static_cast<std::size_t>(params.t_star)) {
    throw ConfigError("truth needs a fully specified regime of length t_star");
  }
  std::vector<double> y(m);
  constexpr std::size_t kBlock = 1024;
  const std::size_t blocks = (m + kBlock - 1) / kBlock;
  parallel_for(blocks, workers, [&](std::size_t b) {
    const std::size_t end = std::min(m, (b + 1) * kBlock);
    for (std::size_t j = b * kBlock; j < end; ++j) {
      Rng rng = make_rng(seed, Stream::Truth, j);
      y[j] = simulate_subject(params, rng, &regime, {});
    }
  });
  double sum = 0.0;
  for (double v : y) sum += v;
  const double mean = sum / static_cast<double>(m);
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(m - 1);
  return {mean, std::sqrt(var / static_cast<double>(m)), m};
}

namespace {

void put(std::ostream& out, const std::string& key, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << key << " = " << buf << '\n';
}

void put_equation(std::ostream& out, const std::string& prefix, const FeatureEquation& e) {
  put(out, prefix + ".intercept", e.intercept);
  put(out, prefix + ".v1", e.v[0]);
  put(out, prefix + ".v2", e.v[1]);
  for (int j = 0; j < 3; ++j) put(out, prefix + ".lag" + std::to_string(j + 1), e.lag[j]);
  put(out, prefix + ".treat", e.treat);
}

void put_hazard(std::ostream& out, const std::string& prefix, const Hazard& h) {
  put(out, prefix + ".intercept", h.intercept);
  put(out, prefix + ".v1", h.v[0]);
  put(out, prefix + ".v2", h.v[1]);
  for (int j = 0; j < 3; ++j) put(out, prefix + ".l" + std::to_string(j + 1), h.l[j]);
}

std::map<std::string, double*> equation_keys(const std::string& prefix, FeatureEquation& e) {
  std::map<std::string, double*> m;
  m[prefix + ".intercept"] = &e.intercept;
  m[prefix + ".v1"] = &e.v[0];
  m[prefix + ".v2"] = &e.v[1];
  for (int j = 0; j < 3; ++j) m[prefix + ".lag" + std::to_string(j + 1)] = &e.lag[j];
  m[prefix + ".treat"] = &e.treat;
  return m;
}

std::map<std::string, double*> hazard_keys(const std::string& prefix, Hazard& h) {
  std::map<std::string, double*> m;
  m[prefix + ".intercept"] = &h.intercept;
  m[prefix + ".v1"] = &h.v[0];
  m[prefix + ".v2"] = &h.v[1];
  for (int j = 0; j < 3; ++j) m[prefix + ".l" + std::to_string(j + 1)] = &h.l[j];
  return m;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void write_params(const DgpParams& p, std::ostream& out) {
  for (int d = 0; d < 3; ++d) put_equation(out, "beta" + std::to_string(d + 1), p.beta[d]);
  put_hazard(out, "gamma", p.gamma);
  out << "omega = " << p.omega << '\n';
  put(out, "noise_sd", p.noise_sd);
  out << "t_star = " << p.t_star << '\n';
  out << "confounded = " << (p.confounded ? 1 : 0) << '\n';
  if (p.censoring) put_hazard(out, "censoring", *p.censoring);
}

DgpParams read_params(std::istream& in) {
  DgpParams p;
  Hazard censoring;
  bool has_censoring = false;
  std::map<std::string, double*> keys;
  for (int d = 0; d < 3; ++d) keys.merge(equation_keys("beta" + std::to_string(d + 1), p.beta[d]));
  keys.merge(hazard_keys("gamma", p.gamma));
  auto ckeys = hazard_keys("censoring", censoring);
  double omega = p.omega, t_star = p.t_star, confounded = 1.0;
  keys["omega"] = &omega;
  keys["noise_sd"] = &p.noise_sd;
  keys["t_star"] = &t_star;
  keys["confounded"] = &confounded;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("params line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    double x = 0.0;
    std::istringstream vs(value);
    if (!(vs >> x) || !(vs >> std::ws).eof()) {
      throw ConfigError("params line " + std::to_string(lineno) + ": bad value '" + value + "'");
    }
    if (auto it = keys.find(key); it != keys.end()) {
      *it->second = x;
    } else if (auto ct = ckeys.find(key); ct != ckeys.end()) {
      *ct->second = x;
      has_censoring = true;
    } else {
      throw ConfigError("params line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  p.omega = static_cast<int>(omega);
  p.t_star = static_cast<int>(t_star);
  p.confounded = confounded != 0.0;
  if (has_censoring) p.censoring = censoring;
  p.validate();
  return p;
}

DgpParams read_params_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return read_params(in);
}

}  // namespace longci
