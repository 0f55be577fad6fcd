#include "longci/exactg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "longci/error.hpp"
#include "longci/parallel.hpp"
#include "longci/rng.hpp"

namespace longci {
namespace {

constexpr double kRowTol = 1e-12;

struct Dims {
  std::size_t t, s, masks;
  unsigned omega;
  std::size_t idx(std::size_t mask, std::size_t l) const { return mask * s + l; }
  std::size_t shift(std::size_t mask, int a) const {
    return ((mask << 1) | static_cast<std::size_t>(a)) & (masks - 1);
  }
  /// Treatment that drives the next transition, and the outcome at the end.
  int lagged(std::size_t mask) const { return static_cast<int>((mask >> (omega - 1)) & 1u); }
};

Dims dims(const DiscreteMdp& mdp) {
  return {mdp.horizon, mdp.states(), std::size_t{1} << mdp.omega,
          static_cast<unsigned>(mdp.omega)};
}

/// P(A_k = 1) for an alive subject in state l whose previous action is prev.
using ActionRule = std::function<double(std::size_t k, std::size_t l, int prev)>;

ActionRule behavior_rule(const DiscreteMdp& mdp) {
  return [&mdp](std::size_t k, std::size_t l, int prev) {
    return prev == 1 ? 1.0 : mdp.behavior[k][l];
  };
}

/// Applies the action at column k to a pre-action distribution.
void act(const DiscreteMdp& mdp, const Dims& d, std::size_t k, const ActionRule& rule,
         const std::vector<double>& pre, std::vector<double>& post) {
  std::fill(post.begin(), post.end(), 0.0);
  for (std::size_t m = 0; m < d.masks; ++m) {
    const int prev = static_cast<int>(m & 1u);
    for (std::size_t l = 0; l < d.s; ++l) {
      const double mass = pre[d.idx(m, l)];
      if (mass == 0.0) continue;
      if (mdp.dead(l)) {
        post[d.idx(d.shift(m, prev), l)] += mass;
        continue;
      }
      const double p1 = rule(k, l, prev);
      if (p1 > 0.0) post[d.idx(d.shift(m, 1), l)] += mass * p1;
      if (p1 < 1.0) post[d.idx(d.shift(m, 0), l)] += mass * (1.0 - p1);
    }
  }
}

/// Moves a post-action distribution at column k to pre-action at k + 1.
void transit(const DiscreteMdp& mdp, const Dims& d, std::size_t k,
             const std::vector<double>& post, std::vector<double>& pre) {
  std::fill(pre.begin(), pre.end(), 0.0);
  for (std::size_t m = 0; m < d.masks; ++m) {
    const int a = d.lagged(m);
    for (std::size_t l = 0; l < d.s; ++l) {
      const double mass = post[d.idx(m, l)];
      if (mass == 0.0) continue;
      for (std::size_t to = 0; to < d.s; ++to) {
        pre[d.idx(m, to)] += mass * mdp.p(k + 1, a, l, to);
      }
    }
  }
}

double terminal_value(const DiscreteMdp& mdp, const Dims& d, const std::vector<double>& post) {
  double v = 0.0;
  for (std::size_t m = 0; m < d.masks; ++m) {
    for (std::size_t l = 0; l < d.s; ++l) {
      const double mass = post[d.idx(m, l)];
      if (mass != 0.0) v += mass * mdp.outcome[d.lagged(m)][l];
    }
  }
  return v;
}

std::vector<double> initial_pre(const DiscreteMdp& mdp, const Dims& d) {
  std::vector<double> pre(d.masks * d.s, 0.0);
  for (std::size_t l = 0; l < d.s; ++l) pre[d.idx(0, l)] = mdp.initial[l];
  return pre;
}

double policy_value(const DiscreteMdp& mdp, const ActionRule& rule) {
  const Dims d = dims(mdp);
  std::vector<double> pre = initial_pre(mdp, d), post(pre.size());
  for (std::size_t k = 0;; ++k) {
    act(mdp, d, k, rule, pre, post);
    if (k + 1 == d.t) break;
    transit(mdp, d, k, post, pre);
  }
  return terminal_value(mdp, d, post);
}

void check_fine_regime(const DiscreteMdp& mdp, const TreatmentRegime& regime) {
  mdp.validate();
  if (regime.length() != mdp.horizon) {
    throw DataError("regime length does not match the horizon");
  }
}

void check_grid(const DiscreteMdp& mdp, const CoarseGrid& grid) {
  if (grid.t_star != mdp.horizon || grid.indices.empty() || grid.indices.front() != 1 ||
      grid.indices.back() != mdp.horizon) {
    throw DataError("grid must span the horizon and retain both endpoints");
  }
}

/// Coarse position of each fine column, or -1 when not retained.
std::vector<long> coarse_position(const CoarseGrid& grid) {
  std::vector<long> pos(grid.t_star, -1);
  for (std::size_t j = 0; j < grid.size(); ++j) pos[grid.indices[j] - 1] = static_cast<long>(j);
  return pos;
}

ActionRule forced_rule(const DiscreteMdp& mdp, const TreatmentRegime& coarse,
                       const std::vector<long>& pos) {
  return [&mdp, &coarse, &pos](std::size_t k, std::size_t l, int prev) {
    const long j = pos[k];
    if (j >= 0 && static_cast<std::size_t>(j) < coarse.specified()) {
      return static_cast<double>(coarse.at(static_cast<std::size_t>(j)));
    }
    return prev == 1 ? 1.0 : mdp.behavior[k][l];
  };
}

}  // namespace

void DiscreteMdp::validate() const {
  const std::size_t s = labels.size();
  if (horizon < 1) throw DataError("horizon must be >= 1");
  if (s < 1) throw DataError("need at least one state");
  if (omega < 1 || omega > 16) throw DataError("effect delay must be in [1, 16]");
  auto check_prob = [](double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError(std::string(what) + " outside [0, 1]");
  };
  auto check_row = [&](const double* row, const char* what) {
    double sum = 0.0;
    for (std::size_t j = 0; j < s; ++j) {
      check_prob(row[j], what);
      sum += row[j];
    }
    if (std::abs(sum - 1.0) > kRowTol) throw DataError(std::string(what) + " row does not sum to 1");
  };
  if (initial.size() != s) throw DataError("initial distribution has the wrong size");
  check_row(initial.data(), "initial");
  if (transition.size() != horizon) throw DataError("need one transition table per time");
  for (std::size_t k = 1; k < horizon; ++k) {
    if (transition[k].size() != 2) throw DataError("transition needs tables for a = 0 and 1");
    for (int a = 0; a < 2; ++a) {
      if (transition[k][a].size() != s * s) throw DataError("transition table has the wrong size");
      for (std::size_t l = 0; l < s; ++l) check_row(transition[k][a].data() + l * s, "transition");
    }
  }
  if (behavior.size() != horizon) throw DataError("need one behavior row per time");
  for (const auto& row : behavior) {
    if (row.size() != s) throw DataError("behavior row has the wrong size");
    for (double p : row) check_prob(p, "behavior");
  }
  if (outcome.size() != 2 || outcome[0].size() != s || outcome[1].size() != s) {
    throw DataError("outcome table must be 2 x states");
  }
  for (const auto& row : outcome) {
    for (double y : row) {
      if (!std::isfinite(y)) throw DataError("outcome must be finite");
    }
  }
  if (death) {
    if (*death >= s) throw DataError("death state out of range");
    for (std::size_t k = 1; k < horizon; ++k) {
      for (int a = 0; a < 2; ++a) {
        if (p(k, a, *death, *death) != 1.0) throw DataError("death state must be absorbing");
      }
    }
  }
  if (!censoring.empty()) {
    if (censoring.size() != horizon) throw DataError("need one censoring row per time");
    for (const auto& row : censoring) {
      if (row.size() != s) throw DataError("censoring row has the wrong size");
      for (double h : row) check_prob(h, "censoring");
    }
  }
  if (!(outcome_sd >= 0.0)) throw DataError("outcome_sd must be >= 0");
}

DiscreteMdp random_mdp(const RandomMdpOptions& o, std::uint64_t seed) {
  if (o.horizon < 1 || o.states < 1) throw ConfigError("random mdp needs horizon and states >= 1");
  Rng rng = make_rng(seed, Stream::Mdp, 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DiscreteMdp m;
  m.horizon = o.horizon;
  m.omega = o.omega;
  const std::size_t alive = o.states;
  const std::size_t s = alive + (o.death ? 1 : 0);
  for (std::size_t l = 0; l < alive; ++l) m.labels.push_back("s" + std::to_string(l));
  if (o.death) {
    m.labels.push_back("dead");
    m.death = alive;
  }
  auto random_row = [&](std::size_t width) {
    std::vector<double> row(width);
    double sum = 0.0;
    for (auto& x : row) sum += (x = 0.2 + u(rng));
    for (auto& x : row) x /= sum;
    return row;
  };
  m.initial.assign(s, 0.0);
  {
    auto row = random_row(alive);
    std::copy(row.begin(), row.end(), m.initial.begin());
  }
  m.transition.resize(o.horizon);
  for (std::size_t k = 1; k < o.horizon; ++k) {
    m.transition[k].assign(2, std::vector<double>(s * s, 0.0));
    for (std::size_t l = 0; l < s; ++l) {
      if (o.death && l == alive) {
        m.transition[k][0][l * s + l] = m.transition[k][1][l * s + l] = 1.0;
        continue;
      }
      const double die = o.death ? 0.02 + 0.13 * u(rng) : 0.0;
      const auto base = random_row(alive);
      const auto alt = random_row(alive);
      for (std::size_t to = 0; to < alive; ++to) {
        m.transition[k][0][l * s + to] = (1.0 - die) * base[to];
        m.transition[k][1][l * s + to] =
            (1.0 - die) * ((1.0 - o.effect) * base[to] + o.effect * alt[to]);
      }
      if (o.death) {
        m.transition[k][0][l * s + alive] = die;
        m.transition[k][1][l * s + alive] = die;
      }
      // renormalise away rounding so rows sum to 1 within tolerance
      for (int a = 0; a < 2; ++a) {
        double sum = 0.0;
        for (std::size_t to = 0; to < s; ++to) sum += m.transition[k][a][l * s + to];
        for (std::size_t to = 0; to < s; ++to) m.transition[k][a][l * s + to] /= sum;
      }
    }
  }
  m.behavior.assign(o.horizon, std::vector<double>(s, 0.0));
  for (auto& row : m.behavior) {
    for (std::size_t l = 0; l < alive; ++l) row[l] = 0.15 + 0.7 * u(rng);
  }
  m.outcome.assign(2, std::vector<double>(s, 0.0));
  for (std::size_t l = 0; l < s; ++l) {
    m.outcome[0][l] = 2.0 * u(rng) - 1.0;
    m.outcome[1][l] = m.outcome[0][l] + o.effect * (2.0 * u(rng) - 1.0);
  }
  if (o.censoring) {
    m.censoring.assign(o.horizon, std::vector<double>(s, 0.0));
    for (auto& row : m.censoring) {
      for (std::size_t l = 0; l < alive; ++l) row[l] = 0.02 + 0.18 * u(rng);
    }
  }
  m.validate();
  return m;
}

double gform_uncoarsened(const DiscreteMdp& mdp, const TreatmentRegime& regime) {
  check_fine_regime(mdp, regime);
  return policy_value(mdp, [&mdp, &regime](std::size_t k, std::size_t l, int prev) {
    if (k < regime.specified()) return static_cast<double>(regime.at(k));
    return prev == 1 ? 1.0 : mdp.behavior[k][l];
  });
}

double stochastic_policy_value(const DiscreteMdp& mdp, const TreatmentRegime& regime,
                               const CoarseGrid& grid) {
  check_fine_regime(mdp, regime);
  check_grid(mdp, grid);
  const TreatmentRegime coarse = coarsen_regime(regime, grid);
  const auto pos = coarse_position(grid);
  return policy_value(mdp, forced_rule(mdp, coarse, pos));
}

double gform_coarsened(const DiscreteMdp& mdp, const TreatmentRegime& regime,
                       const CoarseGrid& grid) {
  check_fine_regime(mdp, regime);
  check_grid(mdp, grid);
  const TreatmentRegime coarse = coarsen_regime(regime, grid);
  const Dims d = dims(mdp);
  const std::size_t kk = grid.size();
  std::vector<std::size_t> col(kk);
  for (std::size_t j = 0; j < kk; ++j) col[j] = grid.indices[j] - 1;
  const auto rule = behavior_rule(mdp);

  // Forward: observed law restricted to coarse followers, post-action at each
  // retained column.
  std::vector<std::vector<double>> mu(kk);
  {
    std::vector<double> pre = initial_pre(mdp, d), post(pre.size());
    std::size_t j = 0;
    for (std::size_t k = 0; k < d.t; ++k) {
      if (!mdp.censoring.empty()) {
        for (std::size_t m = 0; m < d.masks; ++m) {
          for (std::size_t l = 0; l < d.s; ++l) {
            if (!mdp.dead(l)) pre[d.idx(m, l)] *= 1.0 - mdp.censoring[k][l];
          }
        }
      }
      act(mdp, d, k, rule, pre, post);
      if (j < kk && col[j] == k) {
        if (j < coarse.specified()) {
          const auto a = static_cast<std::size_t>(coarse.at(j));
          for (std::size_t m = 0; m < d.masks; ++m) {
            if ((m & 1u) == a) continue;
            for (std::size_t l = 0; l < d.s; ++l) {
              if (!mdp.dead(l)) post[d.idx(m, l)] = 0.0;
            }
          }
        }
        mu[j] = post;
        ++j;
      }
      if (k + 1 < d.t) transit(mdp, d, k, post, pre);
    }
  }

  // Outcome of a subject already dead, from its post-action mask at column k.
  auto dead_value = [&](std::size_t mask, std::size_t k) {
    for (std::size_t c = k + 1; c < d.t; ++c) mask = d.shift(mask, static_cast<int>(mask & 1u));
    return mdp.outcome[d.lagged(mask)][*mdp.death];
  };

  // Saturated regression of a post-action value table on the current state.
  auto regress = [&](const std::vector<double>& mass, const std::vector<double>& value) {
    std::vector<double> q(d.s, 0.0);
    for (std::size_t l = 0; l < d.s; ++l) {
      if (mdp.dead(l)) continue;
      double num = 0.0, den = 0.0;
      for (std::size_t m = 0; m < d.masks; ++m) {
        num += mass[d.idx(m, l)] * value[d.idx(m, l)];
        den += mass[d.idx(m, l)];
      }
      q[l] = den > 0.0 ? num / den : 0.0;
    }
    return q;
  };

  // value on post-action states at a retained column
  auto expand = [&](const std::vector<double>& q, std::size_t k) {
    std::vector<double> v(d.masks * d.s, 0.0);
    for (std::size_t m = 0; m < d.masks; ++m) {
      for (std::size_t l = 0; l < d.s; ++l) {
        v[d.idx(m, l)] = mdp.dead(l) ? dead_value(m, k) : q[l];
      }
    }
    return v;
  };

  std::vector<double> terminal(d.masks * d.s);
  for (std::size_t m = 0; m < d.masks; ++m) {
    for (std::size_t l = 0; l < d.s; ++l) terminal[d.idx(m, l)] = mdp.outcome[d.lagged(m)][l];
  }
  std::vector<double> q = regress(mu[kk - 1], terminal);

  for (std::size_t j = kk - 1; j-- > 0;) {
    std::vector<double> post_value = expand(q, col[j + 1]);
    // backward through the bin under the behavior policy
    for (std::size_t k = col[j + 1]; k-- > col[j];) {
      // pre-action value at k + 1
      std::vector<double> pre_value(d.masks * d.s, 0.0);
      for (std::size_t m = 0; m < d.masks; ++m) {
        const int prev = static_cast<int>(m & 1u);
        for (std::size_t l = 0; l < d.s; ++l) {
          if (mdp.dead(l)) {
            pre_value[d.idx(m, l)] = post_value[d.idx(d.shift(m, prev), l)];
            continue;
          }
          const double p1 = rule(k + 1, l, prev);
          pre_value[d.idx(m, l)] = p1 * post_value[d.idx(d.shift(m, 1), l)] +
                                   (1.0 - p1) * post_value[d.idx(d.shift(m, 0), l)];
        }
      }
      std::vector<double> v(d.masks * d.s, 0.0);
      for (std::size_t m = 0; m < d.masks; ++m) {
        const int a = d.lagged(m);
        for (std::size_t l = 0; l < d.s; ++l) {
          double acc = 0.0;
          for (std::size_t to = 0; to < d.s; ++to) {
            acc += mdp.p(k + 1, a, l, to) * pre_value[d.idx(m, to)];
          }
          v[d.idx(m, l)] = acc;
        }
      }
      post_value = std::move(v);
    }
    q = regress(mu[j], post_value);
  }

  double psi = 0.0;
  for (std::size_t l = 0; l < d.s; ++l) {
    psi += mdp.initial[l] * (mdp.dead(l) ? dead_value(0, 0) : q[l]);
  }
  return psi;
}

BiasBound bias_bound(const DiscreteMdp& mdp, const TreatmentRegime& regime,
                     const CoarseGrid& grid, std::size_t max_policies) {
  check_fine_regime(mdp, regime);
  check_grid(mdp, grid);
  const TreatmentRegime coarse = coarsen_regime(regime, grid);
  const auto pos = coarse_position(grid);
  const Dims d = dims(mdp);

  // free decision slots: (column, alive state)
  std::vector<long> slot(d.t * d.s, -1);
  std::size_t bits = 0;
  for (std::size_t k = 0; k < d.t; ++k) {
    if (pos[k] >= 0 || k >= regime.specified()) continue;
    for (std::size_t l = 0; l < d.s; ++l) {
      if (!mdp.dead(l)) slot[k * d.s + l] = static_cast<long>(bits++);
    }
  }
  if (bits >= 63 || (std::uint64_t{1} << bits) > max_policies) {
    throw ConfigError("policy enumeration exceeds the limit of " + std::to_string(max_policies));
  }
  const std::uint64_t count = std::uint64_t{1} << bits;
  const double target = gform_uncoarsened(mdp, regime);

  std::vector<double> values(count);
  constexpr std::uint64_t kBlock = 256;
  const std::size_t blocks = static_cast<std::size_t>((count + kBlock - 1) / kBlock);
  parallel_for(blocks, 1, [&](std::size_t b) {
    for (std::uint64_t code = b * kBlock; code < std::min(count, (b + 1) * kBlock); ++code) {
      values[code] = policy_value(mdp, [&](std::size_t k, std::size_t l, int prev) {
        const long j = pos[k];
        if (j >= 0 && static_cast<std::size_t>(j) < coarse.specified()) {
          return static_cast<double>(coarse.at(static_cast<std::size_t>(j)));
        }
        if (prev == 1) return 1.0;
        const long s = slot[k * d.s + l];
        if (s < 0) return mdp.behavior[k][l];
        return static_cast<double>((code >> s) & 1u);
      });
    }
  });
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return {target - *hi, target - *lo, static_cast<std::size_t>(count)};
}

ConditionReport check_conditions(const DiscreteMdp& mdp, const TreatmentRegime& regime,
                                 const CoarseGrid& grid) {
  check_fine_regime(mdp, regime);
  check_grid(mdp, grid);
  const TreatmentRegime coarse = coarsen_regime(regime, grid);
  const Dims d = dims(mdp);
  ConditionReport r;

  // (i): the coarse jump pins down the fine jump
  std::size_t jump = 0;  // 1-based, 0 = none
  for (std::size_t k = 0; k < regime.specified(); ++k) {
    if (regime.at(k) == 1) {
      jump = k + 1;
      break;
    }
  }
  r.condition_i = jump <= 1 || (grid.retains(jump) && grid.retains(jump - 1));

  // (ii): bin-end state distribution does not depend on the actions strictly
  // inside the bin.
  r.condition_ii = true;
  for (std::size_t j = 1; j < grid.size() && r.condition_ii; ++j) {
    const std::size_t from = grid.indices[j - 1] - 1, to = grid.indices[j] - 1;
    if (to - from <= 1) continue;
    const std::size_t inner = to - from - 1;
    for (std::size_t m0 = 0; m0 < d.masks && r.condition_ii; ++m0) {
      for (std::size_t l0 = 0; l0 < d.s && r.condition_ii; ++l0) {
        if (mdp.dead(l0)) continue;
        const bool treated = (m0 & 1u) != 0;
        const std::size_t patterns = treated ? 1 : inner + 1;
        std::vector<double> ref;
        for (std::size_t p = 0; p < patterns; ++p) {
          // pattern p: jump at inner position p (p == inner: no jump)
          std::vector<double> post(d.masks * d.s, 0.0), pre(post.size());
          post[d.idx(m0, l0)] = 1.0;
          for (std::size_t k = from; k < to; ++k) {
            transit(mdp, d, k, post, pre);
            if (k + 1 == to) break;
            const std::size_t q = k - from;  // interior position of column k + 1
            const ActionRule forced = [&](std::size_t, std::size_t, int) {
              return treated || q >= p ? 1.0 : 0.0;
            };
            act(mdp, d, k + 1, forced, pre, post);
          }
          std::vector<double> marginal(d.s, 0.0);
          for (std::size_t m = 0; m < d.masks; ++m) {
            for (std::size_t l = 0; l < d.s; ++l) marginal[l] += pre[d.idx(m, l)];
          }
          if (p == 0) {
            ref = marginal;
            continue;
          }
          for (std::size_t l = 0; l < d.s; ++l) {
            if (std::abs(marginal[l] - ref[l]) > kRowTol) r.condition_ii = false;
          }
        }
      }
    }
  }

  r.uncoarsened = gform_uncoarsened(mdp, regime);
  r.coarsened = gform_coarsened(mdp, regime, grid);
  r.values_agree = std::abs(r.uncoarsened - r.coarsened) <= 1e-10;
  if (r.condition_i && r.condition_ii && regime.fully_specified() && !r.values_agree) {
    throw NumericError("conditions hold but coarsened and uncoarsened values differ");
  }
  return r;
}

namespace {

Panel::Data mdp_panel_shell(const DiscreteMdp& mdp) {
  Panel::Data d;
  d.t = mdp.horizon;
  d.l_names = {"l_state"};
  if (mdp.death) d.l_names.push_back("l_dead");
  return d;
}

/// Appends one subject; `l` holds state indices (-1 when unobserved).
void push_subject(Panel::Data& d, const DiscreteMdp& mdp, const std::vector<int>& l,
                  const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& c,
                  double y, double w, bool with_weight) {
  for (std::size_t k = 0; k < d.t; ++k) {
    if (l[k] < 0) {
      d.l.push_back(std::nan(""));
      if (mdp.death) d.l.push_back(std::nan(""));
    } else {
      d.l.push_back(l[k]);
      if (mdp.death) d.l.push_back(mdp.dead(static_cast<std::size_t>(l[k])) ? 1.0 : 0.0);
    }
    d.a.push_back(a[k]);
    if (!mdp.censoring.empty()) d.c.push_back(c[k]);
  }
  d.y.push_back(y);
  if (with_weight) d.weight.push_back(w);
  ++d.n;
}

}  // namespace

Panel population_panel(const DiscreteMdp& mdp) {
  mdp.validate();
  const Dims dm = dims(mdp);
  Panel::Data d = mdp_panel_shell(mdp);
  const std::size_t t = mdp.horizon;
  std::vector<int> l(t, -1);
  std::vector<std::uint8_t> a(t, 0), c(t, 0);

  // depth-first over (state, censoring, action) at each column
  std::function<void(std::size_t, std::size_t, std::size_t, double)> visit =
      [&](std::size_t k, std::size_t mask, std::size_t state, double prob) {
        l[k] = static_cast<int>(state);
        const int prev = static_cast<int>(mask & 1u);
        auto step = [&](int ak, double p) {
          if (p == 0.0) return;
          a[k] = static_cast<std::uint8_t>(ak);
          c[k] = 0;
          const std::size_t m2 = dm.shift(mask, ak);
          if (k + 1 == t) {
            push_subject(d, mdp, l, a, c, mdp.outcome[dm.lagged(m2)][state], prob * p, true);
            return;
          }
          for (std::size_t to = 0; to < dm.s; ++to) {
            const double q = mdp.p(k + 1, dm.lagged(m2), state, to);
            if (q > 0.0) visit(k + 1, m2, to, prob * p * q);
          }
          l[k + 1] = -1;
        };
        if (mdp.dead(state)) {
          step(prev, 1.0);
          return;
        }
        double stay = 1.0;
        if (!mdp.censoring.empty()) {
          const double h = mdp.censoring[k][state];
          if (h > 0.0) {
            // censored now: rest of the record is unobserved
            std::vector<int> lc(l);
            std::vector<std::uint8_t> ac(a), cc(c);
            for (std::size_t j = k; j < t; ++j) {
              ac[j] = static_cast<std::uint8_t>(prev);
              cc[j] = 1;
              if (j > k) lc[j] = -1;
            }
            push_subject(d, mdp, lc, ac, cc, std::nan(""), prob * h, true);
          }
          stay = 1.0 - h;
        }
        const double p1 = prev == 1 ? 1.0 : mdp.behavior[k][state];
        step(1, stay * p1);
        step(0, stay * (1.0 - p1));
      };
  for (std::size_t s0 = 0; s0 < dm.s; ++s0) {
    if (mdp.initial[s0] > 0.0) visit(0, 0, s0, mdp.initial[s0]);
  }
  return Panel(std::move(d));
}

Panel sample_mdp_panel(const DiscreteMdp& mdp, std::size_t n, std::uint64_t seed) {
  mdp.validate();
  const Dims dm = dims(mdp);
  Panel::Data d = mdp_panel_shell(mdp);
  const std::size_t t = mdp.horizon;
  std::vector<int> l(t);
  std::vector<std::uint8_t> a(t), c(t);
  auto draw_state = [&](Rng& rng, const double* row) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (std::size_t s = 0; s < dm.s; ++s) {
      acc += row[s];
      if (u < acc) return s;
    }
    return dm.s - 1;
  };
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_rng(seed, Stream::Mdp, i + 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::size_t mask = 0, state = draw_state(rng, mdp.initial.data());
    bool censored = false;
    int last_a = 0;
    for (std::size_t k = 0; k < t; ++k) {
      if (k > 0) state = draw_state(rng, mdp.transition[k][dm.lagged(mask)].data() + state * dm.s);
      const bool alive = !mdp.dead(state);
      const double uc = mdp.censoring.empty() ? 1.0 : unif(rng);
      const double ua = unif(rng);
      const bool observed = !censored;
      if (!censored && alive && !mdp.censoring.empty() && uc < mdp.censoring[k][state]) {
        censored = true;
      }
      const int prev = static_cast<int>(mask & 1u);
      int ak = prev;
      if (alive && prev == 0) ak = ua < mdp.behavior[k][state] ? 1 : 0;
      mask = dm.shift(mask, ak);
      l[k] = observed ? static_cast<int>(state) : -1;
      c[k] = censored ? 1 : 0;
      if (!censored) last_a = ak;
      a[k] = static_cast<std::uint8_t>(last_a);
    }
    double y = mdp.outcome[dm.lagged(mask)][state];
    if (mdp.outcome_sd > 0.0) y += std::normal_distribution<double>(0.0, mdp.outcome_sd)(rng);
    push_subject(d, mdp, l, a, c, censored ? std::nan("") : y, 1.0, false);
  }
  return Panel(std::move(d));
}

std::pair<double, double> mdp_truth_mc(const DiscreteMdp& mdp, const TreatmentRegime& regime,
                                       std::size_t m, std::uint64_t seed) {
  check_fine_regime(mdp, regime);
  if (m < 2) throw ConfigError("need at least 2 draws");
  const Dims dm = dims(mdp);
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    Rng rng = make_rng(seed, Stream::Truth, i);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto draw = [&](const double* row) {
      const double u = unif(rng);
      double acc = 0.0;
      for (std::size_t s = 0; s < dm.s; ++s) {
        acc += row[s];
        if (u < acc) return s;
      }
      return dm.s - 1;
    };
    std::size_t mask = 0, state = draw(mdp.initial.data());
    for (std::size_t k = 0; k < mdp.horizon; ++k) {
      if (k > 0) state = draw(mdp.transition[k][dm.lagged(mask)].data() + state * dm.s);
      const double ua = unif(rng);
      const int prev = static_cast<int>(mask & 1u);
      int ak = prev;
      if (!mdp.dead(state)) {
        if (k < regime.specified()) ak = regime.at(k);
        else if (prev == 0) ak = ua < mdp.behavior[k][state] ? 1 : 0;
      }
      mask = dm.shift(mask, ak);
    }
    double y = mdp.outcome[dm.lagged(mask)][state];
    if (mdp.outcome_sd > 0.0) y += std::normal_distribution<double>(0.0, mdp.outcome_sd)(rng);
    sum += y;
    sumsq += y * y;
  }
  const double mean = sum / static_cast<double>(m);
  const double var = std::max(0.0, (sumsq - m * mean * mean) / static_cast<double>(m - 1));
  return {mean, std::sqrt(var / static_cast<double>(m))};
}

}  // namespace longci
