#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "longci/coarsen.hpp"
#include "longci/panel.hpp"
#include "longci/regime.hpp"

namespace longci {

/// Finite-state, finite-horizon process on the fine grid. Time indices below
/// are 0-based (column k is fine time k+1).
///
///   L_1 ~ initial
///   L_k ~ transition[k][A_{k-omega}][L_{k-1}]      (k >= 1; A_j = 0 for j < 0)
///   C_k ~ Bern(censoring[k][L_k])                   (optional, alive only)
///   A_k ~ Bern(behavior[k][L_k]) while A_{k-1} = 0  (alive only)
///   E[Y] = outcome[A_{T-omega}][L_{T-1}]
///
/// After death (L = death label) the state is frozen: no treatment decision,
/// no censoring, A carries forward.
struct DiscreteMdp {
  std::size_t horizon = 0;
  std::vector<std::string> labels;
  std::vector<double> initial;
  /// transition[k][a] is a row-major S x S matrix; transition[0] is unused.
  std::vector<std::vector<std::vector<double>>> transition;
  std::vector<std::vector<double>> behavior;
  std::vector<std::vector<double>> outcome;  // [a][l]
  int omega = 1;
  std::optional<std::size_t> death;
  std::vector<std::vector<double>> censoring;  // empty: no censoring
  double outcome_sd = 0.0;  // noise added by sample_mdp_panel

  std::size_t states() const { return labels.size(); }
  double p(std::size_t k, int a, std::size_t from, std::size_t to) const {
    return transition[k][a][from * labels.size() + to];
  }
  bool dead(std::size_t l) const { return death && *death == l; }

  /// Throws DataError on malformed tables (shape, range, rows not summing to
  /// 1 within 1e-12, non-absorbing death state).
  void validate() const;
};

/// Random instance with binary states (plus an optional death state),
/// probabilities drawn away from 0 and 1.
struct RandomMdpOptions {
  std::size_t horizon = 4;
  std::size_t states = 2;
  int omega = 1;
  bool death = false;
  bool censoring = false;
  /// Scales the treatment effect on transitions and outcome; 0 gives a
  /// process where treatment has no effect.
  double effect = 1.0;
};
DiscreteMdp random_mdp(const RandomMdpOptions& options, std::uint64_t seed);

/// Uncoarsened g-formula by forward DP. Positions after the regime's
/// specified prefix follow the behavior policy.
double gform_uncoarsened(const DiscreteMdp& mdp, const TreatmentRegime& regime);

/// Probability limit of iterated regression with saturated current-state
/// designs applied to the grid-coarsened observed law. `regime` lives on the
/// fine grid. Censoring enters only through follower selection, so with
/// censoring the value matches the estimator only on the identity grid.
double gform_coarsened(const DiscreteMdp& mdp, const TreatmentRegime& regime,
                       const CoarseGrid& grid);

/// Value of the policy that sets A to the coarse regime at retained columns
/// (ignoring absorption) and follows the behavior policy elsewhere. Equals
/// gform_coarsened when omega = 1.
double stochastic_policy_value(const DiscreteMdp& mdp, const TreatmentRegime& regime,
                               const CoarseGrid& grid);

struct BiasBound {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t policies = 0;
};

/// Enumerates deterministic Markov policies on non-retained, specified
/// columns (decision per (column, state) while A_{k-1} = 0), forcing the
/// coarse regime at retained columns. Returns the range of
/// gform_uncoarsened - value(policy). The interval contains
/// gform_uncoarsened - gform_coarsened when omega = 1. Throws ConfigError
/// past 1e6 policies.
BiasBound bias_bound(const DiscreteMdp& mdp, const TreatmentRegime& regime,
                     const CoarseGrid& grid, std::size_t max_policies = 1000000);

struct ConditionReport {
  bool condition_i = false;
  bool condition_ii = false;
  double uncoarsened = 0.0;
  double coarsened = 0.0;
  bool values_agree = false;  // |difference| <= 1e-10
};

/// Throws NumericError if both conditions hold for a fully specified regime
/// but the two values differ by more than 1e-10.
ConditionReport check_conditions(const DiscreteMdp& mdp, const TreatmentRegime& regime,
                                 const CoarseGrid& grid);

/// Panel holding the exact observed law: one case-weighted subject per
/// (state path, jump column, censoring column) with positive probability.
/// Columns: l_state (label index) and, with a death state, l_dead. Y holds
/// the conditional mean outcome.
Panel population_panel(const DiscreteMdp& mdp);

/// Monte Carlo sample from the observed law (Y gets N(0, outcome_sd^2) noise).
Panel sample_mdp_panel(const DiscreteMdp& mdp, std::size_t n, std::uint64_t seed);

/// Monte Carlo E[Y^regime]; returns {mean, standard error}.
std::pair<double, double> mdp_truth_mc(const DiscreteMdp& mdp,
                                       const TreatmentRegime& regime, std::size_t m,
                                       std::uint64_t seed);

/// Plain-text table format. Lines:
///   horizon <T>
///   states <label> <label> ...
///   effect_delay <omega>                     (optional, default 1)
///   initial <p> ...
///   transition <t|*> <a> <from> : <p> ...    (t is 1-based, >= 2)
///   behavior <t|*> : <p> ...                 (one per state)
///   outcome <a> : <y> ...
///   death <label>                            (optional)
///   censoring <t|*> : <h> ...                (optional)
///   outcome_sd <s>                           (optional)
/// '#' starts a comment. Throws DataError with the line number on error.
DiscreteMdp read_mdp(std::istream& in);
DiscreteMdp read_mdp_file(const std::string& path);
void write_mdp(const DiscreteMdp& mdp, std::ostream& out);

}  // namespace longci
