#include <cmath>
#include <sstream>

#include "doctest.h"
#include "longci/coarsen.hpp"
#include "longci/error.hpp"
#include "longci/exactg.hpp"
#include "oracles.hpp"

using namespace longci;

namespace {

/// Binary-state instance whose treatment acts on L only after `omega` steps.
DiscreteMdp delayed_mdp(std::size_t horizon, int omega, std::uint64_t seed) {
  RandomMdpOptions o;
  o.horizon = horizon;
  o.omega = omega;
  return random_mdp(o, seed);
}

DiscreteMdp three_step() {
  DiscreteMdp m;
  m.horizon = 3;
  m.labels = {"a", "b"};
  m.initial = {0.6, 0.4};
  m.transition.resize(3);
  m.transition[1] = {{0.8, 0.2, 0.3, 0.7}, {0.2, 0.8, 0.1, 0.9}};
  m.transition[2] = {{0.7, 0.3, 0.4, 0.6}, {0.3, 0.7, 0.2, 0.8}};
  m.behavior = {{0.3, 0.6}, {0.4, 0.5}, {0.2, 0.7}};
  m.outcome = {{0.0, 1.0}, {0.5, 2.0}};
  return m;
}

}  // namespace

TEST_SUITE("exactg") {
  TEST_CASE("validation") {
    auto m = three_step();
    CHECK_NOTHROW(m.validate());
    m.initial = {0.5, 0.4};
    CHECK_THROWS_AS(m.validate(), DataError);
    m = three_step();
    m.death = 0;
    CHECK_THROWS_AS(m.validate(), DataError);  // state 0 is not absorbing
  }

  TEST_CASE("single step reduces to a weighted sum") {
    DiscreteMdp m;
    m.horizon = 1;
    m.labels = {"x", "y"};
    m.initial = {0.3, 0.7};
    m.transition.resize(1);
    m.behavior = {{0.5, 0.5}};
    m.outcome = {{1.0, 2.0}, {4.0, 8.0}};
    CHECK(gform_uncoarsened(m, TreatmentRegime::never(1)) == doctest::Approx(0.3 + 1.4));
    CHECK(gform_uncoarsened(m, TreatmentRegime::immediate(1)) == doctest::Approx(1.2 + 5.6));
  }

  TEST_CASE("outcome independent of the state gives the constant") {
    auto m = three_step();
    m.outcome = {{1.5, 1.5}, {1.5, 1.5}};
    for (const auto& r : {TreatmentRegime::never(3), TreatmentRegime::jump_at(2, 3)}) {
      CHECK(gform_uncoarsened(m, r) == doctest::Approx(1.5).epsilon(1e-14));
    }
  }

  TEST_CASE("dp equals path enumeration") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      RandomMdpOptions o;
      o.horizon = 2 + seed % 4;
      o.states = 2 + seed % 2;
      o.omega = 1 + static_cast<int>(seed % 3);
      o.death = seed % 4 == 3;
      const auto m = random_mdp(o, seed);
      const auto t = m.horizon;
      CAPTURE(seed);
      for (const auto& r : {TreatmentRegime::never(t), TreatmentRegime::immediate(t),
                            TreatmentRegime::jump_at(2, t), TreatmentRegime::no_treat_before(2, t)}) {
        const double ref = oracle::value(oracle::enumerate(m, oracle::regime_rule(m, r)));
        CHECK(std::abs(gform_uncoarsened(m, r) - ref) < 1e-12);
      }
      for (int d : {1, 2, 3}) {
        if (static_cast<std::size_t>(d) >= t) continue;
        const auto grid = coarse_indices(t, d);
        const auto r = TreatmentRegime::never(t);
        CHECK(std::abs(gform_coarsened(m, r, grid) - oracle::coarsened_by_enumeration(m, r, grid)) <
              1e-12);
      }
    }
  }

  TEST_CASE("identity grid and stochastic policy identities") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      RandomMdpOptions o;
      o.horizon = 4;
      o.death = seed % 3 == 0;
      const auto m = random_mdp(o, seed);
      CAPTURE(seed);
      for (const auto& r : {TreatmentRegime::never(4), TreatmentRegime::jump_at(3, 4),
                            TreatmentRegime::no_treat_before(3, 4)}) {
        CHECK(std::abs(gform_coarsened(m, r, identity_grid(4)) - gform_uncoarsened(m, r)) < 1e-12);
        CHECK(std::abs(stochastic_policy_value(m, r, identity_grid(4)) - gform_uncoarsened(m, r)) <
              1e-12);
        for (const auto& g : {custom_grid(4, {1, 3, 4}, 2), custom_grid(4, {1, 4}, 3)}) {
          if (!r.fully_specified() && !g.retains(r.specified())) continue;
          CHECK(std::abs(stochastic_policy_value(m, r, g) - gform_coarsened(m, r, g)) < 1e-12);
        }
      }
    }
  }

  TEST_CASE("behavior equal to the regime removes the discrepancy") {
    auto m = three_step();
    for (auto& row : m.behavior) row = {0.0, 0.0};  // never treats
    const auto r = TreatmentRegime::never(3);
    const auto g = custom_grid(3, {1, 3}, 2);
    CHECK(std::abs(stochastic_policy_value(m, r, g) - gform_uncoarsened(m, r)) < 1e-14);
    CHECK(std::abs(gform_coarsened(m, r, g) - gform_uncoarsened(m, r)) < 1e-14);
  }

  TEST_CASE("no treatment effect: every grid agrees") {
    RandomMdpOptions o;
    o.horizon = 5;
    o.effect = 0.0;
    const auto m = random_mdp(o, 4);
    const auto r = TreatmentRegime::never(5);
    for (int d : {2, 4}) {
      const auto g = coarse_indices(5, d);
      CHECK(std::abs(gform_coarsened(m, r, g) - gform_uncoarsened(m, r)) < 1e-14);
      const auto b = bias_bound(m, r, g);
      CHECK(std::abs(b.lo) < 1e-14);
      CHECK(std::abs(b.hi) < 1e-14);
    }
  }

  TEST_CASE("within-bin effect makes the coarsened value differ") {
    const auto m = three_step();
    const auto r = TreatmentRegime::never(3);
    const auto g = custom_grid(3, {1, 3}, 2);
    const double c = gform_coarsened(m, r, g);
    CHECK(std::abs(c - gform_uncoarsened(m, r)) > 1e-3);
    CHECK(std::abs(c - oracle::coarsened_by_enumeration(m, r, g)) < 1e-14);
  }

  TEST_CASE("bias bound") {
    const auto m = three_step();
    const auto r = TreatmentRegime::never(3);
    const auto id = bias_bound(m, r, identity_grid(3));
    CHECK(id.policies == 1);
    CHECK(id.lo == 0.0);
    CHECK(id.hi == 0.0);
    const auto g = custom_grid(3, {1, 3}, 2);
    const auto b = bias_bound(m, r, g);
    const double gap = gform_uncoarsened(m, r) - gform_coarsened(m, r, g);
    CHECK(b.lo <= gap + 1e-12);
    CHECK(gap <= b.hi + 1e-12);
    CHECK(b.policies == 4);
  }

  TEST_CASE("bias bound matches backward induction and contains the gap") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      RandomMdpOptions o;
      o.horizon = 3 + seed % 3;
      const auto m = random_mdp(o, 500 + seed);
      const auto t = m.horizon;
      const auto r = seed % 2 ? TreatmentRegime::never(t) : TreatmentRegime::immediate(t);
      const auto g = coarse_indices(t, 2 + static_cast<int>(seed % 2));
      const auto b = bias_bound(m, r, g);
      const auto [vmin, vmax] = oracle::policy_range(m, r, g);
      const double u = gform_uncoarsened(m, r);
      CAPTURE(seed);
      CHECK(std::abs(b.lo - (u - vmax)) < 1e-12);
      CHECK(std::abs(b.hi - (u - vmin)) < 1e-12);
      const double gap = u - gform_coarsened(m, r, g);
      CHECK(b.lo <= gap + 1e-12);
      CHECK(gap <= b.hi + 1e-12);
    }
  }

  TEST_CASE("bias bound guard") {
    RandomMdpOptions o;
    o.horizon = 12;
    const auto m = random_mdp(o, 1);
    CHECK_THROWS_AS(bias_bound(m, TreatmentRegime::never(12), custom_grid(12, {1, 12}, 11), 1000),
                    ConfigError);
  }

  TEST_CASE("conditions") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto m = delayed_mdp(9, 4, seed);
      const auto never = TreatmentRegime::never(9);
      for (int d : {1, 2, 4}) {
        const auto rep = check_conditions(m, never, coarse_indices(9, d));
        CHECK(rep.condition_i);
        CHECK(rep.condition_ii);
        CHECK(rep.values_agree);
      }
      const auto wide = check_conditions(m, never, coarse_indices(9, 8));
      CHECK(wide.condition_i);
      CHECK_FALSE(wide.condition_ii);
      CHECK_FALSE(wide.values_agree);
    }
    // a jump whose predecessor is dropped breaks condition (i)
    const auto m = delayed_mdp(9, 1, 3);
    const auto rep = check_conditions(m, TreatmentRegime::jump_at(6, 9), coarse_indices(9, 4));
    CHECK_FALSE(rep.condition_i);
  }

  TEST_CASE("population panel carries the whole law") {
    RandomMdpOptions o;
    o.horizon = 3;
    o.death = true;
    o.censoring = true;
    const auto m = random_mdp(o, 2);
    const auto p = population_panel(m);
    double total = 0.0;
    for (std::size_t i = 0; i < p.n(); ++i) total += p.weight(i);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.l_names() == std::vector<std::string>{"l_state", "l_dead"});
  }

  TEST_CASE("sampled panels are deterministic and respect censoring") {
    RandomMdpOptions o;
    o.horizon = 4;
    o.censoring = true;
    const auto m = random_mdp(o, 6);
    const auto a = sample_mdp_panel(m, 200, 1), b = sample_mdp_panel(m, 200, 1);
    CHECK(a.data().a == b.data().a);
    std::size_t censored = 0;
    for (std::size_t i = 0; i < a.n(); ++i) {
      if (a.censored(i, 3)) {
        ++censored;
        CHECK(std::isnan(a.y(i)));
      }
    }
    CHECK(censored > 0);
  }

  TEST_CASE("text format round trip") {
    RandomMdpOptions o;
    o.horizon = 3;
    o.death = true;
    o.censoring = true;
    o.omega = 2;
    auto m = random_mdp(o, 8);
    m.outcome_sd = 0.25;
    std::stringstream s;
    write_mdp(m, s);
    const auto q = read_mdp(s);
    CHECK(q.labels == m.labels);
    CHECK(q.omega == 2);
    CHECK(q.death == m.death);
    CHECK(q.outcome_sd == 0.25);
    for (const auto& r : {TreatmentRegime::never(3), TreatmentRegime::immediate(3)}) {
      CHECK(gform_uncoarsened(q, r) == gform_uncoarsened(m, r));
    }
  }

  TEST_CASE("text format with wildcards and comments") {
    std::istringstream in(R"(# two states
horizon 3
states lo hi
initial 0.5 0.5
transition * 0 lo : 0.9 0.1
transition * 0 hi : 0.2 0.8
transition * 1 lo : 0.6 0.4   # treated
transition * 1 hi : 0.1 0.9
behavior * : 0.3 0.6
outcome 0 : 0 1
outcome 1 : 1 3
)");
    const auto m = read_mdp(in);
    CHECK(m.horizon == 3);
    CHECK(m.p(2, 1, 0, 1) == 0.4);
    CHECK(m.behavior[2][1] == 0.6);
  }

  TEST_CASE("text format errors carry the line number") {
    std::istringstream in("horizon 2\nstates a b\ninitial 0.5\n");
    try {
      read_mdp(in);
      FAIL("expected a DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
}
