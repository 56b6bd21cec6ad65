#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support.hpp"

using namespace nashmg;
using namespace testsupport;

TEST_CASE("induced kernel and reward on the two-state fixture") {
  const TurnBasedGarnet g = g2_game();
  const JointStrategy nash = g2_nash(g);

  const Eigen::MatrixXd P = induced_kernel(g, nash);
  CHECK(P(0, 0) == 1.0);
  CHECK(P(0, 1) == 0.0);
  CHECK(P(1, 0) == 0.0);
  CHECK(P(1, 1) == 1.0);

  const Eigen::VectorXd r0 = induced_reward(g, nash, 0);
  CHECK(r0[0] == 1.0);
  CHECK(r0[1] == 0.0);

  // deterministic strategy on a deterministic game: one 1 per row
  for (int s = 0; s < 2; ++s) {
    CHECK(P.row(s).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(P.row(s).maxCoeff() == 1.0);
  }

  // uniform rows split the mass across the two distinct successors
  const Eigen::MatrixXd Pu = induced_kernel(g, uniform_strategy(g));
  CHECK(Pu(0, 0) == doctest::Approx(0.5));
  CHECK(Pu(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("kernel rows sum to one on random games and strategies") {
  Rng rng(21);
  for (int it = 0; it < 20; ++it) {
    const TurnBasedGarnet g = random_game(2, 6, 3, 0.9, rng);
    const Eigen::MatrixXd P = induced_kernel(g, random_strategy(g, rng));
    for (int s = 0; s < 6; ++s) CHECK(P.row(s).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("joint value solves the linear system") {
  const TurnBasedGarnet g = g2_game();
  const JointStrategy nash = g2_nash(g);
  const Eigen::VectorXd v0 = joint_value(g, nash, 0);
  const Eigen::VectorXd v1 = joint_value(g, nash, 1);
  CHECK(v0[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(v0[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v1[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v1[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("gamma = 0 reduces the value to the induced reward") {
  Rng rng(5);
  TurnBasedGarnet g = random_game(2, 5, 2, 0.0, rng);
  const JointStrategy js = random_strategy(g, rng);
  const Eigen::VectorXd v = joint_value(g, js, 0);
  const Eigen::VectorXd r = induced_reward(g, js, 0);
  CHECK((v - r).lpNorm<Eigen::Infinity>() <= 1e-12);

  // one absorbing state, unit reward, gamma 0.9: geometric series
  TurnBasedGarnet loop;
  loop.spec.n_players = 1;
  loop.spec.n_states = 2;
  loop.spec.n_actions = 1;
  loop.spec.gamma = 0.9;
  loop.controller = {0, 0};
  loop.critical_state = {0};
  loop.next_state = {0, 1};
  loop.reward = {1.0, 1.0};
  const Eigen::VectorXd vloop = joint_value(loop, uniform_strategy(loop), 0);
  CHECK(vloop[0] == doctest::Approx(10.0).epsilon(1e-10));
}

TEST_CASE("values are bounded by max reward over 1 - gamma") {
  Rng rng(31);
  for (int it = 0; it < 20; ++it) {
    const TurnBasedGarnet g = random_game(3, 7, 2, 0.95, rng);
    const JointStrategy js = random_strategy(g, rng);
    double rmax = 0.0;
    for (double r : g.reward) rmax = std::max(rmax, std::abs(r));
    const double bound = rmax / (1.0 - g.gamma()) + 1e-9;
    for (int i = 0; i < g.n_players(); ++i) {
      CHECK(joint_value(g, js, i).lpNorm<Eigen::Infinity>() <= bound);
    }
  }
}

TEST_CASE("best response on the two-state fixture") {
  const TurnBasedGarnet g = g2_game();
  const JointStrategy nash = g2_nash(g);

  SUBCASE("the Nash strategy is its own best response") {
    const BestResponse br = best_response(g, nash, 0);
    CHECK(br.value[0] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(br.value[1] == doctest::Approx(0.0).epsilon(1e-10));
    CHECK((br.value - joint_value(g, nash, 0)).lpNorm<Eigen::Infinity>() <= 1e-9);
  }

  SUBCASE("a deviating strategy is improvable") {
    const JointStrategy bb = deterministic_strategy(g, {1, 1});
    const BestResponse br = best_response(g, bb, 0);
    CHECK(br.value[0] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(joint_value(g, bb, 0)[0] == doctest::Approx(0.0).epsilon(1e-10));
  }
}

TEST_CASE("policy iteration equals brute-force enumeration on small games") {
  Rng rng(77);
  for (int it = 0; it < 25; ++it) {
    const int ns = 3 + rng.uniform_int(4);   // up to 6 states
    const int na = 2 + rng.uniform_int(2);   // up to 3 actions
    const int np = 1 + rng.uniform_int(3);
    const TurnBasedGarnet g = random_game(np, ns, na, rng.uniform(0.3, 0.95), rng);
    const JointStrategy js = random_strategy(g, rng);
    for (int i = 0; i < np; ++i) {
      const Eigen::VectorXd pi_value = best_response(g, js, i).value;
      const Eigen::VectorXd bf_value = brute_force_best_response_value(g, js, i);
      CHECK((pi_value - bf_value).lpNorm<Eigen::Infinity>() <= 1e-9);
    }
  }
}

TEST_CASE("best response dominates the joint value") {
  Rng rng(78);
  for (int it = 0; it < 30; ++it) {
    const TurnBasedGarnet g = random_game(2, 8, 3, 0.9, rng);
    const JointStrategy js = random_strategy(g, rng);
    for (int i = 0; i < 2; ++i) {
      const Eigen::VectorXd diff = best_response(g, js, i).value - joint_value(g, js, i);
      CHECK(diff.minCoeff() >= -1e-9);
    }
  }
}

TEST_CASE("single-player best response equals value iteration") {
  Rng rng(79);
  const TurnBasedGarnet g = random_game(1, 8, 3, 0.9, rng);
  const JointStrategy js = random_strategy(g, rng);
  const Eigen::VectorXd v_star = best_response(g, js, 0).value;

  Eigen::VectorXd v = Eigen::VectorXd::Zero(8);
  for (int it = 0; it < 2000; ++it) v = apply_T_star(g, v, js, 0);
  CHECK((v - v_star).lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("error vs best response") {
  const TurnBasedGarnet g = g2_game();

  const auto at_nash = error_vs_best_response(g, g2_nash(g));
  REQUIRE(at_nash.size() == 2);
  for (const auto& e : at_nash) {
    REQUIRE(e.has_value());
    CHECK(*e <= 1e-9);
  }

  const auto off_nash = error_vs_best_response(g, deterministic_strategy(g, {1, 1}));
  REQUIRE(off_nash[0].has_value());
  CHECK(*off_nash[0] == doctest::Approx(1.0).epsilon(1e-9));

  // all-zero rewards: undefined, flagged rather than zero
  TurnBasedGarnet zero = g;
  zero.reward.assign(zero.reward.size(), 0.0);
  const auto undefined = error_vs_best_response(zero, g2_nash(zero));
  CHECK_FALSE(undefined[0].has_value());
}

TEST_CASE("error vs best response is invariant under reward rescaling") {
  Rng rng(80);
  const TurnBasedGarnet g = random_game(2, 6, 2, 0.85, rng);
  const JointStrategy js = random_strategy(g, rng);
  const auto before = error_vs_best_response(g, js);

  TurnBasedGarnet scaled = g;
  for (int s = 0; s < 6; ++s) {
    for (int a = 0; a < 2; ++a) scaled.r(0, s, a) *= 3.7;
  }
  const auto after = error_vs_best_response(scaled, js);
  REQUIRE(before[0].has_value());
  REQUIRE(after[0].has_value());
  CHECK(*after[0] == doctest::Approx(*before[0]).epsilon(1e-9));
  CHECK(*after[1] == doctest::Approx(*before[1]).epsilon(1e-12));
}

TEST_CASE("Bellman operators have the right fixed points") {
  Rng rng(81);
  const TurnBasedGarnet g = random_game(2, 7, 3, 0.9, rng);
  const JointStrategy js = random_strategy(g, rng);
  for (int i = 0; i < 2; ++i) {
    const Eigen::VectorXd v_pi = joint_value(g, js, i);
    CHECK((apply_T_joint(g, v_pi, js, i) - v_pi).lpNorm<Eigen::Infinity>() <= 1e-9);
    const Eigen::VectorXd v_star = best_response(g, js, i).value;
    CHECK((apply_T_star(g, v_star, js, i) - v_star).lpNorm<Eigen::Infinity>() <= 1e-9);
  }

  // gamma = 0 collapses the joint operator to the induced reward
  const TurnBasedGarnet g0 = random_game(2, 5, 2, 0.0, rng);
  const JointStrategy js0 = random_strategy(g0, rng);
  Eigen::VectorXd any(5);
  for (int s = 0; s < 5; ++s) any[s] = rng.uniform(-3.0, 3.0);
  CHECK((apply_T_joint(g0, any, js0, 0) - induced_reward(g0, js0, 0)).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("value-space loss") {
  const TurnBasedGarnet g = g2_game();
  const JointStrategy nash = g2_nash(g);
  const MeasureSet measures = MeasureSet::uniform(2, 2);

  SUBCASE("zero at the Nash fixed point") {
    const ValueLoss loss = loss_value_space(g, joint_values(g, nash), nash, measures);
    CHECK(loss.total <= 1e-12);
  }

  SUBCASE("zero loss implies zero error vs best response") {
    const auto errors = error_vs_best_response(g, nash);
    for (const auto& e : errors) CHECK(*e <= 1e-6);
  }

  SUBCASE("constant perturbation shifts the joint residual by (gamma-1)c") {
    Rng rng(8);
    const TurnBasedGarnet mdp = random_game(1, 6, 2, 0.9, rng);
    const JointStrategy js = random_strategy(mdp, rng);
    auto v = joint_values(mdp, js);
    v[0].array() += 1.0;
    const ValueLoss loss = loss_value_space(mdp, v, js, MeasureSet::uniform(6, 1));
    CHECK(loss.per_player[0].joint == doctest::Approx(0.01).epsilon(1e-9));
  }
}

TEST_CASE("concentrability coefficient") {
  SUBCASE("identity kernel gives exactly one") {
    Rng rng(9);
    TurnBasedGarnet g = random_game(1, 5, 2, 0.9, rng);
    for (int s = 0; s < 5; ++s) {
      for (int a = 0; a < 2; ++a) g.next_state[static_cast<std::size_t>(s) * 2 + a] = s;
    }
    const Concentrability c = concentrability(MeasureSet::uniform(5, 1), g, random_strategy(g, rng));
    CHECK(c.finite);
    CHECK(c.value == doctest::Approx(1.0).epsilon(1e-10));
  }

  SUBCASE("uniform measures give at least one") {
    Rng rng(10);
    for (int it = 0; it < 10; ++it) {
      const TurnBasedGarnet g = random_game(2, 6, 3, 0.9, rng);
      const Concentrability c = concentrability(MeasureSet::uniform(6, 2), g, random_strategy(g, rng));
      CHECK(c.finite);
      CHECK(c.value >= 1.0 - 1e-12);
    }
  }

  SUBCASE("fixture Nash kernel is the identity") {
    const TurnBasedGarnet g = g2_game();
    const Concentrability c = concentrability(MeasureSet::uniform(2, 2), g, g2_nash(g));
    CHECK(c.value == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("unreachable nu mass is reported infinite") {
    const TurnBasedGarnet g = g2_game();
    MeasureSet m = MeasureSet::uniform(2, 2);
    m.mu << 0.0, 1.0;  // chain sits at state 1 under the Nash strategy
    m.nu << 0.0, 1.0;
    const Concentrability finite_case = concentrability(m, g, g2_nash(g));
    CHECK(finite_case.finite);
    m.mu << 1.0, 0.0;  // now the occupancy lives where nu has no mass
    m.nu << 0.0, 1.0;
    CHECK_THROWS_AS(m.validate(2, 2), std::invalid_argument);
    const Concentrability infinite_case = concentrability(m, g, g2_nash(g));
    CHECK_FALSE(infinite_case.finite);
  }
}

TEST_CASE("residual bound holds on random instances") {
  Rng rng(12);
  for (int it = 0; it < 40; ++it) {
    const TurnBasedGarnet g = random_game(2, 5, 2, rng.uniform(0.3, 0.95), rng);
    const JointStrategy js = random_strategy(g, rng);
    std::vector<Eigen::VectorXd> v;
    for (int i = 0; i < 2; ++i) {
      Eigen::VectorXd vi(5);
      for (int s = 0; s < 5; ++s) vi[s] = rng.uniform(-5.0, 5.0);
      v.push_back(vi);
    }
    const Lemma1Report report = check_lemma1(g, v, js, MeasureSet::uniform(5, 2));
    CHECK(report.holds);
    for (const auto& entry : report.players) CHECK(entry.lhs <= entry.rhs + 1e-9);
  }

  // Nash fixed point: both sides vanish
  const TurnBasedGarnet g = g2_game();
  const JointStrategy nash = g2_nash(g);
  const Lemma1Report at_nash = check_lemma1(g, joint_values(g, nash), nash, MeasureSet::uniform(2, 2));
  CHECK(at_nash.holds);
  for (const auto& entry : at_nash.players) {
    CHECK(entry.lhs <= 1e-9);
    CHECK(entry.rhs <= 1e-6);
  }
}

TEST_CASE("definition equivalence") {
  const TurnBasedGarnet g = g2_game();

  const EquivalenceReport at_nash = check_definition_equivalence(g, g2_nash(g));
  CHECK(at_nash.value_side);
  CHECK(at_nash.bellman_side);

  const EquivalenceReport off_nash = check_definition_equivalence(g, deterministic_strategy(g, {1, 1}));
  CHECK_FALSE(off_nash.value_side);
  CHECK_FALSE(off_nash.bellman_side);

  // single-player optimal strategy is a one-player equilibrium
  Rng rng(13);
  const TurnBasedGarnet mdp = random_game(1, 5, 2, 0.8, rng);
  const JointStrategy any = random_strategy(mdp, rng);
  const BestResponse br = best_response(mdp, any, 0);
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(5, 2);
  for (int s = 0; s < 5; ++s) rows(s, br.action[static_cast<std::size_t>(s)]) = 1.0;
  const JointStrategy optimal = with_player_rows(mdp, any, 0, rows);
  const EquivalenceReport single = check_definition_equivalence(mdp, optimal);
  CHECK(single.value_side);
  CHECK(single.bellman_side);
}

TEST_CASE("epsilon-minimal strategies keep both characterizations consistent") {
  Rng rng(14);
  for (int it = 0; it < 5; ++it) {
    const TurnBasedGarnet g = random_game(2, 4, 2, 0.8, rng);
    const MinEpsilonStrategy best = brute_force_min_epsilon(g);
    CHECK(best.epsilon >= -1e-12);
    CHECK_NOTHROW(check_definition_equivalence(g, deterministic_strategy(g, best.action)));
  }
}

TEST_CASE("measure validation") {
  MeasureSet m = MeasureSet::uniform(4, 2);
  CHECK_NOTHROW(m.validate(4, 2));
  CHECK(m.p_prime() == doctest::Approx(2.0));
  m.p = 1.0;
  CHECK_THROWS_AS(m.validate(4, 2), std::invalid_argument);
  m = MeasureSet::uniform(4, 2);
  m.nu[0] = 0.0;
  CHECK_THROWS_AS(m.validate(4, 2), std::invalid_argument);
}
