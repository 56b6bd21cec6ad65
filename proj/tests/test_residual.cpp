#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "support.hpp"

using namespace nashmg;
using namespace testsupport;

TEST_CASE("turn-based expectation is a dot product") {
  TurnBasedGarnet g = g2_game();
  JointStrategy js = uniform_strategy(g);
  Eigen::MatrixXd q(2, 2);
  q << 3.0, 1.0, 4.0, 0.0;

  CHECK(expected_q_turnbased(q, js, 0) == doctest::Approx(2.0));

  js.prob.row(0) << 1.0, 0.0;
  CHECK(expected_q_turnbased(q, js, 0) == doctest::Approx(3.0));

  js.prob.row(1) << 0.25, 0.75;
  CHECK(expected_q_turnbased(q, js, 1) == doctest::Approx(1.0));
}

TEST_CASE("joint-action expectation") {
  SUBCASE("two players, identity payoff, uniform play") {
    JointQ q;
    q.n_actions = {2, 2};
    q.value = {1.0, 0.0, 0.0, 1.0};
    const Eigen::VectorXd half = Eigen::VectorXd::Constant(2, 0.5);
    CHECK(expected_q_joint(q, {half, half}) == doctest::Approx(0.5));

    // excluding player 0 marginalizes player 1 only
    const Eigen::VectorXd by_own = expected_q_joint_excluding(q, {half, half}, 0);
    CHECK(by_own[0] == doctest::Approx(0.5));
    CHECK(by_own[1] == doctest::Approx(0.5));
  }

  SUBCASE("deterministic profiles select a single entry") {
    JointQ q;
    q.n_actions = {2, 3};
    q.value.resize(6);
    for (std::size_t k = 0; k < 6; ++k) q.value[k] = static_cast<double>(k);
    Eigen::VectorXd p0(2), p1(3);
    p0 << 0.0, 1.0;
    p1 << 0.0, 0.0, 1.0;
    CHECK(expected_q_joint(q, {p0, p1}) == doctest::Approx(q.at({1, 2})));
  }

  SUBCASE("single player reduces to the turn-based dot product") {
    Rng rng(3);
    TurnBasedGarnet g = random_game(1, 4, 3, 0.9, rng);
    const JointStrategy js = random_strategy(g, rng);
    for (int s = 0; s < 4; ++s) {
      JointQ q;
      q.n_actions = {3};
      Eigen::MatrixXd table(4, 3);
      for (Eigen::Index k = 0; k < table.size(); ++k) table.data()[k] = rng.uniform(-2.0, 2.0);
      q.value = {table(s, 0), table(s, 1), table(s, 2)};
      const Eigen::VectorXd row = js.prob.row(s).transpose();
      CHECK(expected_q_joint(q, {row}) == doctest::Approx(expected_q_turnbased(table, js, s)).epsilon(1e-12));
    }
  }

  SUBCASE("dimension mismatches are rejected") {
    JointQ q;
    q.n_actions = {2, 2};
    q.value = {1.0, 0.0, 0.0};
    const Eigen::VectorXd half = Eigen::VectorXd::Constant(2, 0.5);
    CHECK_THROWS_AS(expected_q_joint(q, {half, half}), std::invalid_argument);
    q.value = {1.0, 0.0, 0.0, 1.0};
    CHECK_THROWS_AS(expected_q_joint(q, {half}), std::invalid_argument);
  }
}

TEST_CASE("starred backup") {
  const TurnBasedGarnet g = g2_game();
  JointStrategy js = uniform_strategy(g);
  Eigen::MatrixXd q(2, 2);
  q << 3.0, 1.0, 3.0, 1.0;

  // controller of state 0 is player 0: the max
  CHECK(backup_star(g, 0, q, js, 0) == doctest::Approx(3.0));
  // for the other player it is the expectation
  CHECK(backup_star(g, 0, q, js, 1) == doctest::Approx(2.0));

  SUBCASE("max dominates the expectation at own states") {
    Rng rng(4);
    for (int it = 0; it < 50; ++it) {
      const TurnBasedGarnet game = random_game(2, 5, 3, 0.9, rng);
      const JointStrategy pi = random_strategy(game, rng);
      Eigen::MatrixXd table(5, 3);
      for (Eigen::Index k = 0; k < table.size(); ++k) table.data()[k] = rng.uniform(-4.0, 4.0);
      for (int s = 0; s < 5; ++s) {
        const int owner = game.controller[static_cast<std::size_t>(s)];
        CHECK(backup_star(game, s, table, pi, owner) >= expected_q_turnbased(table, pi, s) - 1e-12);
      }
    }
  }

  SUBCASE("single-player games always take the max") {
    Rng rng(5);
    const TurnBasedGarnet mdp = random_game(1, 4, 3, 0.9, rng);
    const JointStrategy pi = random_strategy(mdp, rng);
    Eigen::MatrixXd table(4, 3);
    for (Eigen::Index k = 0; k < table.size(); ++k) table.data()[k] = rng.uniform(-4.0, 4.0);
    for (int s = 0; s < 4; ++s) {
      CHECK(backup_star(mdp, s, table, pi, 0) == doctest::Approx(table.row(s).maxCoeff()));
    }
  }
}

TEST_CASE("empirical loss") {
  const TurnBasedGarnet g = g2_game();
  const JointStrategy nash = g2_nash(g);
  const Eigen::VectorXd rho = Eigen::VectorXd::Constant(2, 0.5);

  SUBCASE("zero at the exact Nash Q") {
    const QTable q = g2_nash_q();
    // oracle route: Q^i_pi(s,a) = r + gamma v(next) from the linear solve
    const QTable derived = q_of_joint_strategy(g, nash);
    for (int i = 0; i < 2; ++i) CHECK((derived.q[i] - q.q[i]).lpNorm<Eigen::Infinity>() <= 1e-12);

    const Dataset data = sample_batch(g, 64, 9);
    const EmpiricalLoss loss = empirical_loss(data.samples, q, nash, g.gamma(), rho, 2.0);
    CHECK(loss.sum <= 1e-12);
    for (const ResidualTerms& t : loss.terms) {
      CHECK(t.d_star <= 1e-14);
      CHECK(t.d_joint <= 1e-14);
    }
  }

  SUBCASE("zero Q gives twice the squared rewards") {
    QTable zero;
    zero.q = {Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2)};
    const Dataset data = sample_batch(g, 32, 10);
    const EmpiricalLoss loss = empirical_loss(data.samples, zero, uniform_strategy(g), g.gamma(), rho, 2.0);
    double expected = 0.0;
    for (const BatchSample& sample : data.samples) {
      for (int i = 0; i < 2; ++i) expected += 0.5 * 2.0 * sample.rewards[static_cast<std::size_t>(i)] *
                                              sample.rewards[static_cast<std::size_t>(i)];
    }
    CHECK(loss.sum == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("hand-computed single sample") {
    // r=1, gamma=0.9, both backups 2 (next-state row is [2,2]), Q(s,a)=2.8:
    // 1 + 1.8 - 2.8 = 0 for both residuals
    TurnBasedGarnet game = g2_game();
    game.spec.gamma = 0.9;
    QTable q;
    Eigen::MatrixXd q0(2, 2), q1(2, 2);
    q0 << 2.8, 0.0, 2.0, 2.0;
    q1 << 0.0, 0.0, 0.0, 0.0;
    q.q = {q0, q1};
    BatchSample sample;
    sample.s = 0;
    sample.a = 0;
    sample.rewards = {1.0, 0.0};
    sample.s_next = 1;
    sample.controller_s = 0;
    sample.controller_s_next = 1;
    JointStrategy js = uniform_strategy(game);
    const EmpiricalLoss loss = empirical_loss({sample}, q, js, 0.9, Eigen::VectorXd::Constant(2, 0.5), 2.0);
    CHECK(loss.terms[0].d_star == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(loss.terms[0].d_joint == doctest::Approx(0.0).epsilon(1e-14));
    // player 0 controls the next state in this variant: the max path
    sample.controller_s_next = 0;
    const EmpiricalLoss with_max = empirical_loss({sample}, q, js, 0.9, Eigen::VectorXd::Constant(2, 0.5), 2.0);
    CHECK(with_max.terms[0].d_star == doctest::Approx(0.0).epsilon(1e-14));
  }

  SUBCASE("invariant under sample permutation") {
    Rng rng(11);
    const TurnBasedGarnet game = random_game(2, 6, 3, 0.9, rng);
    const JointStrategy js = random_strategy(game, rng);
    QTable q;
    for (int i = 0; i < 2; ++i) {
      Eigen::MatrixXd qi(6, 3);
      for (Eigen::Index k = 0; k < qi.size(); ++k) qi.data()[k] = rng.uniform(-3.0, 3.0);
      q.q.push_back(qi);
    }
    Dataset data = sample_batch(game, 40, 12);
    const double before = empirical_loss(data.samples, q, js, game.gamma(), rho, 2.0).sum;
    std::reverse(data.samples.begin(), data.samples.end());
    const double after = empirical_loss(data.samples, q, js, game.gamma(), rho, 2.0).sum;
    CHECK(after == doctest::Approx(before).epsilon(1e-12));
  }

  SUBCASE("empty batches are rejected") {
    CHECK_THROWS_AS(empirical_loss({}, g2_nash_q(), nash, g.gamma(), rho, 2.0), std::invalid_argument);
  }
}

TEST_CASE("sample estimator equals the model-based operator on deterministic games") {
  Rng rng(13);
  double max_diff = 0.0;
  for (int it = 0; it < 500; ++it) {
    const TurnBasedGarnet g = random_game(1 + rng.uniform_int(3), 2 + rng.uniform_int(4), 1 + rng.uniform_int(3),
                                          rng.uniform(0.1, 0.95), rng);
    const JointStrategy js = random_strategy(g, rng);
    Eigen::MatrixXd q(g.n_states(), g.n_actions());
    for (Eigen::Index k = 0; k < q.size(); ++k) q.data()[k] = rng.uniform(-5.0, 5.0);
    const int s = rng.uniform_int(g.n_states());
    const int a = rng.uniform_int(g.n_actions());
    const int i = rng.uniform_int(g.n_players());
    const int s_next = g.next(s, a);
    const double emp_star = g.r(i, s, a) + g.gamma() * backup_star(g, s_next, q, js, i);
    const double emp_joint = g.r(i, s, a) + g.gamma() * expected_q_turnbased(q, js, s_next);
    max_diff = std::max(max_diff, std::abs(emp_star - model_based_backup(g, s, a, q, js, i, BackupMode::kStar)));
    max_diff = std::max(max_diff, std::abs(emp_joint - model_based_backup(g, s, a, q, js, i, BackupMode::kJoint)));
  }
  CHECK(max_diff <= 1e-12);
}

TEST_CASE("model-based backup fixed point and gamma = 0") {
  Rng rng(14);
  const TurnBasedGarnet g = random_game(2, 5, 2, 0.9, rng);
  const JointStrategy js = random_strategy(g, rng);
  const QTable q = q_of_joint_strategy(g, js);
  for (int i = 0; i < 2; ++i) {
    for (int s = 0; s < 5; ++s) {
      for (int a = 0; a < 2; ++a) {
        CHECK(model_based_backup(g, s, a, q.q[i], js, i, BackupMode::kJoint) ==
              doctest::Approx(q.q[i](s, a)).epsilon(1e-10));
      }
    }
  }

  TurnBasedGarnet g0 = g;
  g0.spec.gamma = 0.0;
  Eigen::MatrixXd any(5, 2);
  for (Eigen::Index k = 0; k < any.size(); ++k) any.data()[k] = rng.uniform(-9.0, 9.0);
  for (int s = 0; s < 5; ++s) {
    for (int a = 0; a < 2; ++a) {
      CHECK(model_based_backup(g0, s, a, any, js, 0, BackupMode::kStar) == doctest::Approx(g0.r(0, s, a)));
    }
  }
}
