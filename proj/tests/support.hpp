#pragma once

#include <vector>

#include "nashmg/batch.hpp"
#include "nashmg/exact.hpp"
#include "nashmg/game.hpp"
#include "nashmg/residual.hpp"
#include "nashmg/strategy.hpp"

namespace testsupport {

using namespace nashmg;

// Two-state, two-action, two-player fixture used across the suites:
// action k moves to state k, state s is controlled by player s, and player i
// is paid 1 exactly when action i is picked. gamma = 0.5.
//
// Hand-derived facts frozen below:
//   pi = (a0@0, a1@1) is a Nash equilibrium with v^0 = [2,0], v^1 = [0,2];
//   its induced kernel is the identity.
//   pi = (a1@0, a1@1) gives v^0 = [0,0] while player 0's best response is
//   [2,0], so player 0's error vs best response is 1.
inline TurnBasedGarnet g2_game() {
  TurnBasedGarnet g;
  g.spec.n_players = 2;
  g.spec.n_states = 2;
  g.spec.n_actions = 2;
  g.spec.gamma = 0.5;
  g.spec.sigma_next = 0.0;
  g.spec.sigma_noise = 0.0;
  g.spec.sparsity = 0.0;
  g.spec.seed = 0;
  g.controller = {0, 1};
  g.critical_state = {0, 1};
  g.next_state = {0, 1, 0, 1};  // next(s, a) = a
  g.reward.assign(8, 0.0);
  for (int i = 0; i < 2; ++i) {
    for (int s = 0; s < 2; ++s) {
      for (int a = 0; a < 2; ++a) g.r(i, s, a) = a == i ? 1.0 : 0.0;
    }
  }
  g.validate();
  return g;
}

inline JointStrategy g2_nash(const TurnBasedGarnet& g) { return deterministic_strategy(g, {0, 1}); }

// Exact Q of the G2 Nash: Q^0 rows [2,0], Q^1 rows [0,2].
inline QTable g2_nash_q() {
  QTable table;
  Eigen::MatrixXd q0(2, 2), q1(2, 2);
  q0 << 2.0, 0.0, 2.0, 0.0;
  q1 << 0.0, 2.0, 0.0, 2.0;
  table.q = {q0, q1};
  return table;
}

inline std::vector<Eigen::VectorXd> joint_values(const TurnBasedGarnet& game, const JointStrategy& js) {
  std::vector<Eigen::VectorXd> v;
  for (int i = 0; i < game.n_players(); ++i) v.push_back(joint_value(game, js, i));
  return v;
}

}  // namespace testsupport
