#pragma once

#include <vector>

#include <Eigen/Dense>

#include "nashmg/game.hpp"
#include "nashmg/rng.hpp"

namespace nashmg {

// Strategy of a turn-based game: row s is the distribution over the
// controlling player's actions. Rows are on the probability simplex.
struct JointStrategy {
  Eigen::MatrixXd prob;  // n_states x n_actions

  int n_states() const { return static_cast<int>(prob.rows()); }
  int n_actions() const { return static_cast<int>(prob.cols()); }

  // Throws std::invalid_argument if a row is negative or off the simplex.
  void validate() const;
};

JointStrategy uniform_strategy(const TurnBasedGarnet& game);

// One action per state, probability 1.
JointStrategy deterministic_strategy(const TurnBasedGarnet& game, const std::vector<int>& action);

// Rows drawn from Dirichlet(1) (uniform on the simplex).
JointStrategy random_strategy(const TurnBasedGarnet& game, Rng& rng);

// Assemble a joint strategy from per-player tables: row s comes from the
// table of controller(s).
JointStrategy assemble(const TurnBasedGarnet& game, const std::vector<Eigen::MatrixXd>& per_player);

// Copy of `base` with the rows controlled by `player` replaced from pi_rows
// (an n_states x n_actions table; only controlled rows are read).
JointStrategy with_player_rows(const TurnBasedGarnet& game, const JointStrategy& base, int player,
                               const Eigen::MatrixXd& pi_rows);

void save_strategy(const JointStrategy& js, const std::string& path);
JointStrategy load_strategy(const std::string& path);

}  // namespace nashmg
