#pragma once

#include <vector>

#include <Eigen/Dense>

#include "nashmg/batch.hpp"
#include "nashmg/game.hpp"
#include "nashmg/strategy.hpp"

namespace nashmg {

// Per-player state-action values over (state, controller action).
struct QTable {
  std::vector<Eigen::MatrixXd> q;  // q[i]: n_states x n_actions

  int n_players() const { return static_cast<int>(q.size()); }
};

// Exact Q of the joint strategy: Q^i(s,a) = r^i(s,a) + gamma v^i(next(s,a)).
QTable q_of_joint_strategy(const TurnBasedGarnet& game, const JointStrategy& js);

// E_{b ~ pi(.|s')}[Q^i(s', b)]: dot product of the next controller's row
// with the player's Q row.
double expected_q_turnbased(const Eigen::MatrixXd& q_i, const JointStrategy& js, int s_next);

// Q over joint actions of a simultaneous-move state; value is indexed
// row-major over players (player 0 slowest).
struct JointQ {
  std::vector<int> n_actions;  // per player
  std::vector<double> value;

  int n_players() const { return static_cast<int>(n_actions.size()); }
  std::size_t flat_size() const;
  std::size_t flatten(const std::vector<int>& joint) const;
  double at(const std::vector<int>& joint) const { return value[flatten(joint)]; }
};

// Full product expectation over every player's strategy row.
double expected_q_joint(const JointQ& q, const std::vector<Eigen::VectorXd>& profile);

// Marginalizes all players except `player`; entry b is
// E_{b^-i ~ pi^-i}[Q(s', b, b^-i)].
Eigen::VectorXd expected_q_joint_excluding(const JointQ& q, const std::vector<Eigen::VectorXd>& profile,
                                           int player);

// max_b Q^i(s',b) when the player controls s', the strategy expectation
// otherwise. The turn-based form of max over the player's own action of the
// opponent-averaged Q.
double backup_star(const TurnBasedGarnet& game, int s_next, const Eigen::MatrixXd& q_i, const JointStrategy& js,
                   int player);

enum class BackupMode { kStar, kJoint };

// Operator backup from the known model; on deterministic games this equals
// the sample estimator exactly.
double model_based_backup(const TurnBasedGarnet& game, int s, int a, const Eigen::MatrixXd& q_i,
                          const JointStrategy& js, int player, BackupMode mode);

// The two |residual|^p summands of one (sample, player) pair.
struct ResidualTerms {
  double d_star = 0.0;
  double d_joint = 0.0;
};

struct EmpiricalLoss {
  double sum = 0.0;   // over samples and players, rho-weighted
  double mean = 0.0;  // sum / #samples
  std::vector<ResidualTerms> terms;  // [sample * n_players + player]
};

// Empirical Bellman residual of a batch at (Q, pi); the deterministic
// dynamics estimator. Rejects empty batches.
EmpiricalLoss empirical_loss(const std::vector<BatchSample>& batch, const QTable& q, const JointStrategy& js,
                             double gamma, const Eigen::VectorXd& rho, double p);

}  // namespace nashmg
