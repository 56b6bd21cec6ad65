#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "nashmg/game.hpp"
#include "nashmg/strategy.hpp"

namespace nashmg {

// Sampling measures and norm exponents used by the residual-to-gap bounds.
struct MeasureSet {
  Eigen::VectorXd mu;   // over states
  Eigen::VectorXd nu;   // over states
  Eigen::VectorXd rho;  // over players
  double p = 2.0;

  double p_prime() const { return p / (p - 1.0); }
  void validate(int n_states, int n_players) const;
  static MeasureSet uniform(int n_states, int n_players, double p = 2.0);
};

// sum_s w(s) |g(s)|^p  and its 1/p-th root.
double weighted_norm_pow(const Eigen::VectorXd& g, const Eigen::VectorXd& w, double p);
double weighted_norm(const Eigen::VectorXd& g, const Eigen::VectorXd& w, double p);

// State-to-state kernel of the Markov chain induced by the joint strategy.
// Rows sum to 1.
Eigen::MatrixXd induced_kernel(const TurnBasedGarnet& game, const JointStrategy& js);

// Expected reward of `player` under the joint strategy, per state.
Eigen::VectorXd induced_reward(const TurnBasedGarnet& game, const JointStrategy& js, int player);

// Value of the joint strategy for `player`: direct solve of
// (I - gamma P) v = r. Hard error if the solve residual exceeds 1e-9.
Eigen::VectorXd joint_value(const TurnBasedGarnet& game, const JointStrategy& js, int player);

struct BestResponse {
  Eigen::VectorXd value;    // optimal value against the others' strategy
  std::vector<int> action;  // maximizing action at states controlled by the player
  JointStrategy joint;      // best response substituted into the joint strategy
  int iterations = 0;
};

// Exact policy iteration on the MDP induced by fixing everyone else.
// At states the player does not control, their mixed play is folded into a
// single chance transition. Ties break toward the lowest action index.
BestResponse best_response(const TurnBasedGarnet& game, const JointStrategy& js, int player);

// ||v_pi - v*||_2 / ||v*||_2 per player; nullopt when ||v*||_2 = 0.
std::vector<std::optional<double>> error_vs_best_response(const TurnBasedGarnet& game, const JointStrategy& js);

// One application of the joint-strategy Bellman operator for `player`.
Eigen::VectorXd apply_T_joint(const TurnBasedGarnet& game, const Eigen::VectorXd& v, const JointStrategy& js,
                              int player);

// One application of the best-response Bellman operator: max over the
// player's actions where they control the state, the strategy expectation
// elsewhere.
Eigen::VectorXd apply_T_star(const TurnBasedGarnet& game, const Eigen::VectorXd& v, const JointStrategy& js,
                             int player);

struct ValueLossTerms {
  double star = 0.0;   // ||T* v - v||^p_{nu,p}
  double joint = 0.0;  // ||T_pi v - v||^p_{nu,p}
};

struct ValueLoss {
  double total = 0.0;  // sum_i rho(i) (star_i + joint_i)
  std::vector<ValueLossTerms> per_player;
};

// Weighted sum of the two value-space Bellman residual norms. Zero exactly
// when every residual vanishes nu-almost-everywhere.
ValueLoss loss_value_space(const TurnBasedGarnet& game, const std::vector<Eigen::VectorXd>& v,
                           const JointStrategy& js, const MeasureSet& measures);

struct Concentrability {
  double value = 0.0;
  bool finite = true;
};

// sup over states of the Radon-Nikodym derivative of the discounted
// occupancy measure (1-gamma) mu^T (I - gamma P)^-1 with respect to nu.
Concentrability concentrability(const MeasureSet& measures, const TurnBasedGarnet& game, const JointStrategy& js);

struct Lemma1Player {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  bool infinite_coeff = false;
};

struct Lemma1Report {
  std::vector<Lemma1Player> players;
  bool holds = true;
};

// Per player: gap between best-response and joint value in mu-norm against
// the concentrability-weighted residual bound, evaluated at the supplied
// value family.
Lemma1Report check_lemma1(const TurnBasedGarnet& game, const std::vector<Eigen::VectorXd>& v,
                          const JointStrategy& js, const MeasureSet& measures);

struct EquivalenceReport {
  bool value_side = false;    // v_pi^i = v*^i for all players
  bool bellman_side = false;  // v := v_pi satisfies both fixed-point equations
  bool agree() const { return value_side == bellman_side; }
};

// Computes both characterizations of a Nash equilibrium independently and
// throws std::logic_error if they disagree.
EquivalenceReport check_definition_equivalence(const TurnBasedGarnet& game, const JointStrategy& js,
                                               double tol = 1e-8);

// Enumeration oracles; reject games where the policy count exceeds ~2e6.
Eigen::VectorXd brute_force_best_response_value(const TurnBasedGarnet& game, const JointStrategy& js, int player);

struct MinEpsilonStrategy {
  std::vector<int> action;  // one per state
  double epsilon = 0.0;     // max_i ||v*^i - v^i||_inf at the minimizer
};

// Deterministic joint strategy minimizing the largest best-response gap,
// found by exhaustive search with enumeration-based best responses.
MinEpsilonStrategy brute_force_min_epsilon(const TurnBasedGarnet& game);

}  // namespace nashmg
