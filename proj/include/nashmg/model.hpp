#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nashmg/game.hpp"
#include "nashmg/residual.hpp"
#include "nashmg/rng.hpp"
#include "nashmg/strategy.hpp"

namespace nashmg {

enum class ModelKind { kMlp, kTabular };

ModelKind model_kind_from_string(const std::string& name);
std::string to_string(ModelKind kind);

// Parameter blocks; vectors are stored as single-column matrices.
// MLP nets: {w1 (hidden x in), b1, w2 (actions x hidden), b2}.
// Tabular nets: {table (n_states x n_actions)}.
using ParamBlocks = std::vector<Eigen::MatrixXd>;

// One Q approximator and one strategy approximator per player.
struct PlayerNets {
  ParamBlocks q;
  ParamBlocks pi;
};

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

struct Model {
  ModelKind kind = ModelKind::kMlp;
  Encoding encoding = Encoding::kOneHot;
  int n_players = 0;
  int n_states = 0;
  int n_actions = 0;
  int hidden = 0;
  Eigen::MatrixXd enc;  // input_dim x n_states; only for compact MLPs
  std::vector<PlayerNets> players;

  // Affine layer into a rectifier into an affine layer; weights uniform in
  // [-1/sqrt(fan_in), +1/sqrt(fan_in)].
  static Model mlp(int n_players, int n_states, int n_actions, int hidden, Encoding encoding, Rng& rng);
  // One parameter per (player, state, action) for both Q and the strategy
  // logits; initialized to zero (uniform strategy).
  static Model tabular(int n_players, int n_states, int n_actions);

  int input_dim() const;
  bool one_hot_input() const { return kind == ModelKind::kMlp && encoding == Encoding::kOneHot; }

  // Single-state API; throws on non-finite weights.
  Eigen::VectorXd q_values(int player, int s) const;
  Eigen::VectorXd pi_logits(int player, int s) const;
  Eigen::VectorXd strategy_row(int player, int s) const;

  Eigen::MatrixXd strategy_table(int player) const;  // n_states x n_actions
  QTable q_table() const;
  JointStrategy extract_strategy(const TurnBasedGarnet& game) const;

  void check_finite() const;

  std::string to_json() const;
  static Model from_json(const std::string& text);
  void save(const std::string& path) const;
  static Model load(const std::string& path);
};

// Same shapes as the model parameters; reused for gradients and optimizer
// moments.
struct ModelGrads {
  std::vector<PlayerNets> players;

  static ModelGrads zeros_like(const Model& model);
  void set_zero();
  double squared_norm() const;
};

namespace net {

// Forward activations for a list of states (one column each). Buffers are
// grow-only so a cache can be reused across minibatches; only the first
// `m` columns are meaningful.
struct Cache {
  std::vector<int> states;
  int m = 0;
  Eigen::MatrixXd z1, h1, out;
  Eigen::MatrixXd dz;  // backward scratch
};

void forward(const Model& model, const ParamBlocks& blocks, const std::vector<int>& states, Cache& cache);
Cache forward(const Model& model, const ParamBlocks& blocks, const std::vector<int>& states);

// Accumulates parameter gradients for dLoss/dOut into `grads`.
void backward(const Model& model, const ParamBlocks& blocks, Cache& cache,
              const Eigen::Ref<const Eigen::MatrixXd>& d_out, ParamBlocks& grads);

}  // namespace net

}  // namespace nashmg
