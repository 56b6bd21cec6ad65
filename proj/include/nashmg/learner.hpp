#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nashmg/batch.hpp"
#include "nashmg/game.hpp"
#include "nashmg/model.hpp"

namespace nashmg {

struct TrainConfig {
  double lr_q = 1e-3;
  double lr_pi = 5e-5;
  double lr_q_decay = 1.0;   // per-epoch multiplicative factor
  double lr_pi_decay = 1.0;  // per-epoch multiplicative factor
  double weight_decay = 1e-6;
  int minibatch = 20;
  int epochs = 600;
  double p = 2.0;
  std::vector<double> rho;  // empty = uniform over players
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  int eval_every = 10;  // epochs between exact-oracle checkpoints
  ModelKind kind = ModelKind::kMlp;
  Encoding encoding = Encoding::kOneHot;
  int hidden = 80;
  double divergence_factor = 1e3;

  void validate() const;
  Eigen::VectorXd rho_vector(int n_players) const;
};

struct Checkpoint {
  int epoch = 0;
  long step = 0;
  double train_residual = 0.0;
  double test_residual = 0.0;
  std::vector<double> error_vs_br;  // NaN when the best-response norm is zero
  double wall_seconds = 0.0;
};

struct TrainReport {
  std::vector<Checkpoint> checkpoints;
  long total_steps = 0;
};

struct LossGrads {
  double loss = 0.0;
  ModelGrads grads;
};

// Mean-over-minibatch residual loss and its gradients through the whole
// graph: Q gather at (s,a), next-state Q rows, the next controller's
// softmax strategy, expectation and max backups, both residuals. The max
// routes its subgradient through the lowest argmax index. Weight decay adds
// cfg.weight_decay * w on top of the residual gradients; the returned loss
// is the residual alone. Throws on a non-finite loss, naming the sample.
LossGrads loss_and_gradients(const Model& model, std::span<const BatchSample> batch, double gamma,
                             const TrainConfig& cfg);

// Same, accumulating into a caller-owned zeroed buffer; the training loop
// reuses one buffer across steps.
double loss_and_gradients_into(const Model& model, std::span<const BatchSample> batch, double gamma,
                               const TrainConfig& cfg, ModelGrads& grads);

double evaluate_loss(const Model& model, std::span<const BatchSample> batch, double gamma, const TrainConfig& cfg);

struct AdamState {
  ModelGrads m;
  ModelGrads v;
  long t = 0;

  static AdamState zeros_like(const Model& model);
};

// One adaptive-moment update; q blocks use lr_q, pi blocks lr_pi.
void adam_step(Model& model, const ModelGrads& grads, AdamState& state, const TrainConfig& cfg);
void adam_step(Model& model, const ModelGrads& grads, AdamState& state, const TrainConfig& cfg, double lr_q,
               double lr_pi);

struct TrainResult {
  Model model;
  TrainReport report;
};

// Shuffled-minibatch training with checkpointed exact evaluation every
// cfg.eval_every epochs (plus epochs 0 and the last). Reproducible from
// (seed, config, datasets). Throws when the train residual exceeds
// divergence_factor times its initial value or turns non-finite.
TrainResult train(const TurnBasedGarnet& game, const Dataset& train_data, const Dataset& test_data,
                  const TrainConfig& cfg);

// True when no sample sits within tie_tol of an argmax tie of its
// controller's Q row and (for MLPs) no pre-activation sits within kink_tol
// of the rectifier kink, so central differences are valid at this point.
bool fd_safe_point(const Model& model, std::span<const BatchSample> batch, double tie_tol, double kink_tol);

struct GradCheckResult {
  int checked = 0;
  double max_rel_err = 0.0;
};

// Central finite differences (step h) against the analytic gradients on
// n_weights parameter coordinates drawn at random. Weight decay is disabled
// inside. Relative error is |ga - gf| / max(1e-6, |ga| + |gf|).
GradCheckResult gradient_check(Model& model, std::span<const BatchSample> batch, double gamma,
                               const TrainConfig& cfg, int n_weights, double h, Rng& rng);

}  // namespace nashmg
