#include "nashmg/learner.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "nashmg/exact.hpp"

namespace nashmg {

void TrainConfig::validate() const {
  if (!(lr_q > 0.0) || !(lr_pi > 0.0)) throw std::invalid_argument("TrainConfig: learning rates must be positive");
  if (!(lr_q_decay > 0.0 && lr_q_decay <= 1.0) || !(lr_pi_decay > 0.0 && lr_pi_decay <= 1.0)) {
    throw std::invalid_argument("TrainConfig: lr decay factors must lie in (0,1]");
  }
  if (minibatch < 1) throw std::invalid_argument("TrainConfig: minibatch must be >= 1");
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  if (!(p > 1.0)) throw std::invalid_argument("TrainConfig: p must exceed 1");
  if (eval_every < 1) throw std::invalid_argument("TrainConfig: eval_every must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("TrainConfig: betas must lie in [0,1)");
  }
  if (hidden < 1) throw std::invalid_argument("TrainConfig: hidden must be >= 1");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
}

Eigen::VectorXd TrainConfig::rho_vector(int n_players) const {
  if (rho.empty()) return Eigen::VectorXd::Constant(n_players, 1.0 / n_players);
  if (static_cast<int>(rho.size()) != n_players) throw std::invalid_argument("TrainConfig: rho length mismatch");
  Eigen::VectorXd r(n_players);
  double sum = 0.0;
  for (int i = 0; i < n_players; ++i) {
    if (!(rho[static_cast<std::size_t>(i)] >= 0.0)) throw std::invalid_argument("TrainConfig: rho must be nonnegative");
    r[i] = rho[static_cast<std::size_t>(i)];
    sum += r[i];
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("TrainConfig: rho must sum to 1");
  return r;
}

namespace {

double pow_p(double d, double p) { return p == 2.0 ? d * d : std::pow(std::abs(d), p); }

double dpow_p(double d, double p) {
  if (p == 2.0) return 2.0 * d;
  return p * std::pow(std::abs(d), p - 1.0) * (d < 0.0 ? -1.0 : 1.0);
}

// Indexes the unique states touched by a batch so each net runs one batched
// forward per step.
struct StateIndex {
  std::vector<int> col_of;  // n_states, -1 = absent
  std::vector<int> states;

  void reset(int n_states) {
    if (static_cast<int>(col_of.size()) != n_states) {
      col_of.assign(static_cast<std::size_t>(n_states), -1);
    } else {
      for (int s : states) col_of[static_cast<std::size_t>(s)] = -1;
    }
    states.clear();
  }

  int add(int s) {
    int& c = col_of[static_cast<std::size_t>(s)];
    if (c < 0) {
      c = static_cast<int>(states.size());
      states.push_back(s);
    }
    return c;
  }
  int col(int s) const { return col_of[static_cast<std::size_t>(s)]; }
};

void grow(Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() != rows || m.cols() < cols) m.resize(rows, std::max(cols, m.cols()));
}

// Per-thread scratch reused across minibatches.
struct Workspace {
  StateIndex q_index;
  std::vector<StateIndex> pi_index;
  std::vector<net::Cache> q_cache, pi_cache;
  std::vector<Eigen::MatrixXd> probs, d_qout, d_probs, d_logits;
};

Workspace& workspace() {
  static thread_local Workspace ws;
  return ws;
}

struct Engine {
  const Model& model;
  std::span<const BatchSample> batch;
  double gamma;
  const TrainConfig& cfg;

  double run(ModelGrads* grads) const {
    const int np = model.n_players;
    const int na = model.n_actions;
    const std::size_t k = batch.size();
    if (k == 0) throw std::invalid_argument("loss: empty batch");
    const Eigen::VectorXd rho = cfg.rho_vector(np);
    const double p = cfg.p;

    Workspace& ws = workspace();
    ws.q_index.reset(model.n_states);
    ws.pi_index.resize(static_cast<std::size_t>(np));
    for (auto& idx : ws.pi_index) idx.reset(model.n_states);
    for (const BatchSample& sample : batch) {
      ws.q_index.add(sample.s);
      ws.q_index.add(sample.s_next);
      ws.pi_index[static_cast<std::size_t>(sample.controller_s_next)].add(sample.s_next);
    }
    const int mq = static_cast<int>(ws.q_index.states.size());

    ws.q_cache.resize(static_cast<std::size_t>(np));
    ws.pi_cache.resize(static_cast<std::size_t>(np));
    ws.probs.resize(static_cast<std::size_t>(np));
    for (int i = 0; i < np; ++i) {
      net::forward(model, model.players[static_cast<std::size_t>(i)].q, ws.q_index.states,
                   ws.q_cache[static_cast<std::size_t>(i)]);
      const auto& states = ws.pi_index[static_cast<std::size_t>(i)].states;
      if (!states.empty()) {
        net::Cache& cache = ws.pi_cache[static_cast<std::size_t>(i)];
        net::forward(model, model.players[static_cast<std::size_t>(i)].pi, states, cache);
        Eigen::MatrixXd& pr = ws.probs[static_cast<std::size_t>(i)];
        grow(pr, na, cache.m);
        for (int c = 0; c < cache.m; ++c) {
          const auto logits = cache.out.col(c);
          pr.col(c) = (logits.array() - logits.maxCoeff()).exp();
          pr.col(c) /= pr.col(c).sum();
        }
      }
    }

    if (grads) {
      ws.d_qout.resize(static_cast<std::size_t>(np));
      ws.d_probs.resize(static_cast<std::size_t>(np));
      for (int i = 0; i < np; ++i) {
        grow(ws.d_qout[static_cast<std::size_t>(i)], na, mq);
        ws.d_qout[static_cast<std::size_t>(i)].leftCols(mq).setZero();
        const auto& states = ws.pi_index[static_cast<std::size_t>(i)].states;
        if (!states.empty()) {
          const auto m_pi = static_cast<Eigen::Index>(states.size());
          grow(ws.d_probs[static_cast<std::size_t>(i)], na, m_pi);
          ws.d_probs[static_cast<std::size_t>(i)].leftCols(m_pi).setZero();
        }
      }
    }

    double loss = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const BatchSample& sample = batch[j];
      const int sc = ws.q_index.col(sample.s);
      const int nc = ws.q_index.col(sample.s_next);
      const int ctrl = sample.controller_s_next;
      const int pc = ws.pi_index[static_cast<std::size_t>(ctrl)].col(sample.s_next);
      const auto pi_col = ws.probs[static_cast<std::size_t>(ctrl)].col(pc);

      double contribution = 0.0;
      for (int i = 0; i < np; ++i) {
        const double w = rho[i] / static_cast<double>(k);
        const auto& out = ws.q_cache[static_cast<std::size_t>(i)].out;
        const double q_sa = out(sample.a, sc);
        const auto q_next = out.col(nc);
        const double expectation = pi_col.dot(q_next);
        Eigen::Index argmax = 0;
        const double star = ctrl == i ? q_next.maxCoeff(&argmax) : expectation;
        const double r = sample.rewards[static_cast<std::size_t>(i)];
        const double d_star = r + gamma * star - q_sa;
        const double d_joint = r + gamma * expectation - q_sa;
        contribution += w * (pow_p(d_star, p) + pow_p(d_joint, p));

        if (grads) {
          const double gs = w * dpow_p(d_star, p);
          const double gj = w * dpow_p(d_joint, p);
          Eigen::MatrixXd& dq = ws.d_qout[static_cast<std::size_t>(i)];
          dq(sample.a, sc) -= gs + gj;
          if (ctrl == i) {
            dq.col(nc) += gamma * gj * pi_col;
            dq(argmax, nc) += gamma * gs;
            ws.d_probs[static_cast<std::size_t>(ctrl)].col(pc) += gamma * gj * q_next;
          } else {
            dq.col(nc) += gamma * (gj + gs) * pi_col;
            ws.d_probs[static_cast<std::size_t>(ctrl)].col(pc) += gamma * (gj + gs) * q_next;
          }
        }
      }
      if (!std::isfinite(contribution)) {
        throw std::runtime_error("loss: non-finite residual at batch sample " + std::to_string(j));
      }
      loss += contribution;
    }

    if (grads) {
      ws.d_logits.resize(static_cast<std::size_t>(np));
      for (int i = 0; i < np; ++i) {
        auto& player_grads = grads->players[static_cast<std::size_t>(i)];
        net::backward(model, model.players[static_cast<std::size_t>(i)].q, ws.q_cache[static_cast<std::size_t>(i)],
                      ws.d_qout[static_cast<std::size_t>(i)].leftCols(mq), player_grads.q);
        const auto& states = ws.pi_index[static_cast<std::size_t>(i)].states;
        if (!states.empty()) {
          // Softmax backprop per column before entering the net.
          const auto m_pi = static_cast<Eigen::Index>(states.size());
          Eigen::MatrixXd& dl = ws.d_logits[static_cast<std::size_t>(i)];
          grow(dl, na, m_pi);
          const Eigen::MatrixXd& pr = ws.probs[static_cast<std::size_t>(i)];
          const Eigen::MatrixXd& dp = ws.d_probs[static_cast<std::size_t>(i)];
          for (Eigen::Index c = 0; c < m_pi; ++c) {
            const double inner = dp.col(c).dot(pr.col(c));
            dl.col(c) = pr.col(c).cwiseProduct(dp.col(c) - Eigen::VectorXd::Constant(na, inner));
          }
          net::backward(model, model.players[static_cast<std::size_t>(i)].pi,
                        ws.pi_cache[static_cast<std::size_t>(i)], dl.leftCols(m_pi), player_grads.pi);
        }
        if (cfg.weight_decay > 0.0) {
          for (std::size_t b = 0; b < player_grads.q.size(); ++b) {
            player_grads.q[b] += cfg.weight_decay * model.players[static_cast<std::size_t>(i)].q[b];
          }
          for (std::size_t b = 0; b < player_grads.pi.size(); ++b) {
            player_grads.pi[b] += cfg.weight_decay * model.players[static_cast<std::size_t>(i)].pi[b];
          }
        }
      }
    }
    return loss;
  }
};

}  // namespace

LossGrads loss_and_gradients(const Model& model, std::span<const BatchSample> batch, double gamma,
                             const TrainConfig& cfg) {
  LossGrads result;
  result.grads = ModelGrads::zeros_like(model);
  result.loss = Engine{model, batch, gamma, cfg}.run(&result.grads);
  return result;
}

double loss_and_gradients_into(const Model& model, std::span<const BatchSample> batch, double gamma,
                               const TrainConfig& cfg, ModelGrads& grads) {
  return Engine{model, batch, gamma, cfg}.run(&grads);
}

double evaluate_loss(const Model& model, std::span<const BatchSample> batch, double gamma, const TrainConfig& cfg) {
  return Engine{model, batch, gamma, cfg}.run(nullptr);
}

AdamState AdamState::zeros_like(const Model& model) {
  AdamState state;
  state.m = ModelGrads::zeros_like(model);
  state.v = ModelGrads::zeros_like(model);
  return state;
}

namespace {

void adam_update_blocks(std::vector<Eigen::MatrixXd>& params, const std::vector<Eigen::MatrixXd>& grads,
                        std::vector<Eigen::MatrixXd>& m, std::vector<Eigen::MatrixXd>& v, double lr,
                        double bias1, double bias2, const TrainConfig& cfg) {
  for (std::size_t b = 0; b < params.size(); ++b) {
    m[b] = cfg.beta1 * m[b] + (1.0 - cfg.beta1) * grads[b];
    v[b].array() = cfg.beta2 * v[b].array() + (1.0 - cfg.beta2) * grads[b].array().square();
    params[b].array() -= lr * (m[b].array() / bias1) / ((v[b].array() / bias2).sqrt() + cfg.adam_eps);
  }
}

}  // namespace

void adam_step(Model& model, const ModelGrads& grads, AdamState& state, const TrainConfig& cfg, double lr_q,
               double lr_pi) {
  ++state.t;
  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < model.players.size(); ++i) {
    adam_update_blocks(model.players[i].q, grads.players[i].q, state.m.players[i].q, state.v.players[i].q, lr_q,
                       bias1, bias2, cfg);
    adam_update_blocks(model.players[i].pi, grads.players[i].pi, state.m.players[i].pi, state.v.players[i].pi,
                       lr_pi, bias1, bias2, cfg);
  }
}

void adam_step(Model& model, const ModelGrads& grads, AdamState& state, const TrainConfig& cfg) {
  adam_step(model, grads, state, cfg, cfg.lr_q, cfg.lr_pi);
}

namespace {

Checkpoint make_checkpoint(const Model& model, const TurnBasedGarnet& game, const Dataset& train_data,
                           const Dataset& test_data, const TrainConfig& cfg, int epoch, long step,
                           double wall_seconds) {
  Checkpoint cp;
  cp.epoch = epoch;
  cp.step = step;
  cp.wall_seconds = wall_seconds;
  cp.train_residual = evaluate_loss(model, train_data.samples, game.gamma(), cfg);
  cp.test_residual = evaluate_loss(model, test_data.samples, game.gamma(), cfg);
  const JointStrategy js = model.extract_strategy(game);
  const auto errors = error_vs_best_response(game, js);
  cp.error_vs_br.reserve(errors.size());
  for (const auto& e : errors) cp.error_vs_br.push_back(e ? *e : std::numeric_limits<double>::quiet_NaN());
  return cp;
}

}  // namespace

TrainResult train(const TurnBasedGarnet& game, const Dataset& train_data, const Dataset& test_data,
                  const TrainConfig& cfg) {
  cfg.validate();
  game.validate();
  require_matching_game(train_data, game);
  require_matching_game(test_data, game);
  if (train_data.samples.empty()) throw std::invalid_argument("train: empty training set");

  Rng rng(cfg.seed);
  TrainResult result{cfg.kind == ModelKind::kTabular
                         ? Model::tabular(game.n_players(), game.n_states(), game.n_actions())
                         : Model::mlp(game.n_players(), game.n_states(), game.n_actions(), cfg.hidden, cfg.encoding,
                                      rng),
                     {}};
  Model& model = result.model;
  model.check_finite();
  AdamState adam = AdamState::zeros_like(model);

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  long step = 0;
  result.report.checkpoints.push_back(make_checkpoint(model, game, train_data, test_data, cfg, 0, step, elapsed()));
  const double initial_residual = result.report.checkpoints.front().train_residual;
  const double residual_cap = cfg.divergence_factor * std::max(initial_residual, 1e-12);

  std::vector<std::size_t> order(train_data.samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<BatchSample> minibatch;
  minibatch.reserve(static_cast<std::size_t>(cfg.minibatch));

  double lr_q = cfg.lr_q;
  double lr_pi = cfg.lr_pi;
  ModelGrads grads = ModelGrads::zeros_like(model);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.minibatch)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.minibatch));
      if (minibatch.size() != end - begin) minibatch.resize(end - begin);
      for (std::size_t j = begin; j < end; ++j) minibatch[j - begin] = train_data.samples[order[j]];
      grads.set_zero();
      loss_and_gradients_into(model, minibatch, game.gamma(), cfg, grads);
      adam_step(model, grads, adam, cfg, lr_q, lr_pi);
      ++step;
    }
    lr_q *= cfg.lr_q_decay;
    lr_pi *= cfg.lr_pi_decay;
    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      Checkpoint cp = make_checkpoint(model, game, train_data, test_data, cfg, epoch, step, elapsed());
      const double res = cp.train_residual;
      result.report.checkpoints.push_back(std::move(cp));
      if (!std::isfinite(res) || res > residual_cap) {
        throw std::runtime_error("train: residual diverged at epoch " + std::to_string(epoch));
      }
    }
  }
  result.report.total_steps = step;
  return result;
}

bool fd_safe_point(const Model& model, std::span<const BatchSample> batch, double tie_tol, double kink_tol) {
  std::vector<int> states;
  {
    StateIndex idx;
    idx.reset(model.n_states);
    for (const BatchSample& sample : batch) {
      idx.add(sample.s);
      idx.add(sample.s_next);
    }
    states = idx.states;
  }
  for (int i = 0; i < model.n_players; ++i) {
    const auto& nets = model.players[static_cast<std::size_t>(i)];
    const net::Cache qc = net::forward(model, nets.q, states);
    const net::Cache pc = net::forward(model, nets.pi, states);
    if (model.kind == ModelKind::kMlp) {
      if (qc.z1.array().abs().minCoeff() < kink_tol) return false;
      if (pc.z1.array().abs().minCoeff() < kink_tol) return false;
    }
    for (Eigen::Index c = 0; c < qc.out.cols(); ++c) {
      // Top-two gap of each Q column the max could route through.
      Eigen::VectorXd col = qc.out.col(c);
      Eigen::Index top = 0;
      const double best = col.maxCoeff(&top);
      col[top] = -std::numeric_limits<double>::infinity();
      if (col.size() > 1 && best - col.maxCoeff() < tie_tol) return false;
    }
  }
  return true;
}

GradCheckResult gradient_check(Model& model, std::span<const BatchSample> batch, double gamma,
                               const TrainConfig& cfg, int n_weights, double h, Rng& rng) {
  TrainConfig check_cfg = cfg;
  check_cfg.weight_decay = 0.0;
  const LossGrads analytic = loss_and_gradients(model, batch, gamma, check_cfg);

  struct Coordinate {
    int player;
    int net;  // 0 = q, 1 = pi
    std::size_t block;
    Eigen::Index offset;
  };
  std::vector<Coordinate> coords;
  for (int i = 0; i < model.n_players; ++i) {
    const auto& nets = model.players[static_cast<std::size_t>(i)];
    for (int which = 0; which < 2; ++which) {
      const ParamBlocks& blocks = which == 0 ? nets.q : nets.pi;
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        for (Eigen::Index off = 0; off < blocks[b].size(); ++off) coords.push_back({i, which, b, off});
      }
    }
  }

  GradCheckResult result;
  for (int trial = 0; trial < n_weights; ++trial) {
    const Coordinate c = coords[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(coords.size())))];
    auto& nets = model.players[static_cast<std::size_t>(c.player)];
    ParamBlocks& blocks = c.net == 0 ? nets.q : nets.pi;
    double& w = blocks[c.block].data()[c.offset];
    const double saved = w;
    w = saved + h;
    const double up = evaluate_loss(model, batch, gamma, check_cfg);
    w = saved - h;
    const double down = evaluate_loss(model, batch, gamma, check_cfg);
    w = saved;
    const double fd = (up - down) / (2.0 * h);
    const ParamBlocks& grad_blocks =
        c.net == 0 ? analytic.grads.players[static_cast<std::size_t>(c.player)].q
                   : analytic.grads.players[static_cast<std::size_t>(c.player)].pi;
    const double ga = grad_blocks[c.block].data()[c.offset];
    const double rel = std::abs(ga - fd) / std::max(1e-6, std::abs(ga) + std::abs(fd));
    result.max_rel_err = std::max(result.max_rel_err, rel);
    ++result.checked;
  }
  return result;
}

}  // namespace nashmg
