#include "nashmg/residual.hpp"

#include <cmath>
#include <stdexcept>

#include "nashmg/exact.hpp"

namespace nashmg {

QTable q_of_joint_strategy(const TurnBasedGarnet& game, const JointStrategy& js) {
  QTable table;
  table.q.resize(static_cast<std::size_t>(game.n_players()));
  for (int i = 0; i < game.n_players(); ++i) {
    const Eigen::VectorXd v = joint_value(game, js, i);
    Eigen::MatrixXd& q = table.q[static_cast<std::size_t>(i)];
    q.resize(game.n_states(), game.n_actions());
    for (int s = 0; s < game.n_states(); ++s) {
      for (int a = 0; a < game.n_actions(); ++a) {
        q(s, a) = game.r(i, s, a) + game.gamma() * v[game.next(s, a)];
      }
    }
  }
  return table;
}

double expected_q_turnbased(const Eigen::MatrixXd& q_i, const JointStrategy& js, int s_next) {
  return q_i.row(s_next).dot(js.prob.row(s_next));
}

std::size_t JointQ::flat_size() const {
  std::size_t n = 1;
  for (int c : n_actions) n *= static_cast<std::size_t>(c);
  return n;
}

std::size_t JointQ::flatten(const std::vector<int>& joint) const {
  if (joint.size() != n_actions.size()) throw std::invalid_argument("JointQ: joint action arity mismatch");
  std::size_t idx = 0;
  for (std::size_t j = 0; j < joint.size(); ++j) {
    if (joint[j] < 0 || joint[j] >= n_actions[j]) throw std::invalid_argument("JointQ: action out of range");
    idx = idx * static_cast<std::size_t>(n_actions[j]) + static_cast<std::size_t>(joint[j]);
  }
  return idx;
}

namespace {

void check_profile(const JointQ& q, const std::vector<Eigen::VectorXd>& profile) {
  if (profile.size() != q.n_actions.size()) throw std::invalid_argument("JointQ: profile arity mismatch");
  for (std::size_t j = 0; j < profile.size(); ++j) {
    if (static_cast<int>(profile[j].size()) != q.n_actions[j]) {
      throw std::invalid_argument("JointQ: profile row length mismatch");
    }
  }
  if (q.value.size() != q.flat_size()) throw std::invalid_argument("JointQ: value tensor size mismatch");
}

}  // namespace

double expected_q_joint(const JointQ& q, const std::vector<Eigen::VectorXd>& profile) {
  check_profile(q, profile);
  const int np = q.n_players();
  std::vector<int> joint(static_cast<std::size_t>(np), 0);
  double acc = 0.0;
  while (true) {
    double w = 1.0;
    for (int j = 0; j < np; ++j) w *= profile[static_cast<std::size_t>(j)][joint[static_cast<std::size_t>(j)]];
    acc += w * q.at(joint);

    int j = np - 1;
    for (; j >= 0; --j) {
      if (++joint[static_cast<std::size_t>(j)] < q.n_actions[static_cast<std::size_t>(j)]) break;
      joint[static_cast<std::size_t>(j)] = 0;
    }
    if (j < 0) break;
  }
  return acc;
}

Eigen::VectorXd expected_q_joint_excluding(const JointQ& q, const std::vector<Eigen::VectorXd>& profile,
                                           int player) {
  check_profile(q, profile);
  if (player < 0 || player >= q.n_players()) throw std::invalid_argument("JointQ: player out of range");
  const int np = q.n_players();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(q.n_actions[static_cast<std::size_t>(player)]);
  std::vector<int> joint(static_cast<std::size_t>(np), 0);
  while (true) {
    double w = 1.0;
    for (int j = 0; j < np; ++j) {
      if (j != player) w *= profile[static_cast<std::size_t>(j)][joint[static_cast<std::size_t>(j)]];
    }
    out[joint[static_cast<std::size_t>(player)]] += w * q.at(joint);

    int j = np - 1;
    for (; j >= 0; --j) {
      if (++joint[static_cast<std::size_t>(j)] < q.n_actions[static_cast<std::size_t>(j)]) break;
      joint[static_cast<std::size_t>(j)] = 0;
    }
    if (j < 0) break;
  }
  return out;
}

double backup_star(const TurnBasedGarnet& game, int s_next, const Eigen::MatrixXd& q_i, const JointStrategy& js,
                   int player) {
  if (game.controller[static_cast<std::size_t>(s_next)] == player) {
    return q_i.row(s_next).maxCoeff();
  }
  return expected_q_turnbased(q_i, js, s_next);
}

double model_based_backup(const TurnBasedGarnet& game, int s, int a, const Eigen::MatrixXd& q_i,
                          const JointStrategy& js, int player, BackupMode mode) {
  // Deterministic kernel: the successor sum has a single term.
  const int s_next = game.next(s, a);
  const double continuation = mode == BackupMode::kStar ? backup_star(game, s_next, q_i, js, player)
                                                        : expected_q_turnbased(q_i, js, s_next);
  return game.r(player, s, a) + game.gamma() * continuation;
}

EmpiricalLoss empirical_loss(const std::vector<BatchSample>& batch, const QTable& q, const JointStrategy& js,
                             double gamma, const Eigen::VectorXd& rho, double p) {
  if (batch.empty()) throw std::invalid_argument("empirical_loss: empty batch");
  const int np = q.n_players();
  if (static_cast<int>(rho.size()) != np) throw std::invalid_argument("empirical_loss: rho length mismatch");

  EmpiricalLoss loss;
  loss.terms.resize(batch.size() * static_cast<std::size_t>(np));
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const BatchSample& sample = batch[j];
    for (int i = 0; i < np; ++i) {
      const Eigen::MatrixXd& qi = q.q[static_cast<std::size_t>(i)];
      const double q_sa = qi(sample.s, sample.a);
      const double expectation = expected_q_turnbased(qi, js, sample.s_next);
      const double star = sample.controller_s_next == i ? qi.row(sample.s_next).maxCoeff() : expectation;
      const double r = sample.rewards[static_cast<std::size_t>(i)];
      ResidualTerms& terms = loss.terms[j * static_cast<std::size_t>(np) + static_cast<std::size_t>(i)];
      terms.d_star = std::pow(std::abs(r + gamma * star - q_sa), p);
      terms.d_joint = std::pow(std::abs(r + gamma * expectation - q_sa), p);
      loss.sum += rho[i] * (terms.d_star + terms.d_joint);
    }
  }
  loss.mean = loss.sum / static_cast<double>(batch.size());
  return loss;
}

}  // namespace nashmg
