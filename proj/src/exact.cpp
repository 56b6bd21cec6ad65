#include "nashmg/exact.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace nashmg {

void MeasureSet::validate(int n_states, int n_players) const {
  auto check_dist = [](const Eigen::VectorXd& d, int n, const char* name) {
    if (static_cast<int>(d.size()) != n) throw std::invalid_argument(std::string(name) + ": wrong length");
    double sum = 0.0;
    for (int k = 0; k < d.size(); ++k) {
      if (!(d[k] >= 0.0)) throw std::invalid_argument(std::string(name) + ": negative mass");
      sum += d[k];
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument(std::string(name) + ": does not sum to 1");
  };
  check_dist(mu, n_states, "mu");
  check_dist(nu, n_states, "nu");
  check_dist(rho, n_players, "rho");
  if (!(p > 1.0)) throw std::invalid_argument("MeasureSet: p must exceed 1");
  for (int s = 0; s < n_states; ++s) {
    if (mu[s] > 0.0 && nu[s] == 0.0) {
      throw std::invalid_argument("MeasureSet: nu must be positive wherever mu has mass");
    }
  }
}

MeasureSet MeasureSet::uniform(int n_states, int n_players, double p) {
  MeasureSet m;
  m.mu = Eigen::VectorXd::Constant(n_states, 1.0 / n_states);
  m.nu = Eigen::VectorXd::Constant(n_states, 1.0 / n_states);
  m.rho = Eigen::VectorXd::Constant(n_players, 1.0 / n_players);
  m.p = p;
  return m;
}

double weighted_norm_pow(const Eigen::VectorXd& g, const Eigen::VectorXd& w, double p) {
  double acc = 0.0;
  for (int s = 0; s < g.size(); ++s) acc += w[s] * std::pow(std::abs(g[s]), p);
  return acc;
}

double weighted_norm(const Eigen::VectorXd& g, const Eigen::VectorXd& w, double p) {
  return std::pow(weighted_norm_pow(g, w, p), 1.0 / p);
}

Eigen::MatrixXd induced_kernel(const TurnBasedGarnet& game, const JointStrategy& js) {
  const int ns = game.n_states();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(ns, ns);
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < game.n_actions(); ++a) {
      P(s, game.next(s, a)) += js.prob(s, a);
    }
  }
  return P;
}

Eigen::VectorXd induced_reward(const TurnBasedGarnet& game, const JointStrategy& js, int player) {
  const int ns = game.n_states();
  Eigen::VectorXd r(ns);
  for (int s = 0; s < ns; ++s) {
    double acc = 0.0;
    for (int a = 0; a < game.n_actions(); ++a) acc += js.prob(s, a) * game.r(player, s, a);
    r[s] = acc;
  }
  return r;
}

Eigen::VectorXd joint_value(const TurnBasedGarnet& game, const JointStrategy& js, int player) {
  const int ns = game.n_states();
  const Eigen::MatrixXd P = induced_kernel(game, js);
  const Eigen::VectorXd r = induced_reward(game, js, player);
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(ns, ns) - game.gamma() * P;
  const Eigen::VectorXd v = M.partialPivLu().solve(r);
  const double residual = (M * v - r).lpNorm<Eigen::Infinity>();
  if (!(residual <= 1e-9)) throw std::runtime_error("joint_value: linear solve residual above 1e-9");
  return v;
}

namespace {

// Greedy action values for `player` at state s given continuation values v.
double action_value(const TurnBasedGarnet& game, int player, int s, int a, const Eigen::VectorXd& v) {
  return game.r(player, s, a) + game.gamma() * v[game.next(s, a)];
}

}  // namespace

BestResponse best_response(const TurnBasedGarnet& game, const JointStrategy& js, int player) {
  const int ns = game.n_states();
  const int na = game.n_actions();

  std::vector<int> own_states;
  for (int s = 0; s < ns; ++s) {
    if (game.controller[static_cast<std::size_t>(s)] == player) own_states.push_back(s);
  }

  BestResponse br;
  br.action.assign(static_cast<std::size_t>(ns), 0);
  if (own_states.empty()) {
    // Nothing to optimize: the chain is fixed by the others.
    br.value = joint_value(game, js, player);
    br.joint = js;
    return br;
  }

  // Start greedy with respect to the immediate reward.
  for (int s : own_states) {
    int best = 0;
    for (int a = 1; a < na; ++a) {
      if (game.r(player, s, a) > game.r(player, s, best)) best = a;
    }
    br.action[static_cast<std::size_t>(s)] = best;
  }

  Eigen::MatrixXd det_rows = Eigen::MatrixXd::Zero(ns, na);
  Eigen::VectorXd v;
  constexpr int kMaxIterations = 10000;
  int iter = 0;
  for (; iter < kMaxIterations; ++iter) {
    det_rows.setZero();
    for (int s : own_states) det_rows(s, br.action[static_cast<std::size_t>(s)]) = 1.0;
    const JointStrategy current = with_player_rows(game, js, player, det_rows);
    v = joint_value(game, current, player);

    // Switch only on strict improvement so ties cannot cycle.
    bool changed = false;
    for (int s : own_states) {
      int best = br.action[static_cast<std::size_t>(s)];
      double best_q = action_value(game, player, s, best, v);
      for (int a = 0; a < na; ++a) {
        const double q = action_value(game, player, s, a, v);
        if (q > best_q + 1e-12) {
          best = a;
          best_q = q;
        }
      }
      if (best != br.action[static_cast<std::size_t>(s)]) {
        br.action[static_cast<std::size_t>(s)] = best;
        changed = true;
      }
    }
    if (!changed) {
      br.value = v;
      br.joint = with_player_rows(game, js, player, det_rows);
      br.iterations = iter + 1;
      const Eigen::VectorXd Tv = apply_T_star(game, v, js, player);
      if (!((Tv - v).lpNorm<Eigen::Infinity>() <= 1e-9)) {
        throw std::runtime_error("best_response: optimal Bellman equation not satisfied to 1e-9");
      }
      return br;
    }
  }
  throw std::runtime_error("best_response: policy iteration did not converge within the iteration cap");
}

std::vector<std::optional<double>> error_vs_best_response(const TurnBasedGarnet& game, const JointStrategy& js) {
  std::vector<std::optional<double>> errors;
  errors.reserve(static_cast<std::size_t>(game.n_players()));
  for (int i = 0; i < game.n_players(); ++i) {
    const Eigen::VectorXd v_pi = joint_value(game, js, i);
    const Eigen::VectorXd v_star = best_response(game, js, i).value;
    const double denom = v_star.norm();
    if (denom <= 1e-12) {
      errors.emplace_back(std::nullopt);
    } else {
      errors.emplace_back((v_pi - v_star).norm() / denom);
    }
  }
  return errors;
}

Eigen::VectorXd apply_T_joint(const TurnBasedGarnet& game, const Eigen::VectorXd& v, const JointStrategy& js,
                              int player) {
  const int ns = game.n_states();
  Eigen::VectorXd out(ns);
  for (int s = 0; s < ns; ++s) {
    double acc = 0.0;
    for (int a = 0; a < game.n_actions(); ++a) {
      acc += js.prob(s, a) * (game.r(player, s, a) + game.gamma() * v[game.next(s, a)]);
    }
    out[s] = acc;
  }
  return out;
}

Eigen::VectorXd apply_T_star(const TurnBasedGarnet& game, const Eigen::VectorXd& v, const JointStrategy& js,
                             int player) {
  const int ns = game.n_states();
  Eigen::VectorXd out(ns);
  for (int s = 0; s < ns; ++s) {
    if (game.controller[static_cast<std::size_t>(s)] == player) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < game.n_actions(); ++a) best = std::max(best, action_value(game, player, s, a, v));
      out[s] = best;
    } else {
      double acc = 0.0;
      for (int a = 0; a < game.n_actions(); ++a) {
        acc += js.prob(s, a) * (game.r(player, s, a) + game.gamma() * v[game.next(s, a)]);
      }
      out[s] = acc;
    }
  }
  return out;
}

ValueLoss loss_value_space(const TurnBasedGarnet& game, const std::vector<Eigen::VectorXd>& v,
                           const JointStrategy& js, const MeasureSet& measures) {
  measures.validate(game.n_states(), game.n_players());
  if (static_cast<int>(v.size()) != game.n_players()) {
    throw std::invalid_argument("loss_value_space: one value vector per player required");
  }
  ValueLoss loss;
  loss.per_player.resize(v.size());
  for (int i = 0; i < game.n_players(); ++i) {
    const Eigen::VectorXd& vi = v[static_cast<std::size_t>(i)];
    const Eigen::VectorXd star_res = apply_T_star(game, vi, js, i) - vi;
    const Eigen::VectorXd joint_res = apply_T_joint(game, vi, js, i) - vi;
    auto& terms = loss.per_player[static_cast<std::size_t>(i)];
    terms.star = weighted_norm_pow(star_res, measures.nu, measures.p);
    terms.joint = weighted_norm_pow(joint_res, measures.nu, measures.p);
    loss.total += measures.rho[i] * (terms.star + terms.joint);
  }
  return loss;
}

Concentrability concentrability(const MeasureSet& measures, const TurnBasedGarnet& game, const JointStrategy& js) {
  const int ns = game.n_states();
  const Eigen::MatrixXd P = induced_kernel(game, js);
  const Eigen::MatrixXd Mt = (Eigen::MatrixXd::Identity(ns, ns) - game.gamma() * P).transpose();
  const Eigen::VectorXd occupancy = (1.0 - game.gamma()) * Mt.partialPivLu().solve(measures.mu);

  Concentrability c;
  for (int s = 0; s < ns; ++s) {
    if (measures.nu[s] > 0.0) {
      c.value = std::max(c.value, occupancy[s] / measures.nu[s]);
    } else if (occupancy[s] > 1e-12) {
      c.finite = false;
      c.value = std::numeric_limits<double>::infinity();
      return c;
    }
  }
  return c;
}

Lemma1Report check_lemma1(const TurnBasedGarnet& game, const std::vector<Eigen::VectorXd>& v,
                          const JointStrategy& js, const MeasureSet& measures) {
  measures.validate(game.n_states(), game.n_players());
  const double p = measures.p;
  const double pp = measures.p_prime();
  Lemma1Report report;
  report.players.resize(static_cast<std::size_t>(game.n_players()));
  for (int i = 0; i < game.n_players(); ++i) {
    auto& entry = report.players[static_cast<std::size_t>(i)];
    const Eigen::VectorXd v_pi = joint_value(game, js, i);
    const BestResponse br = best_response(game, js, i);
    entry.lhs = weighted_norm(br.value - v_pi, measures.mu, p);

    const Concentrability c_star = concentrability(measures, game, br.joint);
    const Concentrability c_pi = concentrability(measures, game, js);
    const Eigen::VectorXd& vi = v[static_cast<std::size_t>(i)];
    const double bracket = weighted_norm_pow(apply_T_star(game, vi, js, i) - vi, measures.nu, p) +
                           weighted_norm_pow(apply_T_joint(game, vi, js, i) - vi, measures.nu, p);
    if (!c_star.finite || !c_pi.finite) {
      entry.infinite_coeff = true;
      entry.rhs = std::numeric_limits<double>::infinity();
      entry.holds = true;
    } else {
      const double coeff = std::pow(std::pow(c_star.value, pp / p) + std::pow(c_pi.value, pp / p), 1.0 / pp);
      entry.rhs = coeff * std::pow(bracket, 1.0 / p) / (1.0 - game.gamma());
      entry.holds = entry.lhs <= entry.rhs + 1e-9;
    }
    report.holds = report.holds && entry.holds;
  }
  return report;
}

EquivalenceReport check_definition_equivalence(const TurnBasedGarnet& game, const JointStrategy& js, double tol) {
  EquivalenceReport report;
  report.value_side = true;
  report.bellman_side = true;
  for (int i = 0; i < game.n_players(); ++i) {
    const Eigen::VectorXd v_pi = joint_value(game, js, i);
    const Eigen::VectorXd v_star = best_response(game, js, i).value;
    if ((v_star - v_pi).lpNorm<Eigen::Infinity>() > tol) report.value_side = false;

    const double joint_res = (apply_T_joint(game, v_pi, js, i) - v_pi).lpNorm<Eigen::Infinity>();
    const double star_res = (apply_T_star(game, v_pi, js, i) - v_pi).lpNorm<Eigen::Infinity>();
    if (joint_res > tol || star_res > tol) report.bellman_side = false;
  }
  if (!report.agree()) {
    throw std::logic_error("check_definition_equivalence: the two characterizations disagree");
  }
  return report;
}

namespace {

double policy_count(int base, int slots) {
  return std::pow(static_cast<double>(base), static_cast<double>(slots));
}

}  // namespace

Eigen::VectorXd brute_force_best_response_value(const TurnBasedGarnet& game, const JointStrategy& js, int player) {
  const int na = game.n_actions();
  std::vector<int> own_states;
  for (int s = 0; s < game.n_states(); ++s) {
    if (game.controller[static_cast<std::size_t>(s)] == player) own_states.push_back(s);
  }
  if (policy_count(na, static_cast<int>(own_states.size())) > 2e6) {
    throw std::invalid_argument("brute_force_best_response_value: game too large to enumerate");
  }

  Eigen::VectorXd best = Eigen::VectorXd::Constant(game.n_states(), -std::numeric_limits<double>::infinity());
  std::vector<int> choice(own_states.size(), 0);
  Eigen::MatrixXd det_rows = Eigen::MatrixXd::Zero(game.n_states(), na);
  while (true) {
    det_rows.setZero();
    for (std::size_t k = 0; k < own_states.size(); ++k) det_rows(own_states[k], choice[k]) = 1.0;
    const JointStrategy candidate =
        own_states.empty() ? js : with_player_rows(game, js, player, det_rows);
    best = best.cwiseMax(joint_value(game, candidate, player));

    // Mixed-radix increment over the policy space.
    std::size_t k = 0;
    for (; k < choice.size(); ++k) {
      if (++choice[k] < na) break;
      choice[k] = 0;
    }
    if (k == choice.size()) break;
  }
  return best;
}

MinEpsilonStrategy brute_force_min_epsilon(const TurnBasedGarnet& game) {
  const int ns = game.n_states();
  const int na = game.n_actions();
  if (policy_count(na, ns) > 2e6) {
    throw std::invalid_argument("brute_force_min_epsilon: game too large to enumerate");
  }

  MinEpsilonStrategy result;
  result.epsilon = std::numeric_limits<double>::infinity();
  std::vector<int> actions(static_cast<std::size_t>(ns), 0);
  while (true) {
    const JointStrategy js = deterministic_strategy(game, actions);
    double eps = 0.0;
    for (int i = 0; i < game.n_players(); ++i) {
      const Eigen::VectorXd v_pi = joint_value(game, js, i);
      const Eigen::VectorXd v_star = brute_force_best_response_value(game, js, i);
      eps = std::max(eps, (v_star - v_pi).lpNorm<Eigen::Infinity>());
    }
    if (eps < result.epsilon) {
      result.epsilon = eps;
      result.action = actions;
    }

    std::size_t k = 0;
    for (; k < actions.size(); ++k) {
      if (++actions[k] < na) break;
      actions[k] = 0;
    }
    if (k == actions.size()) break;
  }
  return result;
}

}  // namespace nashmg
