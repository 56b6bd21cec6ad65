#include "nashmg/strategy.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace nashmg {

void JointStrategy::validate() const {
  for (int s = 0; s < prob.rows(); ++s) {
    double sum = 0.0;
    for (int a = 0; a < prob.cols(); ++a) {
      const double p = prob(s, a);
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw std::invalid_argument("JointStrategy: negative or non-finite probability");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw std::invalid_argument("JointStrategy: row does not sum to 1");
    }
  }
}

JointStrategy uniform_strategy(const TurnBasedGarnet& game) {
  JointStrategy js;
  js.prob = Eigen::MatrixXd::Constant(game.n_states(), game.n_actions(), 1.0 / game.n_actions());
  return js;
}

JointStrategy deterministic_strategy(const TurnBasedGarnet& game, const std::vector<int>& action) {
  if (static_cast<int>(action.size()) != game.n_states()) {
    throw std::invalid_argument("deterministic_strategy: one action per state required");
  }
  JointStrategy js;
  js.prob = Eigen::MatrixXd::Zero(game.n_states(), game.n_actions());
  for (int s = 0; s < game.n_states(); ++s) {
    const int a = action[static_cast<std::size_t>(s)];
    if (a < 0 || a >= game.n_actions()) throw std::invalid_argument("deterministic_strategy: action out of range");
    js.prob(s, a) = 1.0;
  }
  return js;
}

JointStrategy random_strategy(const TurnBasedGarnet& game, Rng& rng) {
  JointStrategy js;
  js.prob.resize(game.n_states(), game.n_actions());
  for (int s = 0; s < game.n_states(); ++s) {
    double sum = 0.0;
    for (int a = 0; a < game.n_actions(); ++a) {
      // -log(U) gives Exp(1); normalizing yields Dirichlet(1).
      const double e = -std::log(1.0 - rng.uniform01());
      js.prob(s, a) = e;
      sum += e;
    }
    js.prob.row(s) /= sum;
  }
  return js;
}

JointStrategy assemble(const TurnBasedGarnet& game, const std::vector<Eigen::MatrixXd>& per_player) {
  if (static_cast<int>(per_player.size()) != game.n_players()) {
    throw std::invalid_argument("assemble: one table per player required");
  }
  JointStrategy js;
  js.prob.resize(game.n_states(), game.n_actions());
  for (int s = 0; s < game.n_states(); ++s) {
    js.prob.row(s) = per_player[static_cast<std::size_t>(game.controller[static_cast<std::size_t>(s)])].row(s);
  }
  js.validate();
  return js;
}

JointStrategy with_player_rows(const TurnBasedGarnet& game, const JointStrategy& base, int player,
                               const Eigen::MatrixXd& pi_rows) {
  JointStrategy js = base;
  for (int s = 0; s < game.n_states(); ++s) {
    if (game.controller[static_cast<std::size_t>(s)] == player) js.prob.row(s) = pi_rows.row(s);
  }
  return js;
}

void save_strategy(const JointStrategy& js, const std::string& path) {
  js.validate();
  nlohmann::json j;
  j["format"] = "nashmg-strategy-v1";
  j["prob"] = nlohmann::json::array();
  for (int s = 0; s < js.n_states(); ++s) {
    std::vector<double> row(static_cast<std::size_t>(js.n_actions()));
    for (int a = 0; a < js.n_actions(); ++a) row[static_cast<std::size_t>(a)] = js.prob(s, a);
    j["prob"].push_back(row);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump() << "\n";
}

JointStrategy load_strategy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j = nlohmann::json::parse(buf.str());
  if (j.value("format", "") != "nashmg-strategy-v1") throw std::invalid_argument("strategy file: unknown format tag");
  const auto rows = j.at("prob").get<std::vector<std::vector<double>>>();
  if (rows.empty()) throw std::invalid_argument("strategy file: empty table");
  JointStrategy js;
  js.prob.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t s = 0; s < rows.size(); ++s) {
    if (rows[s].size() != rows.front().size()) throw std::invalid_argument("strategy file: ragged rows");
    for (std::size_t a = 0; a < rows[s].size(); ++a) {
      js.prob(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = rows[s][a];
    }
  }
  js.validate();
  return js;
}

}  // namespace nashmg
