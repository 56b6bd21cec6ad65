#include "nashmg/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace nashmg {

using nlohmann::json;

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "mlp") return ModelKind::kMlp;
  if (name == "tabular") return ModelKind::kTabular;
  throw std::invalid_argument("unknown model kind: " + name);
}

std::string to_string(ModelKind kind) { return kind == ModelKind::kMlp ? "mlp" : "tabular"; }

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double shift = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - shift).exp();
  return e / e.sum();
}

namespace {

ParamBlocks init_mlp_blocks(int in, int hidden, int out, Rng& rng) {
  ParamBlocks blocks;
  blocks.emplace_back(hidden, in);
  blocks.emplace_back(hidden, 1);
  blocks.emplace_back(out, hidden);
  blocks.emplace_back(out, 1);
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(in));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const double bound = b < 2 ? bound1 : bound2;
    Eigen::MatrixXd& m = blocks[b];
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(-bound, bound);
  }
  return blocks;
}

}  // namespace

Model Model::mlp(int n_players, int n_states, int n_actions, int hidden, Encoding encoding, Rng& rng) {
  Model m;
  m.kind = ModelKind::kMlp;
  m.encoding = encoding;
  m.n_players = n_players;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.hidden = hidden;
  const int in = encoding_dim(n_states, encoding);
  if (encoding == Encoding::kCompact) {
    m.enc.resize(in, n_states);
    for (int s = 0; s < n_states; ++s) {
      const std::vector<double> x = encode_state(s, n_states, encoding);
      for (int k = 0; k < in; ++k) m.enc(k, s) = x[static_cast<std::size_t>(k)];
    }
  }
  m.players.resize(static_cast<std::size_t>(n_players));
  for (auto& nets : m.players) {
    nets.q = init_mlp_blocks(in, hidden, n_actions, rng);
    nets.pi = init_mlp_blocks(in, hidden, n_actions, rng);
  }
  return m;
}

Model Model::tabular(int n_players, int n_states, int n_actions) {
  Model m;
  m.kind = ModelKind::kTabular;
  m.n_players = n_players;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.players.resize(static_cast<std::size_t>(n_players));
  for (auto& nets : m.players) {
    nets.q = {Eigen::MatrixXd::Zero(n_states, n_actions)};
    nets.pi = {Eigen::MatrixXd::Zero(n_states, n_actions)};
  }
  return m;
}

int Model::input_dim() const {
  if (kind == ModelKind::kTabular) return n_states;
  return encoding_dim(n_states, encoding);
}

void Model::check_finite() const {
  for (const auto& nets : players) {
    for (const auto* blocks : {&nets.q, &nets.pi}) {
      for (const auto& block : *blocks) {
        if (!block.allFinite()) throw std::runtime_error("model weights contain NaN or Inf");
      }
    }
  }
}

Eigen::VectorXd Model::q_values(int player, int s) const {
  check_finite();
  const net::Cache cache = net::forward(*this, players[static_cast<std::size_t>(player)].q, {s});
  return cache.out.col(0);
}

Eigen::VectorXd Model::pi_logits(int player, int s) const {
  check_finite();
  const net::Cache cache = net::forward(*this, players[static_cast<std::size_t>(player)].pi, {s});
  return cache.out.col(0);
}

Eigen::VectorXd Model::strategy_row(int player, int s) const { return softmax(pi_logits(player, s)); }

Eigen::MatrixXd Model::strategy_table(int player) const {
  std::vector<int> states(static_cast<std::size_t>(n_states));
  for (int s = 0; s < n_states; ++s) states[static_cast<std::size_t>(s)] = s;
  const net::Cache cache = net::forward(*this, players[static_cast<std::size_t>(player)].pi, states);
  Eigen::MatrixXd table(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) table.row(s) = softmax(cache.out.col(s)).transpose();
  return table;
}

QTable Model::q_table() const {
  check_finite();
  std::vector<int> states(static_cast<std::size_t>(n_states));
  for (int s = 0; s < n_states; ++s) states[static_cast<std::size_t>(s)] = s;
  QTable table;
  table.q.reserve(players.size());
  for (std::size_t i = 0; i < players.size(); ++i) {
    const net::Cache cache = net::forward(*this, players[i].q, states);
    table.q.push_back(cache.out.transpose());
  }
  return table;
}

JointStrategy Model::extract_strategy(const TurnBasedGarnet& game) const {
  check_finite();
  if (game.n_states() != n_states || game.n_actions() != n_actions || game.n_players() != n_players) {
    throw std::invalid_argument("extract_strategy: model and game dimensions differ");
  }
  std::vector<Eigen::MatrixXd> tables;
  tables.reserve(players.size());
  for (int i = 0; i < n_players; ++i) tables.push_back(strategy_table(i));
  return assemble(game, tables);
}

namespace {

json blocks_to_json(const ParamBlocks& blocks) {
  json out = json::array();
  for (const Eigen::MatrixXd& m : blocks) {
    json entry;
    entry["rows"] = m.rows();
    entry["cols"] = m.cols();
    entry["data"] = std::vector<double>(m.data(), m.data() + m.size());
    out.push_back(std::move(entry));
  }
  return out;
}

ParamBlocks blocks_from_json(const json& j) {
  ParamBlocks blocks;
  for (const json& entry : j) {
    Eigen::MatrixXd m(entry.at("rows").get<Eigen::Index>(), entry.at("cols").get<Eigen::Index>());
    const auto data = entry.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != m.size()) {
      throw std::invalid_argument("weights file: data length does not match shape");
    }
    std::copy(data.begin(), data.end(), m.data());
    blocks.push_back(std::move(m));
  }
  return blocks;
}

}  // namespace

std::string Model::to_json() const {
  json j;
  j["format"] = "nashmg-weights-v1";
  j["kind"] = nashmg::to_string(kind);
  j["encoding"] = nashmg::to_string(encoding);
  j["n_players"] = n_players;
  j["n_states"] = n_states;
  j["n_actions"] = n_actions;
  j["hidden"] = hidden;
  j["players"] = json::array();
  for (const auto& nets : players) {
    j["players"].push_back({{"q", blocks_to_json(nets.q)}, {"pi", blocks_to_json(nets.pi)}});
  }
  return j.dump();
}

Model Model::from_json(const std::string& text) {
  json j = json::parse(text);
  if (j.value("format", "") != "nashmg-weights-v1") throw std::invalid_argument("weights file: unknown format tag");
  Model m;
  m.kind = model_kind_from_string(j.at("kind").get<std::string>());
  m.encoding = encoding_from_string(j.at("encoding").get<std::string>());
  m.n_players = j.at("n_players").get<int>();
  m.n_states = j.at("n_states").get<int>();
  m.n_actions = j.at("n_actions").get<int>();
  m.hidden = j.at("hidden").get<int>();
  if (m.kind == ModelKind::kMlp && m.encoding == Encoding::kCompact) {
    const int in = encoding_dim(m.n_states, m.encoding);
    m.enc.resize(in, m.n_states);
    for (int s = 0; s < m.n_states; ++s) {
      const std::vector<double> x = encode_state(s, m.n_states, m.encoding);
      for (int k = 0; k < in; ++k) m.enc(k, s) = x[static_cast<std::size_t>(k)];
    }
  }
  for (const json& entry : j.at("players")) {
    PlayerNets nets;
    nets.q = blocks_from_json(entry.at("q"));
    nets.pi = blocks_from_json(entry.at("pi"));
    m.players.push_back(std::move(nets));
  }
  if (static_cast<int>(m.players.size()) != m.n_players) {
    throw std::invalid_argument("weights file: player count mismatch");
  }
  return m;
}

void Model::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << to_json() << "\n";
}

Model Model::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

ModelGrads ModelGrads::zeros_like(const Model& model) {
  ModelGrads g;
  g.players.resize(model.players.size());
  for (std::size_t i = 0; i < model.players.size(); ++i) {
    for (const Eigen::MatrixXd& b : model.players[i].q) {
      g.players[i].q.push_back(Eigen::MatrixXd::Zero(b.rows(), b.cols()));
    }
    for (const Eigen::MatrixXd& b : model.players[i].pi) {
      g.players[i].pi.push_back(Eigen::MatrixXd::Zero(b.rows(), b.cols()));
    }
  }
  return g;
}

void ModelGrads::set_zero() {
  for (auto& nets : players) {
    for (auto& b : nets.q) b.setZero();
    for (auto& b : nets.pi) b.setZero();
  }
}

double ModelGrads::squared_norm() const {
  double acc = 0.0;
  for (const auto& nets : players) {
    for (const auto& b : nets.q) acc += b.squaredNorm();
    for (const auto& b : nets.pi) acc += b.squaredNorm();
  }
  return acc;
}

namespace net {

namespace {

// Grow-only: keeps capacity when a later minibatch touches fewer states.
void grow(Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() != rows || m.cols() < cols) m.resize(rows, std::max(cols, m.cols()));
}

}  // namespace

void forward(const Model& model, const ParamBlocks& blocks, const std::vector<int>& states, Cache& cache) {
  cache.states = states;
  const int m = static_cast<int>(states.size());
  cache.m = m;

  if (model.kind == ModelKind::kTabular) {
    const Eigen::MatrixXd& table = blocks[0];
    grow(cache.out, table.cols(), m);
    for (int c = 0; c < m; ++c) cache.out.col(c) = table.row(states[static_cast<std::size_t>(c)]).transpose();
    return;
  }

  const Eigen::MatrixXd& w1 = blocks[0];
  const auto b1 = blocks[1].col(0);
  const Eigen::MatrixXd& w2 = blocks[2];
  const auto b2 = blocks[3].col(0);

  grow(cache.z1, w1.rows(), m);
  grow(cache.h1, w1.rows(), m);
  grow(cache.out, w2.rows(), m);
  if (model.one_hot_input()) {
    for (int c = 0; c < m; ++c) cache.z1.col(c) = w1.col(states[static_cast<std::size_t>(c)]) + b1;
  } else {
    for (int c = 0; c < m; ++c) {
      cache.z1.col(c).noalias() = w1 * model.enc.col(states[static_cast<std::size_t>(c)]);
      cache.z1.col(c) += b1;
    }
  }
  cache.h1.leftCols(m) = cache.z1.leftCols(m).cwiseMax(0.0);
  cache.out.leftCols(m).noalias() = w2 * cache.h1.leftCols(m);
  cache.out.leftCols(m).colwise() += b2;
}

Cache forward(const Model& model, const ParamBlocks& blocks, const std::vector<int>& states) {
  Cache cache;
  forward(model, blocks, states, cache);
  return cache;
}

void backward(const Model& model, const ParamBlocks& blocks, Cache& cache,
              const Eigen::Ref<const Eigen::MatrixXd>& d_out, ParamBlocks& grads) {
  const int m = cache.m;

  if (model.kind == ModelKind::kTabular) {
    Eigen::MatrixXd& d_table = grads[0];
    for (int c = 0; c < m; ++c) d_table.row(cache.states[static_cast<std::size_t>(c)]) += d_out.col(c).transpose();
    return;
  }

  const Eigen::MatrixXd& w2 = blocks[2];
  grads[2].noalias() += d_out * cache.h1.leftCols(m).transpose();
  grads[3].col(0) += d_out.rowwise().sum();

  grow(cache.dz, w2.cols(), m);
  auto d_z = cache.dz.leftCols(m);
  d_z.noalias() = w2.transpose() * d_out;
  d_z = d_z.cwiseProduct((cache.z1.leftCols(m).array() > 0.0).cast<double>().matrix());
  grads[1].col(0) += d_z.rowwise().sum();
  if (model.one_hot_input()) {
    for (int c = 0; c < m; ++c) grads[0].col(cache.states[static_cast<std::size_t>(c)]) += d_z.col(c);
  } else {
    for (int c = 0; c < m; ++c) {
      grads[0].noalias() += d_z.col(c) * model.enc.col(cache.states[static_cast<std::size_t>(c)]).transpose();
    }
  }
}

}  // namespace net

}  // namespace nashmg
