#include "nashmg/game.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace nashmg {

using nlohmann::json;

Encoding encoding_from_string(const std::string& name) {
  if (name == "one_hot") return Encoding::kOneHot;
  if (name == "compact") return Encoding::kCompact;
  throw std::invalid_argument("unknown state encoding: " + name);
}

std::string to_string(Encoding mode) {
  return mode == Encoding::kOneHot ? "one_hot" : "compact";
}

void GarnetSpec::validate() const {
  if (n_players < 1) throw std::invalid_argument("GarnetSpec: n_players must be >= 1");
  if (n_states < 2) throw std::invalid_argument("GarnetSpec: n_states must be >= 2");
  if (n_actions < 1) throw std::invalid_argument("GarnetSpec: n_actions must be >= 1");
  if (!(sigma_next >= 0.0)) throw std::invalid_argument("GarnetSpec: sigma_next must be >= 0");
  if (!(sigma_noise >= 0.0)) throw std::invalid_argument("GarnetSpec: sigma_noise must be >= 0");
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) throw std::invalid_argument("GarnetSpec: sparsity must be in [0,1]");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("GarnetSpec: gamma must be in [0,1)");
}

void TurnBasedGarnet::validate() const {
  spec.validate();
  const std::size_t ns = static_cast<std::size_t>(spec.n_states);
  const std::size_t na = static_cast<std::size_t>(spec.n_actions);
  const std::size_t np = static_cast<std::size_t>(spec.n_players);
  if (controller.size() != ns || next_state.size() != ns * na ||
      reward.size() != np * ns * na || critical_state.size() != np) {
    throw std::invalid_argument("TurnBasedGarnet: table sizes do not match the spec");
  }
  for (int c : controller) {
    if (c < 0 || c >= spec.n_players) throw std::invalid_argument("TurnBasedGarnet: controller out of range");
  }
  for (int s : next_state) {
    if (s < 0 || s >= spec.n_states) throw std::invalid_argument("TurnBasedGarnet: next_state out of range");
  }
  for (int s : critical_state) {
    if (s < 0 || s >= spec.n_states) throw std::invalid_argument("TurnBasedGarnet: critical_state out of range");
  }
  for (double v : reward) {
    if (!std::isfinite(v)) throw std::invalid_argument("TurnBasedGarnet: non-finite reward");
  }
}

namespace {

std::uint64_t fnv1a_init() { return 0xcbf29ce484222325ULL; }

void fnv1a_u64(std::uint64_t& h, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) {
    h ^= (x >> (8 * i)) & 0xffULL;
    h *= 0x100000001b3ULL;
  }
}

void fnv1a_double(std::uint64_t& h, double x) { fnv1a_u64(h, std::bit_cast<std::uint64_t>(x)); }

}  // namespace

std::uint64_t TurnBasedGarnet::fingerprint() const {
  std::uint64_t h = fnv1a_init();
  fnv1a_u64(h, static_cast<std::uint64_t>(spec.n_players));
  fnv1a_u64(h, static_cast<std::uint64_t>(spec.n_states));
  fnv1a_u64(h, static_cast<std::uint64_t>(spec.n_actions));
  fnv1a_double(h, spec.sigma_next);
  fnv1a_double(h, spec.sigma_noise);
  fnv1a_double(h, spec.sparsity);
  fnv1a_double(h, spec.gamma);
  fnv1a_u64(h, spec.seed);
  for (int c : controller) fnv1a_u64(h, static_cast<std::uint64_t>(c));
  for (int s : next_state) fnv1a_u64(h, static_cast<std::uint64_t>(s));
  for (int s : critical_state) fnv1a_u64(h, static_cast<std::uint64_t>(s));
  for (double v : reward) fnv1a_double(h, v);
  return h;
}

std::string TurnBasedGarnet::to_json() const {
  json j;
  j["format"] = "nashmg-game-v1";
  j["spec"] = {{"n_players", spec.n_players},   {"n_states", spec.n_states},
               {"n_actions", spec.n_actions},   {"sigma_next", spec.sigma_next},
               {"sigma_noise", spec.sigma_noise}, {"sparsity", spec.sparsity},
               {"gamma", spec.gamma},           {"seed", spec.seed}};
  j["controller"] = controller;
  j["next_state"] = next_state;
  j["reward"] = reward;
  j["critical_state"] = critical_state;
  j["fingerprint"] = fingerprint();
  return j.dump();
}

TurnBasedGarnet TurnBasedGarnet::from_json(const std::string& text) {
  json j = json::parse(text);
  if (j.value("format", "") != "nashmg-game-v1") {
    throw std::invalid_argument("game file: unknown format tag");
  }
  TurnBasedGarnet g;
  const json& s = j.at("spec");
  g.spec.n_players = s.at("n_players").get<int>();
  g.spec.n_states = s.at("n_states").get<int>();
  g.spec.n_actions = s.at("n_actions").get<int>();
  g.spec.sigma_next = s.at("sigma_next").get<double>();
  g.spec.sigma_noise = s.at("sigma_noise").get<double>();
  g.spec.sparsity = s.at("sparsity").get<double>();
  g.spec.gamma = s.at("gamma").get<double>();
  g.spec.seed = s.at("seed").get<std::uint64_t>();
  g.controller = j.at("controller").get<std::vector<int>>();
  g.next_state = j.at("next_state").get<std::vector<int>>();
  g.reward = j.at("reward").get<std::vector<double>>();
  g.critical_state = j.at("critical_state").get<std::vector<int>>();
  g.validate();
  if (j.contains("fingerprint") && j["fingerprint"].get<std::uint64_t>() != g.fingerprint()) {
    throw std::invalid_argument("game file: fingerprint does not match content");
  }
  return g;
}

void TurnBasedGarnet::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << to_json() << "\n";
}

TurnBasedGarnet TurnBasedGarnet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

int circular_distance(int a, int b, int n) {
  const int d = std::abs(a - b);
  return std::min(d, n - d);
}

double base_reward(const TurnBasedGarnet& game, int player, int s) {
  const int n = game.n_states();
  const int d = circular_distance(s, game.critical_state[static_cast<std::size_t>(player)], n);
  return 1.0 - 2.0 * static_cast<double>(d) / static_cast<double>(n);
}

TurnBasedGarnet generate_garnet(const GarnetSpec& spec) {
  spec.validate();
  TurnBasedGarnet g;
  g.spec = spec;
  Rng rng(spec.seed);

  const int ns = spec.n_states;
  const int na = spec.n_actions;
  const int np = spec.n_players;

  // Next state: circular jump of rounded Gaussian width around s.
  g.next_state.resize(static_cast<std::size_t>(ns) * na);
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) {
      const long jump = std::lround(rng.normal(0.0, spec.sigma_next));
      long target = (s + jump) % ns;
      if (target < 0) target += ns;
      g.next_state[static_cast<std::size_t>(s) * na + a] = static_cast<int>(target);
    }
  }

  g.controller.resize(static_cast<std::size_t>(ns));
  for (int s = 0; s < ns; ++s) g.controller[static_cast<std::size_t>(s)] = rng.uniform_int(np);

  g.critical_state.resize(static_cast<std::size_t>(np));
  for (int i = 0; i < np; ++i) g.critical_state[static_cast<std::size_t>(i)] = rng.uniform_int(ns);

  // Reward: circular base profile plus white noise, then sparsified.
  g.reward.resize(static_cast<std::size_t>(np) * ns * na);
  for (int i = 0; i < np; ++i) {
    for (int s = 0; s < ns; ++s) {
      const double base = base_reward(g, i, s);
      for (int a = 0; a < na; ++a) {
        double value = base + (spec.sigma_noise > 0.0 ? rng.normal(0.0, spec.sigma_noise) : 0.0);
        if (spec.sparsity > 0.0 && rng.uniform01() < spec.sparsity) value = 0.0;
        g.r(i, s, a) = value;
      }
    }
  }
  return g;
}

TurnBasedGarnet random_game(int n_players, int n_states, int n_actions, double gamma, Rng& rng) {
  TurnBasedGarnet g;
  g.spec.n_players = n_players;
  g.spec.n_states = n_states;
  g.spec.n_actions = n_actions;
  g.spec.gamma = gamma;
  g.spec.sigma_next = 0.0;
  g.spec.sigma_noise = 0.0;
  g.spec.sparsity = 0.0;
  g.spec.seed = 0;
  g.controller.resize(static_cast<std::size_t>(n_states));
  g.critical_state.assign(static_cast<std::size_t>(n_players), 0);
  g.next_state.resize(static_cast<std::size_t>(n_states) * n_actions);
  g.reward.resize(static_cast<std::size_t>(n_players) * n_states * n_actions);
  for (auto& c : g.controller) c = rng.uniform_int(n_players);
  for (auto& s : g.next_state) s = rng.uniform_int(n_states);
  for (auto& v : g.reward) v = rng.uniform(-1.0, 1.0);
  return g;
}

int encoding_dim(int n_states, Encoding mode) {
  if (mode == Encoding::kOneHot) return n_states;
  int bits = 0;
  while ((1 << bits) < n_states) ++bits;
  return std::max(bits, 1);
}

std::vector<double> encode_state(int s, int n_states, Encoding mode) {
  if (s < 0 || s >= n_states) throw std::out_of_range("encode_state: state out of range");
  std::vector<double> x(static_cast<std::size_t>(encoding_dim(n_states, mode)), 0.0);
  if (mode == Encoding::kOneHot) {
    x[static_cast<std::size_t>(s)] = 1.0;
  } else {
    for (std::size_t b = 0; b < x.size(); ++b) x[b] = static_cast<double>((s >> b) & 1);
  }
  return x;
}

}  // namespace nashmg
