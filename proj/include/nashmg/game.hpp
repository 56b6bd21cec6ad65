#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nashmg/rng.hpp"

namespace nashmg {

enum class Encoding { kOneHot, kCompact };

Encoding encoding_from_string(const std::string& name);
std::string to_string(Encoding mode);

// Parameters of a randomly generated turn-based game.
struct GarnetSpec {
  int n_players = 1;
  int n_states = 100;
  int n_actions = 5;
  double sigma_next = 1.0;    // std-dev of the state-index jump
  double sigma_noise = 0.05;  // reward noise std-dev
  double sparsity = 0.5;      // probability a reward entry is zeroed
  double gamma = 0.9;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument on violation.
  void validate() const;
};

// Turn-based deterministic game: exactly one player (controller[s]) picks an
// action in each state; transitions and rewards are plain tables. Immutable
// after construction, safe for concurrent reads.
struct TurnBasedGarnet {
  GarnetSpec spec;
  std::vector<int> controller;      // [n_states]
  std::vector<int> next_state;      // [n_states * n_actions], row-major
  std::vector<double> reward;       // [n_players * n_states * n_actions]
  std::vector<int> critical_state;  // [n_players]

  int n_players() const { return spec.n_players; }
  int n_states() const { return spec.n_states; }
  int n_actions() const { return spec.n_actions; }
  double gamma() const { return spec.gamma; }

  int next(int s, int a) const { return next_state[static_cast<std::size_t>(s) * spec.n_actions + a]; }
  double r(int player, int s, int a) const {
    return reward[(static_cast<std::size_t>(player) * spec.n_states + s) * spec.n_actions + a];
  }
  double& r(int player, int s, int a) {
    return reward[(static_cast<std::size_t>(player) * spec.n_states + s) * spec.n_actions + a];
  }

  void validate() const;

  // Stable content hash over the spec and all tables.
  std::uint64_t fingerprint() const;

  std::string to_json() const;
  static TurnBasedGarnet from_json(const std::string& text);
  void save(const std::string& path) const;
  static TurnBasedGarnet load(const std::string& path);
};

// min(|a-b|, n - |a-b|): distance on the index circle.
int circular_distance(int a, int b, int n);

// 1 - 2*d_circ(s, critical)/n_states: 1 at the player's critical state,
// linearly decreasing with circular distance, 0 at the antipode.
double base_reward(const TurnBasedGarnet& game, int player, int s);

TurnBasedGarnet generate_garnet(const GarnetSpec& spec);

// Arbitrary small game with uniform random tables; test and verification
// instances, not part of the paper-style generator.
TurnBasedGarnet random_game(int n_players, int n_states, int n_actions, double gamma, Rng& rng);

int encoding_dim(int n_states, Encoding mode);
// One-hot: indicator at s. Compact: binary expansion of s, LSB first.
std::vector<double> encode_state(int s, int n_states, Encoding mode);

}  // namespace nashmg
