#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nashmg/game.hpp"

namespace nashmg {

// One logged transition. Rewards carry one entry per player.
struct BatchSample {
  int s = 0;
  int a = 0;
  std::vector<double> rewards;
  int s_next = 0;
  int controller_s = 0;
  int controller_s_next = 0;
};

struct Dataset {
  std::uint64_t fingerprint = 0;  // of the generating game
  std::uint64_t seed = 0;
  std::string split;  // "train", "test" or free-form
  std::vector<BatchSample> samples;

  int size() const { return static_cast<int>(samples.size()); }
};

// k i.i.d. samples: state uniform, action uniform over the controller's
// actions; rewards and successor read from the model.
Dataset sample_batch(const TurnBasedGarnet& game, int k, std::uint64_t seed, const std::string& split = "");

// JSON-lines; a header line carries the fingerprint, seed and split, then
// one sample per line. Rewards are written with 17 significant digits so the
// round trip is lossless.
void save_dataset(const Dataset& data, const std::string& path);

// Throws std::runtime_error with the offending line number on parse errors.
Dataset load_dataset(const std::string& path);

// Hard error when the dataset was not generated from `game`.
void require_matching_game(const Dataset& data, const TurnBasedGarnet& game);

}  // namespace nashmg
