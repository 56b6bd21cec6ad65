#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nashmg/game.hpp"
#include "nashmg/learner.hpp"

namespace nashmg {

// Full experiment description. Every default is the paper-scale setup, so an
// empty JSON config reproduces it.
struct ExperimentConfig {
  GarnetSpec garnet;
  TrainConfig train;
  int n_garnets = 5;
  int n_resamples = 5;
  double alpha = 5.0;  // train samples = alpha * n_states * n_actions
  std::string out_dir = "out";
  int jobs = 0;  // 0 = hardware concurrency
  std::uint64_t seed = 1;

  int train_samples() const;
  int test_samples() const { return garnet.n_states * garnet.n_actions; }
  void validate() const;

  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::string& path);
};

struct RunOutcome {
  int garnet_id = 0;
  int resample_id = 0;
  bool failed = false;
  std::string error;
  TrainReport report;
};

struct ExperimentResult {
  std::vector<RunOutcome> runs;  // ordered by (garnet, resample)
  int n_failed = 0;
  // Aggregates over successful runs' final checkpoints: mean over players
  // first, then over runs.
  double final_error_mean = 0.0;
  double final_error_std_players = 0.0;
  double final_train_residual = 0.0;
  double final_test_residual = 0.0;
  std::string metrics_path;
  std::string summary_path;
  std::string curves_path;
};

// Generate -> sample -> train -> evaluate for each (garnet, resample) in a
// worker pool; writes metrics.csv, summary.csv and curves.svg under
// cfg.out_dir. Individual run failures are recorded and do not stop the
// others.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct SweepPoint {
  double alpha = 0.0;
  int n_samples = 0;
  ExperimentResult result;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::string csv_path;
  std::string svg_path;
};

// run_experiment per alpha; per-alpha outputs land in <out_dir>/alpha_<a>.
SweepResult sweep_samples(const ExperimentConfig& base, const std::vector<double>& alphas);

struct VerifyCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool all_passed() const;
};

// Battery of exact-oracle self-checks on small instances: the residual
// bound inequality on random (game, v, pi) triples, equivalence of the two
// equilibrium characterizations, sample-vs-model backup agreement on
// deterministic games, and finite-difference gradient checks.
VerifyReport verify(std::uint64_t seed, std::ostream& log);

// Deterministic sub-stream seeds for garnets, datasets and training runs.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t index);

}  // namespace nashmg
