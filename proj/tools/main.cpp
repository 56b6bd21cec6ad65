#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nashmg/batch.hpp"
#include "nashmg/exact.hpp"
#include "nashmg/experiment.hpp"
#include "nashmg/game.hpp"
#include "nashmg/learner.hpp"

namespace {

using namespace nashmg;

void add_garnet_flags(CLI::App* cmd, GarnetSpec& spec) {
  cmd->add_option("--players", spec.n_players, "number of players");
  cmd->add_option("--states", spec.n_states, "number of states");
  cmd->add_option("--actions", spec.n_actions, "number of actions");
  cmd->add_option("--sigma-next", spec.sigma_next, "std-dev of the next-state jump");
  cmd->add_option("--sigma-noise", spec.sigma_noise, "reward noise std-dev");
  cmd->add_option("--sparsity", spec.sparsity, "probability a reward entry is zeroed");
  cmd->add_option("--gamma", spec.gamma, "discount factor");
}

void add_train_flags(CLI::App* cmd, TrainConfig& cfg, std::string& kind, std::string& encoding) {
  cmd->add_option("--epochs", cfg.epochs, "training epochs");
  cmd->add_option("--lr-q", cfg.lr_q, "learning rate of the Q approximators");
  cmd->add_option("--lr-pi", cfg.lr_pi, "learning rate of the strategy approximators");
  cmd->add_option("--lr-q-decay", cfg.lr_q_decay, "per-epoch decay factor of lr-q");
  cmd->add_option("--lr-pi-decay", cfg.lr_pi_decay, "per-epoch decay factor of lr-pi");
  cmd->add_option("--weight-decay", cfg.weight_decay, "L2 penalty coefficient");
  cmd->add_option("--minibatch", cfg.minibatch, "minibatch size");
  cmd->add_option("--p", cfg.p, "residual exponent");
  cmd->add_option("--eval-every", cfg.eval_every, "epochs between exact-oracle checkpoints");
  cmd->add_option("--hidden", cfg.hidden, "hidden layer width");
  cmd->add_option("--kind", kind, "approximator kind: mlp or tabular");
  cmd->add_option("--encoding", encoding, "state encoding: one_hot or compact");
}

void write_report_csv(const std::string& path, const TrainReport& report, int n_players) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "epoch,step,train_residual,test_residual,err_mean,err_std";
  for (int i = 0; i < n_players; ++i) os << ",err_p" << i;
  os << "\n";
  char buf[40];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const Checkpoint& cp : report.checkpoints) {
    double mean = 0.0;
    for (double e : cp.error_vs_br) mean += e;
    mean /= static_cast<double>(cp.error_vs_br.size());
    double var = 0.0;
    for (double e : cp.error_vs_br) var += (e - mean) * (e - mean);
    const double sd = std::sqrt(var / static_cast<double>(cp.error_vs_br.size()));
    os << cp.epoch << "," << cp.step << "," << fmt(cp.train_residual) << "," << fmt(cp.test_residual) << ","
       << fmt(mean) << "," << fmt(sd);
    for (double e : cp.error_vs_br) os << "," << fmt(e);
    os << "\n";
  }
}

int cmd_gen(const GarnetSpec& spec, std::uint64_t seed, const std::string& out) {
  GarnetSpec s = spec;
  s.seed = seed;
  const TurnBasedGarnet game = generate_garnet(s);
  game.save(out);
  std::cout << "wrote " << out << " (fingerprint " << game.fingerprint() << ")\n";
  return 0;
}

int cmd_sample(const std::string& game_path, int count, std::uint64_t seed, const std::string& split,
               const std::string& out) {
  const TurnBasedGarnet game = TurnBasedGarnet::load(game_path);
  const Dataset data = sample_batch(game, count, seed, split);
  save_dataset(data, out);
  std::cout << "wrote " << out << " (" << data.size() << " samples)\n";
  return 0;
}

int cmd_eval(const std::string& game_path, const std::string& strategy_path) {
  const TurnBasedGarnet game = TurnBasedGarnet::load(game_path);
  const JointStrategy js = load_strategy(strategy_path);
  const auto errors = error_vs_best_response(game, js);
  double mean = 0.0;
  int defined = 0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i]) {
      std::cout << "player " << i << ": error vs best response = " << *errors[i] << "\n";
      mean += *errors[i];
      ++defined;
    } else {
      std::cout << "player " << i << ": undefined (zero-norm best response)\n";
    }
  }
  if (defined > 0) std::cout << "mean over players: " << mean / defined << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learns weak epsilon-Nash equilibria of turn-based Markov games from batch data"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a game and write it as JSON");
  GarnetSpec gen_spec;
  std::uint64_t gen_seed = 1;
  std::string gen_out = "game.json";
  add_garnet_flags(gen, gen_spec);
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output path");

  // sample
  auto* sample = app.add_subcommand("sample", "sample a batch dataset from a game");
  std::string sample_game, sample_split, sample_out = "data.jsonl";
  int sample_count = 0;
  std::uint64_t sample_seed = 1;
  sample->add_option("--game", sample_game, "game JSON path")->required();
  sample->add_option("--count", sample_count, "number of samples")->required();
  sample->add_option("--seed", sample_seed, "sampling seed");
  sample->add_option("--split", sample_split, "split tag stored in the header");
  sample->add_option("--out", sample_out, "output path");

  // train
  auto* train_cmd = app.add_subcommand("train", "train on one game and report exact metrics");
  std::string train_game, train_data_path, test_data_path, train_kind = "mlp", train_encoding = "one_hot";
  std::string train_out_dir = "out";
  double train_alpha = 5.0;
  std::uint64_t train_seed = 1;
  TrainConfig train_cfg;
  train_cmd->add_option("--game", train_game, "game JSON path")->required();
  train_cmd->add_option("--train-data", train_data_path, "training dataset (JSON-lines); sampled when omitted");
  train_cmd->add_option("--test-data", test_data_path, "test dataset (JSON-lines); sampled when omitted");
  train_cmd->add_option("--alpha", train_alpha, "train-set multiplier when sampling internally");
  train_cmd->add_option("--seed", train_seed, "seed for sampling and training");
  train_cmd->add_option("--out-dir", train_out_dir, "output directory");
  add_train_flags(train_cmd, train_cfg, train_kind, train_encoding);

  // run
  auto* run_cmd = app.add_subcommand("run", "full experiment: garnets x resamples, metrics and plots");
  std::string run_config_path;
  ExperimentConfig run_cfg;
  std::string run_kind = "mlp", run_encoding = "one_hot";
  run_cmd->add_option("--config", run_config_path, "JSON config; flags override its fields");
  add_garnet_flags(run_cmd, run_cfg.garnet);
  add_train_flags(run_cmd, run_cfg.train, run_kind, run_encoding);
  run_cmd->add_option("--garnets", run_cfg.n_garnets, "number of garnets");
  run_cmd->add_option("--resamples", run_cfg.n_resamples, "batch resamples per garnet");
  run_cmd->add_option("--alpha", run_cfg.alpha, "train-set multiplier");
  run_cmd->add_option("--jobs", run_cfg.jobs, "parallel runs (0 = hardware)");
  run_cmd->add_option("--seed", run_cfg.seed, "master seed");
  run_cmd->add_option("--out-dir", run_cfg.out_dir, "output directory");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "repeat the experiment across sample multipliers");
  std::string sweep_config_path;
  ExperimentConfig sweep_cfg;
  sweep_cfg.n_garnets = 3;
  sweep_cfg.n_resamples = 3;
  std::string sweep_kind = "mlp", sweep_encoding = "one_hot";
  std::vector<double> sweep_alphas = {0.5, 1.0, 2.0, 5.0};
  sweep_cmd->add_option("--config", sweep_config_path, "JSON config; flags override its fields");
  add_garnet_flags(sweep_cmd, sweep_cfg.garnet);
  add_train_flags(sweep_cmd, sweep_cfg.train, sweep_kind, sweep_encoding);
  sweep_cmd->add_option("--garnets", sweep_cfg.n_garnets, "number of garnets");
  sweep_cmd->add_option("--resamples", sweep_cfg.n_resamples, "batch resamples per garnet");
  sweep_cmd->add_option("--alphas", sweep_alphas, "sample multipliers")->delimiter(',');
  sweep_cmd->add_option("--jobs", sweep_cfg.jobs, "parallel runs (0 = hardware)");
  sweep_cmd->add_option("--seed", sweep_cfg.seed, "master seed");
  sweep_cmd->add_option("--out-dir", sweep_cfg.out_dir, "output directory");

  // verify
  auto* verify_cmd = app.add_subcommand("verify", "run the exact-oracle self-check battery");
  std::uint64_t verify_seed = 1;
  verify_cmd->add_option("--seed", verify_seed, "seed for the random instances");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score a saved strategy against a saved game");
  std::string eval_game, eval_strategy;
  eval_cmd->add_option("--game", eval_game, "game JSON path")->required();
  eval_cmd->add_option("--strategy", eval_strategy, "strategy JSON path")->required();

  try {
    app.parse(argc, argv);

    if (gen->parsed()) return cmd_gen(gen_spec, gen_seed, gen_out);
    if (sample->parsed()) return cmd_sample(sample_game, sample_count, sample_seed, sample_split, sample_out);

    if (train_cmd->parsed()) {
      const TurnBasedGarnet game = TurnBasedGarnet::load(train_game);
      train_cfg.kind = model_kind_from_string(train_kind);
      train_cfg.encoding = encoding_from_string(train_encoding);
      train_cfg.seed = derive_seed(train_seed, 4, 0);
      const int k_train =
          std::max(1, static_cast<int>(std::lround(train_alpha * game.n_states() * game.n_actions())));
      const Dataset train_data = train_data_path.empty()
                                     ? sample_batch(game, k_train, derive_seed(train_seed, 2, 0), "train")
                                     : load_dataset(train_data_path);
      const Dataset test_data = test_data_path.empty()
                                    ? sample_batch(game, game.n_states() * game.n_actions(),
                                                   derive_seed(train_seed, 3, 0), "test")
                                    : load_dataset(test_data_path);
      const TrainResult result = train(game, train_data, test_data, train_cfg);
      std::filesystem::create_directories(train_out_dir);
      write_report_csv(train_out_dir + "/report.csv", result.report, game.n_players());
      result.model.save(train_out_dir + "/weights.json");
      save_strategy(result.model.extract_strategy(game), train_out_dir + "/strategy.json");
      const Checkpoint& last = result.report.checkpoints.back();
      std::cout << "epochs " << last.epoch << ", steps " << last.step << ", train residual " << last.train_residual
                << ", test residual " << last.test_residual << "\n";
      for (std::size_t i = 0; i < last.error_vs_br.size(); ++i) {
        std::cout << "player " << i << ": error vs best response = " << last.error_vs_br[i] << "\n";
      }
      std::cout << "wrote " << train_out_dir << "/report.csv, weights.json, strategy.json\n";
      return 0;
    }

    if (run_cmd->parsed()) {
      ExperimentConfig cfg = run_config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(run_config_path);
      // Flags the user actually passed override the config file.
      auto take = [&](const char* flag, auto& dst, const auto& src) {
        if (run_cmd->count(flag) > 0) dst = src;
      };
      take("--players", cfg.garnet.n_players, run_cfg.garnet.n_players);
      take("--states", cfg.garnet.n_states, run_cfg.garnet.n_states);
      take("--actions", cfg.garnet.n_actions, run_cfg.garnet.n_actions);
      take("--sigma-next", cfg.garnet.sigma_next, run_cfg.garnet.sigma_next);
      take("--sigma-noise", cfg.garnet.sigma_noise, run_cfg.garnet.sigma_noise);
      take("--sparsity", cfg.garnet.sparsity, run_cfg.garnet.sparsity);
      take("--gamma", cfg.garnet.gamma, run_cfg.garnet.gamma);
      take("--epochs", cfg.train.epochs, run_cfg.train.epochs);
      take("--lr-q", cfg.train.lr_q, run_cfg.train.lr_q);
      take("--lr-pi", cfg.train.lr_pi, run_cfg.train.lr_pi);
      take("--lr-q-decay", cfg.train.lr_q_decay, run_cfg.train.lr_q_decay);
      take("--lr-pi-decay", cfg.train.lr_pi_decay, run_cfg.train.lr_pi_decay);
      take("--weight-decay", cfg.train.weight_decay, run_cfg.train.weight_decay);
      take("--minibatch", cfg.train.minibatch, run_cfg.train.minibatch);
      take("--p", cfg.train.p, run_cfg.train.p);
      take("--eval-every", cfg.train.eval_every, run_cfg.train.eval_every);
      take("--hidden", cfg.train.hidden, run_cfg.train.hidden);
      if (run_cmd->count("--kind") > 0) cfg.train.kind = model_kind_from_string(run_kind);
      if (run_cmd->count("--encoding") > 0) cfg.train.encoding = encoding_from_string(run_encoding);
      take("--garnets", cfg.n_garnets, run_cfg.n_garnets);
      take("--resamples", cfg.n_resamples, run_cfg.n_resamples);
      take("--alpha", cfg.alpha, run_cfg.alpha);
      take("--jobs", cfg.jobs, run_cfg.jobs);
      take("--seed", cfg.seed, run_cfg.seed);
      take("--out-dir", cfg.out_dir, run_cfg.out_dir);

      const ExperimentResult result = run_experiment(cfg);
      for (const RunOutcome& run : result.runs) {
        if (run.failed) {
          std::cerr << "run garnet " << run.garnet_id << " resample " << run.resample_id << " failed: " << run.error
                    << "\n";
        }
      }
      std::cout << "final mean error vs best response: " << result.final_error_mean
                << " (std across players: " << result.final_error_std_players << ")\n";
      std::cout << "wrote " << result.metrics_path << ", " << result.summary_path << ", " << result.curves_path
                << "\n";
      return result.n_failed > 0 ? 1 : 0;
    }

    if (sweep_cmd->parsed()) {
      ExperimentConfig cfg =
          sweep_config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(sweep_config_path);
      if (sweep_config_path.empty()) {
        cfg.n_garnets = 3;
        cfg.n_resamples = 3;
      }
      auto take = [&](const char* flag, auto& dst, const auto& src) {
        if (sweep_cmd->count(flag) > 0) dst = src;
      };
      take("--players", cfg.garnet.n_players, sweep_cfg.garnet.n_players);
      take("--states", cfg.garnet.n_states, sweep_cfg.garnet.n_states);
      take("--actions", cfg.garnet.n_actions, sweep_cfg.garnet.n_actions);
      take("--sigma-next", cfg.garnet.sigma_next, sweep_cfg.garnet.sigma_next);
      take("--sigma-noise", cfg.garnet.sigma_noise, sweep_cfg.garnet.sigma_noise);
      take("--sparsity", cfg.garnet.sparsity, sweep_cfg.garnet.sparsity);
      take("--gamma", cfg.garnet.gamma, sweep_cfg.garnet.gamma);
      take("--epochs", cfg.train.epochs, sweep_cfg.train.epochs);
      take("--lr-q", cfg.train.lr_q, sweep_cfg.train.lr_q);
      take("--lr-pi", cfg.train.lr_pi, sweep_cfg.train.lr_pi);
      take("--lr-q-decay", cfg.train.lr_q_decay, sweep_cfg.train.lr_q_decay);
      take("--lr-pi-decay", cfg.train.lr_pi_decay, sweep_cfg.train.lr_pi_decay);
      take("--weight-decay", cfg.train.weight_decay, sweep_cfg.train.weight_decay);
      take("--minibatch", cfg.train.minibatch, sweep_cfg.train.minibatch);
      take("--p", cfg.train.p, sweep_cfg.train.p);
      take("--eval-every", cfg.train.eval_every, sweep_cfg.train.eval_every);
      take("--hidden", cfg.train.hidden, sweep_cfg.train.hidden);
      if (sweep_cmd->count("--kind") > 0) cfg.train.kind = model_kind_from_string(sweep_kind);
      if (sweep_cmd->count("--encoding") > 0) cfg.train.encoding = encoding_from_string(sweep_encoding);
      take("--garnets", cfg.n_garnets, sweep_cfg.n_garnets);
      take("--resamples", cfg.n_resamples, sweep_cfg.n_resamples);
      take("--jobs", cfg.jobs, sweep_cfg.jobs);
      take("--seed", cfg.seed, sweep_cfg.seed);
      take("--out-dir", cfg.out_dir, sweep_cfg.out_dir);

      const SweepResult sweep = sweep_samples(cfg, sweep_alphas);
      int failed = 0;
      for (const SweepPoint& point : sweep.points) {
        failed += point.result.n_failed;
        std::cout << "alpha " << point.alpha << " (" << point.n_samples
                  << " samples): final mean error = " << point.result.final_error_mean << "\n";
      }
      std::cout << "wrote " << sweep.csv_path << ", " << sweep.svg_path << "\n";
      return failed > 0 ? 1 : 0;
    }

    if (verify_cmd->parsed()) {
      const VerifyReport report = verify(verify_seed, std::cout);
      return report.all_passed() ? 0 : 1;
    }

    if (eval_cmd->parsed()) return cmd_eval(eval_game, eval_strategy);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
