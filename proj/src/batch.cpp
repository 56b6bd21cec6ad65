#include "nashmg/batch.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace nashmg {

using nlohmann::json;

Dataset sample_batch(const TurnBasedGarnet& game, int k, std::uint64_t seed, const std::string& split) {
  if (k < 1) throw std::invalid_argument("sample_batch: k must be >= 1");
  Dataset data;
  data.fingerprint = game.fingerprint();
  data.seed = seed;
  data.split = split;
  data.samples.reserve(static_cast<std::size_t>(k));
  Rng rng(seed);
  for (int j = 0; j < k; ++j) {
    BatchSample sample;
    sample.s = rng.uniform_int(game.n_states());
    sample.a = rng.uniform_int(game.n_actions());
    sample.s_next = game.next(sample.s, sample.a);
    sample.controller_s = game.controller[static_cast<std::size_t>(sample.s)];
    sample.controller_s_next = game.controller[static_cast<std::size_t>(sample.s_next)];
    sample.rewards.resize(static_cast<std::size_t>(game.n_players()));
    for (int i = 0; i < game.n_players(); ++i) sample.rewards[static_cast<std::size_t>(i)] = game.r(i, sample.s, sample.a);
    data.samples.push_back(std::move(sample));
  }
  return data;
}

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  json header = {{"format", "nashmg-dataset-v1"},
                 {"fingerprint", data.fingerprint},
                 {"seed", data.seed},
                 {"split", data.split},
                 {"count", data.samples.size()}};
  out << header.dump() << "\n";
  char buf[32];
  for (const BatchSample& sample : data.samples) {
    out << "{\"s\":" << sample.s << ",\"a\":" << sample.a << ",\"r\":[";
    for (std::size_t i = 0; i < sample.rewards.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", sample.rewards[i]);
      out << (i ? "," : "") << buf;
    }
    out << "],\"s_next\":" << sample.s_next << ",\"c\":" << sample.controller_s
        << ",\"c_next\":" << sample.controller_s_next << "}\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  Dataset data;
  std::string line;
  long line_no = 0;
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      if (line_no == 1) {
        if (j.value("format", "") != "nashmg-dataset-v1") throw std::runtime_error("unknown format tag");
        data.fingerprint = j.at("fingerprint").get<std::uint64_t>();
        data.seed = j.at("seed").get<std::uint64_t>();
        data.split = j.value("split", "");
        expected = j.at("count").get<std::size_t>();
        continue;
      }
      BatchSample sample;
      sample.s = j.at("s").get<int>();
      sample.a = j.at("a").get<int>();
      sample.rewards = j.at("r").get<std::vector<double>>();
      sample.s_next = j.at("s_next").get<int>();
      sample.controller_s = j.at("c").get<int>();
      sample.controller_s_next = j.at("c_next").get<int>();
      data.samples.push_back(std::move(sample));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (line_no == 0) throw std::runtime_error(path + ": empty dataset file");
  if (expected != data.samples.size()) {
    throw std::runtime_error(path + ": header announces " + std::to_string(expected) + " samples, found " +
                             std::to_string(data.samples.size()));
  }
  return data;
}

void require_matching_game(const Dataset& data, const TurnBasedGarnet& game) {
  if (data.fingerprint != game.fingerprint()) {
    throw std::runtime_error("dataset fingerprint does not match the game it is used with");
  }
}

}  // namespace nashmg
