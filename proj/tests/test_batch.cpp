#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "support.hpp"

using namespace nashmg;
using namespace testsupport;

namespace {

std::filesystem::path temp_file(const char* name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST_CASE("sampling reads the model exactly") {
  GarnetSpec spec;
  spec.n_players = 3;
  spec.n_states = 20;
  spec.n_actions = 4;
  spec.seed = 17;
  const TurnBasedGarnet g = generate_garnet(spec);
  const Dataset data = sample_batch(g, 500, 23, "train");
  CHECK(data.split == "train");
  CHECK(data.fingerprint == g.fingerprint());
  for (const BatchSample& sample : data.samples) {
    CHECK(sample.s_next == g.next(sample.s, sample.a));
    CHECK(sample.controller_s == g.controller[static_cast<std::size_t>(sample.s)]);
    CHECK(sample.controller_s_next == g.controller[static_cast<std::size_t>(sample.s_next)]);
    for (int i = 0; i < 3; ++i) {
      CHECK(sample.rewards[static_cast<std::size_t>(i)] == g.r(i, sample.s, sample.a));
    }
  }
}

TEST_CASE("paper-sized batches and seeded determinism") {
  GarnetSpec spec;
  spec.n_states = 100;
  spec.n_actions = 5;
  spec.seed = 3;
  const TurnBasedGarnet g = generate_garnet(spec);
  const Dataset a = sample_batch(g, 5 * 100 * 5, 7);
  CHECK(a.size() == 2500);
  const Dataset b = sample_batch(g, 5 * 100 * 5, 7);
  for (int j = 0; j < a.size(); ++j) {
    CHECK(a.samples[static_cast<std::size_t>(j)].s == b.samples[static_cast<std::size_t>(j)].s);
    CHECK(a.samples[static_cast<std::size_t>(j)].a == b.samples[static_cast<std::size_t>(j)].a);
  }
  CHECK_THROWS_AS(sample_batch(g, 0, 7), std::invalid_argument);
}

TEST_CASE("state visits are close to uniform") {
  GarnetSpec spec;
  spec.n_states = 10;
  spec.n_actions = 3;
  spec.seed = 29;
  const TurnBasedGarnet g = generate_garnet(spec);
  const int k = 100 * 10;
  const Dataset data = sample_batch(g, k, 31);
  std::vector<int> counts(10, 0);
  for (const BatchSample& sample : data.samples) ++counts[static_cast<std::size_t>(sample.s)];
  const double expected = static_cast<double>(k) / 10.0;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 9 degrees of freedom; anything under 40 is a sane draw
  CHECK(chi2 < 40.0);
}

TEST_CASE("dataset round trip is lossless") {
  const TurnBasedGarnet g = g2_game();
  const Dataset data = sample_batch(g, 64, 5, "test");
  const auto path = temp_file("nashmg_test_data.jsonl");
  save_dataset(data, path.string());
  const Dataset back = load_dataset(path.string());
  CHECK(back.fingerprint == data.fingerprint);
  CHECK(back.seed == data.seed);
  CHECK(back.split == data.split);
  REQUIRE(back.size() == data.size());
  for (int j = 0; j < data.size(); ++j) {
    const BatchSample& x = data.samples[static_cast<std::size_t>(j)];
    const BatchSample& y = back.samples[static_cast<std::size_t>(j)];
    CHECK(x.s == y.s);
    CHECK(x.a == y.a);
    CHECK(x.s_next == y.s_next);
    CHECK(x.controller_s == y.controller_s);
    CHECK(x.controller_s_next == y.controller_s_next);
    CHECK(x.rewards == y.rewards);  // bitwise: 17 significant digits round-trip
  }
  std::filesystem::remove(path);
}

TEST_CASE("reloaded batches give the identical empirical loss") {
  const TurnBasedGarnet g = g2_game();
  const JointStrategy nash = g2_nash(g);
  const QTable q = g2_nash_q();
  Dataset data = sample_batch(g, 4, 41);
  const auto path = temp_file("nashmg_test_loss.jsonl");
  save_dataset(data, path.string());
  const Dataset back = load_dataset(path.string());
  const Eigen::VectorXd rho = Eigen::VectorXd::Constant(2, 0.5);
  const double before = empirical_loss(data.samples, q, nash, g.gamma(), rho, 2.0).sum;
  const double after = empirical_loss(back.samples, q, nash, g.gamma(), rho, 2.0).sum;
  CHECK(after == doctest::Approx(before).epsilon(1e-15));
  std::filesystem::remove(path);
}

TEST_CASE("parse errors carry the line number") {
  const TurnBasedGarnet g = g2_game();
  const Dataset data = sample_batch(g, 10, 6);
  const auto path = temp_file("nashmg_test_trunc.jsonl");
  save_dataset(data, path.string());

  // truncate the file in the middle of the sixth line
  std::ifstream in(path);
  std::string all, line;
  int n = 0;
  while (std::getline(in, line) && n < 5) {
    all += line + "\n";
    ++n;
  }
  in.close();
  all += line.substr(0, line.size() / 2);
  std::ofstream out(path);
  out << all;
  out.close();

  try {
    load_dataset(path.string());
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(":6") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("fingerprint mismatch is a hard error") {
  const TurnBasedGarnet g = g2_game();
  const Dataset data = sample_batch(g, 8, 44);
  CHECK_NOTHROW(require_matching_game(data, g));

  TurnBasedGarnet other = g;
  other.reward[0] += 1.0;
  CHECK_THROWS_AS(require_matching_game(data, other), std::runtime_error);
}
