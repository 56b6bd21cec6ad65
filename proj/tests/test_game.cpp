#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "support.hpp"

using namespace nashmg;

TEST_CASE("spec validation rejects bad parameters") {
  GarnetSpec spec;
  spec.n_states = 1;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = GarnetSpec{};
  spec.gamma = 1.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = GarnetSpec{};
  spec.sparsity = 1.5;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  CHECK_NOTHROW(GarnetSpec{}.validate());
}

TEST_CASE("paper-scale generation is valid and seeded-deterministic") {
  GarnetSpec spec;
  spec.n_players = 5;
  spec.n_states = 100;
  spec.n_actions = 5;
  spec.sigma_next = 1.0;
  spec.sigma_noise = 0.05;
  spec.sparsity = 0.5;
  spec.gamma = 0.9;
  spec.seed = 42;
  const TurnBasedGarnet a = generate_garnet(spec);
  CHECK_NOTHROW(a.validate());
  const TurnBasedGarnet b = generate_garnet(spec);
  CHECK(a.controller == b.controller);
  CHECK(a.next_state == b.next_state);
  CHECK(a.critical_state == b.critical_state);
  CHECK(a.reward == b.reward);
  CHECK(a.fingerprint() == b.fingerprint());

  spec.seed = 43;
  CHECK(generate_garnet(spec).fingerprint() != a.fingerprint());
}

TEST_CASE("next states stay in range") {
  GarnetSpec spec;
  spec.n_states = 10;
  spec.n_actions = 2;
  spec.n_players = 2;
  spec.sigma_next = 4.0;
  spec.seed = 7;
  const TurnBasedGarnet g = generate_garnet(spec);
  for (int v : g.next_state) {
    CHECK(v >= 0);
    CHECK(v < 10);
  }
}

TEST_CASE("sparsity and noise corner cases") {
  GarnetSpec spec;
  spec.n_players = 2;
  spec.n_states = 12;
  spec.n_actions = 3;
  spec.seed = 5;

  spec.sparsity = 1.0;
  for (double r : generate_garnet(spec).reward) CHECK(r == 0.0);

  spec.sparsity = 0.0;
  spec.sigma_noise = 0.0;
  const TurnBasedGarnet g = generate_garnet(spec);
  for (int i = 0; i < 2; ++i) {
    for (int s = 0; s < 12; ++s) {
      for (int a = 0; a < 3; ++a) CHECK(g.r(i, s, a) == doctest::Approx(base_reward(g, i, s)).epsilon(1e-15));
    }
  }
}

TEST_CASE("circular base reward") {
  GarnetSpec spec;
  spec.n_states = 10;
  spec.n_actions = 2;
  spec.sparsity = 0.0;
  spec.sigma_noise = 0.0;
  spec.seed = 3;
  TurnBasedGarnet g = generate_garnet(spec);

  g.critical_state[0] = 4;
  CHECK(base_reward(g, 0, 4) == 1.0);
  // antipodal point: distance 5 on a 10-cycle
  CHECK(base_reward(g, 0, 9) == doctest::Approx(0.0));
  // |s - critical| = 8 wraps to circular distance 2
  g.critical_state[0] = 0;
  CHECK(base_reward(g, 0, 8) == doctest::Approx(0.6));

  // invariance under a common circular shift
  for (int shift = 1; shift < 10; ++shift) {
    g.critical_state[0] = (3 + shift) % 10;
    const double shifted = base_reward(g, 0, (7 + shift) % 10);
    g.critical_state[0] = 3;
    CHECK(shifted == doctest::Approx(base_reward(g, 0, 7)).epsilon(1e-15));
  }
}

TEST_CASE("controller distribution is fixed at generation") {
  GarnetSpec spec;
  spec.n_players = 3;
  spec.n_states = 30;
  spec.n_actions = 2;
  spec.seed = 11;
  const TurnBasedGarnet a = generate_garnet(spec);
  const TurnBasedGarnet b = generate_garnet(spec);
  CHECK(a.controller == b.controller);
  for (int c : a.controller) {
    CHECK(c >= 0);
    CHECK(c < 3);
  }
}

TEST_CASE("state encodings") {
  CHECK(encode_state(2, 4, Encoding::kOneHot) == std::vector<double>{0, 0, 1, 0});
  CHECK(encode_state(0, 6, Encoding::kOneHot)[0] == 1.0);
  CHECK(encode_state(5, 8, Encoding::kCompact) == std::vector<double>{1, 0, 1});
  CHECK(encoding_dim(100, Encoding::kCompact) == 7);
  CHECK(encoding_dim(100, Encoding::kOneHot) == 100);
  CHECK_THROWS_AS(encode_state(4, 4, Encoding::kOneHot), std::out_of_range);

  int ones = 0;
  for (double x : encode_state(3, 9, Encoding::kOneHot)) ones += x == 1.0 ? 1 : 0;
  CHECK(ones == 1);
}

TEST_CASE("game JSON round trip") {
  GarnetSpec spec;
  spec.n_players = 2;
  spec.n_states = 8;
  spec.n_actions = 3;
  spec.seed = 99;
  const TurnBasedGarnet g = generate_garnet(spec);
  const TurnBasedGarnet back = TurnBasedGarnet::from_json(g.to_json());
  CHECK(back.fingerprint() == g.fingerprint());
  CHECK(back.reward == g.reward);
  CHECK(back.next_state == g.next_state);

  const auto path = std::filesystem::temp_directory_path() / "nashmg_test_game.json";
  g.save(path.string());
  CHECK(TurnBasedGarnet::load(path.string()).fingerprint() == g.fingerprint());
  std::filesystem::remove(path);
}
