#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "fscil/pfs.hpp"

using namespace fscil;

namespace {

// head whose class c scores feature component c
ClassifierHead axis_head(std::size_t dim) {
  Rng rng(0);
  ClassifierHead head(dim, dim, false, rng);
  for (std::size_t c = 0; c < dim; ++c) {
    Vec col(dim, 0.0);
    col[c] = 1.0;
    head.set_class_vector(c, col);
  }
  return head;
}

}  // namespace

TEST_CASE("entropy oracle values") {
  CHECK(entropy({0.7, 0.2, 0.1}) == doctest::Approx(0.8018185525433374).epsilon(1e-12));
  CHECK(std::abs(entropy({0.7, 0.2, 0.1}) - 0.80182) < 1e-5);
  CHECK(entropy({1.0, 0.0, 0.0}) == 0.0);
  CHECK(entropy({0.25, 0.25, 0.25, 0.25}) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("entropy validates its input") {
  CHECK_THROWS_AS(entropy({}), InvalidInput);
  CHECK_THROWS_AS(entropy({0.5, 0.4}), InvalidInput);
  CHECK_THROWS_AS(entropy({1.2, -0.2}), InvalidInput);
  CHECK_THROWS_AS(entropy({0.5, std::nan("")}), InvalidInput);
}

TEST_CASE("memory bank mean and stored subset") {
  const std::vector<Vec> feats{{2.0, 0.0}, {4.0, 2.0}, {6.0, 4.0}, {8.0, 6.0}};
  Rng rng(11);
  const ClassMemoryBank bank = build_memory_bank(feats, 3, 1, 2, rng);

  CHECK(bank.class_id == 3);
  CHECK(bank.session == 1);
  CHECK(bank.mean == Vec{5.0, 3.0});
  REQUIRE(bank.stored.size() == 2);
  // each stored feature is one of the originals
  for (const Vec& s : bank.stored) {
    CHECK(std::count(feats.begin(), feats.end(), s) == 1);
  }
  CHECK(bank.stored[0] != bank.stored[1]);
}

TEST_CASE("stored subset keeps everything when the class is small") {
  const std::vector<Vec> feats{{1.0}, {2.0}, {3.0}};
  Rng rng(2);
  const ClassMemoryBank bank = build_memory_bank(feats, 0, 0, 10, rng);
  CHECK(bank.stored == feats);  // original order preserved
}

TEST_CASE("stored subset selection is unbiased") {
  const std::vector<Vec> feats{{0.0}, {1.0}, {2.0}, {3.0}, {4.0}, {5.0}};
  std::map<double, int> picked;
  for (std::uint64_t seed = 0; seed < 3000; ++seed) {
    Rng rng(seed);
    const auto bank = build_memory_bank(feats, 0, 0, 2, rng);
    for (const Vec& s : bank.stored) ++picked[s[0]];
  }
  // 3000 trials * 2 picks / 6 values = 1000 expected hits each
  for (const auto& [value, hits] : picked) {
    CHECK(hits > 830);
    CHECK(hits < 1170);
  }
}

TEST_CASE("memory bank input validation") {
  Rng rng(1);
  CHECK_THROWS_AS(build_memory_bank({}, 0, 0, 2, rng), InvalidInput);
  CHECK_THROWS_AS(build_memory_bank({{1.0}, {2.0, 3.0}}, 0, 0, 2, rng), DimensionMismatch);
  CHECK_THROWS_AS(build_memory_bank({{std::nan("")}}, 0, 0, 1, rng), InvalidInput);
}

TEST_CASE("synthesis fills the quota with convex, confident candidates") {
  ClassMemoryBank bank;
  bank.class_id = 0;
  bank.mean = {5.0, 0.0};
  bank.stored = {{6.0, 0.5}, {4.0, -0.5}, {5.5, 0.2}};
  const ClassifierHead head = axis_head(2);

  SynthesisConfig cfg;
  cfg.count = 10;
  cfg.entropy_threshold = 0.5 * std::log(2.0);
  cfg.max_attempts = 1000;
  Rng rng(17);
  const std::size_t fallbacks = synthesize_pseudo_features(bank, head, cfg, rng);

  CHECK(fallbacks == 0);
  REQUIRE(bank.pseudo.size() == 10);
  CHECK(bank.attempts >= 10);
  CHECK(bank.entropy_threshold == cfg.entropy_threshold);
  for (const auto& p : bank.pseudo) {
    CHECK_FALSE(p.fallback);
    CHECK(p.alpha > 0.0);
    CHECK(p.alpha < 1.0);
    REQUIRE(p.source_index >= 0);
    REQUIRE(static_cast<std::size_t>(p.source_index) < bank.stored.size());
    // convex combination reconstructs exactly
    const Vec& f = bank.stored[static_cast<std::size_t>(p.source_index)];
    for (std::size_t i = 0; i < 2; ++i) {
      const double expect = p.alpha * f[i] + (1.0 - p.alpha) * bank.mean[i];
      CHECK(std::abs(p.value[i] - expect) <= 1e-12);
    }
    const Vec probs = softmax(head.logits(p.value));
    CHECK(argmax(probs) == 0);
    CHECK(p.entropy == doctest::Approx(entropy(probs)).epsilon(1e-12));
    CHECK(p.entropy < cfg.entropy_threshold);
  }
}

TEST_CASE("hopeless classes fall back to the mean and report it") {
  ClassMemoryBank bank;
  bank.class_id = 0;
  bank.mean = {-5.0, 5.0};  // the head will always pick class 1 here
  bank.stored = {{-6.0, 6.0}, {-4.0, 4.0}};
  const ClassifierHead head = axis_head(2);

  SynthesisConfig cfg;
  cfg.count = 4;
  cfg.entropy_threshold = 0.5 * std::log(2.0);
  cfg.max_attempts = 50;
  Rng rng(3);
  const std::size_t fallbacks = synthesize_pseudo_features(bank, head, cfg, rng);

  CHECK(fallbacks == 4);
  CHECK(bank.attempts == 50);
  REQUIRE(bank.pseudo.size() == 4);
  for (const auto& p : bank.pseudo) {
    CHECK(p.fallback);
    CHECK(p.value == bank.mean);
    CHECK(p.alpha == 0.0);
  }
}

TEST_CASE("disabling the filter accepts every candidate") {
  ClassMemoryBank bank;
  bank.class_id = 0;
  bank.mean = {-5.0, 5.0};  // hopeless for class 0, accepted anyway
  bank.stored = {{-6.0, 6.0}, {-4.0, 4.0}};
  const ClassifierHead head = axis_head(2);

  SynthesisConfig cfg;
  cfg.count = 6;
  cfg.entropy_threshold = 1e-6;  // irrelevant when the filter is off
  cfg.max_attempts = 6;
  cfg.uncertainty_filter = false;
  Rng rng(5);
  const std::size_t fallbacks = synthesize_pseudo_features(bank, head, cfg, rng);

  CHECK(fallbacks == 0);
  CHECK(bank.attempts == 6);
  for (const auto& p : bank.pseudo) {
    CHECK_FALSE(p.fallback);
    CHECK(p.entropy > 0.0);  // still recorded
  }
}

TEST_CASE("synthesis is deterministic in the seed") {
  ClassMemoryBank a, b;
  for (auto* bank : {&a, &b}) {
    bank->class_id = 1;
    bank->mean = {0.0, 4.0, 0.0};
    bank->stored = {{0.1, 5.0, -0.1}, {-0.2, 3.5, 0.2}};
  }
  const ClassifierHead head = axis_head(3);
  SynthesisConfig cfg;
  cfg.count = 5;
  cfg.entropy_threshold = 0.5 * std::log(3.0);
  cfg.max_attempts = 500;
  Rng r1(9), r2(9);
  synthesize_pseudo_features(a, head, cfg, r1);
  synthesize_pseudo_features(b, head, cfg, r2);
  REQUIRE(a.pseudo.size() == b.pseudo.size());
  for (std::size_t i = 0; i < a.pseudo.size(); ++i) {
    CHECK(a.pseudo[i].value == b.pseudo[i].value);
    CHECK(a.pseudo[i].alpha == b.pseudo[i].alpha);
    CHECK(a.pseudo[i].source_index == b.pseudo[i].source_index);
  }
}

TEST_CASE("synthesis argument validation") {
  ClassMemoryBank bank;
  bank.class_id = 0;
  bank.mean = {1.0, 0.0};
  bank.stored = {{1.0, 0.0}};
  const ClassifierHead head = axis_head(2);
  Rng rng(1);

  SynthesisConfig cfg;
  cfg.count = 5;
  cfg.entropy_threshold = 0.3;
  cfg.max_attempts = 4;  // below count
  CHECK_THROWS_AS(synthesize_pseudo_features(bank, head, cfg, rng), InvalidInput);

  cfg.max_attempts = 50;
  cfg.entropy_threshold = 0.0;
  CHECK_THROWS_AS(synthesize_pseudo_features(bank, head, cfg, rng), InvalidInput);

  cfg.entropy_threshold = 0.3;
  ClassMemoryBank empty;
  empty.class_id = 0;
  empty.mean = {1.0, 0.0};
  CHECK_THROWS_AS(synthesize_pseudo_features(empty, head, cfg, rng), ProtocolError);

  ClassMemoryBank outside = bank;
  outside.class_id = 7;
  CHECK_THROWS_AS(synthesize_pseudo_features(outside, head, cfg, rng), ProtocolError);
}

TEST_CASE("replay set stitches old banks and current features in order") {
  std::vector<ClassMemoryBank> banks(2);
  for (int c = 0; c < 2; ++c) {
    banks[c].class_id = c;
    banks[c].mean = {double(c), 0.0};
    banks[c].stored = {{double(c), 1.0}, {double(c), 2.0}};
    for (int q = 0; q < 3; ++q) {
      PseudoFeature p;
      p.value = {double(c), 10.0 + q};
      banks[c].pseudo.push_back(p);
    }
  }
  FeatureDataset current;
  current.dim = 2;
  current.push({9.0, 0.0}, 2);
  current.push({9.0, 1.0}, 3);

  const FeatureDataset replay = assemble_replay_set(banks, 2, current, ReplayConfig{});
  REQUIRE(replay.size() == 2 * (2 + 3) + 2);
  // class 0 stored, class 0 pseudo, class 1 stored, class 1 pseudo, current
  CHECK(replay.labels == std::vector<int>{0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 3});
  CHECK(replay.features[0] == Vec{0.0, 1.0});
  CHECK(replay.features[2] == Vec{0.0, 10.0});
  CHECK(replay.features[10] == Vec{9.0, 0.0});

  const FeatureDataset no_stored =
      assemble_replay_set(banks, 2, current, ReplayConfig{.include_stored = false});
  CHECK(no_stored.size() == 2 * 3 + 2);

  CHECK_THROWS_AS(assemble_replay_set(banks, 3, current, ReplayConfig{}), ProtocolError);
  auto dup = banks;
  dup[1].class_id = 0;
  CHECK_THROWS_AS(assemble_replay_set(dup, 2, current, ReplayConfig{}), ProtocolError);
}

TEST_CASE("replay volume at the reference protocol scale") {
  std::vector<ClassMemoryBank> banks(60);
  for (int c = 0; c < 60; ++c) {
    banks[c].class_id = c;
    banks[c].mean = {0.0};
    for (int p = 0; p < 5; ++p) banks[c].stored.push_back({double(p)});
    for (int q = 0; q < 10; ++q) {
      PseudoFeature pf;
      pf.value = {double(q)};
      banks[c].pseudo.push_back(pf);
    }
  }
  FeatureDataset current;
  current.dim = 1;
  for (int i = 0; i < 25; ++i) current.push({double(i)}, 60 + i / 5);

  const FeatureDataset replay = assemble_replay_set(banks, 60, current, ReplayConfig{});
  CHECK(replay.size() == 60 * (5 + 10) + 25);
}
