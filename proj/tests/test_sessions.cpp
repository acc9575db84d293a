#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "fscil/checkpoint.hpp"
#include "fscil/datagen.hpp"
#include "fscil/error.hpp"
#include "fscil/sessions.hpp"

using namespace fscil;

namespace {

PipelineConfig tiny_config() {
  PipelineConfig cfg;
  cfg.base_classes = 4;
  cfg.incremental_sessions = 2;
  cfg.ways = 2;
  cfg.shots = 3;
  cfg.train_per_class = 10;
  cfg.test_per_class = 5;
  cfg.image_size = 12;
  cfg.hidden = {32};
  cfg.feature_dim = 16;
  cfg.s1_epochs = 6;
  cfg.s1_batch = 16;
  cfg.s2_epochs = 4;
  cfg.s3_epochs = 4;
  cfg.lr = 0.02;
  cfg.s2_lr = 0.02;
  cfg.s3_lr = 0.02;
  cfg.lambda_ct = 0.1;
  cfg.margin = 4.0;
  cfg.stored_per_class = 3;
  cfg.pseudo_per_class = 4;
  cfg.seed = 5;
  return cfg;
}

struct TinyBench {
  PipelineConfig cfg;
  GeneratedData data;
  std::vector<SessionSpec> specs;
};

TinyBench tiny_bench(std::uint64_t seed = 5) {
  TinyBench b;
  b.cfg = tiny_config();
  b.cfg.seed = seed;
  Rng gr = Rng(seed).derive(0xDA7A);
  b.data = generate_dataset(b.cfg.total_classes(), b.cfg.train_per_class,
                            b.cfg.test_per_class, b.cfg.jitter, b.cfg.image_size, gr);
  std::vector<int> train_labels, test_labels;
  for (const auto& s : b.data.train.samples) train_labels.push_back(s.label);
  for (const auto& s : b.data.test.samples) test_labels.push_back(s.label);
  Rng sr = Rng(seed).derive(0x5807);
  b.specs = make_session_specs(train_labels, test_labels, b.cfg, sr);
  return b;
}

std::vector<int> labels_in(const ImageSet& set) {
  std::vector<int> out;
  for (const auto& s : set.samples) out.push_back(s.label);
  return out;
}

}  // namespace

TEST_CASE("classes map to the session that introduces them") {
  const PipelineConfig cfg = tiny_config();  // 4 base + 2 sessions of 2
  CHECK(session_of_class(0, cfg) == 0);
  CHECK(session_of_class(3, cfg) == 0);
  CHECK(session_of_class(4, cfg) == 1);
  CHECK(session_of_class(5, cfg) == 1);
  CHECK(session_of_class(6, cfg) == 2);
  CHECK(session_of_class(7, cfg) == 2);
  CHECK_THROWS_AS(session_of_class(8, cfg), ProtocolError);
  CHECK_THROWS_AS(session_of_class(-1, cfg), ProtocolError);

  CHECK(classes_of_session(0, cfg) == std::vector<int>{0, 1, 2, 3});
  CHECK(classes_of_session(2, cfg) == std::vector<int>{6, 7});
  CHECK_THROWS_AS(classes_of_session(3, cfg), ProtocolError);
}

TEST_CASE("generated splits satisfy the protocol") {
  const TinyBench b = tiny_bench();
  const auto train_labels = labels_in(b.data.train);
  const auto test_labels = labels_in(b.data.test);
  CHECK_NOTHROW(validate_protocol(b.specs, train_labels, test_labels, b.cfg));

  // base session owns every sample of the base classes
  CHECK(b.specs[0].train_indices.size() == b.cfg.base_classes * b.cfg.train_per_class);
  // later sessions own exactly ways*shots samples
  for (std::size_t s = 1; s < b.specs.size(); ++s) {
    CHECK(b.specs[s].train_indices.size() == b.cfg.ways * b.cfg.shots);
    CHECK(b.specs[s].test_indices.size() == b.cfg.ways * b.cfg.test_per_class);
  }
  // test pools cover everything exactly once
  std::size_t covered = 0;
  for (const auto& s : b.specs) covered += s.test_indices.size();
  CHECK(covered == b.data.test.samples.size());
}

TEST_CASE("shot selection is seed-deterministic") {
  const TinyBench a = tiny_bench();
  const TinyBench b = tiny_bench();
  CHECK(a.specs == b.specs);
  // a different stream picks different shots somewhere
  const auto train_labels = labels_in(a.data.train);
  const auto test_labels = labels_in(a.data.test);
  Rng other = Rng(99).derive(0x5807);
  const auto other_specs = make_session_specs(train_labels, test_labels, a.cfg, other);
  CHECK_NOTHROW(validate_protocol(other_specs, train_labels, test_labels, a.cfg));
  CHECK(other_specs != a.specs);
}

TEST_CASE("protocol validation rejects tampered splits") {
  const TinyBench b = tiny_bench();
  const auto train_labels = labels_in(b.data.train);
  const auto test_labels = labels_in(b.data.test);

  SUBCASE("train sample reused across sessions") {
    auto broken = b.specs;
    broken[1].train_indices[0] = broken[0].train_indices[0];
    CHECK_THROWS_AS(validate_protocol(broken, train_labels, test_labels, b.cfg),
                    ProtocolError);
  }
  SUBCASE("wrong shot count") {
    auto broken = b.specs;
    broken[1].train_indices.pop_back();
    CHECK_THROWS_AS(validate_protocol(broken, train_labels, test_labels, b.cfg),
                    ProtocolError);
  }
  SUBCASE("uncovered test sample") {
    auto broken = b.specs;
    broken[2].test_indices.pop_back();
    CHECK_THROWS_AS(validate_protocol(broken, train_labels, test_labels, b.cfg),
                    ProtocolError);
  }
  SUBCASE("class block mismatch") {
    auto broken = b.specs;
    std::swap(broken[1].classes, broken[2].classes);
    CHECK_THROWS_AS(validate_protocol(broken, train_labels, test_labels, b.cfg),
                    ProtocolError);
  }
  SUBCASE("sample assigned outside its class session") {
    auto broken = b.specs;
    // move one base test sample into session 1
    broken[1].test_indices.push_back(broken[0].test_indices.back());
    broken[0].test_indices.pop_back();
    CHECK_THROWS_AS(validate_protocol(broken, train_labels, test_labels, b.cfg),
                    ProtocolError);
  }
  SUBCASE("session count mismatch") {
    auto broken = b.specs;
    broken.pop_back();
    CHECK_THROWS_AS(validate_protocol(broken, train_labels, test_labels, b.cfg),
                    ProtocolError);
  }
}

TEST_CASE("fingerprint reacts to any bit of the data") {
  TinyBench b = tiny_bench();
  const std::uint64_t base = dataset_fingerprint(b.data.train, b.data.test);
  CHECK(base == dataset_fingerprint(b.data.train, b.data.test));

  auto& px = b.data.train.samples[3].pixels[7];
  const double saved = px;
  px = std::nextafter(px, 2.0);
  CHECK(dataset_fingerprint(b.data.train, b.data.test) != base);
  px = saved;
  b.data.test.samples[1].label ^= 1;
  CHECK(dataset_fingerprint(b.data.train, b.data.test) != base);
  b.data.test.samples[1].label ^= 1;
  std::swap(b.data.train.samples[0], b.data.train.samples[1]);
  CHECK(dataset_fingerprint(b.data.train, b.data.test) != base);
}

TEST_CASE("full run produces the expected shapes and invariants") {
  const TinyBench b = tiny_bench();
  Pipeline p(b.cfg);
  p.run_all(b.data.train, b.data.test, b.specs);
  const PipelineState& st = p.state();

  CHECK(st.completed_session == 2);
  CHECK(st.backbone.frozen());
  CHECK(st.head.classes() == b.cfg.total_classes());
  CHECK(st.capture_heads.size() == 3);
  CHECK(st.capture_heads[0].classes() == b.cfg.base_classes);
  CHECK(st.capture_heads[1].classes() == b.cfg.base_classes + b.cfg.ways);
  CHECK(st.capture_heads[2].classes() == b.cfg.total_classes());

  REQUIRE(st.banks.size() == b.cfg.total_classes());
  for (std::size_t c = 0; c < st.banks.size(); ++c) {
    const ClassMemoryBank& bank = st.banks[c];
    CHECK(bank.class_id == static_cast<int>(c));
    CHECK(bank.session == static_cast<int>(session_of_class(bank.class_id, b.cfg)));
    CHECK(bank.mean.size() == b.cfg.feature_dim);
    const std::size_t available =
        bank.session == 0 ? b.cfg.train_per_class : b.cfg.shots;
    CHECK(bank.stored.size() == std::min(b.cfg.stored_per_class, available));
    // classes that were old in some session carry synthesized features
    if (bank.session < st.completed_session) {
      CHECK(bank.pseudo.size() == b.cfg.pseudo_per_class);
    } else {
      CHECK(bank.pseudo.empty());
    }
  }

  REQUIRE(st.tracks.size() == 2);  // softmax and ncm
  for (const TrackResults& track : st.tracks) {
    REQUIRE(track.sessions.size() == 3);
    std::size_t pool = 0;
    for (std::size_t s = 0; s < track.sessions.size(); ++s) {
      const SessionResult& r = track.sessions[s];
      CHECK(r.session == s);
      pool += b.specs[s].test_indices.size();
      CHECK(static_cast<std::size_t>(r.confusion.total()) == pool);
      const std::size_t active = b.cfg.base_classes + s * b.cfg.ways;
      CHECK(r.confusion.classes() == active);
      CHECK(r.per_class.size() == active);
      CHECK(r.accuracy >= 0.0);
      CHECK(r.accuracy <= 100.0);
      CHECK(r.accuracy == doctest::Approx(r.confusion.overall_accuracy()));
    }
  }

  // training only ever touches the head after the base stage
  CHECK(st.stage1_epoch_loss.size() == b.cfg.s1_epochs);
  CHECK(st.stage1_epoch_loss.back() < st.stage1_epoch_loss.front());
  CHECK(st.separation.intra > 0.0);
  CHECK(st.separation.inter > 0.0);
}

TEST_CASE("backbone stays bit-frozen through the incremental sessions") {
  const TinyBench b = tiny_bench();
  Pipeline p(b.cfg);
  p.run_base(b.data.train, b.data.test, b.specs);
  const std::uint64_t frozen_sum = p.state().backbone.checksum();
  p.run_incremental(1, b.data.train, b.data.test, b.specs);
  p.run_incremental(2, b.data.train, b.data.test, b.specs);
  CHECK(p.state().backbone.checksum() == frozen_sum);
}

TEST_CASE("sessions must run in order, exactly once") {
  const TinyBench b = tiny_bench();
  Pipeline p(b.cfg);
  CHECK_THROWS_AS(p.run_incremental(1, b.data.train, b.data.test, b.specs), ProtocolError);
  p.run_base(b.data.train, b.data.test, b.specs);
  CHECK_THROWS_AS(p.run_base(b.data.train, b.data.test, b.specs), ProtocolError);
  CHECK_THROWS_AS(p.run_incremental(2, b.data.train, b.data.test, b.specs), ProtocolError);
  p.run_incremental(1, b.data.train, b.data.test, b.specs);
  CHECK_THROWS_AS(p.run_incremental(1, b.data.train, b.data.test, b.specs), ProtocolError);
  CHECK_THROWS_AS(p.run_incremental(5, b.data.train, b.data.test, b.specs), ProtocolError);
}

TEST_CASE("a run refuses data that differs from its first sessions") {
  TinyBench b = tiny_bench();
  Pipeline p(b.cfg);
  p.run_base(b.data.train, b.data.test, b.specs);
  b.data.train.samples[0].pixels[0] =
      std::nextafter(b.data.train.samples[0].pixels[0], 2.0);
  CHECK_THROWS_AS(p.run_incremental(1, b.data.train, b.data.test, b.specs), ProtocolError);
}

TEST_CASE("disabling synthesis leaves banks without pseudo features") {
  const TinyBench b = tiny_bench();
  PipelineConfig cfg = b.cfg;
  apply_ablation(cfg, "pfs");
  Pipeline p(cfg);
  p.run_all(b.data.train, b.data.test, b.specs);
  for (const ClassMemoryBank& bank : p.state().banks) {
    CHECK(bank.pseudo.empty());
    CHECK(bank.attempts == 0);
  }
  CHECK(p.state().pseudo_fallbacks == 0);
}

TEST_CASE("representation-only run measures separation and stops") {
  const TinyBench b = tiny_bench();
  Pipeline p(b.cfg);
  p.run_representation_only(b.data.train, b.specs);
  CHECK(p.state().completed_session == -1);
  CHECK(p.state().backbone.frozen());
  CHECK(p.state().separation.intra > 0.0);
  CHECK(p.state().separation.inter > 0.0);
  CHECK(p.state().tracks.empty());
}

TEST_CASE("reruns of the same config and data repeat bit for bit") {
  const TinyBench b = tiny_bench();
  Pipeline p1(b.cfg);
  p1.run_all(b.data.train, b.data.test, b.specs);
  Pipeline p2(b.cfg);
  p2.run_all(b.data.train, b.data.test, b.specs);
  CHECK(p1.state().head == p2.state().head);
  CHECK(p1.state().backbone.checksum() == p2.state().backbone.checksum());
  CHECK(p1.state().tracks == p2.state().tracks);
  CHECK(p1.state().stage1_epoch_loss == p2.state().stage1_epoch_loss);
}
