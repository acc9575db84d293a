#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

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
  cfg.s1_epochs = 5;
  cfg.s2_epochs = 3;
  cfg.s3_epochs = 3;
  cfg.lr = 0.02;
  cfg.s2_lr = 0.02;
  cfg.s3_lr = 0.02;
  cfg.margin = 4.0;
  cfg.lambda_ct = 0.1;
  cfg.stored_per_class = 3;
  cfg.pseudo_per_class = 4;
  cfg.seed = 21;
  return cfg;
}

struct Bench {
  PipelineConfig cfg;
  GeneratedData data;
  std::vector<SessionSpec> specs;
};

Bench bench() {
  Bench b;
  b.cfg = tiny_config();
  Rng gr = Rng(b.cfg.seed).derive(0xDA7A);
  b.data = generate_dataset(b.cfg.total_classes(), b.cfg.train_per_class,
                            b.cfg.test_per_class, b.cfg.jitter, b.cfg.image_size, gr);
  std::vector<int> train_labels, test_labels;
  for (const auto& s : b.data.train.samples) train_labels.push_back(s.label);
  for (const auto& s : b.data.test.samples) test_labels.push_back(s.label);
  Rng sr = Rng(b.cfg.seed).derive(0x5807);
  b.specs = make_session_specs(train_labels, test_labels, b.cfg, sr);
  return b;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("checkpoints round-trip bit for bit") {
  const Bench b = bench();
  Pipeline p(b.cfg);
  p.run_base(b.data.train, b.data.test, b.specs);
  p.run_incremental(1, b.data.train, b.data.test, b.specs);

  const std::string a = "/tmp/fscil_ckpt_roundtrip_a.bin";
  const std::string c = "/tmp/fscil_ckpt_roundtrip_b.bin";
  save_checkpoint(a, p.state());
  PipelineState loaded = load_checkpoint(a);
  CHECK(loaded.cfg == p.state().cfg);
  CHECK(loaded.completed_session == 1);
  CHECK(loaded.head == p.state().head);
  CHECK(loaded.backbone.frozen());
  CHECK(loaded.backbone.checksum() == p.state().backbone.checksum());
  CHECK(loaded.tracks == p.state().tracks);
  CHECK(loaded.data_fingerprint == p.state().data_fingerprint);
  save_checkpoint(c, loaded);
  CHECK(slurp(a) == slurp(c));
  std::remove(a.c_str());
  std::remove(c.c_str());
}

TEST_CASE("a resumed run finishes exactly like an uninterrupted one") {
  const Bench b = bench();
  Pipeline continuous(b.cfg);
  continuous.run_all(b.data.train, b.data.test, b.specs);

  Pipeline first(b.cfg);
  first.run_base(b.data.train, b.data.test, b.specs);
  const std::string mid = "/tmp/fscil_ckpt_mid.bin";
  save_checkpoint(mid, first.state());

  Pipeline resumed(load_checkpoint(mid));
  resumed.run_incremental(1, b.data.train, b.data.test, b.specs);
  resumed.run_incremental(2, b.data.train, b.data.test, b.specs);

  CHECK(resumed.state().head == continuous.state().head);
  CHECK(resumed.state().tracks == continuous.state().tracks);
  CHECK(resumed.state().backbone.checksum() == continuous.state().backbone.checksum());

  const std::string fa = "/tmp/fscil_ckpt_final_a.bin";
  const std::string fb = "/tmp/fscil_ckpt_final_b.bin";
  save_checkpoint(fa, continuous.state());
  save_checkpoint(fb, resumed.state());
  CHECK(slurp(fa) == slurp(fb));
  std::remove(mid.c_str());
  std::remove(fa.c_str());
  std::remove(fb.c_str());
}

TEST_CASE("config mismatch is caught before resuming") {
  const Bench b = bench();
  Pipeline p(b.cfg);
  p.run_base(b.data.train, b.data.test, b.specs);
  CHECK_NOTHROW(require_same_config(p.state(), b.cfg));
  PipelineConfig other = b.cfg;
  other.seed += 1;
  CHECK_THROWS_AS(require_same_config(p.state(), other), ConfigError);
  PipelineConfig other2 = b.cfg;
  other2.kd_beta = 0.7;
  CHECK_THROWS_AS(require_same_config(p.state(), other2), ConfigError);
}

TEST_CASE("corrupt checkpoint files are rejected") {
  const Bench b = bench();
  Pipeline p(b.cfg);
  p.run_base(b.data.train, b.data.test, b.specs);
  const std::string good_path = "/tmp/fscil_ckpt_corrupt.bin";
  save_checkpoint(good_path, p.state());
  const std::string good = slurp(good_path);

  CHECK_THROWS_AS(load_checkpoint("/tmp/fscil_ckpt_missing.bin"), IoError);

  spit(good_path, "NOTACKPT" + good.substr(8));
  CHECK_THROWS_AS(load_checkpoint(good_path), ParseError);

  spit(good_path, good.substr(0, good.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(good_path), ParseError);

  spit(good_path, good + "x");
  CHECK_THROWS_AS(load_checkpoint(good_path), ParseError);

  spit(good_path, good);
  CHECK_NOTHROW(load_checkpoint(good_path));
  std::remove(good_path.c_str());
}

TEST_CASE("an untrained state checkpoints too") {
  const PipelineConfig cfg = tiny_config();
  Pipeline p(cfg);
  const std::string path = "/tmp/fscil_ckpt_fresh.bin";
  save_checkpoint(path, p.state());
  const PipelineState loaded = load_checkpoint(path);
  CHECK(loaded.completed_session == -1);
  CHECK(loaded.cfg == cfg);
  CHECK(loaded.banks.empty());
  CHECK(loaded.capture_heads.empty());
  std::remove(path.c_str());
}
