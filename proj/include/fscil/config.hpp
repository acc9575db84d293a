#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fscil/datagen.hpp"
#include "fscil/losses.hpp"

namespace fscil {

// Sectioned key = value text, order-preserving. '#' and ';' start comments.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "<string>");
  static Config parse_file(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const;
  void set(const std::string& section, const std::string& key, const std::string& value);

  using Section = std::pair<std::string, std::vector<std::pair<std::string, std::string>>>;
  const std::vector<Section>& sections() const { return sections_; }

  std::string to_text() const;

 private:
  std::vector<Section> sections_;
};

enum class ThresholdMode { fraction, absolute };
enum class Similarity { cosine, euclidean };
enum class Track { softmax, ncm, both };

// every knob of a run, fully resolved; defaults follow the reference recipe
struct PipelineConfig {
  // data
  std::size_t base_classes = 20;
  std::size_t incremental_sessions = 4;
  std::size_t ways = 2;
  std::size_t shots = 5;
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 100;
  std::size_t image_size = 32;
  JitterConfig jitter;

  // model
  std::vector<std::size_t> hidden = {256, 128};
  std::size_t feature_dim = 64;
  bool head_bias = false;

  // base training
  std::size_t s1_epochs = 100;
  std::size_t s1_batch = 32;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double lambda_ct = 0.05;
  double margin = 1.0;
  double center_ema = 0.1;
  std::size_t virtual_fold = 1;

  // head calibration on the retained exemplars
  std::size_t s2_epochs = 50;
  std::size_t s2_batch = 32;
  double s2_lr = 0.1;
  std::size_t stored_per_class = 5;

  // incremental sessions
  std::size_t s3_epochs = 50;
  std::size_t s3_batch = 32;
  double s3_lr = 0.1;
  std::size_t pseudo_per_class = 10;
  double kd_temperature = 3.0;
  double kd_beta = 0.4;
  KdDirection kd_direction = KdDirection::forward;
  bool replay_stored = true;

  // pseudo-feature screening
  double entropy_threshold = 0.5;
  ThresholdMode threshold_mode = ThresholdMode::fraction;
  std::size_t max_attempt_factor = 100;

  // evaluation
  Track track = Track::both;
  Similarity ncm_similarity = Similarity::cosine;

  // run
  std::uint64_t seed = 7;
  double epoch_multiplier = 1.0;

  // component switches
  bool vcg = true;
  bool ct = true;
  bool pfs = true;
  bool us = true;

  static PipelineConfig from(const Config& raw);
  void validate() const;  // throws ConfigError
  Config echo() const;    // fully populated, parse(echo().to_text()) round-trips

  // epoch counts after the multiplier
  std::size_t effective_epochs(std::size_t epochs) const;

  std::size_t total_classes() const {
    return base_classes + incremental_sessions * ways;
  }

  friend bool operator==(const PipelineConfig& a, const PipelineConfig& b) = default;
};

// comma-separated switch names, e.g. "vcg,ct"; throws ConfigError on unknown names
void apply_ablation(PipelineConfig& cfg, const std::string& list);

}  // namespace fscil
