#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fscil/backbone.hpp"
#include "fscil/config.hpp"
#include "fscil/datagen.hpp"
#include "fscil/metrics.hpp"
#include "fscil/pfs.hpp"

namespace fscil {

// One entry of the incremental protocol. Indices point into the shared train
// and test pools; evaluation after session k uses the union of the test
// indices of sessions 0..k.
struct SessionSpec {
  std::size_t id = 0;
  std::vector<int> classes;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;

  friend bool operator==(const SessionSpec&, const SessionSpec&) = default;
};

// session that introduces class c: 0 for base classes, then one per block of
// `ways` classes
std::size_t session_of_class(int c, const PipelineConfig& cfg);

// classes introduced by session s, ascending
std::vector<int> classes_of_session(std::size_t s, const PipelineConfig& cfg);

// Builds the canonical split: session 0 owns every train sample of the base
// classes, later sessions own `shots` uniformly chosen samples per class.
// Test samples always go to the session of their class. Labels must be
// grouped per the config's class counts; rng drives only the shot choice.
std::vector<SessionSpec> make_session_specs(const std::vector<int>& train_labels,
                                            const std::vector<int>& test_labels,
                                            const PipelineConfig& cfg, Rng& rng);

// Checks counts, ranges, disjointness and coverage; throws ProtocolError.
void validate_protocol(const std::vector<SessionSpec>& specs,
                       const std::vector<int>& train_labels,
                       const std::vector<int>& test_labels, const PipelineConfig& cfg);

// bit-level digest of both pools, stored in checkpoints to pin the data
std::uint64_t dataset_fingerprint(const ImageSet& train, const ImageSet& test);

struct SessionResult {
  std::size_t session = 0;
  double accuracy = 0.0;           // percent
  std::vector<double> per_class;   // percent, index = class id
  ConfusionMatrix confusion;

  friend bool operator==(const SessionResult&, const SessionResult&) = default;
};

struct TrackResults {
  std::string name;  // "softmax" or "ncm"
  std::vector<SessionResult> sessions;

  friend bool operator==(const TrackResults&, const TrackResults&) = default;
};

// feature-space spread after the base stage, on the real base training set
struct SeparationStats {
  double intra = 0.0;  // mean distance to the own class mean
  double inter = 0.0;  // smallest distance between two class means
  double ratio() const { return intra / inter; }

  friend bool operator==(const SeparationStats&, const SeparationStats&) = default;
};

struct PipelineState {
  PipelineConfig cfg;
  int completed_session = -1;  // -1 = nothing trained yet
  MlpBackbone backbone;
  ClassifierHead head;
  std::vector<ClassMemoryBank> banks;        // index = class id, grows per session
  std::vector<ClassifierHead> capture_heads; // index = session, teacher snapshots
  std::vector<TrackResults> tracks;
  std::vector<double> stage1_epoch_loss;
  SeparationStats separation;
  std::size_t pseudo_fallbacks = 0;
  std::uint64_t data_fingerprint = 0;
  std::vector<std::string> warnings;
};

// The full training protocol over a fixed dataset. Construction binds the
// config; stages mutate the held state, which checkpointing serializes.
class Pipeline {
 public:
  explicit Pipeline(const PipelineConfig& cfg);
  explicit Pipeline(PipelineState state);  // resume

  // base stage: representation training, head calibration, first evaluation
  void run_base(const ImageSet& train, const ImageSet& test,
                const std::vector<SessionSpec>& specs);

  // one incremental session; requires completed_session == session - 1
  void run_incremental(std::size_t session, const ImageSet& train, const ImageSet& test,
                       const std::vector<SessionSpec>& specs);

  // base stage plus every incremental session
  void run_all(const ImageSet& train, const ImageSet& test,
               const std::vector<SessionSpec>& specs);

  // representation training only, plus separation diagnostics; no head
  // calibration, no evaluation
  void run_representation_only(const ImageSet& train,
                               const std::vector<SessionSpec>& specs);

  const PipelineState& state() const { return state_; }
  PipelineState& state() { return state_; }

 private:
  void train_stage1(const ImageSet& train, const std::vector<SessionSpec>& specs);
  void calibrate_head(const ImageSet& train, const std::vector<SessionSpec>& specs);
  void evaluate(std::size_t upto_session, const ImageSet& test,
                const std::vector<SessionSpec>& specs);
  ImageSet gather(const ImageSet& pool, const std::vector<std::size_t>& indices) const;

  PipelineState state_;
};

}  // namespace fscil
