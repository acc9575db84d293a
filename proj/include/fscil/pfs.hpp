#pragma once

#include <cstddef>
#include <vector>

#include "fscil/backbone.hpp"
#include "fscil/datagen.hpp"
#include "fscil/numerics.hpp"
#include "fscil/rng.hpp"

namespace fscil {

// one synthesized stand-in for an old-class feature
struct PseudoFeature {
  Vec value;
  int source_index = -1;  // index into the bank's stored features
  double alpha = 0.0;     // blend weight toward the real feature
  double entropy = 0.0;   // of the capturing head's prediction
  bool fallback = false;  // attempt budget ran out, value is the class mean
};

// everything remembered about one class after its session closes
struct ClassMemoryBank {
  int class_id = -1;
  int session = -1;
  Vec mean;                    // over all class features at capture time
  std::vector<Vec> stored;     // uniform random subset of the real features
  std::vector<PseudoFeature> pseudo;
  double entropy_threshold = 0.0;  // absolute nats used at capture
  std::size_t attempts = 0;        // candidate draws consumed
};

// Shannon entropy in nats; input must be a probability distribution
double entropy(const Vec& probabilities);

// mean over every feature plus a uniformly drawn stored subset of size
// min(keep, n); the subset preserves the original relative order
ClassMemoryBank build_memory_bank(const std::vector<Vec>& class_features, int class_id,
                                  int session, std::size_t keep, Rng& rng);

struct SynthesisConfig {
  std::size_t count = 10;          // pseudo-features to produce
  double entropy_threshold = 0.0;  // absolute nats
  std::size_t max_attempts = 0;    // must be >= count
  bool uncertainty_filter = true;  // gate candidates on argmax + entropy
};

// Draws candidates alpha*f + (1-alpha)*mean with alpha in (0,1) and f a
// stored feature; a candidate passes when the head still predicts the bank's
// class and the prediction entropy stays under the threshold. Slots left
// after max_attempts are filled with the class mean (alpha = 0), flagged
// fallback. Returns the number of fallback slots.
std::size_t synthesize_pseudo_features(ClassMemoryBank& bank, const ClassifierHead& head,
                                       const SynthesisConfig& cfg, Rng& rng);

struct ReplayConfig {
  bool include_stored = true;  // real stored features join the pseudo ones
};

// Old-class features (class-ascending, stored then pseudo) followed by the
// current session's features in their original order. Banks must cover every
// old class exactly once.
FeatureDataset assemble_replay_set(const std::vector<ClassMemoryBank>& banks,
                                   std::size_t old_classes, const FeatureDataset& current,
                                   const ReplayConfig& cfg);

}  // namespace fscil
