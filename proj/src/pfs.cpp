#include "fscil/pfs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fscil/error.hpp"
#include "fscil/log.hpp"

namespace fscil {

double entropy(const Vec& probabilities) {
  if (probabilities.empty()) throw InvalidInput("entropy: empty distribution");
  double sum = 0.0;
  double h = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0)) throw InvalidInput("entropy: negative or non-finite probability");
    sum += p;
    if (p > 0.0) h -= p * std::log(p);
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidInput("entropy: probabilities do not sum to 1");
  return h;
}

ClassMemoryBank build_memory_bank(const std::vector<Vec>& class_features, int class_id,
                                  int session, std::size_t keep, Rng& rng) {
  if (class_features.empty()) throw InvalidInput("build_memory_bank: no features");
  const std::size_t dim = class_features.front().size();
  if (dim == 0) throw InvalidInput("build_memory_bank: zero dimension");

  ClassMemoryBank bank;
  bank.class_id = class_id;
  bank.session = session;
  bank.mean.assign(dim, 0.0);
  for (const Vec& f : class_features) {
    if (f.size() != dim) throw DimensionMismatch("build_memory_bank: ragged features");
    require_finite(f, "build_memory_bank");
    for (std::size_t i = 0; i < dim; ++i) bank.mean[i] += f[i];
  }
  for (double& v : bank.mean) v /= static_cast<double>(class_features.size());

  const std::size_t n = class_features.size();
  const std::size_t take = std::min(keep, n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // partial Fisher-Yates: the first `take` entries are a uniform subset
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(take);
  std::sort(idx.begin(), idx.end());  // keep original relative order
  bank.stored.reserve(take);
  for (std::size_t i : idx) bank.stored.push_back(class_features[i]);
  return bank;
}

std::size_t synthesize_pseudo_features(ClassMemoryBank& bank, const ClassifierHead& head,
                                       const SynthesisConfig& cfg, Rng& rng) {
  if (bank.stored.empty()) throw ProtocolError("synthesize_pseudo_features: bank has no stored features");
  if (bank.class_id < 0 || static_cast<std::size_t>(bank.class_id) >= head.classes()) {
    throw ProtocolError("synthesize_pseudo_features: bank class outside the head");
  }
  if (cfg.max_attempts < cfg.count) {
    throw InvalidInput("synthesize_pseudo_features: attempt budget below target count");
  }
  if (!(cfg.entropy_threshold > 0.0)) {
    throw InvalidInput("synthesize_pseudo_features: threshold must be positive");
  }
  if (bank.mean.size() != head.dim()) {
    throw DimensionMismatch("synthesize_pseudo_features: feature width mismatch");
  }

  bank.pseudo.clear();
  bank.entropy_threshold = cfg.entropy_threshold;
  bank.attempts = 0;
  const std::size_t dim = bank.mean.size();

  while (bank.pseudo.size() < cfg.count && bank.attempts < cfg.max_attempts) {
    ++bank.attempts;
    const std::size_t pick = static_cast<std::size_t>(rng.below(bank.stored.size()));
    const double alpha = rng.open_unit();
    const Vec& f = bank.stored[pick];
    Vec candidate(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      candidate[i] = alpha * f[i] + (1.0 - alpha) * bank.mean[i];
    }
    const Vec probs = softmax(head.logits(candidate));
    const double h = entropy(probs);
    const bool class_kept = argmax(probs) == static_cast<std::size_t>(bank.class_id);
    if (cfg.uncertainty_filter && !(class_kept && h < cfg.entropy_threshold)) continue;

    PseudoFeature pf;
    pf.value = std::move(candidate);
    pf.source_index = static_cast<int>(pick);
    pf.alpha = alpha;
    pf.entropy = h;
    bank.pseudo.push_back(std::move(pf));
  }

  std::size_t fallbacks = 0;
  while (bank.pseudo.size() < cfg.count) {
    PseudoFeature pf;
    pf.value = bank.mean;
    pf.source_index = 0;
    pf.alpha = 0.0;  // alpha*f + (1-alpha)*mean == mean for any f
    pf.entropy = entropy(softmax(head.logits(bank.mean)));
    pf.fallback = true;
    bank.pseudo.push_back(std::move(pf));
    ++fallbacks;
  }
  if (fallbacks > 0) {
    log::warn("pseudo-feature synthesis for class " + std::to_string(bank.class_id) +
              " fell back to the mean for " + std::to_string(fallbacks) + " of " +
              std::to_string(cfg.count) + " slots");
  }
  return fallbacks;
}

FeatureDataset assemble_replay_set(const std::vector<ClassMemoryBank>& banks,
                                   std::size_t old_classes, const FeatureDataset& current,
                                   const ReplayConfig& cfg) {
  std::vector<const ClassMemoryBank*> by_class(old_classes, nullptr);
  for (const auto& b : banks) {
    if (b.class_id < 0 || static_cast<std::size_t>(b.class_id) >= old_classes) continue;
    if (by_class[static_cast<std::size_t>(b.class_id)] != nullptr) {
      throw ProtocolError("assemble_replay_set: duplicate bank for class " +
                          std::to_string(b.class_id));
    }
    by_class[static_cast<std::size_t>(b.class_id)] = &b;
  }
  for (std::size_t c = 0; c < old_classes; ++c) {
    if (by_class[c] == nullptr) {
      throw ProtocolError("assemble_replay_set: missing bank for class " + std::to_string(c));
    }
  }

  FeatureDataset out;
  out.dim = current.dim;
  for (std::size_t c = 0; c < old_classes; ++c) {
    const ClassMemoryBank& b = *by_class[c];
    if (cfg.include_stored) {
      for (const Vec& f : b.stored) {
        if (f.size() != out.dim) throw DimensionMismatch("assemble_replay_set: width mismatch");
        out.push(f, b.class_id);
      }
    }
    for (const PseudoFeature& p : b.pseudo) {
      if (p.value.size() != out.dim) throw DimensionMismatch("assemble_replay_set: width mismatch");
      out.push(p.value, b.class_id);
    }
  }
  for (std::size_t i = 0; i < current.size(); ++i) {
    if (current.features[i].size() != out.dim) {
      throw DimensionMismatch("assemble_replay_set: current feature width mismatch");
    }
    out.push(current.features[i], current.labels[i]);
  }
  return out;
}

}  // namespace fscil
