#pragma once

#include <cstdint>
#include <vector>

#include "fscil/numerics.hpp"
#include "fscil/rng.hpp"

namespace fscil {

struct LinearLayer {
  Mat weight;  // out*in
  Vec bias;    // out
};

struct BackboneGrads {
  std::vector<Mat> dweight;
  std::vector<Vec> dbias;
  void reset();
};

// Feature extractor: fully connected stack with a rectifier after every
// layer except the last. Weights and biases start uniform in
// [-1/sqrt(fan_in), 1/sqrt(fan_in)].
class MlpBackbone {
 public:
  MlpBackbone() = default;
  // widths = {input_dim, hidden..., feature_dim}, at least two entries
  MlpBackbone(const std::vector<std::size_t>& widths, Rng& rng);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  const std::vector<LinearLayer>& layers() const { return layers_; }
  std::vector<LinearLayer>& layers() { return layers_; }

  Vec forward(const Vec& x) const;
  Mat forward(const Mat& x) const;  // one sample per row

  struct Cache {
    std::vector<Mat> inputs;   // input to each layer
    std::vector<Mat> preacts;  // pre-rectifier values of hidden layers
  };
  Mat forward_cached(const Mat& x, Cache& cache) const;

  // accumulates parameter gradients for the batch; dfeat is n*output_dim
  void backward(const Cache& cache, const Mat& dfeat, BackboneGrads& grads) const;

  BackboneGrads make_grads() const;

  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }
  void thaw() { frozen_ = false; }

  // bit-level digest of all parameters, for freeze verification
  std::uint64_t checksum() const;

 private:
  std::vector<LinearLayer> layers_;
  bool frozen_ = false;
};

// One weight row per class over backbone features; logits are inner
// products, optionally plus a per-class bias.
class ClassifierHead {
 public:
  ClassifierHead() = default;
  ClassifierHead(std::size_t dim, std::size_t classes, bool bias, Rng& rng);

  std::size_t dim() const { return weight_.cols(); }
  std::size_t classes() const { return weight_.rows(); }
  bool has_bias() const { return has_bias_; }

  Vec logits(const Vec& feature) const;
  Mat logits(const Mat& features) const;

  Vec class_vector(std::size_t c) const { return weight_.row_vec(c); }
  void set_class_vector(std::size_t c, const Vec& v) { weight_.set_row(c, v); }
  Mat& weight() { return weight_; }
  const Mat& weight() const { return weight_; }
  Vec& bias() { return bias_; }
  const Vec& bias() const { return bias_; }

  // appends one class per prototype; existing weights are untouched
  void extend(const std::vector<Vec>& prototypes);

  // keeps the first n classes bit-identically, drops the rest
  ClassifierHead truncated(std::size_t n) const;

  std::uint64_t checksum() const;

  friend bool operator==(const ClassifierHead& a, const ClassifierHead& b) = default;

 private:
  Mat weight_;  // classes*dim
  Vec bias_;    // classes when enabled, else empty
  bool has_bias_ = false;
};

// v <- momentum*v + grad + weight_decay*w;  w <- w - lr*v
// Buffers are created on registration; a fresh optimizer starts each
// training stage, so checkpoints never carry optimizer state.
class SgdMomentum {
 public:
  SgdMomentum(double lr, double momentum, double weight_decay);

  std::size_t register_param(std::size_t size);
  void step(std::size_t handle, double* w, const double* g, std::size_t size);

  double lr() const { return lr_; }
  void set_lr(double lr);

 private:
  double lr_;
  double momentum_;
  double weight_decay_;
  std::vector<Vec> velocity_;
};

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h = 0xCBF29CE484222325ULL);

}  // namespace fscil
