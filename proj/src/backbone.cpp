#include "fscil/backbone.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "fscil/kernels.hpp"

namespace fscil {

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

void BackboneGrads::reset() {
  for (auto& m : dweight) m.fill(0.0);
  for (auto& v : dbias) std::fill(v.begin(), v.end(), 0.0);
}

namespace {

void init_uniform(Mat& w, Vec& b, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
  for (double& v : b) v = rng.uniform(-bound, bound);
}

}  // namespace

MlpBackbone::MlpBackbone(const std::vector<std::size_t>& widths, Rng& rng) {
  if (widths.size() < 2) throw InvalidInput("MlpBackbone: need at least two widths");
  for (std::size_t w : widths) {
    if (w == 0) throw InvalidInput("MlpBackbone: zero layer width");
  }
  layers_.resize(widths.size() - 1);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    layers_[l].weight = Mat(widths[l + 1], widths[l]);
    layers_[l].bias.assign(widths[l + 1], 0.0);
    init_uniform(layers_[l].weight, layers_[l].bias, rng);
  }
}

std::size_t MlpBackbone::input_dim() const {
  return layers_.empty() ? 0 : layers_.front().weight.cols();
}

std::size_t MlpBackbone::output_dim() const {
  return layers_.empty() ? 0 : layers_.back().weight.rows();
}

Mat MlpBackbone::forward(const Mat& x) const {
  if (layers_.empty()) throw InvalidInput("MlpBackbone: uninitialized");
  if (x.cols() != input_dim()) throw DimensionMismatch("MlpBackbone: input width mismatch");
  if (!all_finite(x)) throw InvalidInput("MlpBackbone: non-finite input");
  Mat cur = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& lay = layers_[l];
    Mat next(cur.rows(), lay.weight.rows());
    kernels::linear_forward(cur.data(), cur.rows(), cur.cols(), lay.weight.data(),
                            lay.weight.rows(), lay.bias.data(), next.data());
    if (l + 1 < layers_.size()) {
      kernels::relu(next.data(), next.data(), next.size());
    }
    cur = std::move(next);
  }
  return cur;
}

Vec MlpBackbone::forward(const Vec& x) const {
  Mat m(1, x.size());
  m.set_row(0, x);
  return forward(m).row_vec(0);
}

Mat MlpBackbone::forward_cached(const Mat& x, Cache& cache) const {
  if (layers_.empty()) throw InvalidInput("MlpBackbone: uninitialized");
  if (x.cols() != input_dim()) throw DimensionMismatch("MlpBackbone: input width mismatch");
  cache.inputs.assign(layers_.size(), Mat());
  cache.preacts.assign(layers_.size(), Mat());
  Mat cur = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& lay = layers_[l];
    cache.inputs[l] = cur;
    Mat next(cur.rows(), lay.weight.rows());
    kernels::linear_forward(cur.data(), cur.rows(), cur.cols(), lay.weight.data(),
                            lay.weight.rows(), lay.bias.data(), next.data());
    if (l + 1 < layers_.size()) {
      cache.preacts[l] = next;
      kernels::relu(next.data(), next.data(), next.size());
    }
    cur = std::move(next);
  }
  return cur;
}

void MlpBackbone::backward(const Cache& cache, const Mat& dfeat, BackboneGrads& grads) const {
  if (cache.inputs.size() != layers_.size()) throw ProtocolError("backward: stale cache");
  if (grads.dweight.size() != layers_.size()) throw DimensionMismatch("backward: grads shape");
  Mat d = dfeat;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& lay = layers_[l];
    const Mat& in = cache.inputs[l];
    kernels::linear_grad_weight(d.data(), in.data(), in.rows(), in.cols(),
                                lay.weight.rows(), grads.dweight[l].data());
    kernels::linear_grad_bias(d.data(), d.rows(), d.cols(), grads.dbias[l].data());
    if (l > 0) {
      Mat dx(in.rows(), in.cols());
      kernels::linear_grad_input(d.data(), lay.weight.data(), d.rows(), in.cols(),
                                 lay.weight.rows(), dx.data());
      const Mat& pre = cache.preacts[l - 1];
      kernels::relu_backward(pre.data(), dx.data(), dx.data(), dx.size());
      d = std::move(dx);
    }
  }
}

BackboneGrads MlpBackbone::make_grads() const {
  BackboneGrads g;
  g.dweight.reserve(layers_.size());
  g.dbias.reserve(layers_.size());
  for (const auto& lay : layers_) {
    g.dweight.emplace_back(lay.weight.rows(), lay.weight.cols());
    g.dbias.emplace_back(lay.bias.size(), 0.0);
  }
  return g;
}

std::uint64_t MlpBackbone::checksum() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const auto& lay : layers_) {
    h = fnv1a(lay.weight.data(), lay.weight.size() * sizeof(double), h);
    h = fnv1a(lay.bias.data(), lay.bias.size() * sizeof(double), h);
  }
  return h;
}

ClassifierHead::ClassifierHead(std::size_t dim, std::size_t classes, bool bias, Rng& rng)
    : weight_(classes, dim), has_bias_(bias) {
  if (dim == 0) throw InvalidInput("ClassifierHead: zero feature dim");
  if (bias) bias_.assign(classes, 0.0);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& v : weight_.values()) v = rng.uniform(-bound, bound);
  for (double& v : bias_) v = rng.uniform(-bound, bound);
}

Mat ClassifierHead::logits(const Mat& features) const {
  if (features.cols() != dim()) throw DimensionMismatch("ClassifierHead: feature width mismatch");
  Mat out(features.rows(), classes());
  kernels::linear_forward(features.data(), features.rows(), features.cols(), weight_.data(),
                          weight_.rows(), has_bias_ ? bias_.data() : nullptr, out.data());
  return out;
}

Vec ClassifierHead::logits(const Vec& feature) const {
  Mat m(1, feature.size());
  m.set_row(0, feature);
  return logits(m).row_vec(0);
}

void ClassifierHead::extend(const std::vector<Vec>& prototypes) {
  const std::size_t old_rows = weight_.rows();
  Mat next(old_rows + prototypes.size(), dim());
  std::memcpy(next.data(), weight_.data(), weight_.size() * sizeof(double));
  for (std::size_t k = 0; k < prototypes.size(); ++k) {
    if (prototypes[k].size() != dim()) {
      throw DimensionMismatch("ClassifierHead::extend: prototype width mismatch");
    }
    require_finite(prototypes[k], "ClassifierHead::extend");
    next.set_row(old_rows + k, prototypes[k]);
  }
  weight_ = std::move(next);
  if (has_bias_) bias_.resize(old_rows + prototypes.size(), 0.0);
}

ClassifierHead ClassifierHead::truncated(std::size_t n) const {
  if (n > classes()) throw InvalidInput("ClassifierHead::truncated: more classes than present");
  ClassifierHead out;
  out.has_bias_ = has_bias_;
  out.weight_ = Mat(n, dim());
  std::memcpy(out.weight_.data(), weight_.data(), n * dim() * sizeof(double));
  if (has_bias_) out.bias_.assign(bias_.begin(), bias_.begin() + n);
  return out;
}

std::uint64_t ClassifierHead::checksum() const {
  std::uint64_t h = fnv1a(weight_.data(), weight_.size() * sizeof(double));
  h = fnv1a(bias_.data(), bias_.size() * sizeof(double), h);
  return h;
}

SgdMomentum::SgdMomentum(double lr, double momentum, double weight_decay)
    : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
  if (!(lr > 0.0)) throw InvalidInput("SgdMomentum: lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw InvalidInput("SgdMomentum: momentum in [0,1)");
  if (weight_decay < 0.0) throw InvalidInput("SgdMomentum: negative weight decay");
}

void SgdMomentum::set_lr(double lr) {
  if (!(lr > 0.0)) throw InvalidInput("SgdMomentum: lr must be positive");
  lr_ = lr;
}

std::size_t SgdMomentum::register_param(std::size_t size) {
  velocity_.emplace_back(size, 0.0);
  return velocity_.size() - 1;
}

void SgdMomentum::step(std::size_t handle, double* w, const double* g, std::size_t size) {
  if (handle >= velocity_.size() || velocity_[handle].size() != size) {
    throw DimensionMismatch("SgdMomentum::step: unknown parameter");
  }
  Vec& v = velocity_[handle];
  for (std::size_t i = 0; i < size; ++i) {
    v[i] = momentum_ * v[i] + g[i] + weight_decay_ * w[i];
    w[i] -= lr_ * v[i];
  }
}

}  // namespace fscil
