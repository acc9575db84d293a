#include "fscil/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fscil/error.hpp"

namespace fscil {

LossGrads ce_loss(const Vec& logits, std::size_t label) {
  if (label >= logits.size()) throw InvalidInput("ce_loss: label out of range");
  const Vec lp = log_softmax(logits);
  LossGrads out;
  out.value = -lp[label];
  out.dlogits.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out.dlogits[i] = std::exp(lp[i]);
  out.dlogits[label] -= 1.0;
  return out;
}

LossGrads triplet_loss(const Vec& anchor, const Vec& positive, const Vec& negative,
                       double margin) {
  if (margin < 0.0) throw InvalidInput("triplet_loss: negative margin");
  if (anchor.size() != positive.size() || anchor.size() != negative.size()) {
    throw DimensionMismatch("triplet_loss: length mismatch");
  }
  require_finite(anchor, "triplet_loss");
  require_finite(positive, "triplet_loss");
  require_finite(negative, "triplet_loss");

  const double dp = euclidean_distance(anchor, positive);
  const double dn = euclidean_distance(anchor, negative);
  const double arg = margin + dp - dn;

  LossGrads out;
  const std::size_t d = anchor.size();
  out.danchor.assign(d, 0.0);
  out.dpositive.assign(d, 0.0);
  out.dnegative.assign(d, 0.0);
  if (arg <= 0.0) return out;

  out.value = arg;
  for (std::size_t i = 0; i < d; ++i) {
    if (dp > 0.0) {
      const double g = (anchor[i] - positive[i]) / dp;
      out.danchor[i] += g;
      out.dpositive[i] -= g;
    }
    if (dn > 0.0) {
      const double g = (anchor[i] - negative[i]) / dn;
      out.danchor[i] -= g;
      out.dnegative[i] += g;
    }
  }
  return out;
}

CenterBank::CenterBank(std::size_t classes, std::size_t dim, double ema_rate)
    : centers_(classes, dim), live_(classes, 0), ema_rate_(ema_rate) {
  if (!(ema_rate > 0.0 && ema_rate <= 1.0)) {
    throw InvalidInput("CenterBank: ema rate outside (0,1]");
  }
}

bool CenterBank::initialized(std::size_t c) const {
  if (c >= live_.size()) throw InvalidInput("CenterBank: class out of range");
  return live_[c] != 0;
}

std::size_t CenterBank::initialized_count() const {
  std::size_t n = 0;
  for (auto f : live_) n += f != 0 ? 1 : 0;
  return n;
}

Vec CenterBank::center(std::size_t c) const {
  if (!initialized(c)) throw ProtocolError("CenterBank: center not initialized");
  return centers_.row_vec(c);
}

void CenterBank::set_center(std::size_t c, const Vec& v) {
  if (c >= live_.size()) throw InvalidInput("CenterBank: class out of range");
  centers_.set_row(c, v);
  live_[c] = 1;
}

void CenterBank::update(const Mat& features, const std::vector<std::size_t>& labels) {
  if (features.rows() != labels.size()) throw DimensionMismatch("CenterBank: batch mismatch");
  if (features.cols() != dim()) throw DimensionMismatch("CenterBank: feature width mismatch");
  if (!all_finite(features)) throw InvalidInput("CenterBank: non-finite features");
  // class-ascending batch means keep the update order fixed
  for (std::size_t c = 0; c < classes(); ++c) {
    Vec mean(dim(), 0.0);
    std::size_t count = 0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
      if (labels[r] != c) continue;
      const double* f = features.row(r);
      for (std::size_t i = 0; i < dim(); ++i) mean[i] += f[i];
      ++count;
    }
    if (count == 0) continue;
    for (double& v : mean) v /= static_cast<double>(count);
    if (live_[c] == 0) {
      centers_.set_row(c, mean);
      live_[c] = 1;
    } else {
      double* ctr = centers_.row(c);
      for (std::size_t i = 0; i < dim(); ++i) {
        ctr[i] += ema_rate_ * (mean[i] - ctr[i]);
      }
    }
  }
  for (std::size_t l : labels) {
    if (l >= classes()) throw InvalidInput("CenterBank: label out of range");
  }
}

LossGrads ct_loss(const Vec& feature, std::size_t label, const CenterBank& centers,
                  double margin) {
  if (margin < 0.0) throw InvalidInput("ct_loss: negative margin");
  if (feature.size() != centers.dim()) throw DimensionMismatch("ct_loss: feature width mismatch");
  require_finite(feature, "ct_loss");
  if (label >= centers.classes() || !centers.initialized(label)) {
    throw ProtocolError("ct_loss: own-class center not initialized");
  }

  const Vec cy = centers.center(label);
  double dmin = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t j = 0; j < centers.classes(); ++j) {
    if (j == label || !centers.initialized(j)) continue;
    const double d = euclidean_distance(cy, centers.center(j));
    if (d < dmin) {  // strict: ties keep the lowest index
      dmin = d;
      found = true;
    }
  }
  if (!found) throw ProtocolError("ct_loss: needs a second initialized center");

  const double dpos = euclidean_distance(feature, cy);
  const double arg = margin + dpos - dmin;

  LossGrads out;
  out.dfeature.assign(feature.size(), 0.0);
  if (arg <= 0.0) return out;

  out.value = arg;
  if (dpos > 0.0) {
    for (std::size_t i = 0; i < feature.size(); ++i) {
      out.dfeature[i] = (feature[i] - cy[i]) / dpos;
    }
  }
  return out;
}

LossGrads kd_loss(const Vec& student_logits, const Vec& teacher_logits,
                  double temperature, KdDirection direction) {
  if (student_logits.size() != teacher_logits.size()) {
    throw DimensionMismatch("kd_loss: logit length mismatch");
  }
  if (student_logits.empty()) throw InvalidInput("kd_loss: empty logits");
  if (!(temperature > 0.0)) throw InvalidInput("kd_loss: temperature must be positive");

  const Vec lp_t = log_softmax(teacher_logits, temperature);
  const Vec lp_s = log_softmax(student_logits, temperature);
  const std::size_t n = lp_t.size();

  LossGrads out;
  out.dlogits.assign(n, 0.0);
  if (direction == KdDirection::forward) {
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = std::exp(lp_t[i]);
      kl += p * (lp_t[i] - lp_s[i]);
      out.dlogits[i] = (std::exp(lp_s[i]) - p) / temperature;
    }
    out.value = std::max(0.0, kl);
  } else {
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      kl += std::exp(lp_s[i]) * (lp_s[i] - lp_t[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double q = std::exp(lp_s[i]);
      out.dlogits[i] = q / temperature * ((lp_s[i] - lp_t[i]) - kl);
    }
    out.value = std::max(0.0, kl);
  }
  return out;
}

double total_base_loss(double cls, double ct, double lambda) {
  if (lambda < 0.0) throw InvalidInput("total_base_loss: negative weight");
  return cls + lambda * ct;
}

double total_incremental_loss(double replay_ce, double kd, double beta) {
  if (beta < 0.0) throw InvalidInput("total_incremental_loss: negative weight");
  return replay_ce + beta * kd;
}

}  // namespace fscil
