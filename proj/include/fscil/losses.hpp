#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fscil/numerics.hpp"

namespace fscil {

// loss value plus analytic gradients; only fields relevant to the loss are filled
struct LossGrads {
  double value = 0.0;
  Vec dlogits;
  Vec dfeature;
  Vec danchor;
  Vec dpositive;
  Vec dnegative;
};

LossGrads ce_loss(const Vec& logits, std::size_t label);

// hinge on (margin + d(a,p) - d(a,n)); subgradient at the kink is zero
LossGrads triplet_loss(const Vec& anchor, const Vec& positive, const Vec& negative,
                       double margin);

// Running per-class feature centers, EMA-updated from batch class means.
// A center becomes live the first time its class appears in a batch.
class CenterBank {
 public:
  CenterBank() = default;
  CenterBank(std::size_t classes, std::size_t dim, double ema_rate);

  std::size_t classes() const { return centers_.rows(); }
  std::size_t dim() const { return centers_.cols(); }
  double ema_rate() const { return ema_rate_; }

  bool initialized(std::size_t c) const;
  std::size_t initialized_count() const;
  Vec center(std::size_t c) const;  // throws ProtocolError when not live yet
  void set_center(std::size_t c, const Vec& v);

  // update before computing the batch losses
  void update(const Mat& features, const std::vector<std::size_t>& labels);

  const Mat& raw() const { return centers_; }
  Mat& raw() { return centers_; }
  const std::vector<std::uint8_t>& live() const { return live_; }
  std::vector<std::uint8_t>& live() { return live_; }

 private:
  Mat centers_;
  std::vector<std::uint8_t> live_;
  double ema_rate_ = 0.1;
};

// pull toward the own-class center against the nearest other center:
// max(0, margin + ||f - c_y|| - min_{j != y} ||c_y - c_j||)
// Gradient flows to the feature only; nearest-center ties take the lowest index.
LossGrads ct_loss(const Vec& feature, std::size_t label, const CenterBank& centers,
                  double margin);

enum class KdDirection { forward, reverse };  // forward = teacher as target

// KL between tempered softmaxes of teacher and student logits; gradient is
// with respect to the student. No extra temperature-squared rescaling.
LossGrads kd_loss(const Vec& student_logits, const Vec& teacher_logits,
                  double temperature, KdDirection direction = KdDirection::forward);

double total_base_loss(double cls, double ct, double lambda);
double total_incremental_loss(double replay_ce, double kd, double beta);

}  // namespace fscil
