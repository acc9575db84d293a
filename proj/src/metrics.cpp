#include "fscil/metrics.hpp"

#include <cmath>
#include <string>

#include "fscil/error.hpp"

namespace fscil {

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) {
    throw DimensionMismatch("accuracy: prediction/label count mismatch");
  }
  if (predictions.empty()) throw InvalidInput("accuracy: empty evaluation");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] == labels[i]) ++hit;
  }
  return 100.0 * static_cast<double>(hit) / static_cast<double>(labels.size());
}

double average_accuracy(const std::vector<double>& session_accuracies) {
  if (session_accuracies.empty()) throw InvalidInput("average_accuracy: no sessions");
  double s = 0.0;
  for (double a : session_accuracies) {
    if (!(a >= 0.0 && a <= 100.0)) throw InvalidInput("average_accuracy: value outside [0,100]");
    s += a;
  }
  return s / static_cast<double>(session_accuracies.size());
}

double performance_drop(const std::vector<double>& session_accuracies) {
  if (session_accuracies.empty()) throw InvalidInput("performance_drop: no sessions");
  for (double a : session_accuracies) {
    if (!(a >= 0.0 && a <= 100.0)) throw InvalidInput("performance_drop: value outside [0,100]");
  }
  return session_accuracies.front() - session_accuracies.back();
}

double round2(double x) {
  return std::floor(x * 100.0 + 0.5) / 100.0;
}

ConfusionMatrix ConfusionMatrix::from(const std::vector<int>& predictions,
                                      const std::vector<int>& labels,
                                      std::size_t n_classes) {
  if (predictions.size() != labels.size()) {
    throw DimensionMismatch("ConfusionMatrix: prediction/label count mismatch");
  }
  ConfusionMatrix m;
  m.counts.assign(n_classes, std::vector<std::int64_t>(n_classes, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int t = labels[i];
    const int p = predictions[i];
    if (t < 0 || static_cast<std::size_t>(t) >= n_classes || p < 0 ||
        static_cast<std::size_t>(p) >= n_classes) {
      throw InvalidInput("ConfusionMatrix: class id outside 0.." + std::to_string(n_classes - 1));
    }
    ++m.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return m;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t s = 0;
  for (const auto& row : counts) {
    for (std::int64_t v : row) s += v;
  }
  return s;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) s += counts[i][i];
  return s;
}

double ConfusionMatrix::overall_accuracy() const {
  const std::int64_t n = total();
  if (n == 0) throw InvalidInput("ConfusionMatrix: empty matrix");
  return 100.0 * static_cast<double>(trace()) / static_cast<double>(n);
}

std::vector<double> ConfusionMatrix::per_class_accuracy() const {
  std::vector<double> out(counts.size(), 0.0);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    std::int64_t row = 0;
    for (std::int64_t v : counts[c]) row += v;
    if (row == 0) throw InvalidInput("ConfusionMatrix: class " + std::to_string(c) +
                                     " has no test samples");
    out[c] = 100.0 * static_cast<double>(counts[c][c]) / static_cast<double>(row);
  }
  return out;
}

}  // namespace fscil
