#pragma once

#include <cstdint>
#include <vector>

#include "fscil/numerics.hpp"

namespace fscil {

// percent correct
double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

// unweighted mean over sessions, percent
double average_accuracy(const std::vector<double>& session_accuracies);

// first minus last session accuracy, percentage points
double performance_drop(const std::vector<double>& session_accuracies);

// half-up to two decimals; applied at serialization boundaries only
double round2(double x);

struct ConfusionMatrix {
  std::vector<std::vector<std::int64_t>> counts;  // [true][predicted]

  static ConfusionMatrix from(const std::vector<int>& predictions,
                              const std::vector<int>& labels, std::size_t n_classes);

  std::size_t classes() const { return counts.size(); }
  std::int64_t total() const;
  std::int64_t trace() const;
  double overall_accuracy() const;                 // percent
  std::vector<double> per_class_accuracy() const;  // percent per true class

  friend bool operator==(const ConfusionMatrix& a, const ConfusionMatrix& b) = default;
};

}  // namespace fscil
