#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "fscil/error.hpp"

namespace fscil {

using Vec = std::vector<double>;

// dense row-major matrix
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* row(std::size_t r) { return data_.data() + r * cols_; }
  const double* row(std::size_t r) const { return data_.data() + r * cols_; }

  Vec row_vec(std::size_t r) const {
    return Vec(row(r), row(r) + cols_);
  }
  void set_row(std::size_t r, const Vec& v) {
    if (v.size() != cols_) throw DimensionMismatch("set_row: length mismatch");
    std::copy(v.begin(), v.end(), row(r));
  }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Mat& a, const Mat& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

bool all_finite(const double* p, std::size_t n);
bool all_finite(const Vec& v);
bool all_finite(const Mat& m);
void require_finite(const Vec& v, const char* what);

double dot(const Vec& a, const Vec& b);
double norm(const Vec& v);

// max-subtracted, never overflows for finite input
double logsumexp(const Vec& z);

// probabilities of z / temperature; strictly positive, sums to 1
Vec softmax(const Vec& logits, double temperature = 1.0);

// computed directly from the shifted logits, not as log(softmax(...))
Vec log_softmax(const Vec& logits, double temperature = 1.0);

double euclidean_distance(const Vec& a, const Vec& b);

// throws DegenerateInput when either vector has zero norm
double cosine_similarity(const Vec& a, const Vec& b);

// lowest index wins ties
std::size_t argmax(const Vec& v);

// central differences, one coordinate at a time; h must lie in [1e-6, 1e-3]
Vec finite_diff_gradient(const std::function<double(const Vec&)>& f, const Vec& x,
                         double h = 1e-5);

// |a - b| / max(1, |a|, |b|)
double relative_error(double a, double b);

}  // namespace fscil
