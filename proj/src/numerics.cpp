#include "fscil/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fscil {

bool all_finite(const double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(p[i])) return false;
  }
  return true;
}

bool all_finite(const Vec& v) { return all_finite(v.data(), v.size()); }

bool all_finite(const Mat& m) { return all_finite(m.data(), m.size()); }

void require_finite(const Vec& v, const char* what) {
  if (!all_finite(v)) throw InvalidInput(std::string(what) + ": non-finite value");
}

double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw DimensionMismatch("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vec& v) { return std::sqrt(dot(v, v)); }

double logsumexp(const Vec& z) {
  if (z.empty()) throw InvalidInput("logsumexp: empty input");
  require_finite(z, "logsumexp");
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

Vec softmax(const Vec& logits, double temperature) {
  if (logits.empty()) throw InvalidInput("softmax: empty input");
  if (!(temperature > 0.0)) throw InvalidInput("softmax: temperature must be positive");
  require_finite(logits, "softmax");
  const double m = *std::max_element(logits.begin(), logits.end());
  Vec p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - m) / temperature);
    s += p[i];
  }
  for (double& v : p) v /= s;
  return p;
}

Vec log_softmax(const Vec& logits, double temperature) {
  if (logits.empty()) throw InvalidInput("log_softmax: empty input");
  if (!(temperature > 0.0)) throw InvalidInput("log_softmax: temperature must be positive");
  require_finite(logits, "log_softmax");
  Vec scaled(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) scaled[i] = logits[i] / temperature;
  const double lse = logsumexp(scaled);
  for (double& v : scaled) v -= lse;
  return scaled;
}

double euclidean_distance(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw DimensionMismatch("euclidean_distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double cosine_similarity(const Vec& a, const Vec& b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw DegenerateInput("cosine_similarity: zero-norm vector");
  return dot(a, b) / (na * nb);
}

std::size_t argmax(const Vec& v) {
  if (v.empty()) throw InvalidInput("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

Vec finite_diff_gradient(const std::function<double(const Vec&)>& f, const Vec& x,
                         double h) {
  if (!(h >= 1e-6 && h <= 1e-3)) {
    throw InvalidInput("finite_diff_gradient: step size outside [1e-6, 1e-3]");
  }
  require_finite(x, "finite_diff_gradient");
  Vec g(x.size());
  Vec probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    probe[i] = xi + h;
    const double up = f(probe);
    probe[i] = xi - h;
    const double dn = f(probe);
    probe[i] = xi;
    if (!std::isfinite(up) || !std::isfinite(dn)) {
      throw InvalidInput("finite_diff_gradient: non-finite function value");
    }
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace fscil
