#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fscil/kernels.hpp"
#include "fscil/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using fscil::Rng;
namespace k = fscil::kernels;

std::vector<double> random_block(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

double time_ms(const std::function<void()>& fn, std::size_t repeat) {
  fn();  // warm-up, also primes the thread pool
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < repeat; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() /
         static_cast<double>(repeat);
}

bool report(const char* name, const std::string& shape, double ref_ms, double omp_ms,
            const std::vector<double>& ref_out, const std::vector<double>& omp_out) {
  const bool equal = ref_out.size() == omp_out.size() &&
                     std::memcmp(ref_out.data(), omp_out.data(),
                                 ref_out.size() * sizeof(double)) == 0;
  std::printf("%-18s %-24s ref %8.3f ms   omp %8.3f ms   x%-5.2f %s\n", name,
              shape.c_str(), ref_ms, omp_ms, ref_ms / omp_ms,
              equal ? "bitwise equal" : "MISMATCH");
  return equal;
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t n = 256;
  std::size_t in = 1728;  // 24*24*3 pixels
  std::size_t out = 256;
  std::size_t repeat = 20;
  std::uint64_t seed = 1;

  CLI::App app{"serial-vs-parallel kernel benchmark"};
  app.add_option("--batch", n, "rows per call");
  app.add_option("--in", in, "input width");
  app.add_option("--out", out, "output width");
  app.add_option("--repeat", repeat, "timed iterations per kernel");
  app.add_option("--seed", seed, "input data seed");
  CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (compiled without OpenMP; both columns are serial)\n");
#endif

  Rng rng(seed);
  const std::vector<double> x = random_block(n * in, rng);
  const std::vector<double> w = random_block(out * in, rng);
  const std::vector<double> bias = random_block(out, rng);
  const std::vector<double> dy = random_block(n * out, rng);
  char shape[64];
  std::snprintf(shape, sizeof shape, "n=%zu in=%zu out=%zu", n, in, out);

  bool ok = true;
  {
    std::vector<double> a(n * out), b(n * out);
    const double tr = time_ms([&] { k::ref::linear_forward(x.data(), n, in, w.data(), out, bias.data(), a.data()); }, repeat);
    const double to = time_ms([&] { k::linear_forward(x.data(), n, in, w.data(), out, bias.data(), b.data()); }, repeat);
    ok &= report("linear_forward", shape, tr, to, a, b);
  }
  {
    std::vector<double> a(out * in), b(out * in);
    const double tr = time_ms([&] {
      std::fill(a.begin(), a.end(), 0.0);
      k::ref::linear_grad_weight(dy.data(), x.data(), n, in, out, a.data());
    }, repeat);
    const double to = time_ms([&] {
      std::fill(b.begin(), b.end(), 0.0);
      k::linear_grad_weight(dy.data(), x.data(), n, in, out, b.data());
    }, repeat);
    ok &= report("linear_grad_weight", shape, tr, to, a, b);
  }
  {
    std::vector<double> a(out), b(out);
    const double tr = time_ms([&] {
      std::fill(a.begin(), a.end(), 0.0);
      k::ref::linear_grad_bias(dy.data(), n, out, a.data());
    }, repeat);
    const double to = time_ms([&] {
      std::fill(b.begin(), b.end(), 0.0);
      k::linear_grad_bias(dy.data(), n, out, b.data());
    }, repeat);
    ok &= report("linear_grad_bias", shape, tr, to, a, b);
  }
  {
    std::vector<double> a(n * in), b(n * in);
    const double tr = time_ms([&] { k::ref::linear_grad_input(dy.data(), w.data(), n, in, out, a.data()); }, repeat);
    const double to = time_ms([&] { k::linear_grad_input(dy.data(), w.data(), n, in, out, b.data()); }, repeat);
    ok &= report("linear_grad_input", shape, tr, to, a, b);
  }
  {
    std::vector<double> a(n * in), b(n * in);
    char sh[32];
    std::snprintf(sh, sizeof sh, "n=%zu", n * in);
    const double tr = time_ms([&] { k::ref::relu(x.data(), a.data(), n * in); }, repeat);
    const double to = time_ms([&] { k::relu(x.data(), b.data(), n * in); }, repeat);
    ok &= report("relu", sh, tr, to, a, b);
  }
  {
    const std::vector<double> da = random_block(n * in, rng);
    std::vector<double> a(n * in), b(n * in);
    char sh[32];
    std::snprintf(sh, sizeof sh, "n=%zu", n * in);
    const double tr = time_ms([&] { k::ref::relu_backward(x.data(), da.data(), a.data(), n * in); }, repeat);
    const double to = time_ms([&] { k::relu_backward(x.data(), da.data(), b.data(), n * in); }, repeat);
    ok &= report("relu_backward", sh, tr, to, a, b);
  }

  if (!ok) {
    std::fprintf(stderr, "error: parallel kernels diverged from the serial reference\n");
    return 1;
  }
  return 0;
}
