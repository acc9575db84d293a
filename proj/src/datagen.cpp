#include "fscil/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace fscil {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kBackground = 0.15;
constexpr std::size_t kGroupSize = 5;  // look-alike classes per group

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

struct Blob {
  double x, y, radius;
  double r, g, b;
};

// everything random about one image, drawn up front so rendering can run in parallel
struct RenderParams {
  double cx, cy;
  double brightness;
  double angle;
  std::uint64_t noise_state;
  std::vector<Blob> blobs;
};

RenderParams draw_params(const JitterConfig& jitter, std::size_t size, Rng& rng) {
  RenderParams p;
  const double half = static_cast<double>(size) / 2.0;
  p.cx = half + rng.uniform(-jitter.position, jitter.position);
  p.cy = half + rng.uniform(-jitter.position, jitter.position);
  p.brightness = 1.0 + rng.uniform(-jitter.brightness, jitter.brightness);
  p.angle = rng.uniform(0.0, 2.0 * kPi);
  p.noise_state = rng.next_u64();
  if (rng.next_double() < jitter.distractor_prob) {
    Blob b;
    b.x = rng.uniform(0.0, static_cast<double>(size));
    b.y = rng.uniform(0.0, static_cast<double>(size));
    b.radius = rng.uniform(1.5, 4.0);
    b.r = rng.next_double();
    b.g = rng.next_double();
    b.b = rng.next_double();
    p.blobs.push_back(b);
  }
  return p;
}

double shape_distance(PillShape shape, double qx, double qy, double radius, double aspect) {
  switch (shape) {
    case PillShape::circle:
      return std::sqrt(qx * qx + qy * qy) - radius;
    case PillShape::ellipse: {
      const double a = radius;
      const double b = radius * aspect;
      const double k = std::sqrt((qx / a) * (qx / a) + (qy / b) * (qy / b));
      return (k - 1.0) * std::min(a, b);
    }
    default: {  // capsule: segment of half-length L with rounded caps
      const double half_len = radius * (1.0 - aspect * 0.5);
      const double cap = radius * aspect;
      const double px = std::clamp(qx, -half_len, half_len);
      const double dx = qx - px;
      return std::sqrt(dx * dx + qy * qy) - cap;
    }
  }
}

std::vector<double> render_image(const PillClassSpec& spec, const RenderParams& p,
                                 std::size_t size, double noise_amp) {
  std::vector<double> img(size * size * 3);
  Rng noise(p.noise_state);
  const double radius = spec.scale * static_cast<double>(size) / 2.0;
  const double ca = std::cos(p.angle);
  const double sa = std::sin(p.angle);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double px = static_cast<double>(x) + 0.5;
      const double py = static_cast<double>(y) + 0.5;
      double r = kBackground, g = kBackground, b = kBackground;

      for (const Blob& blob : p.blobs) {
        const double d = std::hypot(px - blob.x, py - blob.y) - blob.radius;
        const double cov = clamp01(0.5 - d);
        r += cov * (blob.r - r);
        g += cov * (blob.g - g);
        b += cov * (blob.b - b);
      }

      // rotate into the pill frame
      const double ox = px - p.cx;
      const double oy = py - p.cy;
      const double qx = ca * ox + sa * oy;
      const double qy = -sa * ox + ca * oy;
      const double d = shape_distance(spec.shape, qx, qy, radius, spec.aspect);
      const double cov = clamp01(0.5 - d);
      if (cov > 0.0) {
        const double tex = 0.5 + 0.5 * std::sin(qx * spec.tex_fx + spec.tex_px) *
                                     std::sin(qy * spec.tex_fy + spec.tex_py);
        const double shade = 0.72 + 0.28 * tex;
        r += cov * (spec.r * shade - r);
        g += cov * (spec.g * shade - g);
        b += cov * (spec.b * shade - b);
      }

      r *= p.brightness;
      g *= p.brightness;
      b *= p.brightness;
      r += noise_amp * (2.0 * noise.next_double() - 1.0);
      g += noise_amp * (2.0 * noise.next_double() - 1.0);
      b += noise_amp * (2.0 * noise.next_double() - 1.0);

      const std::size_t at = (y * size + x) * 3;
      img[at] = clamp01(r);
      img[at + 1] = clamp01(g);
      img[at + 2] = clamp01(b);
    }
  }
  return img;
}

}  // namespace

std::vector<PillClassSpec> make_class_specs(std::size_t n_classes, Rng& rng) {
  std::vector<PillClassSpec> specs(n_classes);
  double base_h = 0.0, base_s = 0.0, base_v = 0.0, base_scale = 0.0;
  PillShape group_shape = PillShape::circle;
  for (std::size_t i = 0; i < n_classes; ++i) {
    if (i % kGroupSize == 0) {
      base_h = rng.uniform(0.0, 360.0);
      base_s = rng.uniform(0.55, 0.95);
      base_v = rng.uniform(0.55, 0.9);
      base_scale = rng.uniform(0.5, 0.72);
      group_shape = static_cast<PillShape>(rng.below(3));
    }
    PillClassSpec& s = specs[i];
    s.shape = group_shape;
    const double h = std::fmod(base_h + rng.uniform(-10.0, 10.0) + 360.0, 360.0);
    const double sat = clamp01(base_s + rng.uniform(-0.08, 0.08));
    const double val = clamp01(base_v + rng.uniform(-0.08, 0.08));
    hsv_to_rgb(h, sat, val, s.r, s.g, s.b);
    const double member = static_cast<double>(i % kGroupSize);
    s.scale = base_scale * (0.92 + 0.04 * member) + rng.uniform(-0.01, 0.01);
    s.aspect = rng.uniform(0.5, 0.7);
    s.tex_fx = rng.uniform(0.3, 1.3);
    s.tex_fy = rng.uniform(0.3, 1.3);
    s.tex_px = rng.uniform(0.0, 2.0 * kPi);
    s.tex_py = rng.uniform(0.0, 2.0 * kPi);
  }
  return specs;
}

GeneratedData generate_dataset(std::size_t n_classes, std::size_t per_class_train,
                               std::size_t per_class_test, const JitterConfig& jitter,
                               std::size_t image_size, Rng& rng) {
  if (n_classes == 0) throw InvalidInput("generate_dataset: no classes");
  if (image_size < 8) throw InvalidInput("generate_dataset: image size too small");
  if (jitter.position < 0.0 || jitter.brightness < 0.0 || jitter.noise < 0.0 ||
      jitter.distractor_prob < 0.0 || jitter.distractor_prob > 1.0) {
    throw InvalidInput("generate_dataset: bad jitter values");
  }

  GeneratedData out;
  out.specs = make_class_specs(n_classes, rng);
  out.train.height = out.train.width = image_size;
  out.test.height = out.test.width = image_size;
  out.train.samples.resize(n_classes * per_class_train);
  out.test.samples.resize(n_classes * per_class_test);

  struct Job {
    const PillClassSpec* spec;
    RenderParams params;
    ImageSample* target;
  };
  std::vector<Job> jobs;
  jobs.reserve(out.train.samples.size() + out.test.samples.size());
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t i = 0; i < per_class_train; ++i) {
      ImageSample& s = out.train.samples[c * per_class_train + i];
      s.label = static_cast<int>(c);
      jobs.push_back({&out.specs[c], draw_params(jitter, image_size, rng), &s});
    }
    for (std::size_t i = 0; i < per_class_test; ++i) {
      ImageSample& s = out.test.samples[c * per_class_test + i];
      s.label = static_cast<int>(c);
      jobs.push_back({&out.specs[c], draw_params(jitter, image_size, rng), &s});
    }
  }

#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < static_cast<std::int64_t>(jobs.size()); ++j) {
    Job& job = jobs[static_cast<std::size_t>(j)];
    job.target->pixels = render_image(*job.spec, job.params, image_size, jitter.noise);
  }
  return out;
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  v = mx;
  s = mx > 0.0 ? delta / mx : 0.0;
  if (delta <= 0.0) {
    h = 0.0;
    return;
  }
  if (mx == r) {
    h = 60.0 * std::fmod((g - b) / delta, 6.0);
  } else if (mx == g) {
    h = 60.0 * ((b - r) / delta + 2.0);
  } else {
    h = 60.0 * ((r - g) / delta + 4.0);
  }
  if (h < 0.0) h += 360.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  h = std::fmod(h, 360.0);
  if (h < 0.0) h += 360.0;
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r1 = 0.0, g1 = 0.0, b1 = 0.0;
  if (hp < 1.0) {
    r1 = c; g1 = x;
  } else if (hp < 2.0) {
    r1 = x; g1 = c;
  } else if (hp < 3.0) {
    g1 = c; b1 = x;
  } else if (hp < 4.0) {
    g1 = x; b1 = c;
  } else if (hp < 5.0) {
    r1 = x; b1 = c;
  } else {
    r1 = c; b1 = x;
  }
  const double m = v - c;
  r = r1 + m;
  g = g1 + m;
  b = b1 + m;
}

void hue_rotate(std::vector<double>& pixels, double degrees) {
  if (pixels.size() % 3 != 0) throw DimensionMismatch("hue_rotate: not an rgb buffer");
  for (std::size_t i = 0; i < pixels.size(); i += 3) {
    double h, s, v;
    rgb_to_hsv(pixels[i], pixels[i + 1], pixels[i + 2], h, s, v);
    hsv_to_rgb(h + degrees, s, v, pixels[i], pixels[i + 1], pixels[i + 2]);
  }
}

std::vector<double> rescale_about_center(const std::vector<double>& pixels,
                                         std::size_t height, std::size_t width,
                                         double factor) {
  if (pixels.size() != height * width * 3) {
    throw DimensionMismatch("rescale_about_center: buffer size mismatch");
  }
  if (!(factor > 0.0)) throw InvalidInput("rescale_about_center: factor must be positive");
  std::vector<double> out(pixels.size());
  const double cx = static_cast<double>(width) / 2.0;
  const double cy = static_cast<double>(height) / 2.0;
  const auto sample = [&](double sx, double sy, std::size_t ch) {
    // bilinear with clamp-to-edge
    sx = std::clamp(sx - 0.5, 0.0, static_cast<double>(width - 1));
    sy = std::clamp(sy - 0.5, 0.0, static_cast<double>(height - 1));
    const std::size_t x0 = static_cast<std::size_t>(sx);
    const std::size_t y0 = static_cast<std::size_t>(sy);
    const std::size_t x1 = std::min(x0 + 1, width - 1);
    const std::size_t y1 = std::min(y0 + 1, height - 1);
    const double fx = sx - static_cast<double>(x0);
    const double fy = sy - static_cast<double>(y0);
    const auto at = [&](std::size_t xx, std::size_t yy) {
      return pixels[(yy * width + xx) * 3 + ch];
    };
    const double top = at(x0, y0) + fx * (at(x1, y0) - at(x0, y0));
    const double bot = at(x0, y1) + fx * (at(x1, y1) - at(x0, y1));
    return top + fy * (bot - top);
  };
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double sx = cx + (static_cast<double>(x) + 0.5 - cx) / factor;
      const double sy = cy + (static_cast<double>(y) + 0.5 - cy) / factor;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        out[(y * width + x) * 3 + ch] = sample(sx, sy, ch);
      }
    }
  }
  return out;
}

VirtualAugmentation generate_virtual_classes(const ImageSet& train,
                                             std::size_t n_real_classes,
                                             std::size_t fold, Rng& rng) {
  for (const auto& s : train.samples) {
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= n_real_classes) {
      throw ProtocolError("generate_virtual_classes: label outside the real range");
    }
  }
  VirtualAugmentation out;
  out.images = train;
  out.real_count = train.samples.size();
  out.label_count = n_real_classes * (1 + fold);
  if (fold == 0) return out;

  for (std::size_t k = 0; k < fold; ++k) {
    for (std::size_t c = 0; c < n_real_classes; ++c) {
      VirtualTransform t;
      t.hue_degrees = rng.uniform(60.0, 300.0);
      const double u = rng.uniform(0.0, 0.6);
      t.scale_factor = u < 0.3 ? 0.6 + u : 1.1 + (u - 0.3);
      t.source_class = static_cast<int>(c);
      t.virtual_label = static_cast<int>((k + 1) * n_real_classes + c);
      out.transforms.push_back(t);
    }
  }

  struct Job {
    const ImageSample* src;
    const VirtualTransform* t;
  };
  std::vector<Job> jobs;
  for (const VirtualTransform& t : out.transforms) {
    for (std::size_t i = 0; i < train.samples.size(); ++i) {
      if (train.samples[i].label != t.source_class) continue;
      jobs.push_back({&train.samples[i], &t});
    }
  }
  const std::size_t base = out.images.samples.size();
  out.images.samples.resize(base + jobs.size());

#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < static_cast<std::int64_t>(jobs.size()); ++j) {
    const Job& job = jobs[static_cast<std::size_t>(j)];
    ImageSample& dst = out.images.samples[base + static_cast<std::size_t>(j)];
    std::vector<double> px = job.src->pixels;
    hue_rotate(px, job.t->hue_degrees);
    dst.pixels = rescale_about_center(px, train.height, train.width, job.t->scale_factor);
    dst.label = job.t->virtual_label;
    dst.session = job.src->session;
  }
  return out;
}

FeatureDataset extract_features(const MlpBackbone& backbone, const ImageSet& images) {
  FeatureDataset out;
  out.dim = backbone.output_dim();
  if (images.samples.empty()) return out;
  const std::size_t chunk = 256;
  for (std::size_t start = 0; start < images.samples.size(); start += chunk) {
    const std::size_t n = std::min(chunk, images.samples.size() - start);
    Mat x(n, images.pixel_count());
    for (std::size_t i = 0; i < n; ++i) {
      const auto& px = images.samples[start + i].pixels;
      if (px.size() != images.pixel_count()) {
        throw DimensionMismatch("extract_features: sample pixel count mismatch");
      }
      std::copy(px.begin(), px.end(), x.row(i));
    }
    const Mat f = backbone.forward(x);
    for (std::size_t i = 0; i < n; ++i) {
      out.push(f.row_vec(i), images.samples[start + i].label);
    }
  }
  return out;
}

}  // namespace fscil
