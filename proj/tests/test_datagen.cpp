#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "fscil/datagen.hpp"

using namespace fscil;

namespace {

bool same_pixels(const ImageSample& a, const ImageSample& b) {
  return a.pixels == b.pixels && a.label == b.label;
}

}  // namespace

TEST_CASE("dataset shape, grouping and pixel range") {
  Rng rng(10);
  const JitterConfig jitter;
  const auto data = generate_dataset(6, 4, 3, jitter, 16, rng);

  CHECK(data.specs.size() == 6);
  CHECK(data.train.samples.size() == 24);
  CHECK(data.test.samples.size() == 18);
  CHECK(data.train.pixel_count() == 16 * 16 * 3);

  for (std::size_t i = 0; i < data.train.samples.size(); ++i) {
    const auto& s = data.train.samples[i];
    CHECK(s.label == static_cast<int>(i / 4));
    REQUIRE(s.pixels.size() == data.train.pixel_count());
    for (double v : s.pixels) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("generation is seed-deterministic") {
  const JitterConfig jitter;
  Rng a(77), b(77), c(78);
  const auto da = generate_dataset(4, 3, 2, jitter, 12, a);
  const auto db = generate_dataset(4, 3, 2, jitter, 12, b);
  const auto dc = generate_dataset(4, 3, 2, jitter, 12, c);

  REQUIRE(da.train.samples.size() == db.train.samples.size());
  for (std::size_t i = 0; i < da.train.samples.size(); ++i) {
    CHECK(same_pixels(da.train.samples[i], db.train.samples[i]));
  }
  bool any_diff = false;
  for (std::size_t i = 0; i < da.train.samples.size(); ++i) {
    any_diff = any_diff || da.train.samples[i].pixels != dc.train.samples[i].pixels;
  }
  CHECK(any_diff);
}

TEST_CASE("same class varies across samples, classes differ from each other") {
  Rng rng(3);
  const auto data = generate_dataset(2, 2, 0, JitterConfig{}, 16, rng);
  CHECK(data.train.samples[0].pixels != data.train.samples[1].pixels);
  CHECK(data.train.samples[0].pixels != data.train.samples[2].pixels);
}

TEST_CASE("class specs form look-alike groups of five") {
  Rng rng(42);
  const auto specs = make_class_specs(12, rng);
  REQUIRE(specs.size() == 12);
  for (int g = 0; g < 2; ++g) {
    for (int m = 1; m < 5; ++m) {
      CHECK(specs[g * 5 + m].shape == specs[g * 5].shape);
    }
  }
  for (const auto& s : specs) {
    CHECK(s.scale > 0.3);
    CHECK(s.scale < 0.9);
    CHECK(s.aspect >= 0.5);
    CHECK(s.aspect <= 0.7);
  }
}

TEST_CASE("bad generation arguments are rejected") {
  Rng rng(1);
  CHECK_THROWS_AS(generate_dataset(0, 1, 1, JitterConfig{}, 16, rng), InvalidInput);
  CHECK_THROWS_AS(generate_dataset(2, 1, 1, JitterConfig{}, 4, rng), InvalidInput);
  JitterConfig bad;
  bad.distractor_prob = 1.5;
  CHECK_THROWS_AS(generate_dataset(2, 1, 1, bad, 16, rng), InvalidInput);
  JitterConfig neg;
  neg.noise = -0.1;
  CHECK_THROWS_AS(generate_dataset(2, 1, 1, neg, 16, rng), InvalidInput);
}

TEST_CASE("rgb/hsv round-trips") {
  Rng rng(9);
  for (int t = 0; t < 200; ++t) {
    const double r = rng.next_double(), g = rng.next_double(), b = rng.next_double();
    double h, s, v, r2, g2, b2;
    rgb_to_hsv(r, g, b, h, s, v);
    CHECK(h >= 0.0);
    CHECK(h < 360.0);
    hsv_to_rgb(h, s, v, r2, g2, b2);
    CHECK(r2 == doctest::Approx(r).epsilon(1e-12));
    CHECK(g2 == doctest::Approx(g).epsilon(1e-12));
    CHECK(b2 == doctest::Approx(b).epsilon(1e-12));
  }
  // gray has no hue
  double h, s, v;
  rgb_to_hsv(0.4, 0.4, 0.4, h, s, v);
  CHECK(h == 0.0);
  CHECK(s == 0.0);
  CHECK(v == doctest::Approx(0.4));
}

TEST_CASE("hue rotation is additive modulo a full turn and keeps brightness") {
  Rng rng(21);
  std::vector<double> px(30);
  for (double& v : px) v = rng.next_double();

  auto full = px;
  hue_rotate(full, 360.0);
  for (std::size_t i = 0; i < px.size(); ++i) {
    CHECK(full[i] == doctest::Approx(px[i]).epsilon(1e-9));
  }

  auto two_step = px;
  hue_rotate(two_step, 90.0);
  hue_rotate(two_step, 45.0);
  auto one_step = px;
  hue_rotate(one_step, 135.0);
  for (std::size_t i = 0; i < px.size(); ++i) {
    CHECK(two_step[i] == doctest::Approx(one_step[i]).epsilon(1e-9));
  }

  auto rotated = px;
  hue_rotate(rotated, 120.0);
  for (std::size_t i = 0; i < px.size(); i += 3) {
    const double before = std::max({px[i], px[i + 1], px[i + 2]});
    const double after = std::max({rotated[i], rotated[i + 1], rotated[i + 2]});
    CHECK(after == doctest::Approx(before).epsilon(1e-9));
  }

  std::vector<double> odd(4, 0.0);
  CHECK_THROWS_AS(hue_rotate(odd, 60.0), DimensionMismatch);
}

TEST_CASE("rescale with factor one copies the image exactly") {
  Rng rng(33);
  std::vector<double> px(10 * 10 * 3);
  for (double& v : px) v = rng.next_double();
  CHECK(rescale_about_center(px, 10, 10, 1.0) == px);
  CHECK_THROWS_AS(rescale_about_center(px, 10, 11, 1.0), DimensionMismatch);
  CHECK_THROWS_AS(rescale_about_center(px, 10, 10, 0.0), InvalidInput);
}

TEST_CASE("rescale grows and shrinks a centered bright disk") {
  const std::size_t n = 16;
  std::vector<double> px(n * n * 3, 0.0);
  const double c = n / 2.0;
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const double d = std::hypot(x + 0.5 - c, y + 0.5 - c);
      if (d < 4.0) {
        for (int ch = 0; ch < 3; ++ch) px[(y * n + x) * 3 + ch] = 1.0;
      }
    }
  }
  auto count_bright = [&](const std::vector<double>& img) {
    int k = 0;
    for (std::size_t i = 0; i < img.size(); i += 3) {
      if (img[i] > 0.5) ++k;
    }
    return k;
  };
  const int base = count_bright(px);
  const int grown = count_bright(rescale_about_center(px, n, n, 1.4));
  const int shrunk = count_bright(rescale_about_center(px, n, n, 0.6));
  CHECK(grown > base);
  CHECK(shrunk < base);
}

TEST_CASE("virtual fold zero is the identity") {
  Rng rng(5);
  const auto data = generate_dataset(3, 2, 0, JitterConfig{}, 12, rng);
  Rng vr(6);
  const auto aug = generate_virtual_classes(data.train, 3, 0, vr);
  CHECK(aug.transforms.empty());
  CHECK(aug.label_count == 3);
  CHECK(aug.real_count == 6);
  REQUIRE(aug.images.samples.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(same_pixels(aug.images.samples[i], data.train.samples[i]));
  }
}

TEST_CASE("one fold doubles the label space and sample count") {
  Rng rng(5);
  const auto data = generate_dataset(60, 1, 0, JitterConfig{}, 8, rng);
  Rng vr(6);
  const auto aug = generate_virtual_classes(data.train, 60, 1, vr);

  CHECK(aug.label_count == 120);
  CHECK(aug.images.samples.size() == 120);
  CHECK(aug.transforms.size() == 60);
  for (std::size_t c = 0; c < 60; ++c) {
    const auto& t = aug.transforms[c];
    CHECK(t.source_class == static_cast<int>(c));
    CHECK(t.virtual_label == static_cast<int>(60 + c));
    CHECK(t.hue_degrees >= 60.0);
    CHECK(t.hue_degrees <= 300.0);
    const bool small = t.scale_factor >= 0.6 && t.scale_factor <= 0.9;
    const bool large = t.scale_factor >= 1.1 && t.scale_factor <= 1.4;
    CHECK((small || large));
  }
  // real prefix untouched
  for (std::size_t i = 0; i < 60; ++i) {
    CHECK(same_pixels(aug.images.samples[i], data.train.samples[i]));
  }
  // virtual samples carry virtual labels with the right multiplicity
  std::set<int> virt_labels;
  for (std::size_t i = 60; i < 120; ++i) {
    CHECK(aug.images.samples[i].label >= 60);
    virt_labels.insert(aug.images.samples[i].label);
  }
  CHECK(virt_labels.size() == 60);
}

TEST_CASE("two folds triple the label space") {
  Rng rng(50);
  const auto data = generate_dataset(4, 3, 0, JitterConfig{}, 10, rng);
  Rng vr(51);
  const auto aug = generate_virtual_classes(data.train, 4, 2, vr);
  CHECK(aug.label_count == 12);
  CHECK(aug.images.samples.size() == 36);
  CHECK(aug.transforms.size() == 8);
  CHECK(aug.transforms[5].virtual_label == 4 + 4 + 1);
}

TEST_CASE("virtual generation is deterministic and label-checked") {
  Rng rng(5);
  const auto data = generate_dataset(3, 2, 0, JitterConfig{}, 12, rng);
  Rng v1(7), v2(7);
  const auto a = generate_virtual_classes(data.train, 3, 1, v1);
  const auto b = generate_virtual_classes(data.train, 3, 1, v2);
  REQUIRE(a.images.samples.size() == b.images.samples.size());
  for (std::size_t i = 0; i < a.images.samples.size(); ++i) {
    CHECK(a.images.samples[i].pixels == b.images.samples[i].pixels);
  }

  ImageSet bad = data.train;
  bad.samples[0].label = 7;
  Rng v3(7);
  CHECK_THROWS_AS(generate_virtual_classes(bad, 3, 1, v3), ProtocolError);
}

TEST_CASE("feature extraction matches single-sample forward passes") {
  Rng rng(13);
  const auto data = generate_dataset(2, 3, 0, JitterConfig{}, 12, rng);
  MlpBackbone net({12 * 12 * 3, 10, 6}, rng);
  const auto feats = extract_features(net, data.train);

  CHECK(feats.dim == 6);
  REQUIRE(feats.size() == 6);
  for (std::size_t i = 0; i < feats.size(); ++i) {
    CHECK(feats.labels[i] == data.train.samples[i].label);
    const Vec single = net.forward(Vec(data.train.samples[i].pixels));
    CHECK(feats.features[i] == single);
  }
}
