#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fscil/backbone.hpp"
#include "fscil/numerics.hpp"
#include "fscil/rng.hpp"

namespace fscil {

enum class PillShape { circle = 0, ellipse = 1, capsule = 2 };

// fixed per-class appearance; everything else is per-sample jitter
struct PillClassSpec {
  PillShape shape = PillShape::circle;
  double r = 0.5, g = 0.5, b = 0.5;  // base color, [0,1]
  double scale = 0.6;                // pill diameter as a fraction of image width
  double aspect = 0.6;               // minor/major axis for the non-round shapes
  double tex_fx = 0.8, tex_fy = 0.8; // engraving grid frequency (per pixel)
  double tex_px = 0.0, tex_py = 0.0; // engraving grid phase
};

struct ImageSample {
  std::vector<double> pixels;  // height*width*3, row-major, rgb in [0,1]
  int label = 0;
  int session = 0;
};

struct ImageSet {
  std::size_t height = 32;
  std::size_t width = 32;
  std::vector<ImageSample> samples;
  std::size_t pixel_count() const { return height * width * 3; }
};

// intra-class variation applied per sample
struct JitterConfig {
  double position = 2.0;         // max center shift in pixels, both axes
  double brightness = 0.25;      // lighting multiplier drawn from 1 +- this
  double noise = 0.05;           // additive uniform pixel noise amplitude
  double distractor_prob = 0.3;  // chance of a clutter blob behind the pill

  friend bool operator==(const JitterConfig&, const JitterConfig&) = default;
};

// Classes come in groups of look-alikes: one shared shape and base color per
// group, members separated only by small color offsets, size steps and
// engraving. That keeps the task from being trivially solvable by color.
std::vector<PillClassSpec> make_class_specs(std::size_t n_classes, Rng& rng);

struct GeneratedData {
  ImageSet train;
  ImageSet test;
  std::vector<PillClassSpec> specs;
};

// Samples are grouped by class, class-ascending, train and test drawn from
// the same per-class distribution. Rendering parallelizes over samples; all
// randomness is drawn serially first, so output is seed-deterministic.
GeneratedData generate_dataset(std::size_t n_classes, std::size_t per_class_train,
                               std::size_t per_class_test, const JitterConfig& jitter,
                               std::size_t image_size, Rng& rng);

// one coherent recolor+rescale recipe, fixed for a whole virtual class
struct VirtualTransform {
  double hue_degrees = 0.0;   // in [60, 300]
  double scale_factor = 1.0;  // in [0.6, 0.9] or [1.1, 1.4]
  int source_class = 0;
  int virtual_label = 0;
};

struct VirtualAugmentation {
  ImageSet images;  // all real samples first (byte-identical), then virtual
  std::vector<VirtualTransform> transforms;
  std::size_t real_count = 0;
  std::size_t label_count = 0;  // n_real * (1 + fold)
};

// Virtual class for fold k of real class c gets label k*n_real + c in a
// training-local label space that is dropped after the base stage. fold = 0
// returns the input unchanged.
VirtualAugmentation generate_virtual_classes(const ImageSet& train,
                                             std::size_t n_real_classes,
                                             std::size_t fold, Rng& rng);

// color + geometry helpers (exposed for tests)
void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v);
void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b);
void hue_rotate(std::vector<double>& pixels, double degrees);
std::vector<double> rescale_about_center(const std::vector<double>& pixels,
                                         std::size_t height, std::size_t width,
                                         double factor);

struct FeatureDataset {
  std::size_t dim = 0;
  std::vector<Vec> features;
  std::vector<int> labels;

  std::size_t size() const { return features.size(); }
  void push(Vec f, int label) {
    features.push_back(std::move(f));
    labels.push_back(label);
  }
};

FeatureDataset extract_features(const MlpBackbone& backbone, const ImageSet& images);

}  // namespace fscil
