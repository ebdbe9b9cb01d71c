#pragma once

#include <array>
#include <string_view>
#include <utility>

#include "vvs/image.hpp"
#include "vvs/rng.hpp"

namespace vvs {

struct ColorJitter {
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.4;
  double hue = 0.1;
  bool operator==(const ColorJitter&) const = default;
};

// Stochastic view generation for the contrastive branch. Defaults follow the
// SimCLR recipe: random resized crop, horizontal flip, color distortion and
// random grayscale.
struct AugmentPolicy {
  double crop_scale_lo = 0.2;
  double crop_scale_hi = 1.0;
  double crop_ratio_lo = 3.0 / 4.0;
  double crop_ratio_hi = 4.0 / 3.0;
  double flip_prob = 0.5;
  ColorJitter jitter;
  double jitter_prob = 0.8;
  double grayscale_prob = 0.2;
  // Output side length; 0 keeps the input size.
  int output_size = 0;

  // Throws ConfigError naming the first invalid field.
  void validate() const;
  bool operator==(const AugmentPolicy&) const = default;
};

// Two independent augmentations of the same image, values in [0,1].
std::pair<Image, Image> make_views(const ImageView& image, Rng& rng, const AugmentPolicy& policy);

// One augmentation; make_views is two calls on the same stream.
Image augment(const ImageView& image, Rng& rng, const AugmentPolicy& policy);

// Quadrant index convention: idx = 2*row + col, i.e.
//   0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right.
std::array<Image, 4> split_quadrants(const ImageView& image);

inline constexpr int kDirections = 8;

// Direction of block b relative to block a:
//   0 left, 1 right, 2 upper, 3 lower,
//   4 upper-left, 5 upper-right, 6 lower-left, 7 lower-right.
int direction_label(int a_idx, int b_idx);
std::string_view direction_name(int d);

struct QuadrantSample {
  Image block_a;
  Image block_b;
  int a_idx = 0;
  int b_idx = 0;
  int d = 0;
};

// Draws (a, b) uniformly from the 12 ordered pairs of distinct quadrants.
QuadrantSample sample_rp_pair(const ImageView& image, Rng& rng);

}  // namespace vvs
