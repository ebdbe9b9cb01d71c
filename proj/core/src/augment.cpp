#include "vvs/augment.hpp"

#include <algorithm>
#include <cmath>

#include "vvs/error.hpp"

namespace vvs {

void AugmentPolicy::validate() const {
  if (!(crop_scale_lo > 0.0 && crop_scale_lo <= crop_scale_hi && crop_scale_hi <= 1.0))
    throw ConfigError("augment.crop_scale", "need 0 < lo <= hi <= 1");
  if (!(crop_ratio_lo > 0.0 && crop_ratio_lo <= crop_ratio_hi))
    throw ConfigError("augment.crop_ratio", "need 0 < lo <= hi");
  auto prob = [](double p, const char* field) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(field, "probability must be in [0,1]");
  };
  prob(flip_prob, "augment.flip_prob");
  prob(jitter_prob, "augment.jitter_prob");
  prob(grayscale_prob, "augment.grayscale_prob");
  if (jitter.brightness < 0 || jitter.contrast < 0 || jitter.saturation < 0)
    throw ConfigError("augment.jitter", "strengths must be non-negative");
  if (!(jitter.hue >= 0.0 && jitter.hue <= 0.5))
    throw ConfigError("augment.jitter.hue", "must be in [0, 0.5]");
  if (output_size < 0) throw ConfigError("augment.output_size", "must be >= 0");
}

namespace {

struct Window {
  int top, left, h, w;
};

Window sample_crop(int height, int width, Rng& rng, const AugmentPolicy& p) {
  const double area = static_cast<double>(height) * width;
  const double log_lo = std::log(p.crop_ratio_lo);
  const double log_hi = std::log(p.crop_ratio_hi);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * uniform(rng, p.crop_scale_lo, p.crop_scale_hi);
    const double aspect = std::exp(uniform(rng, log_lo, log_hi));
    const int w = static_cast<int>(std::lround(std::sqrt(target * aspect)));
    const int h = static_cast<int>(std::lround(std::sqrt(target / aspect)));
    if (w == 0 || h == 0)
      throw ShapeError("make_views: crop window degenerates to zero size");
    if (w <= width && h <= height) {
      const int top = uniform_int(rng, 0, height - h);
      const int left = uniform_int(rng, 0, width - w);
      return {top, left, h, w};
    }
  }
  // Fallback: central crop at the clamped aspect ratio.
  const double in_ratio = static_cast<double>(width) / height;
  int w = width, h = height;
  if (in_ratio < p.crop_ratio_lo) {
    h = static_cast<int>(std::lround(w / p.crop_ratio_lo));
  } else if (in_ratio > p.crop_ratio_hi) {
    w = static_cast<int>(std::lround(h * p.crop_ratio_hi));
  }
  if (w == 0 || h == 0) throw ShapeError("make_views: crop window degenerates to zero size");
  return {(height - h) / 2, (width - w) / 2, h, w};
}

float luma(float r, float g, float b) { return 0.299f * r + 0.587f * g + 0.114f * b; }

void clamp01(Image& img) {
  for (float& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
}

void adjust_brightness(Image& img, float f) {
  for (float& v : img.data) v *= f;
  clamp01(img);
}

void adjust_contrast(Image& img, float f) {
  const int hw = img.height * img.width;
  double mean = 0.0;
  for (int i = 0; i < hw; ++i) mean += luma(img.data[i], img.data[hw + i], img.data[2 * hw + i]);
  mean /= hw;
  const float m = static_cast<float>(mean);
  for (float& v : img.data) v = m + f * (v - m);
  clamp01(img);
}

void adjust_saturation(Image& img, float f) {
  const int hw = img.height * img.width;
  for (int i = 0; i < hw; ++i) {
    const float l = luma(img.data[i], img.data[hw + i], img.data[2 * hw + i]);
    for (int c = 0; c < 3; ++c) {
      float& v = img.data[c * hw + i];
      v = l + f * (v - l);
    }
  }
  clamp01(img);
}

// Rotates hue by `shift` turns (fraction of the color wheel).
void adjust_hue(Image& img, float shift) {
  const int hw = img.height * img.width;
  for (int i = 0; i < hw; ++i) {
    float r = img.data[i], g = img.data[hw + i], b = img.data[2 * hw + i];
    const float mx = std::max({r, g, b});
    const float mn = std::min({r, g, b});
    const float delta = mx - mn;
    if (delta <= 0.0f) continue;
    float h;
    if (mx == r) {
      h = (g - b) / delta;
    } else if (mx == g) {
      h = 2.0f + (b - r) / delta;
    } else {
      h = 4.0f + (r - g) / delta;
    }
    h = h / 6.0f + shift;
    h -= std::floor(h);
    const float s = delta / mx;
    const float v = mx;
    const float h6 = h * 6.0f;
    const int sector = static_cast<int>(h6) % 6;
    const float frac = h6 - std::floor(h6);
    const float p = v * (1.0f - s);
    const float q = v * (1.0f - s * frac);
    const float t = v * (1.0f - s * (1.0f - frac));
    switch (sector) {
      case 0: r = v; g = t; b = p; break;
      case 1: r = q; g = v; b = p; break;
      case 2: r = p; g = v; b = t; break;
      case 3: r = p; g = q; b = v; break;
      case 4: r = t; g = p; b = v; break;
      default: r = v; g = p; b = q; break;
    }
    img.data[i] = r;
    img.data[hw + i] = g;
    img.data[2 * hw + i] = b;
  }
  clamp01(img);
}

void to_grayscale(Image& img) {
  const int hw = img.height * img.width;
  for (int i = 0; i < hw; ++i) {
    const float l = luma(img.data[i], img.data[hw + i], img.data[2 * hw + i]);
    img.data[i] = img.data[hw + i] = img.data[2 * hw + i] = l;
  }
  clamp01(img);
}

void flip_horizontal(Image& img) {
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y) {
      float* row = &img.at(c, y, 0);
      std::reverse(row, row + img.width);
    }
}

}  // namespace

Image augment(const ImageView& image, Rng& rng, const AugmentPolicy& policy) {
  if (image.channels != 3) throw ShapeError("augment: expected an RGB image");
  const int out = policy.output_size > 0 ? policy.output_size : image.height;
  const Window win = sample_crop(image.height, image.width, rng, policy);
  Image img = crop_resize(image, win.top, win.left, win.h, win.w, out, out);
  clamp01(img);

  if (uniform01(rng) < policy.flip_prob) flip_horizontal(img);

  // Every draw happens regardless of the strengths so the stream layout does
  // not depend on the policy values.
  const bool jitter = uniform01(rng) < policy.jitter_prob;
  const auto& j = policy.jitter;
  const double fb = uniform(rng, std::max(0.0, 1.0 - j.brightness), 1.0 + j.brightness);
  const double fc = uniform(rng, std::max(0.0, 1.0 - j.contrast), 1.0 + j.contrast);
  const double fs = uniform(rng, std::max(0.0, 1.0 - j.saturation), 1.0 + j.saturation);
  const double fh = uniform(rng, -j.hue, j.hue);
  if (jitter) {
    if (j.brightness > 0.0) adjust_brightness(img, static_cast<float>(fb));
    if (j.contrast > 0.0) adjust_contrast(img, static_cast<float>(fc));
    if (j.saturation > 0.0) adjust_saturation(img, static_cast<float>(fs));
    if (j.hue > 0.0) adjust_hue(img, static_cast<float>(fh));
  }
  if (uniform01(rng) < policy.grayscale_prob) to_grayscale(img);
  return img;
}

std::pair<Image, Image> make_views(const ImageView& image, Rng& rng, const AugmentPolicy& policy) {
  Image first = augment(image, rng, policy);
  Image second = augment(image, rng, policy);
  return {std::move(first), std::move(second)};
}

std::array<Image, 4> split_quadrants(const ImageView& image) {
  if (image.height != image.width) throw ShapeError("split_quadrants: image must be square");
  if (image.height % 2 != 0)
    throw ShapeError("split_quadrants: side length must be even, got " + std::to_string(image.height));
  const int half = image.height / 2;
  std::array<Image, 4> blocks;
  for (int idx = 0; idx < 4; ++idx) {
    const int row = idx / 2, col = idx % 2;
    Image b(image.channels, half, half);
    for (int c = 0; c < image.channels; ++c)
      for (int y = 0; y < half; ++y)
        for (int x = 0; x < half; ++x) b.at(c, y, x) = image.at(c, row * half + y, col * half + x);
    blocks[idx] = std::move(b);
  }
  return blocks;
}

int direction_label(int a_idx, int b_idx) {
  if (a_idx < 0 || a_idx > 3 || b_idx < 0 || b_idx > 3)
    throw ShapeError("direction_label: quadrant index outside 0..3");
  if (a_idx == b_idx) throw ShapeError("direction_label: quadrants must differ");
  const int drow = b_idx / 2 - a_idx / 2;
  const int dcol = b_idx % 2 - a_idx % 2;
  if (drow == 0) return dcol < 0 ? 0 : 1;
  if (dcol == 0) return drow < 0 ? 2 : 3;
  if (drow < 0) return dcol < 0 ? 4 : 5;
  return dcol < 0 ? 6 : 7;
}

std::string_view direction_name(int d) {
  static constexpr std::string_view kNames[kDirections] = {
      "left", "right", "upper", "lower", "upper-left", "upper-right", "lower-left", "lower-right"};
  if (d < 0 || d >= kDirections) throw ShapeError("direction_name: label outside 0..7");
  return kNames[d];
}

QuadrantSample sample_rp_pair(const ImageView& image, Rng& rng) {
  auto blocks = split_quadrants(image);
  const int pair = uniform_int(rng, 0, 11);
  const int a = pair / 3;
  int b = pair % 3;
  if (b >= a) ++b;
  QuadrantSample s;
  s.a_idx = a;
  s.b_idx = b;
  s.d = direction_label(a, b);
  s.block_a = std::move(blocks[a]);
  s.block_b = std::move(blocks[b]);
  return s;
}

}  // namespace vvs
