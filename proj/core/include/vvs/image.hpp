#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace vvs {

// Non-owning view of one channel-planar image (C x H x W, values in [0,1]).
struct ImageView {
  std::span<const float> data;
  int channels = 0;
  int height = 0;
  int width = 0;

  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

// Owning channel-planar image.
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}
  explicit Image(const ImageView& v)
      : channels(v.channels), height(v.height), width(v.width), data(v.data.begin(), v.data.end()) {}

  float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  ImageView view() const { return {data, channels, height, width}; }
  bool operator==(const Image&) const = default;
};

// Bilinear resampling with half-pixel centers. Same-size input is copied
// unchanged.
Image resize_bilinear(const ImageView& src, int out_height, int out_width);

// Crops the window [top, top+h) x [left, left+w) and resamples it to
// out_height x out_width.
Image crop_resize(const ImageView& src, int top, int left, int h, int w, int out_height,
                  int out_width);

}  // namespace vvs

#include <filesystem>

namespace vvs {

// 8-bit RGB PNG I/O. Grayscale and RGBA inputs are converted to RGB.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageView& image);

inline float quantize_u8(float v) {
  const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<float>(static_cast<int>(c * 255.0f + 0.5f)) / 255.0f;
}

}  // namespace vvs
