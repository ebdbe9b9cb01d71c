#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <png.h>

#include "vvs/error.hpp"
#include "vvs/image.hpp"

namespace vvs {

namespace {

// Half-pixel-center source coordinate for output index i.
inline void source_coord(int i, double scale, double offset, int limit, int& i0, int& i1,
                         float& frac) {
  double s = (i + 0.5) * scale - 0.5 + offset;
  if (s < offset) s = offset;
  double base = std::floor(s);
  i0 = static_cast<int>(base);
  frac = static_cast<float>(s - base);
  i1 = std::min(i0 + 1, limit - 1);
  i0 = std::min(std::max(i0, 0), limit - 1);
}

}  // namespace

Image crop_resize(const ImageView& src, int top, int left, int h, int w, int out_height,
                  int out_width) {
  if (h <= 0 || w <= 0 || out_height <= 0 || out_width <= 0)
    throw ShapeError("crop_resize: degenerate window");
  if (top < 0 || left < 0 || top + h > src.height || left + w > src.width)
    throw ShapeError("crop_resize: window outside image");

  Image out(src.channels, out_height, out_width);
  if (h == out_height && w == out_width) {
    for (int c = 0; c < src.channels; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(c, y, x) = src.at(c, top + y, left + x);
    return out;
  }

  const double sy = static_cast<double>(h) / out_height;
  const double sx = static_cast<double>(w) / out_width;
  std::vector<int> x0(out_width), x1(out_width);
  std::vector<float> fx(out_width);
  for (int x = 0; x < out_width; ++x) {
    source_coord(x, sx, 0.0, w, x0[x], x1[x], fx[x]);
  }
  for (int y = 0; y < out_height; ++y) {
    int y0, y1;
    float fy;
    source_coord(y, sy, 0.0, h, y0, y1, fy);
    for (int c = 0; c < src.channels; ++c) {
      for (int x = 0; x < out_width; ++x) {
        const float a = src.at(c, top + y0, left + x0[x]);
        const float b = src.at(c, top + y0, left + x1[x]);
        const float d = src.at(c, top + y1, left + x0[x]);
        const float e = src.at(c, top + y1, left + x1[x]);
        const float upper = a + (b - a) * fx[x];
        const float lower = d + (e - d) * fx[x];
        out.at(c, y, x) = upper + (lower - upper) * fy;
      }
    }
  }
  return out;
}

Image resize_bilinear(const ImageView& src, int out_height, int out_width) {
  return crop_resize(src, 0, 0, src.height, src.width, out_height, out_width);
}

Image read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str()))
    throw DataError("cannot read PNG " + path.string() + ": " + img.message);
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw DataError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  const int h = static_cast<int>(img.height);
  const int w = static_cast<int>(img.width);
  Image out(3, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(c, y, x) = static_cast<float>(buf[(static_cast<std::size_t>(y) * w + x) * 3 + c]) / 255.0f;
  return out;
}

void write_png(const std::filesystem::path& path, const ImageView& image) {
  if (image.channels != 3) throw ShapeError("write_png: expected 3 channels");
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(image.height) * image.width * 3);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        buf[(static_cast<std::size_t>(y) * image.width + x) * 3 + c] =
            static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, buf.data(), 0, nullptr))
    throw DataError("cannot write PNG " + path.string() + ": " + img.message);
}

}  // namespace vvs
