#pragma once

#include "mvr/io_util.hpp"

#include <png.h>

#include <algorithm>
#include <vector>

namespace mvr {

/// Row-major float image, channels interleaved, values nominally in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  float& at(int x, int y, int c = 0) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float at(int x, int y, int c = 0) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float& operator[](std::size_t i) { return data[i]; }
  float operator[](std::size_t i) const { return data[i]; }
  bool operator==(const Image&) const = default;
};

inline std::uint8_t to_byte(float v) {
  const float c = std::clamp(std::isfinite(v) ? v : 0.0f, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

/// Encodes an 8-bit PNG (1 channel -> gray, 3 -> RGB, 4 -> RGBA).
inline std::string encode_png(const Image& img) {
  if (img.channels != 1 && img.channels != 3 && img.channels != 4)
    throw Error(ErrorCode::invalid_argument, "PNG encoding supports 1, 3 or 4 channels");
  std::vector<std::uint8_t> bytes(img.data.size());
  std::transform(img.data.begin(), img.data.end(), bytes.begin(), to_byte);
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = img.channels == 1 ? PNG_FORMAT_GRAY : img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_RGBA;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, bytes.data(), 0, nullptr))
    throw Error(ErrorCode::io, std::string("PNG encoding failed: ") + png.message);
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, bytes.data(), 0, nullptr))
    throw Error(ErrorCode::io, std::string("PNG encoding failed: ") + png.message);
  out.resize(size);
  return out;
}

inline void write_png(const std::filesystem::path& path, const Image& img) { write_file_atomic(path, encode_png(img)); }

namespace detail {
inline Image finish_png_read(png_image& png, const std::string& what) {
  png.format &= ~(PNG_FORMAT_FLAG_LINEAR | PNG_FORMAT_FLAG_COLORMAP);
  Image img(static_cast<int>(png.width), static_cast<int>(png.height), static_cast<int>(PNG_IMAGE_SAMPLE_CHANNELS(png.format)));
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw Error(ErrorCode::io, "cannot decode PNG " + what + ": " + msg);
  }
  for (std::size_t i = 0; i < buffer.size(); ++i) img.data[i] = static_cast<float>(buffer[i]) / 255.0f;
  return img;
}
}  // namespace detail

inline Image read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str()))
    throw Error(ErrorCode::io, "cannot read PNG " + path.string() + ": " + png.message);
  return detail::finish_png_read(png, path.string());
}

inline Image decode_png(const std::string& bytes) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()))
    throw Error(ErrorCode::io, std::string("cannot decode PNG: ") + png.message);
  return detail::finish_png_read(png, "<memory>");
}

}  // namespace mvr
