#pragma once

// FrameImage: 8-bit raster frames, stored row-major with interleaved
// channels. On disk frames are binary PGM (P5, grayscale) or PPM (P6, RGB);
// both are lossless and byte-deterministic.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pixlog/common.hpp"

namespace pixlog {

struct FrameImage {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3
  std::vector<std::uint8_t> data;  // height*width*channels, row-major

  bool same_shape(const FrameImage& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }

  std::uint8_t& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  static FrameImage make(int width, int height, int channels,
                         std::uint8_t fill = 0) {
    if (width <= 0 || height <= 0 || (channels != 1 && channels != 3))
      throw ValidationError("invalid image shape");
    FrameImage img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.data.assign(
        static_cast<std::size_t>(width) * height * channels, fill);
    return img;
  }

  void validate() const {
    if (width <= 0 || height <= 0)
      throw ValidationError("image dimensions must be positive");
    if (channels != 1 && channels != 3)
      throw ValidationError("image must have 1 or 3 channels");
    if (data.size() != static_cast<std::size_t>(width) * height * channels)
      throw ValidationError("image data length does not match dimensions");
  }
};

inline void save_image(const FrameImage& img, const std::filesystem::path& path) {
  img.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open image for writing: " + path.string());
  out << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw IoError("short write: " + path.string());
}

inline FrameImage load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path.string());
  std::string magic;
  in >> magic;
  int channels = 0;
  if (magic == "P5") channels = 1;
  else if (magic == "P6") channels = 3;
  else throw IoError("unsupported image format in " + path.string());
  int w = 0, h = 0, maxval = 0;
  in >> w >> h >> maxval;
  if (!in || w <= 0 || h <= 0 || maxval != 255)
    throw IoError("bad raster header in " + path.string());
  in.get();  // single whitespace after maxval
  FrameImage img = FrameImage::make(w, h, channels);
  in.read(reinterpret_cast<char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
    throw IoError("truncated image data in " + path.string());
  return img;
}

// Deterministic resize used when feeding frames to a model: integer box
// average when the source is an exact multiple of the target, otherwise
// nearest neighbour. No anti-aliasing, no floating point.
inline FrameImage resize_image(const FrameImage& src, int width, int height) {
  src.validate();
  if (width <= 0 || height <= 0)
    throw ValidationError("resize target must be positive");
  if (src.width == width && src.height == height) return src;
  FrameImage dst = FrameImage::make(width, height, src.channels);
  const bool exact = src.width % width == 0 && src.height % height == 0;
  if (exact) {
    const int fx = src.width / width, fy = src.height / height;
    const int area = fx * fy;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        for (int c = 0; c < src.channels; ++c) {
          int sum = 0;
          for (int dy = 0; dy < fy; ++dy)
            for (int dx = 0; dx < fx; ++dx)
              sum += src.at(x * fx + dx, y * fy + dy, c);
          dst.at(x, y, c) =
              static_cast<std::uint8_t>((sum + area / 2) / area);
        }
  } else {
    for (int y = 0; y < height; ++y) {
      int sy = static_cast<int>((static_cast<std::int64_t>(y) * src.height) / height);
      for (int x = 0; x < width; ++x) {
        int sx = static_cast<int>((static_cast<std::int64_t>(x) * src.width) / width);
        for (int c = 0; c < src.channels; ++c) dst.at(x, y, c) = src.at(sx, sy, c);
      }
    }
  }
  return dst;
}

// Grayscale/RGB promotion so mixed sources can feed a 3-channel model.
inline FrameImage to_channels(const FrameImage& src, int channels) {
  if (src.channels == channels) return src;
  FrameImage dst = FrameImage::make(src.width, src.height, channels);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      if (channels == 3) {
        std::uint8_t v = src.at(x, y, 0);
        dst.at(x, y, 0) = dst.at(x, y, 1) = dst.at(x, y, 2) = v;
      } else {
        // integer luma, BT.601-ish weights scaled by 256
        int v = (77 * src.at(x, y, 0) + 150 * src.at(x, y, 1) +
                 29 * src.at(x, y, 2) + 128) >> 8;
        dst.at(x, y, 0) = static_cast<std::uint8_t>(v);
      }
    }
  return dst;
}

}  // namespace pixlog
