#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace geoalign {

// 8-bit interleaved RGB, row-major.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Raster() = default;
  Raster(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  bool empty() const { return width <= 0 || height <= 0; }
  std::uint8_t* pixel(int x, int y) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* pixel(int x, int y) const {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  friend bool operator==(const Raster&, const Raster&) = default;
};

// Any PNG colour type is converted to RGB8 (alpha composited onto black). Throws Error{BadImage}.
Raster decode_png(std::span<const std::uint8_t> bytes);
Raster read_png(const std::filesystem::path& path);

// Deterministic encoding: fixed compression settings, no timestamps or text chunks.
std::vector<std::uint8_t> encode_png(const Raster& image);
void write_png(const std::filesystem::path& path, const Raster& image);

// Bilinear resampling with half-pixel centres and edge clamping.
Raster resize_bilinear(const Raster& image, int width, int height);

// Lays images out left-to-right, top-to-bottom on a cols-wide grid of equal cells.
Raster tile_grid(std::span<const Raster> images, int cols);

// PNG files in a directory, sorted by filename.
std::vector<std::filesystem::path> list_png_files(const std::filesystem::path& dir);

}  // namespace geoalign
