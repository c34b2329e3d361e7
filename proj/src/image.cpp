#include "geoalign/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "geoalign/error.hpp"
#include "geoalign/io.hpp"

namespace geoalign {

namespace fs = std::filesystem;

Raster decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (bytes.empty() || !png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::BadImage, std::string("cannot decode PNG: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  Raster out(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, out.rgb.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::BadImage, "cannot decode PNG: " + message);
  }
  if (out.empty()) throw Error(ErrorCode::BadImage, "PNG has no pixels");
  return out;
}

Raster read_png(const fs::path& path) {
  const auto bytes = read_bytes(path);
  try {
    return decode_png(bytes);
  } catch (const Error& e) {
    throw Error(ErrorCode::BadImage, path.string() + ": " + e.what());
  }
}

namespace {

void append_bytes(png_structp png, png_bytep data, png_size_t length) {
  auto* sink = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  sink->insert(sink->end(), data, data + length);
}

void no_flush(png_structp) {}

}  // namespace

std::vector<std::uint8_t> encode_png(const Raster& image) {
  if (image.empty() || image.rgb.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
    throw Error(ErrorCode::BadImage, "cannot encode an empty or malformed raster");
  }
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::BadImage, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::BadImage, "libpng write failed");
  }
  png_set_write_fn(png, &out, append_bytes, no_flush);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(image.pixel(0, y)));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(const fs::path& path, const Raster& image) { write_file_atomic(path, encode_png(image)); }

Raster resize_bilinear(const Raster& image, int width, int height) {
  if (image.empty() || width <= 0 || height <= 0) throw Error(ErrorCode::BadImage, "invalid resize request");
  Raster out(width, height);
  const double sx = static_cast<double>(image.width) / width;
  const double sy = static_cast<double>(image.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = image.pixel(x0, y0)[c] * (1 - wx) + image.pixel(x1, y0)[c] * wx;
        const double bottom = image.pixel(x0, y1)[c] * (1 - wx) + image.pixel(x1, y1)[c] * wx;
        out.pixel(x, y)[c] = static_cast<std::uint8_t>(std::lround(top * (1 - wy) + bottom * wy));
      }
    }
  }
  return out;
}

Raster tile_grid(std::span<const Raster> images, int cols) {
  if (images.empty() || cols <= 0) throw Error(ErrorCode::BadImage, "nothing to tile");
  int cell_w = 0;
  int cell_h = 0;
  for (const auto& img : images) {
    cell_w = std::max(cell_w, img.width);
    cell_h = std::max(cell_h, img.height);
  }
  const int count = static_cast<int>(images.size());
  const int rows = (count + cols - 1) / cols;
  Raster out(cell_w * std::min(cols, count), cell_h * rows);
  for (int i = 0; i < count; ++i) {
    const Raster& img = images[static_cast<std::size_t>(i)];
    const int ox = (i % cols) * cell_w;
    const int oy = (i / cols) * cell_h;
    for (int y = 0; y < img.height; ++y) {
      std::memcpy(out.pixel(ox, oy + y), img.pixel(0, y), static_cast<std::size_t>(img.width) * 3);
    }
  }
  return out;
}

std::vector<fs::path> list_png_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace geoalign
