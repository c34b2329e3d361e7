#include <gtest/gtest.h>

#include <fstream>

#include "geoalign/error.hpp"
#include "geoalign/image.hpp"
#include "geoalign/io.hpp"
#include "test_util.hpp"

using namespace geoalign;
using testutil::TempDir;

namespace {

Raster gradient(int w, int h) {
  Raster r(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto* p = r.pixel(x, y);
      p[0] = static_cast<std::uint8_t>(x * 255 / std::max(1, w - 1));
      p[1] = static_cast<std::uint8_t>(y * 255 / std::max(1, h - 1));
      p[2] = static_cast<std::uint8_t>((x * 31 + y * 17) % 256);
    }
  }
  return r;
}

}  // namespace

TEST(Png, RoundTrip) {
  const Raster img = gradient(37, 21);
  const auto bytes = encode_png(img);
  EXPECT_EQ(decode_png(bytes), img);
  EXPECT_EQ(encode_png(img), bytes);
}

TEST(Png, FileRoundTrip) {
  TempDir d;
  const Raster img = gradient(8, 8);
  write_png(d / "sub" / "a.png", img);
  EXPECT_EQ(read_png(d / "sub" / "a.png"), img);
}

TEST(Png, BadInput) {
  const std::vector<std::uint8_t> junk = {1, 2, 3, 4};
  EXPECT_THROW(decode_png(junk), Error);
  EXPECT_THROW(encode_png(Raster()), Error);
  TempDir d;
  EXPECT_THROW(read_png(d / "missing.png"), Error);
}

TEST(Resize, IdentityAndConstant) {
  const Raster img = gradient(16, 9);
  EXPECT_EQ(resize_bilinear(img, 16, 9), img);
  Raster flat(5, 5);
  for (auto& v : flat.rgb) v = 77;
  const Raster big = resize_bilinear(flat, 13, 7);
  EXPECT_EQ(big.width, 13);
  for (auto v : big.rgb) EXPECT_EQ(v, 77);
}

TEST(Resize, HalfPixelCentres) {
  Raster two(2, 1);
  two.pixel(0, 0)[0] = 0;
  two.pixel(1, 0)[0] = 200;
  const Raster four = resize_bilinear(two, 4, 1);
  // source x = (i + 0.5) / 2 - 0.5 -> -0.25, 0.25, 0.75, 1.25
  EXPECT_EQ(four.pixel(0, 0)[0], 0);
  EXPECT_EQ(four.pixel(1, 0)[0], 50);
  EXPECT_EQ(four.pixel(2, 0)[0], 150);
  EXPECT_EQ(four.pixel(3, 0)[0], 200);
}

TEST(Grid, Layout) {
  std::vector<Raster> imgs;
  for (int i = 0; i < 5; ++i) {
    Raster r(4, 3);
    for (auto& v : r.rgb) v = static_cast<std::uint8_t>(10 * (i + 1));
    imgs.push_back(r);
  }
  const Raster g = tile_grid(imgs, 3);
  EXPECT_EQ(g.width, 12);
  EXPECT_EQ(g.height, 6);
  EXPECT_EQ(g.pixel(0, 0)[0], 10);
  EXPECT_EQ(g.pixel(8, 2)[0], 30);
  EXPECT_EQ(g.pixel(4, 3)[0], 50);
  EXPECT_EQ(g.pixel(11, 5)[0], 0);
  EXPECT_THROW(tile_grid(imgs, 0), Error);
}

TEST(Files, ListPngSorted) {
  TempDir d;
  write_png(d / "b.png", Raster(1, 1));
  write_png(d / "a.png", Raster(1, 1));
  std::ofstream(d / "c.txt") << "x";
  const auto files = list_png_files(d.path());
  ASSERT_EQ(files.size(), 2u);
  EXPECT_EQ(files[0].filename(), "a.png");
}

TEST(Files, AtomicWriteReplaces) {
  TempDir d;
  write_file_atomic(d / "x" / "f.txt", std::string_view("one"));
  write_file_atomic(d / "x" / "f.txt", std::string_view("two"));
  EXPECT_EQ(read_text(d / "x" / "f.txt"), "two");
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(d / "x")) ++n;
  EXPECT_EQ(n, 1u);
}

TEST(Hash, KnownVectors) {
  EXPECT_EQ(sha256_hex(std::string_view("")), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex(std::string_view("abc")), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Base64, RoundTrip) {
  EXPECT_EQ(base64_encode(std::vector<std::uint8_t>{'f', 'o', 'o', 'b'}), "Zm9vYg==");
  EXPECT_EQ(base64_decode("Zm9vYg=="), (std::vector<std::uint8_t>{'f', 'o', 'o', 'b'}));
  std::vector<std::uint8_t> all(256);
  for (int i = 0; i < 256; ++i) all[i] = static_cast<std::uint8_t>(i);
  EXPECT_EQ(base64_decode(base64_encode(all)), all);
  EXPECT_THROW(base64_decode("@@@"), Error);
}
