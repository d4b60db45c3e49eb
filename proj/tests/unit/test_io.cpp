#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "helpers.hpp"
#include "unseg/errors.hpp"
#include "unseg/io.hpp"

using namespace unseg;
using unseg::testing::slurp;
using unseg::testing::spit;
using unseg::testing::TempDir;

namespace {

const std::vector<std::uint8_t> kGolden = {
    'U', 'N', 'S', 'G', 1, 0, 0, 0,  // magic, version
    1,   0,   0,   0,   1, 0, 0, 0,  // grid_h, grid_w
    2,   0,   0,   0,   8, 0, 0, 0,  // dim, source_w
    8,   0,   0,   0,   8, 0, 0, 0,  // source_h, patch_size
    0,   0,   0x80, 0x3F,            // 1.0f
    0,   0,   0,   0xC0,             // -2.0f
};

PatchFeatureGrid golden_grid() {
  PatchFeatureGrid f;
  f.grid_h = f.grid_w = 1;
  f.data.resize(1, 2);
  f.data << 1.0, -2.0;
  f.source_image_w = f.source_image_h = f.patch_size = 8;
  return f;
}

PatchFeatureGrid random_grid(std::uint64_t seed, std::uint32_t gh, std::uint32_t gw, Eigen::Index dim) {
  CounterRng rng(seed);
  PatchFeatureGrid f;
  f.grid_h = gh;
  f.grid_w = gw;
  f.patch_size = 8;
  f.source_image_w = gw * 8;
  f.source_image_h = gh * 8;
  f.data.resize(Eigen::Index{gh} * gw, dim);
  for (Eigen::Index i = 0; i < f.data.size(); ++i) f.data.data()[i] = rng.normal();
  return f;
}

void write_pgm(const std::filesystem::path& p, std::uint32_t w, std::uint32_t h, const std::vector<std::uint8_t>& px) {
  std::string s = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  s.append(px.begin(), px.end());
  spit(p, s);
}

}  // namespace

TEST_CASE("golden bytes") {
  CHECK(encode_features(golden_grid()) == kGolden);
  auto f = decode_features(kGolden);
  CHECK(f.grid_h == 1);
  CHECK(f.grid_w == 1);
  CHECK(f.dim() == 2);
  CHECK(f.data(0, 0) == 1.0);
  CHECK(f.data(0, 1) == -2.0);
  CHECK(f.source_image_w == 8);
  CHECK(f.patch_size == 8);
  CHECK(encode_features(f) == kGolden);
}

TEST_CASE("file round trip is lossless at 32-bit precision") {
  TempDir dir("io_rt");
  auto f = random_grid(1, 5, 7, 384);
  write_features(f, dir / "x.unsg");
  auto back = read_features(dir / "x.unsg");
  REQUIRE(back.data.rows() == f.data.rows());
  REQUIRE(back.data.cols() == f.data.cols());
  for (Eigen::Index i = 0; i < f.data.size(); ++i)
    CHECK(back.data.data()[i] == static_cast<double>(static_cast<float>(f.data.data()[i])));
  // second trip is bit-exact
  write_features(back, dir / "y.unsg");
  CHECK(slurp(dir / "x.unsg") == slurp(dir / "y.unsg"));
  CHECK(slurp(dir / "x.unsg").size() == 32 + 35 * 384 * 4);
}

TEST_CASE("bad magic") {
  auto bytes = kGolden;
  std::memcpy(bytes.data(), "XXXX", 4);
  CHECK_THROWS_AS(decode_features(bytes), BadMagic);
  TempDir dir("io_magic");
  spit(dir / "bad.unsg", bytes);
  try {
    read_features(dir / "bad.unsg");
    FAIL("expected BadMagic");
  } catch (const BadMagic& e) {
    CHECK(e.offset() == 0);
    CHECK(std::string(e.what()).find("bad.unsg") != std::string::npos);
  }
}

TEST_CASE("truncated payload reports expected and actual sizes") {
  auto bytes = kGolden;
  bytes.resize(bytes.size() - 4);
  try {
    decode_features(bytes);
    FAIL("expected TruncatedPayload");
  } catch (const TruncatedPayload& e) {
    CHECK(e.expected_bytes() == 8);
    CHECK(e.actual_bytes() == 4);
    CHECK(std::string(e.what()).find("expected 8") != std::string::npos);
  }
}

TEST_CASE("other header failures") {
  auto v = kGolden;
  v[4] = 2;
  CHECK_THROWS_AS(decode_features(v), BadVersion);

  auto zero = kGolden;
  zero[16] = 0;
  CHECK_THROWS_AS(decode_features(zero), InvalidHeader);

  std::vector<std::uint8_t> short_header(kGolden.begin(), kGolden.begin() + 20);
  CHECK_THROWS_AS(decode_features(short_header), FormatError);

  auto trailing = kGolden;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_features(trailing), TrailingData);

  auto nan = kGolden;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + 36, &q, 4);
  try {
    decode_features(nan);
    FAIL("expected NonFinitePayload");
  } catch (const NonFinitePayload& e) {
    CHECK(e.offset() == 36);
  }
}

TEST_CASE("every single-byte corruption of magic or version is rejected") {
  for (std::size_t pos = 0; pos < 8; ++pos)
    for (int v = 0; v < 256; ++v) {
      if (v == kGolden[pos]) continue;
      auto bytes = kGolden;
      bytes[pos] = static_cast<std::uint8_t>(v);
      CHECK_THROWS_AS(decode_features(bytes), FormatError);
    }
}

TEST_CASE("mask binarization threshold") {
  TempDir dir("io_thresh");
  write_pgm(dir / "m.pgm", 4, 1, {0, 127, 128, 255});
  auto m = read_mask(dir / "m.pgm");
  CHECK(m.width == 4);
  CHECK(m.height == 1);
  CHECK(m.pixels == std::vector<std::uint8_t>{0, 0, 1, 1});
}

TEST_CASE("mask write/read round trip in png and pgm") {
  TempDir dir("io_mask");
  CounterRng rng(4);
  auto m = unseg::testing::random_mask(rng, 17, 11);
  for (const char* ext : {".png", ".pgm"}) {
    write_mask(m, dir / (std::string("m") + ext));
    auto back = read_mask(dir / (std::string("m") + ext));
    CHECK(back.width == 17);
    CHECK(back.pixels == m.pixels);
    auto raw = read_gray_image(dir / (std::string("m") + ext));
    for (std::size_t i = 0; i < raw.pixels.size(); ++i) CHECK(raw.pixels[i] == (m.pixels[i] ? 255 : 0));
  }
}

TEST_CASE("binarization is idempotent") {
  TempDir dir("io_idem");
  CounterRng rng(5);
  std::vector<std::uint8_t> px(30 * 20);
  for (auto& v : px) v = static_cast<std::uint8_t>(rng.below(256));
  write_pgm(dir / "gt.pgm", 30, 20, px);
  auto once = read_mask(dir / "gt.pgm");
  write_mask(once, dir / "again.png");
  CHECK(read_mask(dir / "again.png").pixels == once.pixels);
}

TEST_CASE("colour ground truth is rejected with guidance") {
  TempDir dir("io_rgb");
  RgbImage img(4, 4);
  for (auto& v : img.rgb) v = 200;
  for (const char* name : {"gt.png", "gt.ppm"}) {
    write_rgb_image(img, dir / name);
    try {
      read_mask(dir / name);
      FAIL("expected UnsupportedFormat");
    } catch (const UnsupportedFormat& e) {
      CHECK(std::string(e.what()).find("grayscale") != std::string::npos);
    }
  }
}

TEST_CASE("rgb image round trip") {
  TempDir dir("io_img");
  CounterRng rng(6);
  RgbImage img(9, 5);
  for (auto& v : img.rgb) v = static_cast<std::uint8_t>(rng.below(256));
  for (const char* name : {"a.png", "a.ppm"}) {
    write_rgb_image(img, dir / name);
    CHECK(read_rgb_image(dir / name).rgb == img.rgb);
  }
}

TEST_CASE("corrupt or unknown image files") {
  TempDir dir("io_bad");
  spit(dir / "x.png", std::string("not a png at all"));
  CHECK_THROWS_AS(read_gray_image(dir / "x.png"), Error);
  spit(dir / "x.bmp", std::string("BM"));
  CHECK_THROWS_AS(read_gray_image(dir / "x.bmp"), UnsupportedFormat);
}

TEST_CASE("scan_dataset pairs by stem and reports skips") {
  TempDir dir("io_scan");
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "masks");
  RgbImage img(2, 2);
  write_rgb_image(img, dir / "images/a.png");
  write_rgb_image(img, dir / "images/b.png");
  write_mask(SegmentationMask(2, 2, 1), dir / "masks/a.png");
  auto scan = scan_dataset(dir.path());
  REQUIRE(scan.items.size() == 1);
  CHECK(scan.items[0].stem == "a");
  CHECK_FALSE(scan.items[0].features.has_value());
  REQUIRE(scan.skipped.size() == 1);
  CHECK(scan.skipped[0].rfind("b:", 0) == 0);

  std::filesystem::create_directories(dir / "features");
  write_features(golden_grid(), dir / "features/a.unsg");
  CHECK(scan_dataset(dir.path()).items[0].features.has_value());
}

TEST_CASE("scan_dataset warns on low-valued masks") {
  TempDir dir("io_warn");
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "masks");
  write_rgb_image(RgbImage(2, 2), dir / "images/a.png");
  write_pgm(dir / "masks/a.pgm", 2, 2, {0, 1, 1, 0});  // 0/1 instead of 0/255
  auto scan = scan_dataset(dir.path());
  CHECK(scan.items.size() == 1);
  CHECK(scan.warnings.size() == 1);
}

TEST_CASE("scan_dataset on empty directories") {
  TempDir dir("io_empty");
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "masks");
  CHECK_THROWS_AS(scan_dataset(dir.path()), EmptyDataset);
}

TEST_CASE("scan_dataset on a 612-entry tree") {
  TempDir dir("io_612");
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "masks");
  std::vector<std::string> stems;
  for (int i = 611; i >= 0; --i) {  // create out of order
    const std::string stem = "img_" + std::to_string(i * 7919 % 1000);
    stems.push_back(stem);
    write_pgm(dir / ("images/" + stem + ".pgm"), 1, 1, {10});
    write_pgm(dir / ("masks/" + stem + ".pgm"), 1, 1, {255});
  }
  std::sort(stems.begin(), stems.end());
  auto scan = scan_dataset(dir.path());
  REQUIRE(scan.items.size() == 612);
  for (std::size_t i = 0; i < 612; ++i) CHECK(scan.items[i].stem == stems[i]);
  CHECK(scan.skipped.empty());
}
