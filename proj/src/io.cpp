#include "unseg/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

#include "unseg/errors.hpp"

namespace unseg {

namespace fs = std::filesystem;

namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes[offset + i]} << (8 * i);
  return v;
}

std::vector<std::uint8_t> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

// --- Netpbm -----------------------------------------------------------------

struct Netpbm {
  char kind = 0;  // '2', '3', '5', '6'
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> samples;  // width * height * channels
};

class NetpbmReader {
 public:
  NetpbmReader(const std::vector<std::uint8_t>& bytes, std::string name) : bytes_(bytes), name_(std::move(name)) {}

  Netpbm parse() {
    if (bytes_.size() < 2 || bytes_[0] != 'P') throw CorruptImage(name_ + ": not a netpbm file");
    Netpbm img;
    img.kind = static_cast<char>(bytes_[1]);
    pos_ = 2;
    if (img.kind != '2' && img.kind != '3' && img.kind != '5' && img.kind != '6') {
      throw UnsupportedFormat(name_ + ": netpbm variant P" + std::string(1, img.kind) + " is not supported");
    }
    img.width = number();
    img.height = number();
    const std::uint32_t maxval = number();
    if (img.width == 0 || img.height == 0) throw CorruptImage(name_ + ": zero image dimension");
    if (maxval == 0 || maxval > 255) throw UnsupportedFormat(name_ + ": only 8-bit netpbm files are supported");
    const std::size_t channels = (img.kind == '3' || img.kind == '6') ? 3 : 1;
    const std::size_t count = std::size_t{img.width} * img.height * channels;
    img.samples.resize(count);
    if (img.kind == '5' || img.kind == '6') {
      ++pos_;  // single whitespace after maxval
      if (bytes_.size() < pos_ + count) throw CorruptImage(name_ + ": truncated pixel data");
      std::copy_n(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), count, img.samples.begin());
    } else {
      for (auto& s : img.samples) s = static_cast<std::uint8_t>(std::min<std::uint32_t>(number(), 255));
    }
    if (maxval != 255) {
      for (auto& s : img.samples) s = static_cast<std::uint8_t>((s * 255u + maxval / 2) / maxval);
    }
    return img;
  }

 private:
  std::uint32_t number() {
    for (;;) {
      while (pos_ < bytes_.size() && std::isspace(bytes_[pos_])) ++pos_;
      if (pos_ < bytes_.size() && bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
        continue;
      }
      break;
    }
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) throw CorruptImage(name_ + ": malformed netpbm header");
    std::uint64_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > 1'000'000'000) throw CorruptImage(name_ + ": netpbm value out of range");
    }
    return static_cast<std::uint32_t>(v);
  }

  const std::vector<std::uint8_t>& bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

void write_netpbm(const fs::path& path, char kind, std::uint32_t w, std::uint32_t h,
                  std::span<const std::uint8_t> samples) {
  const std::string header = "P" + std::string(1, kind) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), samples.begin(), samples.end());
  spit(path, bytes);
}

// --- PNG (libpng simplified API) ---------------------------------------------

struct PngImage {
  png_image image;
  PngImage() {
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&image); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

bool is_png(const std::vector<std::uint8_t>& bytes) {
  static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  return bytes.size() >= 8 && std::equal(sig, sig + 8, bytes.begin());
}

// Returns the pixels in the requested format; `check` may reject the file's
// native format before decoding.
template <typename Check>
std::vector<std::uint8_t> decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name,
                                     png_uint_32 format, std::uint32_t& w, std::uint32_t& h, Check check) {
  PngImage png;
  if (!png_image_begin_read_from_memory(&png.image, bytes.data(), bytes.size())) {
    throw CorruptImage(name + ": " + png.image.message);
  }
  check(png.image.format);
  png.image.format = format;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(png.image));
  if (!png_image_finish_read(&png.image, nullptr, pixels.data(), 0, nullptr)) {
    throw CorruptImage(name + ": " + png.image.message);
  }
  w = png.image.width;
  h = png.image.height;
  return pixels;
}

void encode_png(const fs::path& path, png_uint_32 format, std::uint32_t w, std::uint32_t h,
                const std::uint8_t* pixels) {
  PngImage png;
  png.image.width = w;
  png.image.height = h;
  png.image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png.image, nullptr, &size, 0, pixels, 0, nullptr)) {
    throw IoError("PNG encoding failed: " + std::string(png.image.message));
  }
  std::vector<std::uint8_t> buffer(size);
  if (!png_image_write_to_memory(&png.image, buffer.data(), &size, 0, pixels, 0, nullptr)) {
    throw IoError("PNG encoding failed: " + std::string(png.image.message));
  }
  buffer.resize(size);
  spit(path, buffer);
}

}  // namespace

// --- Feature files ------------------------------------------------------------

std::vector<std::uint8_t> encode_features(const PatchFeatureGrid& features) {
  features.validate();
  std::vector<std::uint8_t> out;
  out.reserve(kFeatureHeaderBytes + static_cast<std::size_t>(features.data.size()) * 4);
  out.insert(out.end(), std::begin(kFeatureMagic), std::end(kFeatureMagic));
  put_u32(out, kFeatureVersion);
  put_u32(out, features.grid_h);
  put_u32(out, features.grid_w);
  put_u32(out, static_cast<std::uint32_t>(features.dim()));
  put_u32(out, features.source_image_w);
  put_u32(out, features.source_image_h);
  put_u32(out, features.patch_size);
  for (Eigen::Index i = 0; i < features.data.size(); ++i) {
    // static_cast rounds to nearest under the default floating-point environment.
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(features.data.data()[i])));
  }
  return out;
}

PatchFeatureGrid decode_features(std::span<const std::uint8_t> bytes, std::string_view source) {
  const std::string at = source.empty() ? std::string() : std::string(source) + ": ";
  if (bytes.size() < 4 || !std::equal(std::begin(kFeatureMagic), std::end(kFeatureMagic), bytes.begin())) {
    std::size_t offset = 0;
    while (offset < 4 && offset < bytes.size() && bytes[offset] == static_cast<std::uint8_t>(kFeatureMagic[offset])) {
      ++offset;
    }
    throw BadMagic(at + "bad magic: expected \"UNSG\"", offset);
  }
  if (bytes.size() < 8) throw InvalidHeader(at + "header truncated before version field", bytes.size());
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kFeatureVersion) {
    throw BadVersion(at + "unsupported feature file version " + std::to_string(version) + " (expected 1)", 4);
  }
  if (bytes.size() < kFeatureHeaderBytes) {
    throw InvalidHeader(at + "header truncated: " + std::to_string(bytes.size()) + " of 32 bytes", bytes.size());
  }
  PatchFeatureGrid f;
  f.grid_h = get_u32(bytes, 8);
  f.grid_w = get_u32(bytes, 12);
  const std::uint32_t dim = get_u32(bytes, 16);
  f.source_image_w = get_u32(bytes, 20);
  f.source_image_h = get_u32(bytes, 24);
  f.patch_size = get_u32(bytes, 28);
  if (f.grid_h == 0) throw InvalidHeader(at + "grid_h is zero", 8);
  if (f.grid_w == 0) throw InvalidHeader(at + "grid_w is zero", 12);
  if (dim == 0) throw InvalidHeader(at + "dim is zero", 16);

  const std::uint64_t values = std::uint64_t{f.grid_h} * f.grid_w * dim;
  const std::uint64_t expected = values * 4;
  const std::uint64_t actual = bytes.size() - kFeatureHeaderBytes;
  if (actual < expected) throw TruncatedPayload(at, bytes.size(), expected, actual);
  if (actual > expected) {
    throw TrailingData(at + std::to_string(actual - expected) + " unexpected bytes after payload",
                       kFeatureHeaderBytes + expected);
  }
  f.data.resize(static_cast<Eigen::Index>(std::uint64_t{f.grid_h} * f.grid_w), dim);
  for (std::uint64_t i = 0; i < values; ++i) {
    const std::size_t offset = kFeatureHeaderBytes + i * 4;
    const float v = std::bit_cast<float>(get_u32(bytes, offset));
    if (!std::isfinite(v)) throw NonFinitePayload(at + "non-finite payload value", offset);
    f.data.data()[i] = v;
  }
  return f;
}

PatchFeatureGrid read_features(const fs::path& path) { return decode_features(slurp(path), path.string()); }

void write_features(const PatchFeatureGrid& features, const fs::path& path) {
  spit(path, encode_features(features));
}

// --- Masks and images -----------------------------------------------------------

std::size_t SegmentationMask::foreground_count() const {
  return static_cast<std::size_t>(std::count(pixels.begin(), pixels.end(), std::uint8_t{1}));
}

GrayImage read_gray_image(const fs::path& path) {
  const auto bytes = slurp(path);
  const std::string name = path.string();
  GrayImage out;
  if (is_png(bytes)) {
    out.pixels = decode_png(bytes, name, PNG_FORMAT_GRAY, out.width, out.height, [&](png_uint_32 fmt) {
      if (fmt & PNG_FORMAT_FLAG_COLOR) {
        throw UnsupportedFormat(name + ": mask has colour channels; convert it to 8-bit single-channel grayscale");
      }
      if (fmt & PNG_FORMAT_FLAG_LINEAR) {
        throw UnsupportedFormat(name + ": 16-bit masks are not supported; convert to 8-bit grayscale");
      }
      if (fmt & PNG_FORMAT_FLAG_ALPHA) {
        throw UnsupportedFormat(name + ": mask has an alpha channel; convert it to 8-bit single-channel grayscale");
      }
    });
    return out;
  }
  if (!bytes.empty() && bytes[0] == 'P') {
    Netpbm img = NetpbmReader(bytes, name).parse();
    if (img.kind == '3' || img.kind == '6') {
      throw UnsupportedFormat(name + ": mask is a 3-channel PPM; convert it to 8-bit single-channel grayscale (PGM/PNG)");
    }
    out.width = img.width;
    out.height = img.height;
    out.pixels = std::move(img.samples);
    return out;
  }
  throw UnsupportedFormat(name + ": unrecognised image format (expected PNG or PGM)");
}

SegmentationMask binarize(const GrayImage& image) {
  SegmentationMask m(image.width, image.height);
  std::transform(image.pixels.begin(), image.pixels.end(), m.pixels.begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(v > 127 ? 1 : 0); });
  return m;
}

void write_mask(const SegmentationMask& mask, const fs::path& path) {
  std::vector<std::uint8_t> gray(mask.pixels.size());
  std::transform(mask.pixels.begin(), mask.pixels.end(), gray.begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
  const std::string ext = lower_extension(path);
  if (ext == ".pgm") {
    write_netpbm(path, '5', mask.width, mask.height, gray);
  } else if (ext == ".png") {
    encode_png(path, PNG_FORMAT_GRAY, mask.width, mask.height, gray.data());
  } else {
    throw UnsupportedFormat(path.string() + ": masks are written as .png or .pgm");
  }
}

RgbImage read_rgb_image(const fs::path& path) {
  const auto bytes = slurp(path);
  const std::string name = path.string();
  RgbImage out;
  if (is_png(bytes)) {
    out.rgb = decode_png(bytes, name, PNG_FORMAT_RGB, out.width, out.height, [](png_uint_32) {});
    return out;
  }
  if (!bytes.empty() && bytes[0] == 'P') {
    Netpbm img = NetpbmReader(bytes, name).parse();
    out.width = img.width;
    out.height = img.height;
    if (img.kind == '3' || img.kind == '6') {
      out.rgb = std::move(img.samples);
    } else {
      out.rgb.reserve(img.samples.size() * 3);
      for (std::uint8_t v : img.samples) out.rgb.insert(out.rgb.end(), {v, v, v});
    }
    return out;
  }
  throw UnsupportedFormat(name + ": unrecognised image format (expected PNG, PPM or PGM)");
}

void write_rgb_image(const RgbImage& image, const fs::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".ppm") {
    write_netpbm(path, '6', image.width, image.height, image.rgb);
  } else if (ext == ".png") {
    encode_png(path, PNG_FORMAT_RGB, image.width, image.height, image.rgb.data());
  } else {
    throw UnsupportedFormat(path.string() + ": images are written as .png or .ppm");
  }
}

bool is_image_file(const fs::path& path) {
  static const std::set<std::string> exts = {".png", ".pgm", ".ppm", ".pnm"};
  return exts.contains(lower_extension(path));
}

// --- Dataset layout -----------------------------------------------------------------

DatasetScan scan_dataset(const fs::path& root) {
  const fs::path images_dir = root / "images";
  const fs::path masks_dir = root / "masks";
  const fs::path features_dir = root / "features";
  if (!fs::is_directory(images_dir) || !fs::is_directory(masks_dir)) {
    throw EmptyDataset(root.string() + ": expected images/ and masks/ subdirectories");
  }

  auto by_stem = [](const fs::path& dir) {
    std::map<std::string, fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && is_image_file(entry.path())) {
        out.emplace(entry.path().stem().string(), entry.path());
      }
    }
    return out;
  };
  const auto images = by_stem(images_dir);
  const auto masks = by_stem(masks_dir);

  DatasetScan scan;
  for (const auto& [stem, image] : images) {
    auto mask = masks.find(stem);
    if (mask == masks.end()) {
      scan.skipped.push_back(stem + ": no ground-truth mask");
      continue;
    }
    DatasetItem item{stem, image, mask->second, std::nullopt};
    const fs::path feat = features_dir / (stem + kFeatureExtension);
    if (fs::is_regular_file(feat)) item.features = feat;
    try {
      const GrayImage gt = read_gray_image(mask->second);
      const auto max_value = gt.pixels.empty() ? 0 : *std::max_element(gt.pixels.begin(), gt.pixels.end());
      if (max_value < 128) {
        scan.warnings.push_back(stem + ": ground-truth mask maximum is " + std::to_string(max_value) +
                                " (< 128), so it binarises to all background; masks must use 0/255");
      }
    } catch (const Error& e) {
      scan.skipped.push_back(stem + ": unreadable mask (" + e.what() + ")");
      continue;
    }
    scan.items.push_back(std::move(item));
  }
  for (const auto& [stem, mask] : masks) {
    if (!images.contains(stem)) scan.skipped.push_back(stem + ": mask without image");
  }
  if (scan.items.empty()) throw EmptyDataset(root.string() + ": no image/mask pairs found");
  return scan;
}

}  // namespace unseg
