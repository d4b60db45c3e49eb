#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "unseg/features.hpp"
#include "unseg/image.hpp"

namespace unseg {

// Feature file layout, all integers little-endian:
//   0  char[4] magic "UNSG"
//   4  u32 version (= 1)
//   8  u32 grid_h
//  12  u32 grid_w
//  16  u32 dim
//  20  u32 source_image_w
//  24  u32 source_image_h
//  28  u32 patch_size
//  32  f32 payload[grid_h * grid_w * dim], patch raster order
inline constexpr char kFeatureMagic[4] = {'U', 'N', 'S', 'G'};
inline constexpr std::uint32_t kFeatureVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 32;
inline constexpr const char* kFeatureExtension = ".unsg";

std::vector<std::uint8_t> encode_features(const PatchFeatureGrid& features);
/// Throws BadMagic, BadVersion, InvalidHeader, TruncatedPayload, TrailingData
/// or NonFinitePayload.
PatchFeatureGrid decode_features(std::span<const std::uint8_t> bytes, std::string_view source = {});

PatchFeatureGrid read_features(const std::filesystem::path& path);
void write_features(const PatchFeatureGrid& features, const std::filesystem::path& path);

/// Reads an 8-bit single-channel PNG or PGM. Colour files raise UnsupportedFormat.
GrayImage read_gray_image(const std::filesystem::path& path);
/// Ground-truth binarisation: value > 127 is foreground.
SegmentationMask binarize(const GrayImage& image);
inline SegmentationMask read_mask(const std::filesystem::path& path) { return binarize(read_gray_image(path)); }
/// Writes foreground as 255 and background as 0; format follows the extension
/// (.png or .pgm).
void write_mask(const SegmentationMask& mask, const std::filesystem::path& path);

/// Reads PNG (any colour type, converted to RGB), PPM or PGM.
RgbImage read_rgb_image(const std::filesystem::path& path);
void write_rgb_image(const RgbImage& image, const std::filesystem::path& path);

bool is_image_file(const std::filesystem::path& path);

struct DatasetItem {
  std::string stem;
  std::filesystem::path image;
  std::filesystem::path mask;
  std::optional<std::filesystem::path> features;
};

struct DatasetScan {
  std::vector<DatasetItem> items;          // lexicographic by stem
  std::vector<std::string> skipped;        // "stem: reason"
  std::vector<std::string> warnings;
};

/// Pairs root/images and root/masks by file stem, attaching
/// root/features/<stem>.unsg when present. Throws EmptyDataset when nothing pairs.
DatasetScan scan_dataset(const std::filesystem::path& root);

}  // namespace unseg
