#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

namespace unseg {

/// Binary pixel mask: 0 = background, 1 = foreground, row-major.
struct SegmentationMask {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;
  // Config snapshot and training summary for predicted masks; null for masks
  // read from disk.
  nlohmann::json provenance;

  SegmentationMask() = default;
  SegmentationMask(std::uint32_t w, std::uint32_t h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(std::size_t{w} * h, fill) {}

  std::uint8_t at(std::uint32_t x, std::uint32_t y) const { return pixels[std::size_t{y} * width + x]; }
  std::uint8_t& at(std::uint32_t x, std::uint32_t y) { return pixels[std::size_t{y} * width + x]; }

  std::size_t foreground_count() const;
};

/// 8-bit RGB image, interleaved, row-major.
struct RgbImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> rgb;

  RgbImage() = default;
  RgbImage(std::uint32_t w, std::uint32_t h) : width(w), height(h), rgb(std::size_t{w} * h * 3, 0) {}

  const std::uint8_t* pixel(std::uint32_t x, std::uint32_t y) const {
    return rgb.data() + (std::size_t{y} * width + x) * 3;
  }
  std::uint8_t* pixel(std::uint32_t x, std::uint32_t y) { return rgb.data() + (std::size_t{y} * width + x) * 3; }
};

/// 8-bit single-channel image as stored on disk, before binarisation.
struct GrayImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;
};

}  // namespace unseg
