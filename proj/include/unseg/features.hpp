#pragma once

#include <cstdint>

#include "unseg/nn.hpp"

namespace unseg {

/// Per-patch feature vectors laid out in patch raster order
/// (left-to-right, top-to-bottom), one row per patch.
struct PatchFeatureGrid {
  std::uint32_t grid_h = 0;
  std::uint32_t grid_w = 0;
  Matrix data;  // (grid_h * grid_w) x dim
  std::uint32_t source_image_w = 0;
  std::uint32_t source_image_h = 0;
  std::uint32_t patch_size = 0;

  std::size_t node_count() const noexcept { return std::size_t{grid_h} * grid_w; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(data.cols()); }

  /// Throws InvalidArgument on empty geometry, a row-count mismatch or
  /// non-finite entries.
  void validate() const;
};

}  // namespace unseg
