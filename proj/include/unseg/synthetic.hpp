#pragma once

#include <cstdint>
#include <vector>

#include "unseg/features.hpp"
#include "unseg/image.hpp"

namespace unseg {

struct PlantedOptions {
  std::uint32_t grid = 28;
  std::uint32_t dim = 384;
  std::uint32_t patch_size = 8;
  double noise_sigma = 0.05;  // per-coordinate Gaussian noise
};

/// Patch features drawn around two orthogonal unit centroids, with an
/// elliptical foreground blob that never touches the grid border.
struct PlantedInstance {
  PatchFeatureGrid features;
  std::vector<int> patch_labels;  // 1 = foreground
  SegmentationMask truth;         // pixel level, grid * patch_size square
  RgbImage image;                 // two-tone rendering of the truth, with noise
};

PlantedInstance make_planted_instance(std::uint64_t seed, const PlantedOptions& options = {});

}  // namespace unseg
