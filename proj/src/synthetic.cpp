#include "unseg/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "unseg/errors.hpp"
#include "unseg/rng.hpp"

namespace unseg {

PlantedInstance make_planted_instance(std::uint64_t seed, const PlantedOptions& options) {
  if (options.grid < 5) throw InvalidArgument("planted grid must be at least 5x5");
  CounterRng rng(seed);
  const Eigen::Index dim = options.dim;

  Vector a(dim), b(dim);
  for (Eigen::Index i = 0; i < dim; ++i) a(i) = rng.normal();
  for (Eigen::Index i = 0; i < dim; ++i) b(i) = rng.normal();
  a.normalize();
  b -= b.dot(a) * a;
  b.normalize();

  const double g = options.grid;
  // Ellipse centred away from the border, radii bounded so it stays inside
  // rows/cols [1, grid - 2].
  const double cy = rng.uniform(0.35 * g, 0.65 * g);
  const double cx = rng.uniform(0.35 * g, 0.65 * g);
  const double max_ry = std::min(cy - 1.0, g - 2.0 - cy);
  const double max_rx = std::min(cx - 1.0, g - 2.0 - cx);
  const double ry = rng.uniform(0.45, 0.95) * max_ry;
  const double rx = rng.uniform(0.45, 0.95) * max_rx;

  PlantedInstance inst;
  const std::uint32_t n = options.grid * options.grid;
  inst.patch_labels.resize(n);
  for (std::uint32_t r = 0; r < options.grid; ++r) {
    for (std::uint32_t c = 0; c < options.grid; ++c) {
      const double dy = (r + 0.5 - cy) / ry;
      const double dx = (c + 0.5 - cx) / rx;
      inst.patch_labels[r * options.grid + c] = dx * dx + dy * dy <= 1.0 ? 1 : 0;
    }
  }

  PatchFeatureGrid& f = inst.features;
  f.grid_h = f.grid_w = options.grid;
  f.patch_size = options.patch_size;
  f.source_image_w = f.source_image_h = options.grid * options.patch_size;
  f.data.resize(n, dim);
  for (std::uint32_t i = 0; i < n; ++i) {
    const Vector& centre = inst.patch_labels[i] ? a : b;
    for (Eigen::Index j = 0; j < dim; ++j) f.data(i, j) = centre(j) + options.noise_sigma * rng.normal();
  }

  const std::uint32_t side = options.grid * options.patch_size;
  inst.truth = SegmentationMask(side, side);
  inst.image = RgbImage(side, side);
  std::uint8_t colours[2][3];
  for (auto& colour : colours) {
    for (auto& ch : colour) ch = static_cast<std::uint8_t>(40 + rng.below(176));
  }
  // Keep the two tones clearly distinct.
  if (std::abs(int(colours[0][0]) - int(colours[1][0])) < 60) colours[1][0] = colours[0][0] < 128 ? 230 : 20;
  for (std::uint32_t y = 0; y < side; ++y) {
    for (std::uint32_t x = 0; x < side; ++x) {
      const int label = inst.patch_labels[(y / options.patch_size) * options.grid + x / options.patch_size];
      inst.truth.at(x, y) = static_cast<std::uint8_t>(label);
      std::uint8_t* px = inst.image.pixel(x, y);
      for (int ch = 0; ch < 3; ++ch) {
        const int v = colours[label][ch] + static_cast<int>(rng.below(21)) - 10;
        px[ch] = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
      }
    }
  }
  return inst;
}

}  // namespace unseg
