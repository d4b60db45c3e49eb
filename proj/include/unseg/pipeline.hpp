#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "unseg/features.hpp"
#include "unseg/graph.hpp"
#include "unseg/image.hpp"
#include "unseg/model.hpp"
#include "unseg/nn.hpp"

namespace unseg {

enum class RefineMode { None, Smooth };

std::string_view to_string(RefineMode mode);
RefineMode parse_refine_mode(std::string_view name);

struct TrainConfig {
  double tau = 0.5;
  int epochs = 100;
  double lr = 1e-3;
  double weight_decay = 1e-2;
  int k = 2;
  Activation activation = Activation::SiLU;
  std::uint64_t seed = 0;
  int restarts = 1;
  RefineMode refine = RefineMode::Smooth;
  Eigen::Index hidden = 64;
  bool keep_self_loops = false;
  DecayMode decay_mode = DecayMode::DecoupledWeight;

  /// Throws InvalidArgument on out-of-range fields.
  void validate() const;
  nlohmann::json to_json() const;
};

struct TrainResult {
  SoftAssignment assignment;
  ModelParams params;
  std::vector<double> loss_trace;  // loss before each Adam step of the kept run
  double initial_loss = 0.0;
  double final_loss = 0.0;  // loss after the last step
  std::int64_t adam_steps = 0;
  int best_restart = 0;
  std::uint64_t run_seed = 0;  // seed of the kept run
};

/// Trains a fresh model on one image's patch graph, full batch, one Adam step
/// per epoch. With several restarts the run with the lowest final loss is kept
/// (ties keep the earlier run). Throws EmptyGraph, DivergedLoss.
TrainResult train_image(const PatchFeatureGrid& features, const TrainConfig& config);

/// Picks the cluster that occupies the fewest border patches; ties go to the
/// cluster with fewer patches overall, then to the higher cluster index.
int select_foreground(std::span<const int> labels, std::uint32_t grid_h, std::uint32_t grid_w);

/// Bilinearly resamples column `foreground` of `assignment` from the patch
/// lattice to out_w x out_h (pixel-centre aligned, edge-clamped) and keeps
/// pixels with probability > 0.5.
SegmentationMask upsample_mask(const Matrix& assignment, int foreground, std::uint32_t grid_h,
                               std::uint32_t grid_w, std::uint32_t out_w, std::uint32_t out_h);

struct RefineOptions {
  int iterations = 5;
  double color_sigma = 30.0;  // 8-bit channel units
};

/// Colour-weighted 3x3 majority vote. Each pixel (itself included) votes with
/// weight exp(-|c_i - c_j|^2 / 2 sigma^2); ties keep the current value.
/// Throws DimensionMismatch.
SegmentationMask refine_edges(const SegmentationMask& mask, const RgbImage& image, RefineMode mode,
                              const RefineOptions& options = {});

struct SegmentResult {
  SegmentationMask mask;
  TrainResult training;
  int foreground = 0;
  bool refined = false;
};

/// Full per-image pipeline: train, label, pick foreground, upsample to the
/// source image size and optionally refine against `image`.
SegmentResult segment(const PatchFeatureGrid& features, const TrainConfig& config,
                      const RgbImage* image = nullptr);

}  // namespace unseg
