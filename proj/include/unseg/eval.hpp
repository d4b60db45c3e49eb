#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "unseg/image.hpp"

namespace unseg {

/// TP / (TP + FP + FN) for class `cls` (0 = background, 1 = foreground).
/// A class absent from both masks scores 1. Throws DimensionMismatch.
double iou_per_class(const SegmentationMask& pred, const SegmentationMask& gt, int cls);

/// Mean of the background and foreground IoU.
double miou(const SegmentationMask& pred, const SegmentationMask& gt);

struct ImageScore {
  std::string name;
  double miou = 0.0;
  double iou_fg = 0.0;
  double iou_bg = 0.0;
};

struct EvalFailure {
  std::string name;
  std::string error;
};

struct EvalReport {
  nlohmann::json config = nlohmann::json::object();
  std::vector<ImageScore> images;
  std::vector<EvalFailure> failures;
  double aggregate_miou = 0.0;    // unweighted mean over scored images
  double aggregate_iou_fg = 0.0;

  nlohmann::json to_json() const;
};

struct MaskPair {
  std::string name;
  SegmentationMask pred;
  SegmentationMask gt;
};

/// Scores every pair; pairs that fail (e.g. size mismatch) are listed under
/// failures and excluded from the aggregate. Throws EmptyDataset for no pairs.
EvalReport evaluate_dataset(std::span<const MaskPair> pairs, const nlohmann::json& config = nlohmann::json::object());

/// Pairs masks in `pred_dir` and `gt_dir` by file stem (every ground-truth
/// mask is expected to have a prediction) and scores them.
EvalReport evaluate_directories(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                                const nlohmann::json& config = nlohmann::json::object());

}  // namespace unseg
