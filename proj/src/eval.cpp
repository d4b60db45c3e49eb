#include "unseg/eval.hpp"

#include <map>

#include "unseg/errors.hpp"
#include "unseg/io.hpp"

namespace unseg {

namespace fs = std::filesystem;

namespace {

void check_dims(const SegmentationMask& pred, const SegmentationMask& gt) {
  if (pred.width != gt.width || pred.height != gt.height) {
    throw DimensionMismatch("prediction is " + std::to_string(pred.width) + "x" + std::to_string(pred.height) +
                            ", ground truth is " + std::to_string(gt.width) + "x" + std::to_string(gt.height));
  }
}

}  // namespace

double iou_per_class(const SegmentationMask& pred, const SegmentationMask& gt, int cls) {
  check_dims(pred, gt);
  const auto c = static_cast<std::uint8_t>(cls);
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
    const bool p = pred.pixels[i] == c;
    const bool g = gt.pixels[i] == c;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
  }
  const std::size_t denom = tp + fp + fn;
  return denom == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(denom);
}

double miou(const SegmentationMask& pred, const SegmentationMask& gt) {
  return 0.5 * (iou_per_class(pred, gt, 0) + iou_per_class(pred, gt, 1));
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : images) {
    rows.push_back({{"name", s.name}, {"miou", s.miou}, {"iou_fg", s.iou_fg}, {"iou_bg", s.iou_bg}});
  }
  nlohmann::json fails = nlohmann::json::array();
  for (const auto& f : failures) fails.push_back({{"name", f.name}, {"error", f.error}});
  return {{"config", config},
          {"images", rows},
          {"aggregate_miou", aggregate_miou},
          {"aggregate_iou_fg", aggregate_iou_fg},
          {"failures", fails}};
}

namespace {

void finish(EvalReport& report) {
  if (report.images.empty()) return;
  double sum = 0.0, sum_fg = 0.0;
  for (const auto& s : report.images) {
    sum += s.miou;
    sum_fg += s.iou_fg;
  }
  report.aggregate_miou = sum / static_cast<double>(report.images.size());
  report.aggregate_iou_fg = sum_fg / static_cast<double>(report.images.size());
}

void score_into(EvalReport& report, const std::string& name, const SegmentationMask& pred,
                const SegmentationMask& gt) {
  try {
    const double fg = iou_per_class(pred, gt, 1);
    const double bg = iou_per_class(pred, gt, 0);
    report.images.push_back({name, 0.5 * (fg + bg), fg, bg});
  } catch (const Error& e) {
    report.failures.push_back({name, e.what()});
  }
}

}  // namespace

EvalReport evaluate_dataset(std::span<const MaskPair> pairs, const nlohmann::json& config) {
  if (pairs.empty()) throw EmptyDataset("no mask pairs to evaluate");
  EvalReport report;
  report.config = config;
  for (const auto& p : pairs) score_into(report, p.name, p.pred, p.gt);
  finish(report);
  return report;
}

EvalReport evaluate_directories(const fs::path& pred_dir, const fs::path& gt_dir, const nlohmann::json& config) {
  if (!fs::is_directory(gt_dir)) throw EmptyDataset(gt_dir.string() + ": not a directory");
  if (!fs::is_directory(pred_dir)) throw EmptyDataset(pred_dir.string() + ": not a directory");
  auto by_stem = [](const fs::path& dir) {
    std::map<std::string, fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && is_image_file(entry.path())) out.emplace(entry.path().stem().string(), entry.path());
    }
    return out;
  };
  const auto gts = by_stem(gt_dir);
  const auto preds = by_stem(pred_dir);
  if (gts.empty()) throw EmptyDataset(gt_dir.string() + ": no ground-truth masks");

  EvalReport report;
  report.config = config;
  for (const auto& [stem, gt_path] : gts) {
    auto pred_path = preds.find(stem);
    if (pred_path == preds.end()) {
      report.failures.push_back({stem, "no prediction"});
      continue;
    }
    try {
      score_into(report, stem, read_mask(pred_path->second), read_mask(gt_path));
    } catch (const Error& e) {
      report.failures.push_back({stem, e.what()});
    }
  }
  finish(report);
  return report;
}

}  // namespace unseg
