#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "unseg/errors.hpp"
#include "unseg/eval.hpp"
#include "unseg/io.hpp"

using namespace unseg;
using unseg::testing::random_mask;
using unseg::testing::TempDir;

namespace {

SegmentationMask mask_of(std::uint32_t w, std::uint32_t h, std::vector<std::uint8_t> px) {
  SegmentationMask m(w, h);
  m.pixels = std::move(px);
  return m;
}

double oracle_iou(const SegmentationMask& p, const SegmentationMask& g, int cls) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < p.pixels.size(); ++i) {
    const bool a = p.pixels[i] == cls, b = g.pixels[i] == cls;
    inter += a && b;
    uni += a || b;
  }
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

}  // namespace

TEST_CASE("2x2 fixture") {
  auto gt = mask_of(2, 2, {1, 1, 0, 0});
  auto pred = mask_of(2, 2, {1, 0, 0, 0});
  CHECK(iou_per_class(pred, gt, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(iou_per_class(pred, gt, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(std::abs(miou(pred, gt) - 7.0 / 12.0) < 1e-15);
}

TEST_CASE("identity, complement and absent class") {
  CounterRng rng(1);
  for (int t = 0; t < 20; ++t) {
    auto m = random_mask(rng, 8, 5);
    CHECK(miou(m, m) == 1.0);
  }
  auto half = mask_of(2, 2, {1, 1, 0, 0});
  auto comp = mask_of(2, 2, {0, 0, 1, 1});
  CHECK(miou(comp, half) == 0.0);
  auto empty = mask_of(2, 2, {0, 0, 0, 0});
  CHECK(iou_per_class(empty, empty, 1) == 1.0);
  CHECK(miou(empty, empty) == 1.0);
}

TEST_CASE("random masks against a pixel-count oracle") {
  CounterRng rng(2);
  for (int t = 0; t < 100; ++t) {
    auto p = random_mask(rng, 16, 16, rng.uniform());
    auto g = random_mask(rng, 16, 16, rng.uniform());
    const double want = 0.5 * (oracle_iou(p, g, 0) + oracle_iou(p, g, 1));
    CHECK(std::abs(miou(p, g) - want) < 1e-12);
    CHECK(miou(p, g) == miou(g, p));
  }
}

TEST_CASE("dimension mismatch") {
  CHECK_THROWS_AS(miou(SegmentationMask(2, 2), SegmentationMask(2, 3)), DimensionMismatch);
}

TEST_CASE("evaluate_dataset aggregates and lists failures") {
  CounterRng rng(3);
  std::vector<MaskPair> pairs;
  for (int i = 0; i < 6; ++i)
    pairs.push_back({"img" + std::to_string(i), random_mask(rng, 10, 10), random_mask(rng, 10, 10)});
  pairs.push_back({"broken", SegmentationMask(3, 3), SegmentationMask(4, 4)});
  auto rep = evaluate_dataset(pairs, {{"tau", 0.5}});
  REQUIRE(rep.images.size() == 6);
  REQUIRE(rep.failures.size() == 1);
  CHECK(rep.failures[0].name == "broken");
  double mean = 0;
  for (const auto& s : rep.images) mean += s.miou;
  mean /= 6;
  CHECK(std::abs(rep.aggregate_miou - mean) < 1e-12);

  auto j = rep.to_json();
  CHECK(j["config"]["tau"] == 0.5);
  CHECK(j["images"].size() == 6);
  CHECK(j["images"][0].contains("name"));
  CHECK(j["images"][0].contains("miou"));
  CHECK(j["images"][0].contains("iou_fg"));
  CHECK(j["images"][0].contains("iou_bg"));
  CHECK(j["failures"][0]["name"] == "broken");
  CHECK(j.contains("aggregate_miou"));
}

TEST_CASE("aggregate of 0.4 and 0.6 is 0.5") {
  // fg IoU 0, bg IoU 4/5
  auto gt_a = mask_of(5, 1, {0, 0, 0, 0, 0});
  auto p_a = mask_of(5, 1, {1, 0, 0, 0, 0});
  // fg IoU 3/5, bg IoU 3/5
  auto gt_b = mask_of(8, 1, {1, 1, 1, 1, 0, 0, 0, 0});
  auto p_b = mask_of(8, 1, {1, 1, 1, 0, 1, 0, 0, 0});
  CHECK(miou(p_a, gt_a) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(miou(p_b, gt_b) == doctest::Approx(0.6).epsilon(1e-15));
  std::vector<MaskPair> pairs = {{"a", p_a, gt_a}, {"b", p_b, gt_b}};
  CHECK(std::abs(evaluate_dataset(pairs).aggregate_miou - 0.5) < 1e-12);
}

TEST_CASE("evaluate_dataset on nothing") {
  CHECK_THROWS_AS(evaluate_dataset(std::vector<MaskPair>{}), EmptyDataset);
}

TEST_CASE("evaluate_directories") {
  TempDir pred("eval_pred"), gt("eval_gt");
  write_mask(mask_of(2, 2, {1, 1, 0, 0}), gt / "a.png");
  write_mask(mask_of(2, 2, {1, 0, 0, 0}), pred / "a.png");
  write_mask(mask_of(2, 2, {1, 1, 1, 1}), gt / "b.png");  // no prediction
  auto rep = evaluate_directories(pred.path(), gt.path());
  REQUIRE(rep.images.size() == 1);
  CHECK(std::abs(rep.aggregate_miou - 7.0 / 12.0) < 1e-15);
  REQUIRE(rep.failures.size() == 1);
  CHECK(rep.failures[0].name == "b");
}
