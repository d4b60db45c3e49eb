#include "unseg/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

#include "unseg/errors.hpp"
#include "unseg/loss.hpp"
#include "unseg/rng.hpp"

namespace unseg {

std::string_view to_string(RefineMode mode) { return mode == RefineMode::None ? "none" : "smooth"; }

RefineMode parse_refine_mode(std::string_view name) {
  if (name == "none") return RefineMode::None;
  if (name == "smooth") return RefineMode::Smooth;
  throw InvalidArgument("unknown refine mode '" + std::string(name) + "' (expected none or smooth)");
}

void TrainConfig::validate() const {
  if (!(tau > -1.0 && tau < 1.0)) throw InvalidArgument("tau must lie in (-1, 1)");
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidArgument("lr must be positive");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw InvalidArgument("weight decay must be >= 0");
  if (k < 2) throw InvalidArgument("k must be >= 2");
  if (restarts < 1) throw InvalidArgument("restarts must be >= 1");
  if (hidden < 1) throw InvalidArgument("hidden width must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {
      {"tau", tau},
      {"epochs", epochs},
      {"lr", lr},
      {"weight_decay", weight_decay},
      {"decay_mode", decay_mode == DecayMode::DecoupledWeight ? "weight" : "learning_rate"},
      {"k", k},
      {"activation", std::string(unseg::to_string(activation))},
      {"seed", seed},
      {"restarts", restarts},
      {"refine", std::string(unseg::to_string(refine))},
      {"hidden", hidden},
      {"keep_self_loops", keep_self_loops},
  };
}

namespace {

struct RunOutcome {
  ModelParams params;
  Matrix assignment;
  std::vector<double> trace;
  double final_loss = 0.0;
  std::int64_t steps = 0;
};

RunOutcome train_once(const PatchGraph& graph, const ModelInputs& inputs, const ModelShape& shape,
                      const TrainConfig& config, std::uint64_t seed) {
  RunOutcome run;
  run.params = ModelParams::init(shape, config.activation, seed);
  AdamState adam({config.lr, 0.9, 0.999, 1e-8, config.weight_decay, config.decay_mode});
  run.trace.reserve(static_cast<std::size_t>(config.epochs));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const ForwardCache cache = forward(run.params, inputs);
    const double loss = loss_value(graph, cache.assignment);
    if (!std::isfinite(loss)) throw DivergedLoss(epoch, loss);
    run.trace.push_back(loss);
    const ModelParams grads = backward(run.params, inputs, cache, loss_grad(graph, cache.assignment));
    adam_step(run.params.tensors(), grads.tensors(), adam);
  }

  ForwardCache last = forward(run.params, inputs);
  run.final_loss = loss_value(graph, last.assignment);
  if (!std::isfinite(run.final_loss)) throw DivergedLoss(config.epochs, run.final_loss);
  run.assignment = std::move(last.assignment);
  run.steps = adam.step_count;
  return run;
}

}  // namespace

TrainResult train_image(const PatchFeatureGrid& features, const TrainConfig& config) {
  config.validate();
  const PatchFeatureGrid normalized = normalize_features(features);
  const PatchGraph graph = build_adjacency(normalized, {config.tau, config.keep_self_loops});
  const ModelInputs inputs(normalized_adjacency(graph), normalized.data);
  const ModelShape shape{normalized.data.cols(), config.hidden, config.k};

  std::optional<RunOutcome> best;
  TrainResult result;
  for (int r = 0; r < config.restarts; ++r) {
    const std::uint64_t seed = derive_seed(config.seed, static_cast<std::uint64_t>(r));
    RunOutcome run = train_once(graph, inputs, shape, config, seed);
    if (!best || run.final_loss < best->final_loss) {
      best = std::move(run);
      result.best_restart = r;
      result.run_seed = seed;
    }
  }
  result.assignment = SoftAssignment(std::move(best->assignment));
  result.params = std::move(best->params);
  result.loss_trace = std::move(best->trace);
  result.initial_loss = result.loss_trace.front();
  result.final_loss = best->final_loss;
  result.adam_steps = best->steps;
  return result;
}

int select_foreground(std::span<const int> labels, std::uint32_t grid_h, std::uint32_t grid_w) {
  if (labels.size() != std::size_t{grid_h} * grid_w) throw ShapeMismatch("label count differs from grid size");
  int clusters = 2;
  for (int l : labels) {
    if (l < 0) throw InvalidArgument("negative cluster label");
    clusters = std::max(clusters, l + 1);
  }
  std::vector<std::size_t> border(static_cast<std::size_t>(clusters), 0);
  std::vector<std::size_t> total(static_cast<std::size_t>(clusters), 0);
  for (std::uint32_t r = 0; r < grid_h; ++r) {
    for (std::uint32_t c = 0; c < grid_w; ++c) {
      const auto l = static_cast<std::size_t>(labels[std::size_t{r} * grid_w + c]);
      ++total[l];
      if (r == 0 || c == 0 || r + 1 == grid_h || c + 1 == grid_w) ++border[l];
    }
  }
  int best = clusters - 1;
  for (int c = clusters - 2; c >= 0; --c) {
    const auto ci = static_cast<std::size_t>(c);
    const auto bi = static_cast<std::size_t>(best);
    if (border[ci] < border[bi] || (border[ci] == border[bi] && total[ci] < total[bi])) best = c;
  }
  return best;
}

SegmentationMask upsample_mask(const Matrix& assignment, int foreground, std::uint32_t grid_h,
                               std::uint32_t grid_w, std::uint32_t out_w, std::uint32_t out_h) {
  if (static_cast<std::size_t>(assignment.rows()) != std::size_t{grid_h} * grid_w) {
    throw ShapeMismatch("assignment rows differ from grid size");
  }
  if (foreground < 0 || foreground >= assignment.cols()) throw InvalidArgument("foreground cluster out of range");
  if (out_w == 0 || out_h == 0) throw InvalidArgument("output size must be positive");

  auto prob = [&](std::uint32_t r, std::uint32_t c) { return assignment(std::size_t{r} * grid_w + c, foreground); };
  // Source coordinate of output pixel centre i, clamped to the lattice.
  auto source = [](std::uint32_t i, std::uint32_t out, std::uint32_t grid, std::uint32_t& lo, double& frac) {
    double s = (i + 0.5) * static_cast<double>(grid) / static_cast<double>(out) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(grid - 1));
    lo = static_cast<std::uint32_t>(std::floor(s));
    if (lo + 1 >= grid) lo = grid > 1 ? grid - 2 : 0;
    frac = grid > 1 ? s - lo : 0.0;
  };

  SegmentationMask mask(out_w, out_h);
  for (std::uint32_t y = 0; y < out_h; ++y) {
    std::uint32_t r0 = 0;
    double fy = 0.0;
    source(y, out_h, grid_h, r0, fy);
    const std::uint32_t r1 = std::min(r0 + 1, grid_h - 1);
    for (std::uint32_t x = 0; x < out_w; ++x) {
      std::uint32_t c0 = 0;
      double fx = 0.0;
      source(x, out_w, grid_w, c0, fx);
      const std::uint32_t c1 = std::min(c0 + 1, grid_w - 1);
      const double top = (1.0 - fx) * prob(r0, c0) + fx * prob(r0, c1);
      const double bottom = (1.0 - fx) * prob(r1, c0) + fx * prob(r1, c1);
      mask.at(x, y) = ((1.0 - fy) * top + fy * bottom) > 0.5 ? 1 : 0;
    }
  }
  return mask;
}

SegmentationMask refine_edges(const SegmentationMask& mask, const RgbImage& image, RefineMode mode,
                              const RefineOptions& options) {
  if (mask.width != image.width || mask.height != image.height) {
    throw DimensionMismatch("mask is " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                            " but image is " + std::to_string(image.width) + "x" + std::to_string(image.height));
  }
  SegmentationMask current = mask;
  if (mode == RefineMode::None) return current;

  const double inv_two_sigma_sq = 1.0 / (2.0 * options.color_sigma * options.color_sigma);
  const auto w = static_cast<int>(mask.width);
  const auto h = static_cast<int>(mask.height);
  SegmentationMask next = current;
  for (int iter = 0; iter < options.iterations; ++iter) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::uint8_t* centre = image.pixel(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y));
        double votes[2] = {0.0, 0.0};
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx;
            const int ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::uint8_t* other = image.pixel(static_cast<std::uint32_t>(nx), static_cast<std::uint32_t>(ny));
            double dist_sq = 0.0;
            for (int ch = 0; ch < 3; ++ch) {
              const double d = static_cast<double>(centre[ch]) - static_cast<double>(other[ch]);
              dist_sq += d * d;
            }
            votes[current.at(static_cast<std::uint32_t>(nx), static_cast<std::uint32_t>(ny))] +=
                std::exp(-dist_sq * inv_two_sigma_sq);
          }
        }
        const auto ux = static_cast<std::uint32_t>(x);
        const auto uy = static_cast<std::uint32_t>(y);
        if (votes[1] > votes[0]) {
          next.at(ux, uy) = 1;
        } else if (votes[0] > votes[1]) {
          next.at(ux, uy) = 0;
        } else {
          next.at(ux, uy) = current.at(ux, uy);
        }
      }
    }
    std::swap(current.pixels, next.pixels);
  }
  return current;
}

SegmentResult segment(const PatchFeatureGrid& features, const TrainConfig& config, const RgbImage* image) {
  SegmentResult out;
  out.training = train_image(features, config);
  const std::vector<int> labels = hard_labels(out.training.assignment);
  out.foreground = select_foreground(labels, features.grid_h, features.grid_w);

  std::uint32_t width = features.source_image_w;
  std::uint32_t height = features.source_image_h;
  if (width == 0 || height == 0) {
    const std::uint32_t patch = std::max<std::uint32_t>(features.patch_size, 1);
    width = features.grid_w * patch;
    height = features.grid_h * patch;
  }
  out.mask = upsample_mask(out.training.assignment.matrix(), out.foreground, features.grid_h, features.grid_w,
                           width, height);
  if (config.refine == RefineMode::Smooth && image != nullptr) {
    out.mask = refine_edges(out.mask, *image, RefineMode::Smooth);
    out.refined = true;
  }
  out.mask.provenance = {
      {"config", config.to_json()},
      {"run_seed", out.training.run_seed},
      {"best_restart", out.training.best_restart},
      {"multi_restart", config.restarts > 1},
      {"initial_loss", out.training.initial_loss},
      {"final_loss", out.training.final_loss},
      {"adam_steps", out.training.adam_steps},
      {"foreground_cluster", out.foreground},
      {"refine_applied", out.refined},
      {"grid", {{"h", features.grid_h}, {"w", features.grid_w}, {"patch_size", features.patch_size}}},
      {"mask_size", {{"w", width}, {"h", height}}},
  };
  return out;
}

}  // namespace unseg
