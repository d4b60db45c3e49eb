#include "unseg/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include "unseg/errors.hpp"
#include "unseg/eval.hpp"
#include "unseg/io.hpp"
#include "unseg/selfcheck.hpp"

namespace unseg::cli {

namespace fs = std::filesystem;

std::uint64_t stem_hash(std::string_view stem) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : stem) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

namespace {

std::optional<fs::path> find_image(const fs::path& dir, const std::string& stem) {
  if (!fs::is_directory(dir)) return std::nullopt;
  std::vector<fs::path> matches;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().stem() == stem && is_image_file(entry.path())) {
      matches.push_back(entry.path());
    }
  }
  if (matches.empty()) return std::nullopt;
  std::sort(matches.begin(), matches.end());
  return matches.front();
}

std::vector<fs::path> feature_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == kFeatureExtension) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace

std::vector<SegmentJob> collect_jobs(const std::optional<fs::path>& features, const std::optional<fs::path>& dataset,
                                     const std::optional<fs::path>& image) {
  std::vector<SegmentJob> jobs;
  if (features) {
    if (fs::is_directory(*features)) {
      for (const auto& f : feature_files(*features)) jobs.push_back({f.stem().string(), f, std::nullopt});
    } else {
      jobs.push_back({features->stem().string(), *features, image});
    }
  } else if (dataset) {
    for (const auto& f : feature_files(*dataset / "features")) {
      const std::string stem = f.stem().string();
      jobs.push_back({stem, f, find_image(*dataset / "images", stem)});
    }
  }
  std::sort(jobs.begin(), jobs.end(), [](const auto& a, const auto& b) { return a.stem < b.stem; });
  return jobs;
}

int run_segment(const SegmentOptions& options, std::ostream& out, std::ostream& err) {
  options.config.validate();
  fs::create_directories(options.out_dir);

  struct Outcome {
    bool ok = false;
    std::string message;
  };
  std::vector<Outcome> outcomes(options.jobs.size());
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t i = next++; i < options.jobs.size(); i = next++) {
      const SegmentJob& job = options.jobs[i];
      try {
        const PatchFeatureGrid features = read_features(job.features);
        std::optional<RgbImage> image;
        if (options.config.refine == RefineMode::Smooth && job.image) image = read_rgb_image(*job.image);

        TrainConfig config = options.config;
        config.seed = image_seed(options.config.seed, job.stem);
        SegmentResult result = segment(features, config, image ? &*image : nullptr);

        nlohmann::json provenance = result.mask.provenance;
        provenance["name"] = job.stem;
        provenance["base_seed"] = options.config.seed;
        provenance["feature_file"] = job.features.filename().string();
        provenance["image_file"] = job.image ? job.image->filename().string() : std::string();
        write_mask(result.mask, options.out_dir / (job.stem + options.mask_extension));
        write_text(options.out_dir / (job.stem + ".json"), provenance.dump(2) + "\n");
        outcomes[i] = {true, "loss " + std::to_string(result.training.final_loss)};
      } catch (const std::exception& e) {
        outcomes[i] = {false, e.what()};
      }
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(options.jobs.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }

  std::size_t failed = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].ok) {
      out << "ok      " << options.jobs[i].stem << "  " << outcomes[i].message << '\n';
    } else {
      ++failed;
      err << "FAILED  " << options.jobs[i].stem << ": " << outcomes[i].message << '\n';
    }
  }
  out << (outcomes.size() - failed) << " of " << outcomes.size() << " images segmented\n";
  return failed == 0 ? kExitOk : kExitFailures;
}

int run_eval(const fs::path& pred_dir, const fs::path& gt_dir, const fs::path& report_path, std::ostream& out,
             std::ostream& err) {
  const nlohmann::json config = {{"pred", pred_dir.string()}, {"gt", gt_dir.string()}};
  const EvalReport report = evaluate_directories(pred_dir, gt_dir, config);
  if (report_path.has_parent_path()) fs::create_directories(report_path.parent_path());
  write_text(report_path, report.to_json().dump(2) + "\n");
  for (const auto& f : report.failures) err << "FAILED  " << f.name << ": " << f.error << '\n';
  out << "aggregate_miou " << std::setprecision(12) << report.aggregate_miou << '\n';
  out << "images " << report.images.size() << " failures " << report.failures.size() << '\n';
  return report.failures.empty() ? kExitOk : kExitFailures;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unsupervised binary segmentation of patch-feature grids with a modularity-trained GCN", "unseg"};
  app.set_config("--config", "", "TOML/INI file with option defaults ([segment] / [eval] sections)");
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  // segment
  auto* seg = app.add_subcommand("segment", "Segment feature files into binary masks");
  std::optional<fs::path> features, dataset, image;
  fs::path out_dir;
  TrainConfig cfg;
  std::string activation = "silu";
  std::string refine = "smooth";
  std::string decay = "weight";
  std::string format = "png";
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  unsigned workers = hw;
  bool keep_loops = false;

  auto* features_opt = seg->add_option("--features", features, "Feature file (.unsg) or directory of feature files")
                           ->check(CLI::ExistingPath);
  auto* dataset_opt = seg->add_option("--dataset", dataset, "Dataset root containing features/ (and images/ for refinement)")
                          ->check(CLI::ExistingDirectory);
  features_opt->excludes(dataset_opt);
  seg->add_option("--image", image, "RGB image for edge refinement (single feature file only)")->check(CLI::ExistingFile);
  seg->add_option("--out", out_dir, "Output directory for masks and provenance JSON")->required();
  seg->add_option("--tau", cfg.tau, "Similarity threshold for graph edges")->capture_default_str();
  seg->add_option("--epochs", cfg.epochs, "Adam steps (one per epoch)")->capture_default_str();
  seg->add_option("--lr", cfg.lr, "Learning rate")->capture_default_str();
  seg->add_option("--weight-decay", cfg.weight_decay, "Decay coefficient")->capture_default_str();
  seg->add_option("--decay-mode", decay, "weight: decoupled weight decay; lr: lr / (1 + decay * step)")
      ->check(CLI::IsMember({"weight", "lr"}))
      ->capture_default_str();
  seg->add_option("--k", cfg.k, "Number of clusters")->capture_default_str();
  seg->add_option("--activation", activation, "GCN activation")
      ->check(CLI::IsMember({"silu", "selu", "gelu", "relu"}))
      ->capture_default_str();
  seg->add_option("--seed", cfg.seed, "Base seed; each image uses seed + FNV-1a(stem)")->capture_default_str();
  seg->add_option("--restarts", cfg.restarts, "Independent runs per image, lowest final loss kept")->capture_default_str();
  seg->add_option("--refine", refine, "Edge refinement")->check(CLI::IsMember({"none", "smooth"}))->capture_default_str();
  seg->add_option("--workers", workers, "Parallel images (default: logical CPU count)")
      ->default_str(std::to_string(hw) + " (logical CPU count)");
  seg->add_flag("--keep-self-loops", keep_loops, "Keep the similarity diagonal in the adjacency");
  seg->add_option("--format", format, "Mask file format")->check(CLI::IsMember({"png", "pgm"}))->capture_default_str();

  // eval
  auto* ev = app.add_subcommand("eval", "Score predicted masks against ground truth (mIoU)");
  fs::path pred_dir, gt_dir, report_path;
  ev->add_option("--pred", pred_dir, "Directory of predicted masks")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--gt", gt_dir, "Directory of ground-truth masks")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--report", report_path, "Output JSON report")->required();

  // selfcheck
  auto* sc = app.add_subcommand("selfcheck", "Run the embedded verification battery");
  double fault = 1.0;
  sc->add_option("--inject-gradient-fault", fault, "Scale analytic gradients (development)")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*seg) {
      if (!features && !dataset) {
        err << "segment: one of --features or --dataset is required\n" << seg->help();
        return kExitUsage;
      }
      cfg.activation = parse_activation(activation);
      cfg.refine = parse_refine_mode(refine);
      cfg.decay_mode = decay == "lr" ? DecayMode::LearningRate : DecayMode::DecoupledWeight;
      cfg.keep_self_loops = keep_loops;
      try {
        cfg.validate();
      } catch (const InvalidArgument& e) {
        err << "segment: " << e.what() << '\n';
        return kExitUsage;
      }
      SegmentOptions options;
      options.jobs = collect_jobs(features, dataset, image);
      if (options.jobs.empty()) {
        err << "segment: no feature files found\n";
        return kExitFailures;
      }
      options.out_dir = out_dir;
      options.config = cfg;
      options.workers = std::max(1u, workers);
      options.mask_extension = "." + format;
      return run_segment(options, out, err);
    }
    if (*ev) return run_eval(pred_dir, gt_dir, report_path, out, err);
    if (*sc) {
      const auto rows = run_selfcheck({fault});
      print_selfcheck_table(rows, out);
      const bool ok = std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.passed; });
      return ok ? kExitOk : kExitFailures;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailures;
  }
  return kExitUsage;
}

}  // namespace unseg::cli
