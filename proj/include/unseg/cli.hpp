#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unseg/pipeline.hpp"

namespace unseg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailures = 1;
inline constexpr int kExitUsage = 2;

/// 64-bit FNV-1a of the file stem.
std::uint64_t stem_hash(std::string_view stem);

/// Per-image seed: base seed + stem hash (mod 2^64). Independent of worker
/// count and processing order.
inline std::uint64_t image_seed(std::uint64_t base, std::string_view stem) { return base + stem_hash(stem); }

struct SegmentJob {
  std::string stem;
  std::filesystem::path features;
  std::optional<std::filesystem::path> image;  // used for edge refinement
};

struct SegmentOptions {
  std::vector<SegmentJob> jobs;
  std::filesystem::path out_dir;
  TrainConfig config;
  unsigned workers = 1;
  std::string mask_extension = ".png";
};

/// Resolves `--features <file|dir>` / `--dataset <root>` into jobs, sorted by stem.
std::vector<SegmentJob> collect_jobs(const std::optional<std::filesystem::path>& features,
                                     const std::optional<std::filesystem::path>& dataset,
                                     const std::optional<std::filesystem::path>& image);

/// Writes <stem><ext> and <stem>.json per job. Returns 0 or 1 (some failed).
int run_segment(const SegmentOptions& options, std::ostream& out, std::ostream& err);

/// Writes the JSON report, prints the aggregate mIoU. Returns 0 or 1.
int run_eval(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
             const std::filesystem::path& report, std::ostream& out, std::ostream& err);

/// Full command line entry point (argv[0] is the program name).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace unseg::cli
