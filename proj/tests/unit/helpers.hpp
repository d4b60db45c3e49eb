#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "unseg/graph.hpp"
#include "unseg/image.hpp"
#include "unseg/rng.hpp"

namespace unseg::testing {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("unseg_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

inline std::vector<std::uint8_t> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Erdos-Renyi graph; retries until at least one edge exists.
inline PatchGraph random_graph(std::uint64_t seed, Eigen::Index n, double p) {
  CounterRng rng(seed);
  for (;;) {
    Matrix a = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j)
        if (rng.uniform() < p) a(i, j) = a(j, i) = 1.0;
    if (a.sum() > 0) return PatchGraph::from_adjacency(std::move(a));
  }
}

// Pairwise modularity straight from the delta(c_i, c_j) definition.
inline double pairwise_modularity(const Matrix& a, const std::vector<int>& labels) {
  const auto n = a.rows();
  Vector d = a.rowwise().sum();
  const double two_m = d.sum();
  double q = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (labels[i] == labels[j]) q += a(i, j) - d(i) * d(j) / two_m;
  return q / two_m;
}

inline SegmentationMask random_mask(CounterRng& rng, std::uint32_t w, std::uint32_t h, double p_fg = 0.5) {
  SegmentationMask m(w, h);
  for (auto& px : m.pixels) px = rng.uniform() < p_fg ? 1 : 0;
  return m;
}

inline Matrix random_stochastic(CounterRng& rng, Eigen::Index n, Eigen::Index k) {
  Matrix c(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) s += c(i, j) = rng.uniform() + 1e-3;
    c.row(i) /= s;
  }
  return c;
}

}  // namespace unseg::testing
