#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "unseg/features.hpp"
#include "unseg/nn.hpp"

namespace unseg {

/// Options for turning patch similarities into a graph.
struct AdjacencyOptions {
  double tau = 0.5;
  // Keep A_ii = 1 as the raw thresholded similarity would give. Off by
  // default: modularity assumes a simple graph.
  bool keep_self_loops = false;
};

/// Unweighted undirected graph over patches.
///
/// `adjacency` is stored dense (0.0 / 1.0); the patch graphs of interest have
/// a few hundred nodes and are often half full.
struct PatchGraph {
  Matrix adjacency;
  Vector degrees;
  double edge_count = 0.0;  // m = sum(degrees) / 2

  Eigen::Index node_count() const noexcept { return adjacency.rows(); }

  /// Builds degrees and edge count from a symmetric 0/1 matrix.
  static PatchGraph from_adjacency(Matrix adjacency);
};

/// Scales every row to unit Euclidean norm. Throws ZeroFeatureRow for rows
/// with norm below 1e-12.
PatchFeatureGrid normalize_features(const PatchFeatureGrid& features);

/// A_ij = 1 iff f_i . f_j > tau (strict), i != j unless self-loops are kept.
/// Expects row-normalised features. Throws EmptyGraph if no edge survives.
PatchGraph build_adjacency(const PatchFeatureGrid& features, const AdjacencyOptions& options = {});

/// D~^{-1/2} (A + I) D~^{-1/2}, with D~ the degree matrix of A + I. When the
/// graph already carries self-loops they are not doubled.
Matrix normalized_adjacency(const PatchGraph& graph);

/// Relaxed modularity (1/2m) Tr(C^T B C) with B = A - d d^T / 2m kept
/// factored: (1/2m) [Tr(C^T A C) - |d^T C|^2 / 2m].
double modularity_quadratic(const PatchGraph& graph, const Matrix& assignment);

/// Pairwise modularity (1/2m) sum_ij [A_ij - d_i d_j / 2m] delta(c_i, c_j).
double modularity_hard(const PatchGraph& graph, std::span<const int> labels);

/// One-hot n x k encoding of hard labels.
Matrix one_hot(std::span<const int> labels, int k);

}  // namespace unseg
