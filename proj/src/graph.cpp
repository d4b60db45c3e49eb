#include "unseg/graph.hpp"

#include <cmath>
#include <string>

#include "unseg/errors.hpp"

namespace unseg {

void PatchFeatureGrid::validate() const {
  if (grid_h < 1 || grid_w < 1) throw InvalidArgument("feature grid must be at least 1x1");
  if (data.cols() < 1) throw InvalidArgument("feature dimension must be >= 1");
  if (static_cast<std::size_t>(data.rows()) != node_count()) {
    throw InvalidArgument("feature matrix has " + std::to_string(data.rows()) + " rows, grid needs " +
                          std::to_string(node_count()));
  }
  if (!data.allFinite()) throw InvalidArgument("feature matrix contains NaN or Inf");
}

PatchGraph PatchGraph::from_adjacency(Matrix adjacency) {
  if (adjacency.rows() != adjacency.cols()) throw ShapeMismatch("adjacency must be square");
  PatchGraph g;
  g.degrees = adjacency.rowwise().sum();
  g.edge_count = 0.5 * g.degrees.sum();
  g.adjacency = std::move(adjacency);
  return g;
}

PatchFeatureGrid normalize_features(const PatchFeatureGrid& features) {
  features.validate();
  PatchFeatureGrid out = features;
  for (Eigen::Index i = 0; i < out.data.rows(); ++i) {
    const double norm = out.data.row(i).norm();
    if (norm < 1e-12) throw ZeroFeatureRow(static_cast<std::size_t>(i));
    out.data.row(i) /= norm;
  }
  return out;
}

PatchGraph build_adjacency(const PatchFeatureGrid& features, const AdjacencyOptions& options) {
  features.validate();
  if (!(options.tau > -1.0 && options.tau < 1.0)) {
    throw InvalidArgument("tau must lie in (-1, 1), got " + std::to_string(options.tau));
  }
  const Matrix similarity = features.data * features.data.transpose();
  const Eigen::Index n = similarity.rows();
  Matrix adjacency = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      // Read one triangle only so rounding asymmetry in the product cannot
      // produce an asymmetric A.
      if (similarity(i, j) > options.tau) {
        adjacency(i, j) = 1.0;
        adjacency(j, i) = 1.0;
      }
    }
    if (options.keep_self_loops && similarity(i, i) > options.tau) adjacency(i, i) = 1.0;
  }
  PatchGraph graph = PatchGraph::from_adjacency(std::move(adjacency));
  if (graph.edge_count == 0.0) {
    throw EmptyGraph("no patch pair has similarity above tau = " + std::to_string(options.tau));
  }
  return graph;
}

Matrix normalized_adjacency(const PatchGraph& graph) {
  Matrix with_loops = graph.adjacency;
  with_loops.diagonal().setOnes();
  const Vector inv_sqrt = with_loops.rowwise().sum().cwiseSqrt().cwiseInverse();
  return inv_sqrt.asDiagonal() * with_loops * inv_sqrt.asDiagonal();
}

double modularity_quadratic(const PatchGraph& graph, const Matrix& assignment) {
  if (assignment.rows() != graph.node_count()) {
    throw ShapeMismatch("assignment has " + std::to_string(assignment.rows()) + " rows, graph has " +
                        std::to_string(graph.node_count()) + " nodes");
  }
  if (graph.edge_count <= 0.0) throw EmptyGraph("modularity is undefined for a graph without edges");
  const double two_m = 2.0 * graph.edge_count;
  const double within = (assignment.transpose() * graph.adjacency * assignment).trace();
  const double null_model = (graph.degrees.transpose() * assignment).squaredNorm() / two_m;
  return (within - null_model) / two_m;
}

double modularity_hard(const PatchGraph& graph, std::span<const int> labels) {
  const Eigen::Index n = graph.node_count();
  if (static_cast<Eigen::Index>(labels.size()) != n) throw ShapeMismatch("label count differs from node count");
  if (graph.edge_count <= 0.0) throw EmptyGraph("modularity is undefined for a graph without edges");
  const double two_m = 2.0 * graph.edge_count;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (labels[i] != labels[j]) continue;
      sum += graph.adjacency(i, j) - graph.degrees(i) * graph.degrees(j) / two_m;
    }
  }
  return sum / two_m;
}

Matrix one_hot(std::span<const int> labels, int k) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k) throw InvalidArgument("label out of range [0, k)");
    out(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return out;
}

}  // namespace unseg
