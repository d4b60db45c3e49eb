#include "unseg/loss.hpp"

#include <cmath>

#include "unseg/errors.hpp"

namespace unseg {

double collapse_regularizer(const Matrix& assignment) {
  const auto n = static_cast<double>(assignment.rows());
  const auto k = static_cast<double>(assignment.cols());
  return std::sqrt(k) / n * assignment.colwise().sum().norm() - 1.0;
}

LossTerms loss_terms(const PatchGraph& graph, const Matrix& assignment) {
  return {modularity_quadratic(graph, assignment), collapse_regularizer(assignment)};
}

Matrix loss_grad(const PatchGraph& graph, const Matrix& assignment) {
  if (assignment.rows() != graph.node_count()) throw ShapeMismatch("assignment rows differ from node count");
  if (graph.edge_count <= 0.0) throw EmptyGraph("loss is undefined for a graph without edges");
  const double m = graph.edge_count;
  const auto n = static_cast<double>(assignment.rows());
  const auto k = static_cast<double>(assignment.cols());

  const Eigen::RowVectorXd degree_mass = graph.degrees.transpose() * assignment;  // d^T C
  Matrix grad = graph.adjacency * assignment;
  grad.noalias() -= graph.degrees * degree_mass / (2.0 * m);
  grad *= -1.0 / m;

  const Eigen::RowVectorXd column_sums = assignment.colwise().sum();
  const double norm = column_sums.norm();
  if (norm > 0.0) grad.rowwise() += (std::sqrt(k) / (n * norm)) * column_sums;
  return grad;
}

}  // namespace unseg
