#pragma once

#include "unseg/graph.hpp"
#include "unseg/nn.hpp"

namespace unseg {

/// The two additive parts of the clustering loss.
struct LossTerms {
  double modularity = 0.0;   // relaxed modularity, enters the loss negated
  double regularizer = 0.0;  // sqrt(k)/n * |column sums| - 1

  double total() const noexcept { return -modularity + regularizer; }
};

/// Collapse regulariser on its own: sqrt(k)/n * |sum_i C_i| - 1.
double collapse_regularizer(const Matrix& assignment);

LossTerms loss_terms(const PatchGraph& graph, const Matrix& assignment);

/// L = -(1/2m) Tr(C^T B C) + sqrt(k)/n |sum_i C_i| - 1.
inline double loss_value(const PatchGraph& graph, const Matrix& assignment) {
  return loss_terms(graph, assignment).total();
}

/// dL/dC = -(1/m) (A C - d (d^T C) / 2m) + sqrt(k)/n * 1 s^T / |s|, with s the
/// column sums. The regulariser gradient is taken as zero when s = 0.
Matrix loss_grad(const PatchGraph& graph, const Matrix& assignment);

}  // namespace unseg
