#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "unseg/nn.hpp"

namespace unseg {

/// Layer widths. Defaults are the ViT-S/8 feature width and the 64-wide GCN.
struct ModelShape {
  Eigen::Index in_dim = 384;
  Eigen::Index hidden = 64;
  Eigen::Index clusters = 2;
};

/// Two GCN layers followed by a fully connected head. Biases are 1 x c rows.
struct ModelParams {
  Matrix w0, b0;          // in_dim x hidden, 1 x hidden
  Matrix w1, b1;          // hidden x hidden, 1 x hidden
  Matrix w_head, b_head;  // hidden x k, 1 x k
  Activation activation = Activation::SiLU;

  static constexpr std::size_t kTensorCount = 6;

  /// Glorot-uniform weights, zero biases. Each weight draws from its own
  /// stream derived from `seed`.
  static ModelParams init(const ModelShape& shape, Activation activation, std::uint64_t seed);
  /// All-zero tensors of the given shape (gradient accumulator).
  static ModelParams zeros(const ModelShape& shape, Activation activation);

  ModelShape shape() const noexcept { return {w0.rows(), w0.cols(), w_head.cols()}; }

  std::array<Matrix*, kTensorCount> tensors() noexcept { return {&w0, &b0, &w1, &b1, &w_head, &b_head}; }
  std::array<const Matrix*, kTensorCount> tensors() const noexcept {
    return {&w0, &b0, &w1, &b1, &w_head, &b_head};
  }

  std::size_t parameter_count() const noexcept;
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> flat);

  /// Throws ShapeMismatch if tensor shapes disagree with each other.
  void validate() const;
};

/// n x k row-stochastic soft cluster assignment.
class SoftAssignment {
 public:
  SoftAssignment() = default;
  /// Throws InvalidArgument unless entries lie in [0, 1] and rows sum to 1
  /// within 1e-9.
  explicit SoftAssignment(Matrix values);

  const Matrix& matrix() const noexcept { return values_; }
  Eigen::Index rows() const noexcept { return values_.rows(); }
  Eigen::Index cols() const noexcept { return values_.cols(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }

 private:
  Matrix values_;
};

/// Graph operator and node features, with the first aggregation A_hat X
/// precomputed since X never changes during training.
struct ModelInputs {
  Matrix a_hat;
  Matrix aggregated_features;  // A_hat * X

  ModelInputs(Matrix a_hat, const Matrix& features);
};

struct ForwardCache {
  Matrix z1, h1;  // first GCN layer pre/post activation
  Matrix z2, h2;  // second GCN layer
  Matrix assignment;
};

/// H1 = act(A X W0 + b0); H2 = act(A H1 W1 + b1); C = softmax(H2 Wh + bh).
ForwardCache forward(const ModelParams& params, const ModelInputs& inputs);
SoftAssignment forward(const ModelParams& params, const Matrix& a_hat, const Matrix& features);

/// Reverse pass for dL/dC. Does not assume A_hat is symmetric.
ModelParams backward(const ModelParams& params, const ModelInputs& inputs, const ForwardCache& cache,
                     const Matrix& grad_assignment);

/// Row-wise argmax; ties go to the lower cluster index.
std::vector<int> hard_labels(const Matrix& assignment);
inline std::vector<int> hard_labels(const SoftAssignment& c) { return hard_labels(c.matrix()); }

}  // namespace unseg
