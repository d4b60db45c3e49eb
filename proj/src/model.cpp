#include "unseg/model.hpp"

#include <cmath>
#include <string>

#include "unseg/errors.hpp"
#include "unseg/rng.hpp"

namespace unseg {

ModelParams ModelParams::init(const ModelShape& shape, Activation activation, std::uint64_t seed) {
  ModelParams p;
  p.w0 = glorot_uniform(shape.in_dim, shape.hidden, derive_seed(seed, 0));
  p.b0 = Matrix::Zero(1, shape.hidden);
  p.w1 = glorot_uniform(shape.hidden, shape.hidden, derive_seed(seed, 1));
  p.b1 = Matrix::Zero(1, shape.hidden);
  p.w_head = glorot_uniform(shape.hidden, shape.clusters, derive_seed(seed, 2));
  p.b_head = Matrix::Zero(1, shape.clusters);
  p.activation = activation;
  return p;
}

ModelParams ModelParams::zeros(const ModelShape& shape, Activation activation) {
  ModelParams p;
  p.w0 = Matrix::Zero(shape.in_dim, shape.hidden);
  p.b0 = Matrix::Zero(1, shape.hidden);
  p.w1 = Matrix::Zero(shape.hidden, shape.hidden);
  p.b1 = Matrix::Zero(1, shape.hidden);
  p.w_head = Matrix::Zero(shape.hidden, shape.clusters);
  p.b_head = Matrix::Zero(1, shape.clusters);
  p.activation = activation;
  return p;
}

std::size_t ModelParams::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const Matrix* t : tensors()) n += static_cast<std::size_t>(t->size());
  return n;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const Matrix* t : tensors()) flat.insert(flat.end(), t->data(), t->data() + t->size());
  return flat;
}

void ModelParams::assign_flat(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw ShapeMismatch("flat parameter vector has the wrong length");
  std::size_t offset = 0;
  for (Matrix* t : tensors()) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), t->size(), t->data());
    offset += static_cast<std::size_t>(t->size());
  }
}

void ModelParams::validate() const {
  const auto h = w0.cols();
  const auto k = w_head.cols();
  if (b0.rows() != 1 || b0.cols() != h || w1.rows() != h || w1.cols() != h || b1.rows() != 1 ||
      b1.cols() != h || w_head.rows() != h || b_head.rows() != 1 || b_head.cols() != k) {
    throw ShapeMismatch("model parameter shapes are inconsistent");
  }
}

SoftAssignment::SoftAssignment(Matrix values) : values_(std::move(values)) {
  if (!values_.allFinite()) throw InvalidArgument("soft assignment contains non-finite entries");
  if (values_.size() > 0 && (values_.minCoeff() < 0.0 || values_.maxCoeff() > 1.0)) {
    throw InvalidArgument("soft assignment entries must lie in [0, 1]");
  }
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    if (std::abs(values_.row(i).sum() - 1.0) > 1e-9) {
      throw InvalidArgument("soft assignment row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

ModelInputs::ModelInputs(Matrix a_hat_in, const Matrix& features) : a_hat(std::move(a_hat_in)) {
  if (a_hat.rows() != a_hat.cols() || a_hat.rows() != features.rows()) {
    throw ShapeMismatch("A_hat is " + std::to_string(a_hat.rows()) + "x" + std::to_string(a_hat.cols()) +
                        " but features have " + std::to_string(features.rows()) + " rows");
  }
  aggregated_features = a_hat * features;
}

ForwardCache forward(const ModelParams& params, const ModelInputs& inputs) {
  params.validate();
  if (inputs.aggregated_features.cols() != params.w0.rows()) {
    throw ShapeMismatch("features have dimension " + std::to_string(inputs.aggregated_features.cols()) +
                        ", model expects " + std::to_string(params.w0.rows()));
  }
  ForwardCache c;
  c.z1 = inputs.aggregated_features * params.w0;
  c.z1.rowwise() += params.b0.row(0);
  c.h1 = activation(params.activation, c.z1);

  c.z2 = inputs.a_hat * (c.h1 * params.w1);
  c.z2.rowwise() += params.b1.row(0);
  c.h2 = activation(params.activation, c.z2);

  Matrix logits = c.h2 * params.w_head;
  logits.rowwise() += params.b_head.row(0);
  c.assignment = softmax_rows(logits);
  return c;
}

SoftAssignment forward(const ModelParams& params, const Matrix& a_hat, const Matrix& features) {
  return SoftAssignment(forward(params, ModelInputs(a_hat, features)).assignment);
}

ModelParams backward(const ModelParams& params, const ModelInputs& inputs, const ForwardCache& cache,
                     const Matrix& grad_assignment) {
  const Matrix& c = cache.assignment;
  if (grad_assignment.rows() != c.rows() || grad_assignment.cols() != c.cols()) {
    throw ShapeMismatch("upstream gradient shape differs from the assignment");
  }
  ModelParams g;
  g.activation = params.activation;

  // Softmax Jacobian-vector product: dZ = C * (G - rowsum(G * C)).
  const Vector inner = grad_assignment.cwiseProduct(c).rowwise().sum();
  const Matrix d_logits = c.cwiseProduct(grad_assignment - inner.replicate(1, c.cols()));
  g.w_head = cache.h2.transpose() * d_logits;
  g.b_head = d_logits.colwise().sum();

  const Matrix d_z2 = (d_logits * params.w_head.transpose())
                          .cwiseProduct(activation_grad(params.activation, cache.z2));
  const Matrix d_m1 = inputs.a_hat.transpose() * d_z2;  // gradient w.r.t. H1 W1
  g.w1 = cache.h1.transpose() * d_m1;
  g.b1 = d_z2.colwise().sum();

  const Matrix d_z1 = (d_m1 * params.w1.transpose())
                          .cwiseProduct(activation_grad(params.activation, cache.z1));
  g.w0 = inputs.aggregated_features.transpose() * d_z1;
  g.b0 = d_z1.colwise().sum();
  return g;
}

std::vector<int> hard_labels(const Matrix& assignment) {
  std::vector<int> labels(static_cast<std::size_t>(assignment.rows()), 0);
  for (Eigen::Index i = 0; i < assignment.rows(); ++i) {
    int best = 0;
    for (Eigen::Index j = 1; j < assignment.cols(); ++j) {
      if (assignment(i, j) > assignment(i, best)) best = static_cast<int>(j);
    }
    labels[static_cast<std::size_t>(i)] = best;
  }
  return labels;
}

}  // namespace unseg
