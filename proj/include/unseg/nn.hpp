#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace unseg {

// Row-major so that row i of a node matrix is node i's feature vector.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

enum class Activation { SiLU, SELU, GELU, ReLU };

inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;

std::string_view to_string(Activation kind);
/// Accepts "silu", "selu", "gelu", "relu" (case-insensitive). Throws InvalidArgument.
Activation parse_activation(std::string_view name);

double activation(Activation kind, double x);
double activation_grad(Activation kind, double x);

Matrix activation(Activation kind, const Matrix& x);
Matrix activation_grad(Activation kind, const Matrix& x);

// ---------------------------------------------------------------------------
// Initialisation and softmax
// ---------------------------------------------------------------------------

/// i.i.d. U[-L, L] with L = sqrt(6 / (rows + cols)), filled row-major from
/// CounterRng(seed).
Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed);

/// Row-wise softmax with per-row max subtraction.
Matrix softmax_rows(const Matrix& m);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

enum class DecayMode {
  /// p <- p - lr * wd * p before the Adam update (AdamW).
  DecoupledWeight,
  /// lr_t = lr / (1 + decay * t), no weight decay.
  LearningRate,
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-2;
  DecayMode decay_mode = DecayMode::DecoupledWeight;
};

struct AdamState {
  AdamOptions options;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::int64_t step_count = 0;

  AdamState() = default;
  explicit AdamState(AdamOptions opts) : options(opts) {}
};

/// One bias-corrected Adam update of every tensor in `params`. Moments are
/// lazily zero-initialised on the first call. Throws ShapeMismatch.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads, AdamState& state);

// ---------------------------------------------------------------------------
// Finite-difference gradient check
// ---------------------------------------------------------------------------

struct GradientCheckOptions {
  double step = 1e-6;
  double tolerance = 1e-5;
  // Denominator floor of the relative error, as a fraction of the largest
  // gradient magnitude. Keeps coordinates with vanishing gradient from turning
  // central-difference round-off into huge relative errors.
  double relative_floor = 1e-3;
  // Above this many coordinates a random subsample of `sample_size` is checked.
  std::size_t full_check_limit = 10000;
  std::size_t sample_size = 1000;
  std::uint64_t sample_seed = 0;
};

struct GradientCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t coordinates_checked = 0;
  bool passed = false;
};

/// Compares `analytic` against central differences of `loss` around `params`.
/// `loss` receives a perturbed copy of the flat parameter vector.
GradientCheckReport finite_difference_check(
    const std::function<long double(std::span<const double>)>& loss, std::span<const double> params,
    std::span<const double> analytic, const GradientCheckOptions& options = {});

}  // namespace unseg
