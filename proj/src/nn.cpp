#include "unseg/nn.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>

#include "unseg/errors.hpp"
#include "unseg/rng.hpp"

namespace unseg {

namespace {

double sigmoid(double x) {
  // Split on sign so exp never overflows.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

std::string_view to_string(Activation kind) {
  switch (kind) {
    case Activation::SiLU: return "silu";
    case Activation::SELU: return "selu";
    case Activation::GELU: return "gelu";
    case Activation::ReLU: return "relu";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "silu") return Activation::SiLU;
  if (lower == "selu") return Activation::SELU;
  if (lower == "gelu") return Activation::GELU;
  if (lower == "relu") return Activation::ReLU;
  throw InvalidArgument("unknown activation '" + std::string(name) +
                        "' (expected silu, selu, gelu or relu)");
}

double activation(Activation kind, double x) {
  switch (kind) {
    case Activation::SiLU: return x * sigmoid(x);
    case Activation::SELU: return kSeluLambda * (x > 0.0 ? x : kSeluAlpha * std::expm1(x));
    case Activation::GELU: return x * normal_cdf(x);
    case Activation::ReLU: return x > 0.0 ? x : 0.0;
  }
  return 0.0;
}

double activation_grad(Activation kind, double x) {
  switch (kind) {
    case Activation::SiLU: {
      const double s = sigmoid(x);
      return s * (1.0 + x * (1.0 - s));
    }
    case Activation::SELU: return x > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x);
    case Activation::GELU: return normal_cdf(x) + x * normal_pdf(x);
    case Activation::ReLU: return x > 0.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

Matrix activation(Activation kind, const Matrix& x) {
  return x.unaryExpr([kind](double v) { return activation(kind, v); });
}

Matrix activation_grad(Activation kind, const Matrix& x) {
  return x.unaryExpr([kind](double v) { return activation_grad(kind, v); });
}

Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  if (rows < 1 || cols < 1) throw InvalidArgument("glorot_uniform: rows and cols must be >= 1");
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  CounterRng rng(seed);
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = rng.uniform(-limit, limit);
  return out;
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double shift = m.row(i).maxCoeff();
    out.row(i) = (m.row(i).array() - shift).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads, AdamState& state) {
  if (params.size() != grads.size()) {
    throw ShapeMismatch("adam_step: " + std::to_string(params.size()) + " parameter tensors but " +
                        std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t]->rows() != grads[t]->rows() || params[t]->cols() != grads[t]->cols()) {
      throw ShapeMismatch("adam_step: gradient " + std::to_string(t) + " shape differs from parameter");
    }
  }
  if (state.first_moment.empty()) {
    for (const Matrix* p : params) {
      state.first_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.second_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  } else if (state.first_moment.size() != params.size()) {
    throw ShapeMismatch("adam_step: optimizer state tracks a different number of tensors");
  }

  const AdamOptions& opt = state.options;
  const auto t = static_cast<double>(state.step_count + 1);
  double lr = opt.lr;
  if (opt.decay_mode == DecayMode::LearningRate) lr = opt.lr / (1.0 + opt.weight_decay * state.step_count);
  const double bias1 = 1.0 - std::pow(opt.beta1, t);
  const double bias2 = 1.0 - std::pow(opt.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    if (m.rows() != p.rows() || m.cols() != p.cols()) {
      throw ShapeMismatch("adam_step: optimizer moment " + std::to_string(i) + " shape differs");
    }
    const Matrix& g = *grads[i];
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = opt.beta2 * v + (1.0 - opt.beta2) * g.cwiseProduct(g);
    if (opt.decay_mode == DecayMode::DecoupledWeight && opt.weight_decay != 0.0) {
      p *= 1.0 - lr * opt.weight_decay;
    }
    p.array() -= lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + opt.epsilon);
  }
  ++state.step_count;
}

GradientCheckReport finite_difference_check(
    const std::function<long double(std::span<const double>)>& loss, std::span<const double> params,
    std::span<const double> analytic, const GradientCheckOptions& options) {
  if (params.size() != analytic.size()) {
    throw ShapeMismatch("finite_difference_check: gradient length differs from parameter count");
  }
  std::vector<std::size_t> coords(params.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (coords.size() > options.full_check_limit && options.sample_size < coords.size()) {
    // Partial Fisher-Yates: the first sample_size entries become a uniform subsample.
    CounterRng rng(options.sample_seed);
    for (std::size_t i = 0; i < options.sample_size; ++i) {
      const std::size_t j = i + rng.below(coords.size() - i);
      std::swap(coords[i], coords[j]);
    }
    coords.resize(options.sample_size);
    std::sort(coords.begin(), coords.end());
  }

  double scale = 0.0;
  for (double g : analytic) scale = std::max(scale, std::abs(g));
  const double floor = std::max(options.relative_floor * scale, 1e-300);

  std::vector<double> work(params.begin(), params.end());
  GradientCheckReport report;
  for (std::size_t c : coords) {
    const double original = work[c];
    const double up = original + options.step;
    const double down = original - options.step;
    work[c] = up;
    const long double plus = loss(work);
    work[c] = down;
    const long double minus = loss(work);
    work[c] = original;
    // divide by the step actually realised in double arithmetic
    const double numeric =
        static_cast<double>((plus - minus) / (static_cast<long double>(up) - static_cast<long double>(down)));
    const double abs_err = std::abs(numeric - analytic[c]);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[c]), floor});
    const double rel_err = abs_err / denom;
    report.max_abs_error = std::max(report.max_abs_error, abs_err);
    if (!(rel_err <= report.max_rel_error)) {
      report.max_rel_error = rel_err;
      report.worst_index = c;
    }
  }
  report.coordinates_checked = coords.size();
  report.passed = std::isfinite(report.max_rel_error) && report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace unseg
