#include "unseg/selfcheck.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iomanip>
#include <sstream>

#include "unseg/errors.hpp"
#include "unseg/eval.hpp"
#include "unseg/io.hpp"
#include "unseg/loss.hpp"
#include "unseg/pipeline.hpp"
#include "unseg/rng.hpp"
#include "unseg/synthetic.hpp"

namespace unseg {

namespace {

PatchGraph random_graph(CounterRng& rng, Eigen::Index n, double p) {
  for (;;) {
    Matrix a = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (rng.uniform() < p) a(i, j) = a(j, i) = 1.0;
      }
    }
    PatchGraph g = PatchGraph::from_adjacency(std::move(a));
    if (g.edge_count > 0) return g;
  }
}

}  // namespace

GradientInstance make_gradient_instance(std::uint64_t seed, Eigen::Index nodes, Eigen::Index clusters,
                                        Activation activation, const ModelShape& shape_in) {
  CounterRng rng(seed);
  PatchGraph graph = random_graph(rng, nodes, 0.4);
  Matrix features(nodes, shape_in.in_dim);
  for (Eigen::Index i = 0; i < features.size(); ++i) features.data()[i] = rng.normal();
  ModelShape shape = shape_in;
  shape.clusters = clusters;
  ModelParams params = ModelParams::init(shape, activation, derive_seed(seed, 7));
  for (Matrix* b : {&params.b0, &params.b1, &params.b_head}) {
    for (Eigen::Index i = 0; i < b->size(); ++i) b->data()[i] = 0.1 * rng.normal();
  }
  Matrix a_hat = normalized_adjacency(graph);
  return {std::move(graph), ModelInputs(std::move(a_hat), features), std::move(params)};
}

double model_loss(const GradientInstance& instance, const ModelParams& params) {
  return loss_value(instance.graph, forward(params, instance.inputs).assignment);
}

std::vector<double> model_gradient(const GradientInstance& instance, const ModelParams& params) {
  const ForwardCache cache = forward(params, instance.inputs);
  return backward(params, instance.inputs, cache, loss_grad(instance.graph, cache.assignment)).flatten();
}

namespace {

using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

long double activation_ld(Activation kind, long double x) {
  switch (kind) {
    case Activation::SiLU:
      return x / (1.0L + std::exp(-x));
    case Activation::SELU:
      return x > 0 ? static_cast<long double>(kSeluLambda) * x
                   : static_cast<long double>(kSeluLambda) * static_cast<long double>(kSeluAlpha) * std::expm1(x);
    case Activation::GELU:
      return 0.5L * x * std::erfc(-x / std::sqrt(2.0L));
    case Activation::ReLU:
      return x > 0 ? x : 0.0L;
  }
  return x;
}

// Extended-precision params -> loss map, written independently of forward()/loss_value().
// Caches the unperturbed first layer: changed w0 entries are applied as column updates, and
// when b0 and w1 are unchanged, h1 * w1 is patched by rank-one corrections for the touched columns.
class ReferenceLoss {
 public:
  explicit ReferenceLoss(const GradientInstance& instance)
      : activation_(instance.params.activation),
        shape_(instance.params.shape()),
        base_(instance.params.flatten()),
        ax_(instance.inputs.aggregated_features.cast<long double>()),
        a_hat_(instance.inputs.a_hat.cast<long double>()),
        adjacency_(instance.graph.adjacency.cast<long double>()),
        degrees_(instance.graph.degrees.cast<long double>()) {
    z1_ = ax_ * instance.params.w0.cast<long double>();
    h1_ = activate(z1_.rowwise() + instance.params.b0.cast<long double>().row(0));
    h1w1_ = h1_ * instance.params.w1.cast<long double>();
  }

  long double operator()(std::span<const double> p) const {
    const Eigen::Index in = shape_.in_dim, hid = shape_.hidden, k = shape_.clusters;
    const Eigen::Index n = ax_.rows();

    // raw-bit comparison against the base vector: whole rows of w0 are skipped at once
    auto same = [&](std::size_t offset, std::size_t count) {
      return std::memcmp(p.data() + offset, base_.data() + offset, count * sizeof(double)) == 0;
    };
    const auto uhid = static_cast<std::size_t>(hid);
    LMatrix z1 = z1_;
    std::vector<bool> touched(uhid, false);
    for (Eigen::Index r = 0; r < in; ++r) {
      const std::size_t row = static_cast<std::size_t>(r) * uhid;
      if (same(row, uhid)) continue;
      for (std::size_t c = 0; c < uhid; ++c) {
        if (p[row + c] == base_[row + c]) continue;
        z1.col(static_cast<Eigen::Index>(c)) +=
            (static_cast<long double>(p[row + c]) - static_cast<long double>(base_[row + c])) * ax_.col(r);
        touched[c] = true;
      }
    }
    std::size_t at = static_cast<std::size_t>(in) * uhid;
    const bool first_layer_fixed = same(at, uhid + uhid * uhid);  // b0 and w1
    auto take = [&](Eigen::Index rows, Eigen::Index cols) {
      LMatrix m(rows, cols);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = p[at++];
      return m;
    };
    const LMatrix b0 = take(1, hid), w1 = take(hid, hid), b1 = take(1, hid);
    const LMatrix wh = take(hid, k), bh = take(1, k);

    LMatrix h1w1;
    if (first_layer_fixed) {
      h1w1 = h1w1_;
      for (Eigen::Index c = 0; c < hid; ++c) {
        if (!touched[static_cast<std::size_t>(c)]) continue;
        LMatrix column = activate(z1.col(c).array() + b0(0, c));
        h1w1 += (column - h1_.col(c)) * w1.row(c);
      }
    } else {
      h1w1 = activate(z1.rowwise() + b0.row(0)) * w1;
    }
    const LMatrix h2 = activate((a_hat_ * h1w1).rowwise() + b1.row(0));

    LMatrix c = h2 * wh;
    for (Eigen::Index i = 0; i < n; ++i) {
      c.row(i) += bh.row(0);
      const long double top = c.row(i).maxCoeff();
      long double sum = 0;
      for (Eigen::Index j = 0; j < k; ++j) sum += c(i, j) = std::exp(c(i, j) - top);
      c.row(i) /= sum;
    }

    const long double two_m = degrees_.sum();
    const long double trace = (c.transpose() * adjacency_ * c).trace();
    const long double null_model = (degrees_.transpose() * c).squaredNorm() / two_m;
    const long double modularity = (trace - null_model) / two_m;
    const long double regularizer =
        std::sqrt(static_cast<long double>(k)) / static_cast<long double>(n) * c.colwise().sum().norm() - 1.0L;
    return regularizer - modularity;
  }

 private:
  template <typename Expr>
  LMatrix activate(const Expr& z) const {
    return LMatrix(z).unaryExpr([this](long double v) { return activation_ld(activation_, v); });
  }

  Activation activation_;
  ModelShape shape_;
  std::vector<double> base_;
  LMatrix ax_, a_hat_, adjacency_;
  Eigen::Matrix<long double, Eigen::Dynamic, 1> degrees_;
  LMatrix z1_, h1_, h1w1_;  // unperturbed first layer
};

}  // namespace

long double reference_model_loss(const GradientInstance& instance, std::span<const double> flat_params) {
  return ReferenceLoss(instance)(flat_params);
}

GradientCheckReport check_model_gradient(const GradientInstance& instance, const GradientCheckOptions& options,
                                         double fault_scale) {
  std::vector<double> analytic = model_gradient(instance, instance.params);
  for (double& g : analytic) g *= fault_scale;
  const ReferenceLoss loss(instance);
  return finite_difference_check(std::cref(loss), instance.params.flatten(), analytic, options);
}

// ---------------------------------------------------------------------------

namespace {

template <typename Fn>
SelfcheckRow timed(std::string name, Fn&& fn) {
  SelfcheckRow row;
  row.name = std::move(name);
  const auto start = std::chrono::steady_clock::now();
  try {
    std::tie(row.passed, row.detail) = fn();
  } catch (const std::exception& e) {
    row.passed = false;
    row.detail = std::string("exception: ") + e.what();
  }
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(3) << v;
  return s.str();
}

std::pair<bool, std::string> modularity_equivalence() {
  double worst = 0.0;
  int graphs = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    CounterRng rng(derive_seed(0x5E1F, seed));
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(7));
    const PatchGraph g = random_graph(rng, n, 0.5);
    ++graphs;
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      for (Eigen::Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = (mask >> i) & 1u;
      worst = std::max(worst, std::abs(modularity_quadratic(g, one_hot(labels, 2)) - modularity_hard(g, labels)));
    }
  }
  return {worst <= 1e-12, std::to_string(graphs) + " graphs, max diff " + fmt(worst)};
}

std::pair<bool, std::string> two_triangles() {
  Matrix a = Matrix::Zero(6, 6);
  for (auto [i, j] : {std::pair{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}}) a(i, j) = a(j, i) = 1.0;
  const PatchGraph g = PatchGraph::from_adjacency(a);
  const std::vector<int> split = {0, 0, 0, 1, 1, 1};
  const std::vector<int> single(6, 0);
  const double q = modularity_hard(g, split);
  const double q1 = modularity_hard(g, single);
  return {std::abs(q - 0.5) <= 1e-12 && std::abs(q1) <= 1e-12, "Q(split) = " + fmt(q) + ", Q(single) = " + fmt(q1)};
}

std::pair<bool, std::string> gradient(Activation act, double fault) {
  GradientCheckOptions opt;
  double worst = 0.0;
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto inst = make_gradient_instance(derive_seed(0x6AD, seed), 12, 2 + static_cast<Eigen::Index>(seed % 2), act);
    opt.sample_seed = seed;
    const auto report = check_model_gradient(inst, opt, fault);
    worst = std::max(worst, report.max_rel_error);
    ok = ok && report.passed;
  }
  return {ok, "max rel err " + fmt(worst)};
}

std::pair<bool, std::string> planted() {
  double worst = 1.0;
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    const PlantedInstance inst = make_planted_instance(derive_seed(0x9A7, seed));
    TrainConfig cfg;
    cfg.seed = seed;
    const TrainResult r = train_image(inst.features, cfg);
    const auto labels = hard_labels(r.assignment);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) agree += labels[i] == inst.patch_labels[i];
    const double acc = static_cast<double>(std::max(agree, labels.size() - agree)) / static_cast<double>(labels.size());
    worst = std::min(worst, acc);
  }
  return {worst >= 0.99, "worst node accuracy " + fmt(worst)};
}

std::pair<bool, std::string> golden_bytes() {
  PatchFeatureGrid f;
  f.grid_h = f.grid_w = 1;
  f.data.resize(1, 2);
  f.data << 1.0, -2.0;
  f.source_image_w = 8;
  f.source_image_h = 8;
  f.patch_size = 8;
  const std::vector<std::uint8_t> golden = {
      'U', 'N', 'S', 'G', 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0,
      8,   0,   0,   0,   8, 0, 0, 0, 8, 0, 0, 0, 0, 0, 0x80, 0x3F, 0, 0, 0, 0xC0};
  const auto bytes = encode_features(f);
  const auto back = decode_features(bytes);
  bool rejected_all = true;
  for (std::size_t i = 0; i < 4; ++i) {
    for (int v = 0; v < 256; ++v) {
      if (v == golden[i]) continue;
      auto corrupt = golden;
      corrupt[i] = static_cast<std::uint8_t>(v);
      try {
        decode_features(corrupt);
        rejected_all = false;
      } catch (const BadMagic&) {
      }
    }
  }
  const bool ok = bytes == golden && back.data == f.data && rejected_all;
  return {ok, ok ? "40-byte fixture matches" : "golden fixture mismatch"};
}

std::pair<bool, std::string> miou_fixture() {
  SegmentationMask gt(2, 2), pred(2, 2);
  gt.at(0, 0) = gt.at(1, 0) = 1;
  pred.at(0, 0) = 1;
  const double v = miou(pred, gt);
  return {std::abs(v - 7.0 / 12.0) <= 1e-12, "mIoU = " + fmt(v)};
}

}  // namespace

std::vector<SelfcheckRow> run_selfcheck(const SelfcheckOptions& options) {
  std::vector<SelfcheckRow> rows;
  rows.push_back(timed("modularity trace == pairwise", modularity_equivalence));
  rows.push_back(timed("two-triangle modularity", two_triangles));
  for (Activation act : {Activation::SiLU, Activation::SELU, Activation::GELU, Activation::ReLU}) {
    rows.push_back(timed("gradient check (" + std::string(to_string(act)) + ")",
                         [&] { return gradient(act, options.gradient_fault_scale); }));
  }
  rows.push_back(timed("planted partition recovery", planted));
  rows.push_back(timed("feature file golden bytes", golden_bytes));
  rows.push_back(timed("mIoU 2x2 fixture", miou_fixture));
  return rows;
}

void print_selfcheck_table(const std::vector<SelfcheckRow>& rows, std::ostream& out) {
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  for (const auto& r : rows) {
    out << (r.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(static_cast<int>(width) + 2) << r.name
        << std::right << std::fixed << std::setprecision(2) << std::setw(7) << r.seconds << "s  " << r.detail << '\n';
    out.unsetf(std::ios::floatfield);
  }
}

}  // namespace unseg
