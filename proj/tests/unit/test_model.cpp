#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "helpers.hpp"
#include "unseg/graph.hpp"
#include "unseg/loss.hpp"
#include "unseg/model.hpp"
#include "unseg/selfcheck.hpp"

using namespace unseg;

namespace {

Matrix random_matrix(CounterRng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

ModelParams random_params(std::uint64_t seed, const ModelShape& shape, Activation act) {
  auto p = ModelParams::init(shape, act, seed);
  CounterRng rng(seed + 1);
  for (Matrix* b : {&p.b0, &p.b1, &p.b_head})
    for (Eigen::Index i = 0; i < b->size(); ++i) b->data()[i] = 0.1 * rng.normal();
  return p;
}

// Per-node MLP written out with explicit loops.
Matrix mlp_oracle(const ModelParams& p, const Matrix& x) {
  auto dense = [&](const Matrix& in, const Matrix& w, const Matrix& b, bool act) {
    Matrix out(in.rows(), w.cols());
    for (Eigen::Index i = 0; i < in.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        double s = b(0, j);
        for (Eigen::Index t = 0; t < in.cols(); ++t) s += in(i, t) * w(t, j);
        out(i, j) = act ? activation(p.activation, s) : s;
      }
    return out;
  };
  Matrix logits = dense(dense(dense(x, p.w0, p.b0, true), p.w1, p.b1, true), p.w_head, p.b_head, false);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double mx = logits.row(i).maxCoeff(), s = 0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) s += logits(i, j) = std::exp(logits(i, j) - mx);
    logits.row(i) /= s;
  }
  return logits;
}

}  // namespace

TEST_CASE("single node with zero weights gives a uniform row") {
  for (int k : {2, 3, 5}) {
    auto p = ModelParams::zeros({4, 3, k}, Activation::SiLU);
    Matrix x = Matrix::Ones(1, 4);
    auto c = forward(p, Matrix::Ones(1, 1), x);
    for (int j = 0; j < k; ++j) CHECK(c(0, j) == doctest::Approx(1.0 / k).epsilon(1e-15));
  }
}

TEST_CASE("identity A_hat reduces to a per-node MLP") {
  CounterRng rng(4);
  for (auto act : {Activation::SiLU, Activation::SELU, Activation::GELU, Activation::ReLU}) {
    auto p = random_params(10, {16, 8, 2}, act);
    Matrix x = random_matrix(rng, 7, 16);
    auto c = forward(p, Matrix::Identity(7, 7), x);
    CHECK((c.matrix() - mlp_oracle(p, x)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("rows are stochastic") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto inst = make_gradient_instance(seed, 14, 3, Activation::GELU);
    auto cache = forward(inst.params, inst.inputs);
    for (Eigen::Index i = 0; i < cache.assignment.rows(); ++i)
      CHECK(std::abs(cache.assignment.row(i).sum() - 1.0) < 1e-9);
  }
}

TEST_CASE("permutation equivariance") {
  CounterRng rng(8);
  const Eigen::Index n = 10;
  auto g = unseg::testing::random_graph(3, n, 0.3);
  Matrix ah = normalized_adjacency(g);
  Matrix x = random_matrix(rng, n, 12);
  auto p = random_params(2, {12, 6, 3}, Activation::SiLU);

  std::vector<Eigen::Index> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (Eigen::Index i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  Matrix ahp(n, n), xp(n, x.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    xp.row(i) = x.row(perm[i]);
    for (Eigen::Index j = 0; j < n; ++j) ahp(i, j) = ah(perm[i], perm[j]);
  }
  auto c = forward(p, ah, x);
  auto cp = forward(p, ahp, xp);
  for (Eigen::Index i = 0; i < n; ++i) CHECK((cp.matrix().row(i) - c.matrix().row(perm[i])).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("backward: zero upstream gradient gives zero gradients") {
  auto inst = make_gradient_instance(1, 8, 2, Activation::SELU);
  auto cache = forward(inst.params, inst.inputs);
  auto g = backward(inst.params, inst.inputs, cache, Matrix::Zero(8, 2));
  for (const Matrix* t : g.tensors()) CHECK(t->cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward is linear in the upstream gradient") {
  CounterRng rng(6);
  auto inst = make_gradient_instance(2, 9, 3, Activation::GELU);
  auto cache = forward(inst.params, inst.inputs);
  Matrix up = random_matrix(rng, 9, 3);
  auto g1 = backward(inst.params, inst.inputs, cache, up);
  auto g2 = backward(inst.params, inst.inputs, cache, 2.0 * up);
  auto t1 = g1.tensors();
  auto t2 = g2.tensors();
  for (std::size_t i = 0; i < t1.size(); ++i) CHECK((2.0 * *t1[i] - *t2[i]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("backward: full-loss gradient on an 8-node instance") {
  for (auto act : {Activation::SiLU, Activation::SELU, Activation::GELU, Activation::ReLU}) {
    CAPTURE(to_string(act));
    auto inst = make_gradient_instance(21, 8, 2, act);
    auto rep = check_model_gradient(inst, {});
    CHECK(rep.passed);
    CHECK(rep.max_rel_error < 1e-5);
  }
}

TEST_CASE("backward: gradient exactness for n <= 16, k in {2,3}") {
  for (auto act : {Activation::SiLU, Activation::SELU, Activation::GELU, Activation::ReLU})
    for (int k : {2, 3}) {
      CAPTURE(to_string(act));
      CAPTURE(k);
      auto inst = make_gradient_instance(300 + k, 16, k, act);
      CHECK(check_model_gradient(inst, {}).max_rel_error < 1e-5);
    }
}

TEST_CASE("backward handles an asymmetric A_hat") {
  CounterRng rng(12);
  const Eigen::Index n = 6;
  Matrix ah(n, n);
  for (Eigen::Index i = 0; i < ah.size(); ++i) ah.data()[i] = rng.uniform(0, 0.5);
  Matrix x = random_matrix(rng, n, 5);
  auto p = random_params(4, {5, 4, 3}, Activation::SiLU);
  ModelInputs in(ah, x);
  Matrix weights = random_matrix(rng, n, 3);  // loss = sum(weights .* C)

  auto cache = forward(p, in);
  auto grad = backward(p, in, cache, weights).flatten();
  auto flat = p.flatten();
  auto loss = [&](std::span<const double> v) {
    ModelParams q = p;
    q.assign_flat(v);
    return (forward(q, in).assignment.array() * weights.array()).sum();
  };
  auto rep = finite_difference_check(loss, flat, grad);
  CHECK(rep.passed);
}

TEST_CASE("hard_labels") {
  Matrix c(2, 2);
  c << 0.9, 0.1, 0.5, 0.5;
  auto l = hard_labels(c);
  CHECK(l[0] == 0);
  CHECK(l[1] == 0);

  CounterRng rng(15);
  Matrix r = unseg::testing::random_stochastic(rng, 200, 4);
  r.row(7) << 0.25, 0.25, 0.25, 0.25;
  auto lr = hard_labels(r);
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    int best = 0;
    for (int j = 1; j < 4; ++j)
      if (r(i, j) > r(i, best)) best = j;
    CHECK(lr[i] == best);
  }
}

TEST_CASE("parameter layout") {
  auto p = ModelParams::init({384, 64, 2}, Activation::SiLU, 0);
  CHECK(p.w0.rows() == 384);
  CHECK(p.w0.cols() == 64);
  CHECK(p.w1.rows() == 64);
  CHECK(p.w1.cols() == 64);
  CHECK(p.w_head.cols() == 2);
  CHECK(p.b0.cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.parameter_count() == 384 * 64 + 64 + 64 * 64 + 64 + 64 * 2 + 2);
  auto flat = p.flatten();
  ModelParams q = ModelParams::zeros(p.shape(), Activation::SiLU);
  q.assign_flat(flat);
  CHECK(q.w1 == p.w1);
  CHECK(q.w_head == p.w_head);
  CHECK(ModelParams::init({384, 64, 2}, Activation::SiLU, 0).w0 == p.w0);
}

TEST_CASE("extended-precision reference agrees with forward + loss") {
  for (auto act : {Activation::SiLU, Activation::SELU, Activation::GELU, Activation::ReLU})
    for (std::uint64_t s = 0; s < 4; ++s) {
      auto inst = make_gradient_instance(700 + s, 6 + static_cast<Eigen::Index>(s) * 3, 2 + s % 2, act);
      const double ref = static_cast<double>(reference_model_loss(inst, inst.params.flatten()));
      CHECK(std::abs(ref - model_loss(inst, inst.params)) < 1e-12);
      // perturbing any single tensor entry is reflected by the cached evaluator
      auto flat = inst.params.flatten();
      for (std::size_t idx : {std::size_t{3}, flat.size() / 2, flat.size() - 1}) {
        auto moved = flat;
        moved[idx] += 0.05;
        ModelParams q = inst.params;
        q.assign_flat(moved);
        CHECK(std::abs(static_cast<double>(reference_model_loss(inst, moved)) - model_loss(inst, q)) < 1e-12);
      }
    }
}
