#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "unseg/graph.hpp"
#include "unseg/model.hpp"
#include "unseg/nn.hpp"

namespace unseg {

/// A small random problem for checking the model gradient end to end:
/// Erdos-Renyi graph, Gaussian node features, Glorot weights and small random
/// biases (zero biases would be a special point).
struct GradientInstance {
  PatchGraph graph;
  ModelInputs inputs;
  ModelParams params;
};

GradientInstance make_gradient_instance(std::uint64_t seed, Eigen::Index nodes, Eigen::Index clusters,
                                        Activation activation, const ModelShape& shape = {});

/// Loss of the full model (GCN, head, softmax, clustering loss) at `params`.
double model_loss(const GradientInstance& instance, const ModelParams& params);

/// Analytic gradient of model_loss, flattened in ModelParams::flatten order.
std::vector<double> model_gradient(const GradientInstance& instance, const ModelParams& params);

/// Central-difference check of model_gradient. `fault_scale` multiplies the
/// analytic gradient (1.0 for a genuine check).
/// Loss for a flattened parameter vector, evaluated in extended precision by an
/// implementation separate from forward()/loss_value(). Serves as the finite-difference oracle.
long double reference_model_loss(const GradientInstance& instance, std::span<const double> flat_params);

GradientCheckReport check_model_gradient(const GradientInstance& instance, const GradientCheckOptions& options,
                                         double fault_scale = 1.0);

struct SelfcheckRow {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct SelfcheckOptions {
  double gradient_fault_scale = 1.0;
};

std::vector<SelfcheckRow> run_selfcheck(const SelfcheckOptions& options = {});
void print_selfcheck_table(const std::vector<SelfcheckRow>& rows, std::ostream& out);

}  // namespace unseg
