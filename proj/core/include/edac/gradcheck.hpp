#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "edac/model.hpp"

namespace edac {

/// Central differences: g_i = (f(p + h e_i) - f(p - h e_i)) / (2h).
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> point, double h);

/// max_i |a_i - b_i| / max(||a||_inf, ||b||_inf, 1e-10). Scaling by the
/// vector magnitude keeps near-zero components from dominating.
double relative_error(std::span<const double> a, std::span<const double> b);

/// Smallest |pre-activation| over the hidden layers for the given inputs.
/// Finite differences are unreliable when this is within ~h of a ReLU kink.
double min_hidden_margin(const ModelState& model, const Tensor& inputs);

enum class GradcheckFault { kNone, kParams, kInput, kCertainty };

struct GradcheckOptions {
  std::size_t cases = 100;
  std::vector<double> step_sizes = {1e-5};
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
  // Test hook: perturbs the analytic gradient of one suite.
  GradcheckFault fault = GradcheckFault::kNone;
};

struct GradcheckSuite {
  std::string name;
  double h = 0.0;
  double max_relative_error = 0.0;
  std::size_t worst_case = 0;
  std::size_t cases = 0;
  bool passed = true;
};

struct GradcheckReport {
  std::vector<GradcheckSuite> suites;
  bool passed() const;
};

/// Runs grad_params (mean CE), grad_input (mean CE) and the frozen-attack
/// certainty gradient against finite differences on random small MLPs, once
/// per step size.
GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace edac
