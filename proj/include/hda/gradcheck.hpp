#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hda/tensor.hpp"

namespace hda::gradcheck {

/// An element passes when its absolute error is below `abs_tol` or its
/// relative error is below `rel_tol`.
struct Tolerance {
  double rel_tol = 1e-3;
  double abs_tol = 1e-5;
};

struct CaseResult {
  std::string name;
  std::size_t trial = 0;
  std::size_t elements = 0;
  double max_abs_err = 0.0;
  /// Largest relative error among elements whose absolute error is not small.
  double max_rel_err = 0.0;
  bool passed = true;
};

struct SuiteResult {
  std::vector<CaseResult> cases;
  double seconds = 0.0;
  bool all_passed() const;
  std::size_t failures() const;
};

using ForwardFn = std::function<Tensor(const std::vector<Tensor>&)>;
/// Double-precision forward over the flattened inputs; returns the flattened output.
using ReferenceFn = std::function<std::vector<double>(const std::vector<std::vector<double>>&)>;

/// Compares gradients of sum(w * forward(inputs)) for random w against
/// central differences of the same projection of `reference`.
CaseResult check(const std::string& name, std::vector<Tensor> inputs, const ForwardFn& forward,
                 const ReferenceFn& reference, std::uint64_t seed, const Tolerance& tolerance = {});

/// Names of every checked primitive and loss.
std::vector<std::string> case_names();

/// Runs each case `trials` times with fresh random shapes and values.
/// Analytic gradients come from the float autodiff; numeric ones from
/// central differences of independent double-precision forward passes.
SuiteResult run_suite(std::uint64_t seed, std::size_t trials = 3, const Tolerance& tolerance = {});

}  // namespace hda::gradcheck
