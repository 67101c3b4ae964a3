#ifndef SENTIFUSE_CORE_GRADCHECK_HPP
#define SENTIFUSE_CORE_GRADCHECK_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "core/graph.hpp"

namespace sentifuse {

// Builds a fresh graph from the given parameters and returns the scalar loss
// node. Called repeatedly with perturbed parameter values, so it must be a
// pure function of the store (fixed dropout masks, no hidden state).
using GraphBuilder = std::function<NodeRef(Graph&, const ParamStore&)>;

struct GradReportEntry {
  std::string param;
  double max_abs_diff = 0.0;
  double max_rel_diff = 0.0;
};

struct GradReport {
  std::vector<GradReportEntry> entries;
  double h = 1e-5;
  double tol = 1e-4;
  bool pass = false;

  double max_abs_diff() const;
  double max_rel_diff() const;
};

// Central-difference check: numeric = (f(p+h) - f(p-h)) / (2h) per entry,
// compared against the analytic gradient from backward(). The relative
// difference uses denominator max(|analytic|, |numeric|, 1), so near-zero
// gradients are judged on absolute error and finite-difference noise cannot
// fail the check.
GradReport finite_diff_check(const ParamStore& params,
                             const GraphBuilder& build, double h = 1e-5,
                             double tol = 1e-4);

struct GradCheckCase {
  std::string name;
  double max_abs_diff = 0.0;
  double max_rel_diff = 0.0;
  bool pass = true;
};

struct GradCheckSuiteResult {
  std::vector<GradCheckCase> cases;
  uint32_t seeds = 0;
  double h = 1e-5;
  double tol = 1e-4;
  bool pass = false;

  std::string to_json() const;
};

// Standard verification suite covering every differentiable layer and loss:
// dense stacks (relu/linear/softmax), dropout in eval placement, both gate
// kinds, embedding lookup, a single LSTM step, a bidirectional encode, and
// all four losses. Each case runs once per seed; reported numbers are the
// worst over all seeds and parameters. Inputs near relu/hinge kinks are
// nudged away so the central difference stays valid.
GradCheckSuiteResult run_gradcheck_suite(uint32_t seeds = 20, double h = 1e-5,
                                         double tol = 1e-4);

}  // namespace sentifuse

#endif
