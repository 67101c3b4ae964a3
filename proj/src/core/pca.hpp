#ifndef SENTIFUSE_CORE_PCA_HPP
#define SENTIFUSE_CORE_PCA_HPP

#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace sentifuse {

// Plot annotations carried along with each projected point; `folder` holds
// the ANP the datapoint came from.
struct PointMeta {
  std::string folder;
  std::string label;
};

struct ProjectedPoint {
  double x = 0.0;
  double y = 0.0;
  std::string folder;
  std::string label;
};

// 2-D view of high-dimensional outputs plus a flag noting when the data
// did not support two informative directions.
struct Projection {
  std::vector<ProjectedPoint> points;
  bool rank_deficient = false;
};

// Principal-component projection to the plane: center the vectors, find
// the top two covariance eigenvectors by the iterated power method
// (tolerance 1e-9, at most 1000 iterations per component, deflation
// between components), and emit per-point coordinates. Components are
// sign-canonicalized (largest-magnitude entry positive) so results are
// deterministic. Degenerate data zeroes the unsupported coordinates and
// sets rank_deficient instead of failing: all-identical vectors project to
// the origin, collinear vectors to a line.
//
// Requires at least two vectors, one meta entry per vector, and equal
// dimensions throughout.
Projection project_2d(const std::vector<Tensor>& outputs,
                      const std::vector<PointMeta>& meta);

// CSV rendering with the fixed header "x,y,folder,label"; fields
// containing commas, quotes, or newlines are quoted.
std::string projection_csv(const Projection& projection);

}  // namespace sentifuse

#endif
