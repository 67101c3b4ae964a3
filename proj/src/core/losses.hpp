#ifndef SENTIFUSE_CORE_LOSSES_HPP
#define SENTIFUSE_CORE_LOSSES_HPP

#include <string>

#include "core/graph.hpp"
#include "core/tensor.hpp"

namespace sentifuse {

enum class LossKind { Xent, Cosine, Hinge, Mse };

const char* loss_kind_name(LossKind k);
LossKind loss_kind_from_name(const std::string& name);

// Scalar loss node for the training path. Xent expects a probability
// prediction and a one-hot target; cosine is the negated cosine similarity;
// hinge averages max(0, 1 - t*p) over components; mse averages squared error.
NodeRef loss_node(Graph& g, LossKind kind, NodeRef pred, NodeRef target);

// Value-level surface (evaluates through a throwaway graph).
double categorical_cross_entropy(const Tensor& pred, const Tensor& target);
double cosine_proximity(const Tensor& pred, const Tensor& target);
double hinge(const Tensor& pred, const Tensor& target);
double mse(const Tensor& pred, const Tensor& target);

}  // namespace sentifuse

#endif
