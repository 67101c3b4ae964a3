#ifndef SENTIFUSE_CORE_GRAPH_HPP
#define SENTIFUSE_CORE_GRAPH_HPP

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace sentifuse {

// Named trainable tensors. std::map keeps iteration order deterministic,
// which checkpoint layout and optimizer traversal rely on.
using ParamStore = std::map<std::string, Tensor>;
using GradMap = std::map<std::string, Tensor>;

struct NodeRef {
  size_t index = 0;
};

// Define-by-run computation graph. Operations evaluate eagerly as nodes are
// added, so node creation order is already a topological order; backward()
// replays it in reverse. A Graph describes a single forward pass and is
// rebuilt per pass; it must stay confined to one thread.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaves. parameter() is cached by name: binding the same name twice in
  // one graph returns the first node, so every use shares one gradient slot.
  NodeRef input(Tensor value);
  NodeRef parameter(const std::string& name, const Tensor& value);

  // Elementwise and linear-algebra operations.
  NodeRef matmul(NodeRef a, NodeRef b);  // [m,k]x[k,n] -> [m,n]; [m,k]x[k] -> [m]
  NodeRef add(NodeRef a, NodeRef b);
  NodeRef sub(NodeRef a, NodeRef b);
  NodeRef mul(NodeRef a, NodeRef b);  // Hadamard
  NodeRef scale(NodeRef a, double c);
  NodeRef relu(NodeRef a);
  NodeRef sigmoid(NodeRef a);
  // Sigmoid that never reaches 0.0 or 1.0 (see open_sigmoid below); used for
  // gate values that must stay strictly inside the open unit interval.
  NodeRef sigmoid_open(NodeRef a);
  NodeRef tanh(NodeRef a);
  NodeRef softmax(NodeRef a);  // rank-1
  NodeRef concat(NodeRef a, NodeRef b);  // rank-1
  NodeRef sum(NodeRef a);  // -> scalar

  // Row lookup into a [V,d] table. id 0 is the padding row and yields a
  // constant zero vector detached from the table, so no gradient ever
  // reaches row 0.
  NodeRef embedding_row(NodeRef table, int32_t id);

  // Inverted dropout (training mode): keep with probability 1-rate, scale
  // kept entries by 1/(1-rate). The mask is drawn once at node creation.
  NodeRef dropout(NodeRef a, double rate, Rng& rng);

  // Scalar losses. Targets are ordinary nodes (usually inputs).
  NodeRef cross_entropy(NodeRef pred, NodeRef target);
  NodeRef cosine_sim(NodeRef a, NodeRef b);
  NodeRef hinge_loss(NodeRef pred, NodeRef target);
  NodeRef mse_loss(NodeRef pred, NodeRef target);

  // References returned here stay valid while the graph lives: node storage
  // is a deque, so adding nodes never relocates existing ones.
  const Tensor& value(NodeRef r) const { return nodes_[r.index].value; }
  const Tensor& grad(NodeRef r) const;

  // Reverse-mode sweep from a scalar loss. Gradients of every node at or
  // before the loss are (re)computed; fan-out accumulates by summation.
  void backward(NodeRef loss);

  // Gradients of all bound parameters, keyed by name. Parameters the loss
  // never touched report zero gradients.
  GradMap param_grads() const;

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    const char* op;
    Tensor value;
    Tensor grad;
    std::function<void(Graph&, size_t)> backward;
    bool trainable = false;
    std::string name;
  };

  NodeRef push(const char* op, Tensor value,
               std::function<void(Graph&, size_t)> backward);
  Node& node(size_t i) { return nodes_[i]; }
  Tensor& grad_slot(size_t i) { return nodes_[i].grad; }

  std::deque<Node> nodes_;
  std::map<std::string, size_t> param_index_;
  bool backward_ran_ = false;
};

// Numerically stable logistic function; saturates to exactly 0.0 / 1.0 in
// double precision for |x| beyond ~37/745.
double stable_sigmoid(double x);

// Logistic function nudged onto the open interval: for any finite x the
// result is strictly inside (0, 1) even where the closed form rounds to an
// endpoint. The mathematical value never reaches the endpoints, so this is
// the faithful representable answer, not a constraint mechanism.
double open_sigmoid(double x);

namespace testing {
// Test hook: deliberately mis-scales the tanh backward rule so gradient
// checking has a guaranteed failure case to detect.
extern std::atomic<bool> corrupt_tanh_backward;
}  // namespace testing

}  // namespace sentifuse

#endif
