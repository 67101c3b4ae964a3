#ifndef SENTIFUSE_CORE_LAYERS_HPP
#define SENTIFUSE_CORE_LAYERS_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "core/graph.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace sentifuse {

enum class Mode { Train, Eval };

enum class Activation { Linear, Relu, Softmax };

// GL1 gates the input with unconstrained elementwise weights; GL2 passes the
// weights through a sigmoid first, so the effective gate is structurally
// confined to (0, 1) however far the raw parameters drift.
enum class GateKind { GL1, GL2 };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);
const char* gate_kind_name(GateKind k);
GateKind gate_kind_from_name(const std::string& name);

struct DenseParams {
  Tensor W;  // [out, in]
  Tensor b;  // [out]
  Activation act = Activation::Linear;
};

struct GateParams {
  GateKind kind = GateKind::GL1;
  Tensor theta;  // [dim]
};

struct LstmParams {
  size_t input = 0;
  size_t hidden = 0;
  // Gate order i, f, o, g; W* are [hidden, input], U* are [hidden, hidden],
  // b* are [hidden].
  Tensor Wi, Wf, Wo, Wg;
  Tensor Ui, Uf, Uo, Ug;
  Tensor bi, bf, bo, bg;
};

struct EmbeddingParams {
  Tensor table;  // [vocab, dim]; row 0 is the padding row and stays all-zero
};

// Seeded initializers.
DenseParams make_dense(size_t in, size_t out, Activation act, Rng& rng);
GateParams make_gate(GateKind kind, size_t dim);  // GL1 -> ones, GL2 -> zeros
LstmParams make_lstm(size_t input, size_t hidden, Rng& rng);
EmbeddingParams make_embedding(size_t vocab, size_t dim, Rng& rng);

// ---- Graph-level builders (the training path) ----

struct DenseNodes {
  NodeRef W, b;
  Activation act = Activation::Linear;
};

struct LstmNodes {
  NodeRef Wi, Wf, Wo, Wg, Ui, Uf, Uo, Ug, bi, bf, bo, bg;
};

struct LstmStateNodes {
  NodeRef h, c;
};

DenseNodes bind_dense(Graph& g, const std::string& prefix,
                      const DenseParams& p);
LstmNodes bind_lstm(Graph& g, const std::string& prefix, const LstmParams& p);

// Flatten a params struct into / bind it back out of a named store.
void store_dense(ParamStore& store, const std::string& prefix,
                 const DenseParams& p);
void store_lstm(ParamStore& store, const std::string& prefix,
                const LstmParams& p);
DenseNodes bind_dense(Graph& g, const ParamStore& store,
                      const std::string& prefix, Activation act);
LstmNodes bind_lstm(Graph& g, const ParamStore& store,
                    const std::string& prefix);

NodeRef dense_node(Graph& g, const DenseNodes& d, NodeRef x);
NodeRef gate_node(Graph& g, GateKind kind, NodeRef theta, NodeRef x);
LstmStateNodes lstm_step_node(Graph& g, const LstmNodes& p, NodeRef x,
                              const LstmStateNodes& prev);

// Runs the sequence through both directions and concatenates the last hidden
// state of each: [2*hidden]. Padding positions are processed like any other
// step (index-0 tokens simply contribute zero embeddings).
NodeRef bilstm_encode_node(Graph& g, const LstmNodes& fwd,
                           const LstmNodes& bwd,
                           const std::vector<NodeRef>& seq, size_t hidden);

// Identity in Eval mode; inverted dropout in Train mode (rng required).
NodeRef dropout_node(Graph& g, NodeRef x, double rate, Mode mode, Rng* rng);

// ---- Value-level surface ----
// Each call evaluates through a throwaway graph, so the math has exactly one
// implementation.

Tensor dense_forward(const DenseParams& p, const Tensor& x);
Tensor dropout_apply(const Tensor& x, double rate, Mode mode, Rng& rng);
Tensor gate_forward(const GateParams& p, const Tensor& x);
std::pair<Tensor, Tensor> lstm_step(const LstmParams& p, const Tensor& x,
                                    const Tensor& h_prev,
                                    const Tensor& c_prev);
Tensor bilstm_encode(const LstmParams& fwd, const LstmParams& bwd,
                     const std::vector<Tensor>& seq);
std::vector<Tensor> embedding_lookup(const EmbeddingParams& p,
                                     const std::vector<int32_t>& ids);

}  // namespace sentifuse

#endif
