#include "core/layers.hpp"

#include <cmath>

#include "core/error.hpp"

namespace sentifuse {

namespace {

void require_positive(const char* what, size_t n) {
  if (n == 0) {
    throw Error(ErrCode::Config,
                std::string(what) + " must be at least 1, got 0");
  }
}

}  // namespace

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Relu: return "relu";
    case Activation::Softmax: return "softmax";
  }
  return "unknown";
}

Activation activation_from_name(const std::string& name) {
  if (name == "linear") return Activation::Linear;
  if (name == "relu") return Activation::Relu;
  if (name == "softmax") return Activation::Softmax;
  throw Error(ErrCode::Config, "unknown activation '" + name + "'");
}

const char* gate_kind_name(GateKind k) {
  return k == GateKind::GL1 ? "gl1" : "gl2";
}

GateKind gate_kind_from_name(const std::string& name) {
  if (name == "gl1") return GateKind::GL1;
  if (name == "gl2") return GateKind::GL2;
  throw Error(ErrCode::Config, "unknown gate kind '" + name + "'");
}

DenseParams make_dense(size_t in, size_t out, Activation act, Rng& rng) {
  require_positive("dense input width", in);
  require_positive("dense output width", out);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  DenseParams p;
  p.W = Tensor::uniform({out, in}, -limit, limit, rng);
  p.b = Tensor({out});
  p.act = act;
  return p;
}

GateParams make_gate(GateKind kind, size_t dim) {
  require_positive("gate width", dim);
  GateParams p;
  p.kind = kind;
  // GL1 starts as the identity gate; GL2 starts at sigmoid(0) = 0.5.
  p.theta = kind == GateKind::GL1 ? Tensor::ones({dim}) : Tensor({dim});
  return p;
}

LstmParams make_lstm(size_t input, size_t hidden, Rng& rng) {
  require_positive("lstm input width", input);
  require_positive("lstm hidden width", hidden);
  LstmParams p;
  p.input = input;
  p.hidden = hidden;
  auto w = [&] { return Tensor::uniform({hidden, input}, -0.08, 0.08, rng); };
  auto u = [&] { return Tensor::uniform({hidden, hidden}, -0.08, 0.08, rng); };
  p.Wi = w(); p.Wf = w(); p.Wo = w(); p.Wg = w();
  p.Ui = u(); p.Uf = u(); p.Uo = u(); p.Ug = u();
  p.bi = Tensor({hidden});
  p.bf = Tensor::ones({hidden});  // open forget gate at initialization
  p.bo = Tensor({hidden});
  p.bg = Tensor({hidden});
  return p;
}

EmbeddingParams make_embedding(size_t vocab, size_t dim, Rng& rng) {
  if (vocab < 2) {
    throw Error(ErrCode::Config,
                "embedding vocabulary must include padding and unknown rows");
  }
  require_positive("embedding width", dim);
  EmbeddingParams p;
  p.table = Tensor::uniform({vocab, dim}, -0.05, 0.05, rng);
  for (size_t j = 0; j < dim; ++j) p.table.at(0, j) = 0.0;
  return p;
}

DenseNodes bind_dense(Graph& g, const std::string& prefix,
                      const DenseParams& p) {
  DenseNodes d;
  d.W = g.parameter(prefix + ".W", p.W);
  d.b = g.parameter(prefix + ".b", p.b);
  d.act = p.act;
  return d;
}

LstmNodes bind_lstm(Graph& g, const std::string& prefix, const LstmParams& p) {
  LstmNodes n;
  n.Wi = g.parameter(prefix + ".Wi", p.Wi);
  n.Wf = g.parameter(prefix + ".Wf", p.Wf);
  n.Wo = g.parameter(prefix + ".Wo", p.Wo);
  n.Wg = g.parameter(prefix + ".Wg", p.Wg);
  n.Ui = g.parameter(prefix + ".Ui", p.Ui);
  n.Uf = g.parameter(prefix + ".Uf", p.Uf);
  n.Uo = g.parameter(prefix + ".Uo", p.Uo);
  n.Ug = g.parameter(prefix + ".Ug", p.Ug);
  n.bi = g.parameter(prefix + ".bi", p.bi);
  n.bf = g.parameter(prefix + ".bf", p.bf);
  n.bo = g.parameter(prefix + ".bo", p.bo);
  n.bg = g.parameter(prefix + ".bg", p.bg);
  return n;
}

void store_dense(ParamStore& store, const std::string& prefix,
                 const DenseParams& p) {
  store[prefix + ".W"] = p.W;
  store[prefix + ".b"] = p.b;
}

void store_lstm(ParamStore& store, const std::string& prefix,
                const LstmParams& p) {
  store[prefix + ".Wi"] = p.Wi;
  store[prefix + ".Wf"] = p.Wf;
  store[prefix + ".Wo"] = p.Wo;
  store[prefix + ".Wg"] = p.Wg;
  store[prefix + ".Ui"] = p.Ui;
  store[prefix + ".Uf"] = p.Uf;
  store[prefix + ".Uo"] = p.Uo;
  store[prefix + ".Ug"] = p.Ug;
  store[prefix + ".bi"] = p.bi;
  store[prefix + ".bf"] = p.bf;
  store[prefix + ".bo"] = p.bo;
  store[prefix + ".bg"] = p.bg;
}

namespace {

const Tensor& store_at(const ParamStore& store, const std::string& name) {
  auto it = store.find(name);
  if (it == store.end()) {
    throw Error(ErrCode::Lookup, "missing parameter '" + name + "'");
  }
  return it->second;
}

}  // namespace

DenseNodes bind_dense(Graph& g, const ParamStore& store,
                      const std::string& prefix, Activation act) {
  return DenseNodes{g.parameter(prefix + ".W", store_at(store, prefix + ".W")),
                    g.parameter(prefix + ".b", store_at(store, prefix + ".b")),
                    act};
}

LstmNodes bind_lstm(Graph& g, const ParamStore& store,
                    const std::string& prefix) {
  auto bind = [&](const char* leaf) {
    return g.parameter(prefix + "." + leaf, store_at(store, prefix + "." + leaf));
  };
  LstmNodes n;
  n.Wi = bind("Wi"); n.Wf = bind("Wf"); n.Wo = bind("Wo"); n.Wg = bind("Wg");
  n.Ui = bind("Ui"); n.Uf = bind("Uf"); n.Uo = bind("Uo"); n.Ug = bind("Ug");
  n.bi = bind("bi"); n.bf = bind("bf"); n.bo = bind("bo"); n.bg = bind("bg");
  return n;
}

NodeRef dense_node(Graph& g, const DenseNodes& d, NodeRef x) {
  NodeRef z = g.add(g.matmul(d.W, x), d.b);
  switch (d.act) {
    case Activation::Linear: return z;
    case Activation::Relu: return g.relu(z);
    case Activation::Softmax: return g.softmax(z);
  }
  throw Error(ErrCode::Internal, "dense_node: unhandled activation");
}

NodeRef gate_node(Graph& g, GateKind kind, NodeRef theta, NodeRef x) {
  if (!g.value(theta).same_shape(g.value(x))) {
    throw Error(ErrCode::Dimension,
                "gate: theta " + g.value(theta).shape_str() +
                    " does not match input " + g.value(x).shape_str());
  }
  if (kind == GateKind::GL1) {
    return g.mul(theta, x);
  }
  return g.mul(g.sigmoid_open(theta), x);
}

LstmStateNodes lstm_step_node(Graph& g, const LstmNodes& p, NodeRef x,
                              const LstmStateNodes& prev) {
  auto gate_pre = [&](NodeRef W, NodeRef U, NodeRef b) {
    return g.add(g.add(g.matmul(W, x), g.matmul(U, prev.h)), b);
  };
  NodeRef i = g.sigmoid(gate_pre(p.Wi, p.Ui, p.bi));
  NodeRef f = g.sigmoid(gate_pre(p.Wf, p.Uf, p.bf));
  NodeRef o = g.sigmoid(gate_pre(p.Wo, p.Uo, p.bo));
  NodeRef cand = g.tanh(gate_pre(p.Wg, p.Ug, p.bg));
  NodeRef c = g.add(g.mul(f, prev.c), g.mul(i, cand));
  NodeRef h = g.mul(o, g.tanh(c));
  return LstmStateNodes{h, c};
}

NodeRef bilstm_encode_node(Graph& g, const LstmNodes& fwd,
                           const LstmNodes& bwd,
                           const std::vector<NodeRef>& seq, size_t hidden) {
  if (seq.empty()) {
    throw Error(ErrCode::Contract, "bilstm_encode: empty sequence");
  }
  for (const NodeRef& r : seq) {
    if (!g.value(r).same_shape(g.value(seq.front()))) {
      throw Error(ErrCode::Dimension,
                  "bilstm_encode: step shapes differ, " +
                      g.value(seq.front()).shape_str() + " vs " +
                      g.value(r).shape_str());
    }
  }
  LstmStateNodes fs{g.input(Tensor({hidden})), g.input(Tensor({hidden}))};
  for (const NodeRef& x : seq) fs = lstm_step_node(g, fwd, x, fs);
  LstmStateNodes bs{g.input(Tensor({hidden})), g.input(Tensor({hidden}))};
  for (size_t t = seq.size(); t-- > 0;) bs = lstm_step_node(g, bwd, seq[t], bs);
  return g.concat(fs.h, bs.h);
}

NodeRef dropout_node(Graph& g, NodeRef x, double rate, Mode mode, Rng* rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error(ErrCode::Config,
                "dropout: rate must lie in [0,1), got " + std::to_string(rate));
  }
  if (mode == Mode::Eval || rate == 0.0) return x;
  if (rng == nullptr) {
    throw Error(ErrCode::Contract,
                "dropout: training mode requires a random source");
  }
  return g.dropout(x, rate, *rng);
}

Tensor dense_forward(const DenseParams& p, const Tensor& x) {
  Graph g;
  DenseNodes d{g.input(p.W), g.input(p.b), p.act};
  return g.value(dense_node(g, d, g.input(x)));
}

Tensor dropout_apply(const Tensor& x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error(ErrCode::Config,
                "dropout: rate must lie in [0,1), got " + std::to_string(rate));
  }
  if (mode == Mode::Eval || rate == 0.0) return x;
  Graph g;
  return g.value(g.dropout(g.input(x), rate, rng));
}

Tensor gate_forward(const GateParams& p, const Tensor& x) {
  Graph g;
  return g.value(gate_node(g, p.kind, g.input(p.theta), g.input(x)));
}

std::pair<Tensor, Tensor> lstm_step(const LstmParams& p, const Tensor& x,
                                    const Tensor& h_prev,
                                    const Tensor& c_prev) {
  Graph g;
  LstmNodes n{g.input(p.Wi), g.input(p.Wf), g.input(p.Wo), g.input(p.Wg),
              g.input(p.Ui), g.input(p.Uf), g.input(p.Uo), g.input(p.Ug),
              g.input(p.bi), g.input(p.bf), g.input(p.bo), g.input(p.bg)};
  LstmStateNodes s =
      lstm_step_node(g, n, g.input(x), {g.input(h_prev), g.input(c_prev)});
  return {g.value(s.h), g.value(s.c)};
}

Tensor bilstm_encode(const LstmParams& fwd, const LstmParams& bwd,
                     const std::vector<Tensor>& seq) {
  if (fwd.hidden != bwd.hidden) {
    throw Error(ErrCode::Dimension,
                "bilstm_encode: direction widths differ, " +
                    std::to_string(fwd.hidden) + " vs " +
                    std::to_string(bwd.hidden));
  }
  Graph g;
  auto bind = [&](const LstmParams& p) {
    return LstmNodes{g.input(p.Wi), g.input(p.Wf), g.input(p.Wo),
                     g.input(p.Wg), g.input(p.Ui), g.input(p.Uf),
                     g.input(p.Uo), g.input(p.Ug), g.input(p.bi),
                     g.input(p.bf), g.input(p.bo), g.input(p.bg)};
  };
  LstmNodes fn = bind(fwd);
  LstmNodes bn = bind(bwd);
  std::vector<NodeRef> xs;
  xs.reserve(seq.size());
  for (const Tensor& t : seq) xs.push_back(g.input(t));
  return g.value(bilstm_encode_node(g, fn, bn, xs, fwd.hidden));
}

std::vector<Tensor> embedding_lookup(const EmbeddingParams& p,
                                     const std::vector<int32_t>& ids) {
  Graph g;
  NodeRef table = g.input(p.table);
  std::vector<Tensor> out;
  out.reserve(ids.size());
  for (int32_t id : ids) {
    out.push_back(g.value(g.embedding_row(table, id)));
  }
  return out;
}

}  // namespace sentifuse
