#include "core/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "core/error.hpp"
#include "core/layers.hpp"
#include "core/rng.hpp"

namespace sentifuse {

double GradReport::max_abs_diff() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_abs_diff);
  return m;
}

double GradReport::max_rel_diff() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_diff);
  return m;
}

GradReport finite_diff_check(const ParamStore& params,
                             const GraphBuilder& build, double h, double tol) {
  if (!(h > 0.0)) {
    throw Error(ErrCode::Config, "finite_diff_check: h must be positive");
  }
  if (!(tol > 0.0)) {
    throw Error(ErrCode::Config, "finite_diff_check: tol must be positive");
  }

  Graph g;
  NodeRef loss = build(g, params);
  if (g.value(loss).size() != 1) {
    throw Error(ErrCode::Contract,
                "finite_diff_check: loss must be scalar, got " +
                    g.value(loss).shape_str());
  }
  g.backward(loss);
  GradMap analytic = g.param_grads();

  GradReport report;
  report.h = h;
  report.tol = tol;
  ParamStore work = params;
  for (const auto& [name, value] : params) {
    const auto ait = analytic.find(name);
    const Tensor a =
        ait != analytic.end() ? ait->second : Tensor(value.shape());
    GradReportEntry entry{name, 0.0, 0.0};
    Tensor& slot = work.at(name);
    for (size_t i = 0; i < value.size(); ++i) {
      const double orig = value[i];
      slot[i] = orig + h;
      Graph gp;
      const double fp = gp.value(build(gp, work))[0];
      slot[i] = orig - h;
      Graph gm;
      const double fm = gm.value(build(gm, work))[0];
      slot[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double abs_diff = std::abs(a[i] - numeric);
      const double denom =
          std::max({std::abs(a[i]), std::abs(numeric), 1.0});
      entry.max_abs_diff = std::max(entry.max_abs_diff, abs_diff);
      entry.max_rel_diff = std::max(entry.max_rel_diff, abs_diff / denom);
    }
    report.entries.push_back(std::move(entry));
  }
  report.pass = report.max_rel_diff() <= tol;
  return report;
}

namespace {

struct CaseSetup {
  ParamStore params;
  GraphBuilder build;
};

Tensor affine_value(const Tensor& W, const Tensor& b, const Tensor& x) {
  Graph g;
  return g.value(g.add(g.matmul(g.input(W), g.input(x)), g.input(b)));
}

// Moves relu pre-activations away from the kink at zero so that +-h
// perturbations of any parameter cannot cross it.
void nudge_relu_bias(Tensor& b, const Tensor& W, const Tensor& x,
                     double margin = 3e-3) {
  const Tensor z = affine_value(W, b, x);
  for (size_t i = 0; i < z.size(); ++i) {
    if (std::abs(z[i]) < margin) {
      b[i] += z[i] >= 0.0 ? margin : -margin;
    }
  }
}

CaseSetup case_dense_relu(uint64_t seed) {
  Rng rng(seed);
  DenseParams l0 = make_dense(6, 5, Activation::Relu, rng);
  DenseParams l1 = make_dense(5, 4, Activation::Linear, rng);
  Tensor x = Tensor::uniform({6}, -1.0, 1.0, rng);
  Tensor target = Tensor::uniform({4}, -1.0, 1.0, rng);
  nudge_relu_bias(l0.b, l0.W, x);
  CaseSetup c;
  store_dense(c.params, "l0", l0);
  store_dense(c.params, "l1", l1);
  c.params["x"] = x;
  c.build = [target](Graph& g, const ParamStore& p) {
    NodeRef x = g.parameter("x", p.at("x"));
    NodeRef h = dense_node(g, bind_dense(g, p, "l0", Activation::Relu), x);
    NodeRef y = dense_node(g, bind_dense(g, p, "l1", Activation::Linear), h);
    return g.mse_loss(y, g.input(target));
  };
  return c;
}

CaseSetup case_dense_softmax_xent(uint64_t seed) {
  Rng rng(seed);
  DenseParams l0 = make_dense(5, 4, Activation::Softmax, rng);
  Tensor x = Tensor::uniform({5}, -1.0, 1.0, rng);
  Tensor target({4});
  target[rng.below(4)] = 1.0;
  CaseSetup c;
  store_dense(c.params, "l0", l0);
  c.params["x"] = x;
  c.build = [target](Graph& g, const ParamStore& p) {
    NodeRef x = g.parameter("x", p.at("x"));
    NodeRef y = dense_node(g, bind_dense(g, p, "l0", Activation::Softmax), x);
    return g.cross_entropy(y, g.input(target));
  };
  return c;
}

CaseSetup case_dropout_eval(uint64_t seed) {
  Rng rng(seed);
  DenseParams l0 = make_dense(6, 5, Activation::Relu, rng);
  DenseParams l1 = make_dense(5, 3, Activation::Linear, rng);
  Tensor x = Tensor::uniform({6}, -1.0, 1.0, rng);
  Tensor target = Tensor::uniform({3}, -1.0, 1.0, rng);
  nudge_relu_bias(l0.b, l0.W, x);
  CaseSetup c;
  store_dense(c.params, "l0", l0);
  store_dense(c.params, "l1", l1);
  c.params["x"] = x;
  c.build = [target](Graph& g, const ParamStore& p) {
    NodeRef x = g.parameter("x", p.at("x"));
    NodeRef h = dense_node(g, bind_dense(g, p, "l0", Activation::Relu), x);
    h = dropout_node(g, h, 0.5, Mode::Eval, nullptr);
    NodeRef y = dense_node(g, bind_dense(g, p, "l1", Activation::Linear), h);
    return g.mse_loss(y, g.input(target));
  };
  return c;
}

CaseSetup case_gate(uint64_t seed, GateKind kind) {
  Rng rng(seed);
  Tensor theta = Tensor::uniform({7}, -1.0, 1.0, rng);
  Tensor x = Tensor::uniform({7}, -1.0, 1.0, rng);
  Tensor target = Tensor::uniform({7}, -1.0, 1.0, rng);
  CaseSetup c;
  c.params["theta"] = theta;
  c.params["x"] = x;
  c.build = [target, kind](Graph& g, const ParamStore& p) {
    NodeRef theta = g.parameter("theta", p.at("theta"));
    NodeRef x = g.parameter("x", p.at("x"));
    return g.mse_loss(gate_node(g, kind, theta, x), g.input(target));
  };
  return c;
}

CaseSetup case_embedding(uint64_t seed) {
  Rng rng(seed);
  EmbeddingParams emb = make_embedding(7, 4, rng);
  // Includes the padding id (no gradient) and a repeated id (accumulation).
  const std::vector<int32_t> ids = {0, 3, 3, 5, 1};
  std::vector<Tensor> targets;
  for (size_t i = 0; i < ids.size(); ++i) {
    targets.push_back(Tensor::uniform({4}, -1.0, 1.0, rng));
  }
  CaseSetup c;
  c.params["table"] = emb.table;
  c.build = [ids, targets](Graph& g, const ParamStore& p) {
    NodeRef table = g.parameter("table", p.at("table"));
    NodeRef total = g.input(Tensor::vec({0.0}));
    for (size_t i = 0; i < ids.size(); ++i) {
      NodeRef row = g.embedding_row(table, ids[i]);
      total = g.add(total, g.mse_loss(row, g.input(targets[i])));
    }
    return g.scale(total, 1.0 / static_cast<double>(ids.size()));
  };
  return c;
}

CaseSetup case_lstm_step(uint64_t seed) {
  Rng rng(seed);
  LstmParams lstm = make_lstm(3, 4, rng);
  CaseSetup c;
  store_lstm(c.params, "cell", lstm);
  c.params["x"] = Tensor::uniform({3}, -1.0, 1.0, rng);
  c.params["h0"] = Tensor::uniform({4}, -1.0, 1.0, rng);
  c.params["c0"] = Tensor::uniform({4}, -1.0, 1.0, rng);
  Tensor th = Tensor::uniform({4}, -1.0, 1.0, rng);
  Tensor tc = Tensor::uniform({4}, -1.0, 1.0, rng);
  c.build = [th, tc](Graph& g, const ParamStore& p) {
    LstmNodes cell = bind_lstm(g, p, "cell");
    NodeRef x = g.parameter("x", p.at("x"));
    LstmStateNodes prev{g.parameter("h0", p.at("h0")),
                        g.parameter("c0", p.at("c0"))};
    LstmStateNodes s = lstm_step_node(g, cell, x, prev);
    return g.add(g.mse_loss(s.h, g.input(th)), g.mse_loss(s.c, g.input(tc)));
  };
  return c;
}

CaseSetup case_bilstm(uint64_t seed) {
  Rng rng(seed);
  LstmParams fwd = make_lstm(3, 3, rng);
  LstmParams bwd = make_lstm(3, 3, rng);
  CaseSetup c;
  store_lstm(c.params, "fwd", fwd);
  store_lstm(c.params, "bwd", bwd);
  c.params["x0"] = Tensor::uniform({3}, -1.0, 1.0, rng);
  c.params["x1"] = Tensor::uniform({3}, -1.0, 1.0, rng);
  c.params["x2"] = Tensor::uniform({3}, -1.0, 1.0, rng);
  Tensor target = Tensor::uniform({6}, -1.0, 1.0, rng);
  c.build = [target](Graph& g, const ParamStore& p) {
    LstmNodes fwd = bind_lstm(g, p, "fwd");
    LstmNodes bwd = bind_lstm(g, p, "bwd");
    std::vector<NodeRef> seq = {g.parameter("x0", p.at("x0")),
                                g.parameter("x1", p.at("x1")),
                                g.parameter("x2", p.at("x2"))};
    NodeRef enc = bilstm_encode_node(g, fwd, bwd, seq, 3);
    return g.mse_loss(enc, g.input(target));
  };
  return c;
}

Tensor linear_head_value(const ParamStore& p, const Tensor& x) {
  Graph g;
  return g.value(dense_node(
      g, bind_dense(g, p, "l0", Activation::Linear), g.input(x)));
}

CaseSetup case_loss_cosine(uint64_t seed) {
  for (uint64_t attempt = 0; attempt < 64; ++attempt) {
    Rng rng(mix_seed(seed, attempt));
    DenseParams l0 = make_dense(5, 4, Activation::Linear, rng);
    Tensor x = Tensor::uniform({5}, -1.0, 1.0, rng);
    Tensor target = Tensor::uniform({4}, -1.0, 1.0, rng);
    CaseSetup c;
    store_dense(c.params, "l0", l0);
    c.params["x"] = x;
    if (linear_head_value(c.params, x).norm() < 0.1 || target.norm() < 0.1) {
      continue;  // keep far from the zero-norm singularity
    }
    c.build = [target, x](Graph& g, const ParamStore& p) {
      NodeRef xn = g.parameter("x", p.at("x"));
      NodeRef y = dense_node(g, bind_dense(g, p, "l0", Activation::Linear), xn);
      return g.scale(g.cosine_sim(y, g.input(target)), -1.0);
    };
    return c;
  }
  throw Error(ErrCode::Internal, "case_loss_cosine: no usable sample found");
}

CaseSetup case_loss_hinge(uint64_t seed) {
  for (uint64_t attempt = 0; attempt < 64; ++attempt) {
    Rng rng(mix_seed(seed, attempt));
    DenseParams l0 = make_dense(5, 4, Activation::Linear, rng);
    Tensor x = Tensor::uniform({5}, -1.0, 1.0, rng);
    Tensor target({4});
    for (size_t i = 0; i < 4; ++i) target[i] = rng.below(2) ? 1.0 : -1.0;
    CaseSetup c;
    store_dense(c.params, "l0", l0);
    c.params["x"] = x;
    const Tensor pred = linear_head_value(c.params, x);
    bool near_kink = false;
    for (size_t i = 0; i < 4; ++i) {
      if (std::abs(1.0 - target[i] * pred[i]) < 1e-2) near_kink = true;
    }
    if (near_kink) continue;
    c.build = [target](Graph& g, const ParamStore& p) {
      NodeRef xn = g.parameter("x", p.at("x"));
      NodeRef y = dense_node(g, bind_dense(g, p, "l0", Activation::Linear), xn);
      return g.hinge_loss(y, g.input(target));
    };
    return c;
  }
  throw Error(ErrCode::Internal, "case_loss_hinge: no usable sample found");
}

CaseSetup case_loss_mse(uint64_t seed) {
  Rng rng(seed);
  DenseParams l0 = make_dense(5, 4, Activation::Linear, rng);
  Tensor x = Tensor::uniform({5}, -1.0, 1.0, rng);
  Tensor target = Tensor::uniform({4}, -1.0, 1.0, rng);
  CaseSetup c;
  store_dense(c.params, "l0", l0);
  c.params["x"] = x;
  c.build = [target](Graph& g, const ParamStore& p) {
    NodeRef xn = g.parameter("x", p.at("x"));
    NodeRef y = dense_node(g, bind_dense(g, p, "l0", Activation::Linear), xn);
    return g.mse_loss(y, g.input(target));
  };
  return c;
}

}  // namespace

GradCheckSuiteResult run_gradcheck_suite(uint32_t seeds, double h,
                                         double tol) {
  if (seeds == 0) {
    throw Error(ErrCode::Config, "gradcheck: seed count must be positive");
  }
  using CaseFn = CaseSetup (*)(uint64_t);
  const std::vector<std::pair<std::string, CaseFn>> table = {
      {"dense_relu", &case_dense_relu},
      {"dense_softmax_xent", &case_dense_softmax_xent},
      {"dropout_eval", &case_dropout_eval},
      {"gate_gl1", [](uint64_t s) { return case_gate(s, GateKind::GL1); }},
      {"gate_gl2", [](uint64_t s) { return case_gate(s, GateKind::GL2); }},
      {"embedding_lookup", &case_embedding},
      {"lstm_step", &case_lstm_step},
      {"bilstm_encode", &case_bilstm},
      {"loss_cosine", &case_loss_cosine},
      {"loss_hinge", &case_loss_hinge},
      {"loss_mse", &case_loss_mse},
  };

  GradCheckSuiteResult result;
  result.seeds = seeds;
  result.h = h;
  result.tol = tol;
  result.pass = true;
  for (size_t ci = 0; ci < table.size(); ++ci) {
    GradCheckCase c;
    c.name = table[ci].first;
    for (uint32_t s = 1; s <= seeds; ++s) {
      CaseSetup setup = table[ci].second(mix_seed(s, ci));
      GradReport r = finite_diff_check(setup.params, setup.build, h, tol);
      c.max_abs_diff = std::max(c.max_abs_diff, r.max_abs_diff());
      c.max_rel_diff = std::max(c.max_rel_diff, r.max_rel_diff());
      c.pass = c.pass && r.pass;
    }
    result.pass = result.pass && c.pass;
    result.cases.push_back(std::move(c));
  }
  return result;
}

std::string GradCheckSuiteResult::to_json() const {
  nlohmann::json j;
  j["pass"] = pass;
  j["seeds"] = seeds;
  j["h"] = h;
  j["tol"] = tol;
  j["cases"] = nlohmann::json::array();
  for (const auto& c : cases) {
    j["cases"].push_back({{"name", c.name},
                          {"max_abs_diff", c.max_abs_diff},
                          {"max_rel_diff", c.max_rel_diff},
                          {"pass", c.pass}});
  }
  return j.dump(2);
}

}  // namespace sentifuse
