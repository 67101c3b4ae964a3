#include "core/graph.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "core/error.hpp"

namespace sentifuse {

namespace testing {
std::atomic<bool> corrupt_tanh_backward{false};
}  // namespace testing

namespace {

constexpr double kXentClipLo = 1e-12;

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw Error(ErrCode::Dimension, std::string(op) + ": shape mismatch " +
                                        a.shape_str() + " vs " +
                                        b.shape_str());
  }
}

void require_rank1(const char* op, const Tensor& t) {
  if (t.rank() != 1) {
    throw Error(ErrCode::Dimension,
                std::string(op) + ": expected rank-1 tensor, got " +
                    t.shape_str());
  }
}

}  // namespace

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double open_sigmoid(double x) {
  double s = stable_sigmoid(x);
  if (s >= 1.0) s = std::nextafter(1.0, 0.0);
  if (s <= 0.0) s = std::nextafter(0.0, 1.0);
  return s;
}

NodeRef Graph::push(const char* op, Tensor value,
                    std::function<void(Graph&, size_t)> backward) {
  nodes_.push_back(Node{op, std::move(value), Tensor{}, std::move(backward),
                        false, std::string{}});
  return NodeRef{nodes_.size() - 1};
}

NodeRef Graph::input(Tensor value) {
  return push("input", std::move(value), nullptr);
}

NodeRef Graph::parameter(const std::string& name, const Tensor& value) {
  auto it = param_index_.find(name);
  if (it != param_index_.end()) {
    if (!nodes_[it->second].value.same_shape(value)) {
      throw Error(ErrCode::Dimension,
                  "parameter '" + name + "' rebound with shape " +
                      value.shape_str() + ", previously " +
                      nodes_[it->second].value.shape_str());
    }
    return NodeRef{it->second};
  }
  NodeRef r = push("parameter", value, nullptr);
  nodes_[r.index].trainable = true;
  nodes_[r.index].name = name;
  param_index_[name] = r.index;
  return r;
}

NodeRef Graph::matmul(NodeRef a, NodeRef b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.rank() != 2 || (B.rank() != 2 && B.rank() != 1)) {
    throw Error(ErrCode::Dimension, "matmul: unsupported ranks " +
                                        A.shape_str() + " x " + B.shape_str());
  }
  const size_t m = A.rows(), k = A.cols();
  if (B.rank() == 2) {
    if (B.rows() != k) {
      throw Error(ErrCode::Dimension, "matmul: inner extents differ, " +
                                          A.shape_str() + " x " +
                                          B.shape_str());
    }
    const size_t n = B.cols();
    Tensor C({m, n});
    for (size_t i = 0; i < m; ++i) {
      for (size_t kk = 0; kk < k; ++kk) {
        const double av = A[i * k + kk];
        for (size_t j = 0; j < n; ++j) {
          C[i * n + j] += av * B[kk * n + j];
        }
      }
    }
    return push("matmul", std::move(C), [a, b, m, k, n](Graph& g, size_t self) {
      const Tensor& A = g.value(a);
      const Tensor& B = g.value(b);
      const Tensor& dC = g.grad_slot(self);
      Tensor& dA = g.grad_slot(a.index);
      Tensor& dB = g.grad_slot(b.index);
      // dA = dC * B^T, dB = A^T * dC
      for (size_t i = 0; i < m; ++i) {
        for (size_t kk = 0; kk < k; ++kk) {
          double s = 0.0;
          for (size_t j = 0; j < n; ++j) s += dC[i * n + j] * B[kk * n + j];
          dA[i * k + kk] += s;
        }
      }
      for (size_t kk = 0; kk < k; ++kk) {
        for (size_t j = 0; j < n; ++j) {
          double s = 0.0;
          for (size_t i = 0; i < m; ++i) s += A[i * k + kk] * dC[i * n + j];
          dB[kk * n + j] += s;
        }
      }
    });
  }
  // Matrix-vector: [m,k] x [k] -> [m].
  if (B.size() != k) {
    throw Error(ErrCode::Dimension, "matmul: inner extents differ, " +
                                        A.shape_str() + " x " + B.shape_str());
  }
  Tensor C({m});
  for (size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (size_t kk = 0; kk < k; ++kk) s += A[i * k + kk] * B[kk];
    C[i] = s;
  }
  return push("matmul", std::move(C), [a, b, m, k](Graph& g, size_t self) {
    const Tensor& A = g.value(a);
    const Tensor& B = g.value(b);
    const Tensor& dC = g.grad_slot(self);
    Tensor& dA = g.grad_slot(a.index);
    Tensor& dB = g.grad_slot(b.index);
    for (size_t i = 0; i < m; ++i) {
      const double d = dC[i];
      for (size_t kk = 0; kk < k; ++kk) {
        dA[i * k + kk] += d * B[kk];
        dB[kk] += d * A[i * k + kk];
      }
    }
  });
}

NodeRef Graph::add(NodeRef a, NodeRef b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require_same_shape("add", A, B);
  Tensor C = A;
  for (size_t i = 0; i < C.size(); ++i) C[i] += B[i];
  return push("add", std::move(C), [a, b](Graph& g, size_t self) {
    const Tensor& dC = g.grad_slot(self);
    Tensor& dA = g.grad_slot(a.index);
    Tensor& dB = g.grad_slot(b.index);
    for (size_t i = 0; i < dC.size(); ++i) {
      dA[i] += dC[i];
      dB[i] += dC[i];
    }
  });
}

NodeRef Graph::sub(NodeRef a, NodeRef b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require_same_shape("sub", A, B);
  Tensor C = A;
  for (size_t i = 0; i < C.size(); ++i) C[i] -= B[i];
  return push("sub", std::move(C), [a, b](Graph& g, size_t self) {
    const Tensor& dC = g.grad_slot(self);
    Tensor& dA = g.grad_slot(a.index);
    Tensor& dB = g.grad_slot(b.index);
    for (size_t i = 0; i < dC.size(); ++i) {
      dA[i] += dC[i];
      dB[i] -= dC[i];
    }
  });
}

NodeRef Graph::mul(NodeRef a, NodeRef b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require_same_shape("mul", A, B);
  Tensor C = A;
  for (size_t i = 0; i < C.size(); ++i) C[i] *= B[i];
  return push("mul", std::move(C), [a, b](Graph& g, size_t self) {
    const Tensor& A = g.value(a);
    const Tensor& B = g.value(b);
    const Tensor& dC = g.grad_slot(self);
    Tensor& dA = g.grad_slot(a.index);
    Tensor& dB = g.grad_slot(b.index);
    for (size_t i = 0; i < dC.size(); ++i) {
      dA[i] += dC[i] * B[i];
      dB[i] += dC[i] * A[i];
    }
  });
}

NodeRef Graph::scale(NodeRef a, double c) {
  Tensor C = value(a);
  for (size_t i = 0; i < C.size(); ++i) C[i] *= c;
  return push("scale", std::move(C), [a, c](Graph& g, size_t self) {
    const Tensor& dC = g.grad_slot(self);
    Tensor& dA = g.grad_slot(a.index);
    for (size_t i = 0; i < dC.size(); ++i) dA[i] += c * dC[i];
  });
}

NodeRef Graph::relu(NodeRef a) {
  Tensor C = value(a);
  for (size_t i = 0; i < C.size(); ++i) C[i] = std::max(0.0, C[i]);
  return push("relu", std::move(C), [a](Graph& g, size_t self) {
    const Tensor& A = g.value(a);
    const Tensor& dC = g.grad_slot(self);
    Tensor& dA = g.grad_slot(a.index);
    for (size_t i = 0; i < dC.size(); ++i) {
      if (A[i] > 0.0) dA[i] += dC[i];
    }
  });
}

NodeRef Graph::sigmoid(NodeRef a) {
  Tensor C = value(a);
  for (size_t i = 0; i < C.size(); ++i) C[i] = stable_sigmoid(C[i]);
  return push("sigmoid", std::move(C), [a](Graph& g, size_t self) {
    const Tensor& Y = g.value(NodeRef{self});
    const Tensor& dC = g.grad_slot(self);
    Tensor& dA = g.grad_slot(a.index);
    for (size_t i = 0; i < dC.size(); ++i) {
      dA[i] += dC[i] * Y[i] * (1.0 - Y[i]);
    }
  });
}

NodeRef Graph::sigmoid_open(NodeRef a) {
  Tensor C = value(a);
  for (size_t i = 0; i < C.size(); ++i) C[i] = open_sigmoid(C[i]);
  return push("sigmoid_open", std::move(C), [a](Graph& g, size_t self) {
    const Tensor& Y = g.value(NodeRef{self});
    const Tensor& dC = g.grad_slot(self);
    Tensor& dA = g.grad_slot(a.index);
    for (size_t i = 0; i < dC.size(); ++i) {
      dA[i] += dC[i] * Y[i] * (1.0 - Y[i]);
    }
  });
}

NodeRef Graph::tanh(NodeRef a) {
  Tensor C = value(a);
  for (size_t i = 0; i < C.size(); ++i) C[i] = std::tanh(C[i]);
  return push("tanh", std::move(C), [a](Graph& g, size_t self) {
    const Tensor& Y = g.value(NodeRef{self});
    const Tensor& dC = g.grad_slot(self);
    Tensor& dA = g.grad_slot(a.index);
    const double fudge =
        testing::corrupt_tanh_backward.load(std::memory_order_relaxed) ? 1.05
                                                                        : 1.0;
    for (size_t i = 0; i < dC.size(); ++i) {
      dA[i] += fudge * dC[i] * (1.0 - Y[i] * Y[i]);
    }
  });
}

NodeRef Graph::softmax(NodeRef a) {
  const Tensor& A = value(a);
  require_rank1("softmax", A);
  if (A.size() == 0) {
    throw Error(ErrCode::Dimension, "softmax: empty input");
  }
  // Subtract the max before exponentiating so large logits cannot overflow.
  double mx = A[0];
  for (size_t i = 1; i < A.size(); ++i) mx = std::max(mx, A[i]);
  Tensor Y = A;
  double total = 0.0;
  for (size_t i = 0; i < Y.size(); ++i) {
    Y[i] = std::exp(A[i] - mx);
    total += Y[i];
  }
  for (size_t i = 0; i < Y.size(); ++i) Y[i] /= total;
  return push("softmax", std::move(Y), [a](Graph& g, size_t self) {
    const Tensor& Y = g.value(NodeRef{self});
    const Tensor& dC = g.grad_slot(self);
    Tensor& dA = g.grad_slot(a.index);
    double dot = 0.0;
    for (size_t i = 0; i < Y.size(); ++i) dot += dC[i] * Y[i];
    for (size_t i = 0; i < Y.size(); ++i) {
      dA[i] += Y[i] * (dC[i] - dot);
    }
  });
}

NodeRef Graph::concat(NodeRef a, NodeRef b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require_rank1("concat", A);
  require_rank1("concat", B);
  const size_t na = A.size();
  std::vector<double> v(A.values());
  v.insert(v.end(), B.values().begin(), B.values().end());
  return push("concat", Tensor::vec(std::move(v)),
              [a, b, na](Graph& g, size_t self) {
                const Tensor& dC = g.grad_slot(self);
                Tensor& dA = g.grad_slot(a.index);
                Tensor& dB = g.grad_slot(b.index);
                for (size_t i = 0; i < na; ++i) dA[i] += dC[i];
                for (size_t i = na; i < dC.size(); ++i) dB[i - na] += dC[i];
              });
}

NodeRef Graph::sum(NodeRef a) {
  const Tensor& A = value(a);
  double s = 0.0;
  for (size_t i = 0; i < A.size(); ++i) s += A[i];
  return push("sum", Tensor::vec({s}), [a](Graph& g, size_t self) {
    const double d = g.grad_slot(self)[0];
    Tensor& dA = g.grad_slot(a.index);
    for (size_t i = 0; i < dA.size(); ++i) dA[i] += d;
  });
}

NodeRef Graph::embedding_row(NodeRef table, int32_t id) {
  const Tensor& T = value(table);
  if (T.rank() != 2) {
    throw Error(ErrCode::Dimension,
                "embedding_row: table must be rank-2, got " + T.shape_str());
  }
  const size_t v = T.rows(), d = T.cols();
  if (id < 0 || static_cast<size_t>(id) >= v) {
    throw Error(ErrCode::OutOfRange,
                "embedding_row: id " + std::to_string(id) +
                    " outside table " + T.shape_str());
  }
  if (id == 0) {
    // Padding row: constant zeros, detached from the table.
    return input(Tensor({d}));
  }
  std::vector<double> row(T.data() + id * d, T.data() + (id + 1) * d);
  return push("embedding_row", Tensor::vec(std::move(row)),
              [table, id, d](Graph& g, size_t self) {
                const Tensor& dC = g.grad_slot(self);
                Tensor& dT = g.grad_slot(table.index);
                for (size_t j = 0; j < d; ++j) {
                  dT[static_cast<size_t>(id) * d + j] += dC[j];
                }
              });
}

NodeRef Graph::dropout(NodeRef a, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error(ErrCode::Config,
                "dropout: rate must lie in [0,1), got " + std::to_string(rate));
  }
  const Tensor& A = value(a);
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(A.size());
  Tensor C = A;
  for (size_t i = 0; i < C.size(); ++i) {
    const double m = rng.uniform() >= rate ? keep_scale : 0.0;
    (*mask)[i] = m;
    C[i] *= m;
  }
  return push("dropout", std::move(C), [a, mask](Graph& g, size_t self) {
    const Tensor& dC = g.grad_slot(self);
    Tensor& dA = g.grad_slot(a.index);
    for (size_t i = 0; i < dC.size(); ++i) dA[i] += dC[i] * (*mask)[i];
  });
}

NodeRef Graph::cross_entropy(NodeRef pred, NodeRef target) {
  const Tensor& P = value(pred);
  const Tensor& T = value(target);
  require_rank1("cross_entropy", P);
  require_same_shape("cross_entropy", P, T);
  double psum = 0.0;
  for (size_t i = 0; i < P.size(); ++i) psum += P[i];
  if (std::abs(psum - 1.0) > 1e-9) {
    throw Error(ErrCode::Contract,
                "cross_entropy: prediction must sum to 1, got sum " +
                    std::to_string(psum));
  }
  size_t ones = 0;
  for (size_t i = 0; i < T.size(); ++i) {
    if (T[i] == 1.0) {
      ++ones;
    } else if (T[i] != 0.0) {
      throw Error(ErrCode::Contract,
                  "cross_entropy: target must be one-hot, entry " +
                      std::to_string(i) + " is " + std::to_string(T[i]));
    }
  }
  if (ones != 1) {
    throw Error(ErrCode::Contract,
                "cross_entropy: target must be one-hot, found " +
                    std::to_string(ones) + " ones");
  }
  double loss = 0.0;
  for (size_t i = 0; i < P.size(); ++i) {
    if (T[i] != 0.0) {
      loss -= T[i] * std::log(std::clamp(P[i], kXentClipLo, 1.0));
    }
  }
  return push("cross_entropy", Tensor::vec({loss}),
              [pred, target](Graph& g, size_t self) {
                const Tensor& P = g.value(pred);
                const Tensor& T = g.value(target);
                const double d = g.grad_slot(self)[0];
                Tensor& dP = g.grad_slot(pred.index);
                Tensor& dT = g.grad_slot(target.index);
                for (size_t i = 0; i < P.size(); ++i) {
                  const double pc = std::clamp(P[i], kXentClipLo, 1.0);
                  if (T[i] != 0.0 && P[i] > kXentClipLo && P[i] < 1.0) {
                    dP[i] += d * (-T[i] / pc);
                  }
                  dT[i] += d * (-std::log(pc));
                }
              });
}

NodeRef Graph::cosine_sim(NodeRef a, NodeRef b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require_rank1("cosine_sim", A);
  require_same_shape("cosine_sim", A, B);
  const double aa = A.dot(A);
  const double bb = B.dot(B);
  if (aa == 0.0 || bb == 0.0) {
    throw Error(ErrCode::Degenerate, "cosine_sim: zero-norm input vector");
  }
  // Single sqrt over the product so parallel integer vectors hit +/-1.0
  // exactly (sqrt of a perfect square), matching cosine_similarity().
  const double denom = std::sqrt(aa * bb);
  const double c = std::clamp(A.dot(B) / denom, -1.0, 1.0);
  return push("cosine_sim", Tensor::vec({c}),
              [a, b, aa, bb, denom, c](Graph& g, size_t self) {
                const Tensor& A = g.value(a);
                const Tensor& B = g.value(b);
                const double d = g.grad_slot(self)[0];
                Tensor& dA = g.grad_slot(a.index);
                Tensor& dB = g.grad_slot(b.index);
                const double inv = 1.0 / denom;
                for (size_t i = 0; i < A.size(); ++i) {
                  dA[i] += d * (B[i] * inv - c * A[i] / aa);
                  dB[i] += d * (A[i] * inv - c * B[i] / bb);
                }
              });
}

NodeRef Graph::hinge_loss(NodeRef pred, NodeRef target) {
  const Tensor& P = value(pred);
  const Tensor& T = value(target);
  require_same_shape("hinge_loss", P, T);
  if (P.size() == 0) {
    throw Error(ErrCode::Dimension, "hinge_loss: empty input");
  }
  const double n = static_cast<double>(P.size());
  double loss = 0.0;
  for (size_t i = 0; i < P.size(); ++i) {
    loss += std::max(0.0, 1.0 - T[i] * P[i]);
  }
  loss /= n;
  return push("hinge_loss", Tensor::vec({loss}),
              [pred, target, n](Graph& g, size_t self) {
                const Tensor& P = g.value(pred);
                const Tensor& T = g.value(target);
                const double d = g.grad_slot(self)[0];
                Tensor& dP = g.grad_slot(pred.index);
                Tensor& dT = g.grad_slot(target.index);
                for (size_t i = 0; i < P.size(); ++i) {
                  if (1.0 - T[i] * P[i] > 0.0) {
                    dP[i] += d * (-T[i] / n);
                    dT[i] += d * (-P[i] / n);
                  }
                }
              });
}

NodeRef Graph::mse_loss(NodeRef pred, NodeRef target) {
  const Tensor& P = value(pred);
  const Tensor& T = value(target);
  require_same_shape("mse_loss", P, T);
  if (P.size() == 0) {
    throw Error(ErrCode::Dimension, "mse_loss: empty input");
  }
  const double n = static_cast<double>(P.size());
  double loss = 0.0;
  for (size_t i = 0; i < P.size(); ++i) {
    const double e = P[i] - T[i];
    loss += e * e;
  }
  loss /= n;
  return push("mse_loss", Tensor::vec({loss}),
              [pred, target, n](Graph& g, size_t self) {
                const Tensor& P = g.value(pred);
                const Tensor& T = g.value(target);
                const double d = g.grad_slot(self)[0];
                Tensor& dP = g.grad_slot(pred.index);
                Tensor& dT = g.grad_slot(target.index);
                for (size_t i = 0; i < P.size(); ++i) {
                  const double e = 2.0 * (P[i] - T[i]) / n;
                  dP[i] += d * e;
                  dT[i] -= d * e;
                }
              });
}

const Tensor& Graph::grad(NodeRef r) const {
  if (!backward_ran_) {
    throw Error(ErrCode::Contract, "grad: backward() has not run");
  }
  return nodes_[r.index].grad;
}

void Graph::backward(NodeRef loss) {
  if (loss.index >= nodes_.size()) {
    throw Error(ErrCode::OutOfRange, "backward: node index out of range");
  }
  if (value(loss).size() != 1) {
    throw Error(ErrCode::Contract, "backward: loss must be scalar, got " +
                                       value(loss).shape_str());
  }
  // Fresh zero gradient for every node; repeated backward calls therefore
  // produce identical results.
  for (Node& n : nodes_) {
    n.grad = Tensor(n.value.shape());
  }
  nodes_[loss.index].grad[0] = 1.0;
  for (size_t i = loss.index + 1; i-- > 0;) {
    if (nodes_[i].backward) nodes_[i].backward(*this, i);
  }
  backward_ran_ = true;
}

GradMap Graph::param_grads() const {
  if (!backward_ran_) {
    throw Error(ErrCode::Contract, "param_grads: backward() has not run");
  }
  GradMap out;
  for (const auto& [name, idx] : param_index_) {
    const Node& n = nodes_[idx];
    out[name] = n.grad.empty() ? Tensor(n.value.shape()) : n.grad;
  }
  return out;
}

}  // namespace sentifuse
