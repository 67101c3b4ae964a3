#include "core/optim.hpp"

#include <cmath>

#include "core/error.hpp"

namespace sentifuse {

namespace {

Tensor& lookup_param(ParamStore& params, const std::string& name,
                     const Tensor& grad) {
  auto it = params.find(name);
  if (it == params.end()) {
    throw Error(ErrCode::Lookup,
                "optimizer: gradient for unknown parameter '" + name + "'");
  }
  if (!it->second.same_shape(grad)) {
    throw Error(ErrCode::Dimension,
                "optimizer: parameter '" + name + "' has shape " +
                    it->second.shape_str() + " but gradient has " +
                    grad.shape_str());
  }
  return it->second;
}

void check_lr(double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    throw Error(ErrCode::Config,
                "learning rate must be positive, got " + std::to_string(lr));
  }
}

}  // namespace

const char* optimizer_kind_name(OptimizerKind k) {
  return k == OptimizerKind::SgdMomentum ? "sgd" : "rmsprop";
}

OptimizerKind optimizer_kind_from_name(const std::string& name) {
  if (name == "sgd") return OptimizerKind::SgdMomentum;
  if (name == "rmsprop") return OptimizerKind::RmsProp;
  throw Error(ErrCode::Config, "unknown optimizer '" + name + "'");
}

void sgd_momentum_step(SgdMomentumState& state, ParamStore& params,
                       const GradMap& grads) {
  check_lr(state.lr);
  if (!(state.momentum >= 0.0 && state.momentum < 1.0)) {
    throw Error(ErrCode::Config, "sgd momentum out of range: " +
                                     std::to_string(state.momentum));
  }
  for (const auto& [name, g] : grads) {
    Tensor& p = lookup_param(params, name, g);
    Tensor& v = state.velocity.try_emplace(name, Tensor(g.shape())).first->second;
    if (!v.same_shape(g)) {
      throw Error(ErrCode::Dimension,
                  "optimizer: velocity for '" + name + "' has shape " +
                      v.shape_str() + " but gradient has " + g.shape_str());
    }
    for (size_t i = 0; i < p.size(); ++i) {
      v[i] = state.momentum * v[i] - state.lr * g[i];
      p[i] += v[i];
    }
  }
}

void rmsprop_step(RmsPropState& state, ParamStore& params,
                  const GradMap& grads) {
  check_lr(state.lr);
  if (!(state.rho > 0.0 && state.rho < 1.0)) {
    throw Error(ErrCode::Config,
                "rmsprop rho out of range: " + std::to_string(state.rho));
  }
  if (!(state.epsilon > 0.0)) {
    throw Error(ErrCode::Config, "rmsprop epsilon must be positive");
  }
  for (const auto& [name, g] : grads) {
    Tensor& p = lookup_param(params, name, g);
    Tensor& s =
        state.mean_square.try_emplace(name, Tensor(g.shape())).first->second;
    if (!s.same_shape(g)) {
      throw Error(ErrCode::Dimension,
                  "optimizer: accumulator for '" + name + "' has shape " +
                      s.shape_str() + " but gradient has " + g.shape_str());
    }
    for (size_t i = 0; i < p.size(); ++i) {
      s[i] = state.rho * s[i] + (1.0 - state.rho) * g[i] * g[i];
      p[i] -= state.lr * g[i] / (std::sqrt(s[i]) + state.epsilon);
    }
  }
}

Optimizer Optimizer::sgd(double lr, double momentum) {
  Optimizer o;
  o.kind_ = OptimizerKind::SgdMomentum;
  o.sgd_.lr = lr;
  o.sgd_.momentum = momentum;
  return o;
}

Optimizer Optimizer::rmsprop(double lr, double rho, double epsilon) {
  Optimizer o;
  o.kind_ = OptimizerKind::RmsProp;
  o.rms_.lr = lr;
  o.rms_.rho = rho;
  o.rms_.epsilon = epsilon;
  return o;
}

void Optimizer::step(ParamStore& params, const GradMap& grads) {
  if (kind_ == OptimizerKind::SgdMomentum) {
    sgd_momentum_step(sgd_, params, grads);
  } else {
    rmsprop_step(rms_, params, grads);
  }
}

}  // namespace sentifuse
