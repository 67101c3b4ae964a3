#ifndef SENTIFUSE_CORE_OPTIM_HPP
#define SENTIFUSE_CORE_OPTIM_HPP

#include <map>
#include <string>

#include "core/graph.hpp"
#include "core/tensor.hpp"

namespace sentifuse {

enum class OptimizerKind { SgdMomentum, RmsProp };

const char* optimizer_kind_name(OptimizerKind k);
OptimizerKind optimizer_kind_from_name(const std::string& name);

// Classical momentum:  v <- momentum*v - lr*g;  p <- p + v.
// Velocities start at zero and are keyed by parameter name.
struct SgdMomentumState {
  double lr = 0.001;
  double momentum = 0.9;
  std::map<std::string, Tensor> velocity;
};

// RMSProp:  s <- rho*s + (1-rho)*g^2;  p <- p - lr*g/(sqrt(s)+epsilon).
struct RmsPropState {
  double lr = 0.001;
  double rho = 0.9;
  double epsilon = 1e-8;
  std::map<std::string, Tensor> mean_square;
};

// Apply one update for every entry of grads. Parameters missing from the
// store raise a lookup error; shape disagreements raise a dimension error.
void sgd_momentum_step(SgdMomentumState& state, ParamStore& params,
                       const GradMap& grads);
void rmsprop_step(RmsPropState& state, ParamStore& params,
                  const GradMap& grads);

// Thin tagged wrapper so training code can hold either optimizer by value.
class Optimizer {
 public:
  static Optimizer sgd(double lr, double momentum);
  static Optimizer rmsprop(double lr, double rho, double epsilon);

  OptimizerKind kind() const { return kind_; }
  void step(ParamStore& params, const GradMap& grads);

 private:
  OptimizerKind kind_ = OptimizerKind::SgdMomentum;
  SgdMomentumState sgd_;
  RmsPropState rms_;
};

}  // namespace sentifuse

#endif
