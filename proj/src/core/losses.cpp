#include "core/losses.hpp"

#include "core/error.hpp"

namespace sentifuse {

const char* loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::Xent: return "xent";
    case LossKind::Cosine: return "cosine";
    case LossKind::Hinge: return "hinge";
    case LossKind::Mse: return "mse";
  }
  return "unknown";
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "xent") return LossKind::Xent;
  if (name == "cosine") return LossKind::Cosine;
  if (name == "hinge") return LossKind::Hinge;
  if (name == "mse") return LossKind::Mse;
  throw Error(ErrCode::Config, "unknown loss '" + name + "'");
}

NodeRef loss_node(Graph& g, LossKind kind, NodeRef pred, NodeRef target) {
  switch (kind) {
    case LossKind::Xent:
      return g.cross_entropy(pred, target);
    case LossKind::Cosine:
      return g.scale(g.cosine_sim(pred, target), -1.0);
    case LossKind::Hinge:
      return g.hinge_loss(pred, target);
    case LossKind::Mse:
      return g.mse_loss(pred, target);
  }
  throw Error(ErrCode::Internal, "loss_node: unhandled loss kind");
}

namespace {

double eval_loss(LossKind kind, const Tensor& pred, const Tensor& target) {
  Graph g;
  return g.value(loss_node(g, kind, g.input(pred), g.input(target)))[0];
}

}  // namespace

double categorical_cross_entropy(const Tensor& pred, const Tensor& target) {
  return eval_loss(LossKind::Xent, pred, target);
}

double cosine_proximity(const Tensor& pred, const Tensor& target) {
  return eval_loss(LossKind::Cosine, pred, target);
}

double hinge(const Tensor& pred, const Tensor& target) {
  return eval_loss(LossKind::Hinge, pred, target);
}

double mse(const Tensor& pred, const Tensor& target) {
  return eval_loss(LossKind::Mse, pred, target);
}

}  // namespace sentifuse
