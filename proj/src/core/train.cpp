#include "core/train.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace sentifuse {

using nlohmann::json;

namespace {

// Seed streams peeled off cfg.seed: one drives batch shuffles, the other
// the dropout masks. Both are consumed in a fixed order, which is what
// makes runs bit-reproducible.
constexpr uint64_t kStreamBatches = 11;
constexpr uint64_t kStreamDropout = 12;

[[noreturn]] void config_error(const std::string& msg) {
  throw Error(ErrCode::Config, "train config: " + msg);
}

void check_pairing(HeadKind head, LossKind loss) {
  if (head == HeadKind::Softmax && loss != LossKind::Xent) {
    throw Error(ErrCode::Config,
                std::string("softmax heads train under cross-entropy, not ") +
                    loss_kind_name(loss));
  }
  if (head == HeadKind::EmbeddingProjection && loss == LossKind::Xent) {
    throw Error(ErrCode::Config,
                "embedding-projection heads train under cosine/hinge/mse, "
                "not cross-entropy");
  }
}

size_t label_row(const std::vector<Label>& labels, Label label,
                 const std::string& id) {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) {
    throw Error(ErrCode::Contract,
                "datapoint \"" + id + "\" has label \"" + label_name(label) +
                    "\" outside the model's class set");
  }
  return static_cast<size_t>(it - labels.begin());
}

// Training target for one datapoint: a one-hot class vector for softmax
// heads, the label's embedding vector for projection heads.
Tensor target_for(const Model& model, const Datapoint& dp,
                  const EmbeddingTable* table) {
  const std::vector<Label> labels = model.spec().class_labels();
  const size_t row = label_row(labels, dp.label, dp.id);
  if (model.spec().head == HeadKind::Softmax) {
    Tensor t({labels.size()});
    t[row] = 1.0;
    return t;
  }
  return table->at(label_name(dp.label));
}

void require_table(const Model& model, const EmbeddingTable* table,
                   const char* what) {
  if (model.spec().head == HeadKind::EmbeddingProjection && table == nullptr) {
    throw Error(ErrCode::Config, std::string(what) +
                                     ": embedding-head models need a label "
                                     "embedding table");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) config_error("epochs must be >= 1");
  if (batch_size < 1) config_error("batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    config_error("learning rate must be positive and finite");
  }
  if (!(momentum >= 0.0) || momentum >= 1.0) {
    config_error("momentum must lie in [0, 1)");
  }
  if (!(rho > 0.0) || rho >= 1.0) config_error("rho must lie in (0, 1)");
  if (!(epsilon > 0.0)) config_error("epsilon must be positive");
}

std::string TrainConfig::to_json_string() const {
  json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["loss"] = loss_kind_name(loss);
  j["optimizer"] = optimizer_kind_name(optimizer);
  j["lr"] = lr;
  j["momentum"] = momentum;
  j["rho"] = rho;
  j["epsilon"] = epsilon;
  j["seed"] = seed;
  j["eval_every_epoch"] = eval_every_epoch;
  return j.dump();
}

TrainConfig TrainConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrCode::Parse, "train config: invalid JSON: " +
                                    strip_exception_tag(e.what()));
  }
  if (!j.is_object()) {
    throw Error(ErrCode::Parse, "train config: not a JSON object");
  }
  TrainConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "epochs") {
        cfg.epochs = value.get<size_t>();
      } else if (key == "batch_size") {
        cfg.batch_size = value.get<size_t>();
      } else if (key == "loss") {
        cfg.loss = loss_kind_from_name(value.get<std::string>());
      } else if (key == "optimizer") {
        cfg.optimizer = optimizer_kind_from_name(value.get<std::string>());
      } else if (key == "lr") {
        cfg.lr = value.get<double>();
      } else if (key == "momentum") {
        cfg.momentum = value.get<double>();
      } else if (key == "rho") {
        cfg.rho = value.get<double>();
      } else if (key == "epsilon") {
        cfg.epsilon = value.get<double>();
      } else if (key == "seed") {
        cfg.seed = value.get<uint64_t>();
      } else if (key == "eval_every_epoch") {
        cfg.eval_every_epoch = value.get<bool>();
      } else {
        config_error("unknown key \"" + key + "\"");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrCode::Parse,
                "train config: " + strip_exception_tag(e.what()));
  }
  cfg.validate();
  return cfg;
}

std::string Metrics::to_json_string() const {
  json j;
  j["accuracy"] = accuracy;
  j["per_class"] = json::object();
  for (const auto& [name, value] : per_class) {
    j["per_class"][name] = value;
  }
  j["confusion"] = confusion;
  return j.dump();
}

ModelInput input_for(const Model& model, const Datapoint& dp) {
  switch (model.spec().kind) {
    case ModelKind::Feedforward:
      if (dp.features.size() == 0) {
        throw Error(ErrCode::Contract, "datapoint \"" + dp.id +
                                           "\" carries no feature vector");
      }
      return ModelInput::of_features(dp.features);
    case ModelKind::TextBilstm:
      return ModelInput::of_tokens(dp.encoded);
    case ModelKind::Fusion:
      if (dp.text_features.size() == 0) {
        throw Error(ErrCode::Contract, "datapoint \"" + dp.id +
                                           "\" carries no text features");
      }
      if (dp.features.size() == 0) {
        throw Error(ErrCode::Contract, "datapoint \"" + dp.id +
                                           "\" carries no image features");
      }
      return ModelInput::of_pair(dp.text_features, dp.features);
  }
  throw Error(ErrCode::Internal, "input_for: unhandled model kind");
}

Label predict_label(const Model& model, const ModelInput& in,
                    const EmbeddingTable* label_table) {
  const Tensor y = model.predict(in);
  const std::vector<Label> labels = model.spec().class_labels();
  if (model.spec().head == HeadKind::Softmax) {
    // First maximum wins, realizing the fixed-order tie-break.
    size_t best = 0;
    for (size_t i = 1; i < y.size(); ++i) {
      if (y[i] > y[best]) best = i;
    }
    return labels[best];
  }
  require_table(model, label_table, "predict_label");
  return predict_nearest_label(y, *label_table, labels);
}

Metrics metrics_from_counts(const std::vector<std::vector<size_t>>& confusion,
                            const std::vector<Label>& labels) {
  if (labels.empty() || confusion.size() != labels.size()) {
    throw Error(ErrCode::Contract,
                "metrics: confusion matrix does not match the label axis");
  }
  Metrics m;
  m.labels = labels;
  m.confusion = confusion;
  size_t diagonal = 0;
  size_t total = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (confusion[i].size() != labels.size()) {
      throw Error(ErrCode::Contract, "metrics: confusion matrix is not square");
    }
    size_t row_total = 0;
    for (const size_t c : confusion[i]) row_total += c;
    diagonal += confusion[i][i];
    total += row_total;
    if (row_total > 0) {
      m.per_class[label_name(labels[i])] =
          static_cast<double>(confusion[i][i]) /
          static_cast<double>(row_total);
    }
  }
  if (total == 0) {
    throw Error(ErrCode::Contract, "metrics: no observations");
  }
  m.accuracy = static_cast<double>(diagonal) / static_cast<double>(total);
  return m;
}

Metrics evaluate(const Model& model, const std::vector<Datapoint>& data,
                 const EmbeddingTable* label_table) {
  if (data.empty()) {
    throw Error(ErrCode::Contract, "evaluate: empty dataset");
  }
  require_table(model, label_table, "evaluate");
  const std::vector<Label> labels = model.spec().class_labels();
  std::vector<std::vector<size_t>> confusion(
      labels.size(), std::vector<size_t>(labels.size(), 0));
  for (const Datapoint& dp : data) {
    const size_t row = label_row(labels, dp.label, dp.id);
    const Label pred = predict_label(model, input_for(model, dp), label_table);
    const size_t col = label_row(labels, pred, dp.id);
    confusion[row][col] += 1;
  }
  return metrics_from_counts(confusion, labels);
}

TrainResult train_model(Model& model, const std::vector<Datapoint>& train_data,
                        const std::vector<Datapoint>& val_data,
                        const TrainConfig& cfg,
                        const EmbeddingTable* label_table) {
  cfg.validate();
  check_pairing(model.spec().head, cfg.loss);
  if (train_data.empty()) {
    throw Error(ErrCode::Contract, "train: empty training set");
  }
  require_table(model, label_table, "train");

  Optimizer opt = cfg.optimizer == OptimizerKind::SgdMomentum
                      ? Optimizer::sgd(cfg.lr, cfg.momentum)
                      : Optimizer::rmsprop(cfg.lr, cfg.rho, cfg.epsilon);
  Rng dropout_rng(mix_seed(cfg.seed, kStreamDropout));
  const uint64_t batch_seed = mix_seed(cfg.seed, kStreamBatches);
  const size_t n = train_data.size();

  TrainResult result;
  double best_score = -1.0;  // accuracies live in [0,1]

  for (size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto batches =
        epoch_batches(n, cfg.batch_size, batch_seed, epoch - 1);
    double loss_sum = 0.0;
    for (const auto& batch : batches) {
      Graph g;
      NodeRef total{};
      bool first = true;
      for (const size_t idx : batch) {
        const Datapoint& dp = train_data[idx];
        const NodeRef out =
            model.forward(g, input_for(model, dp), Mode::Train, &dropout_rng);
        const NodeRef tgt = g.input(target_for(model, dp, label_table));
        const NodeRef item = loss_node(g, cfg.loss, out, tgt);
        total = first ? item : g.add(total, item);
        first = false;
      }
      const double b = static_cast<double>(batch.size());
      const NodeRef mean = g.scale(total, 1.0 / b);
      g.backward(mean);
      opt.step(model.params(), g.param_grads());
      loss_sum += g.value(mean)[0] * b;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(n);
    if (cfg.eval_every_epoch) {
      stats.has_accuracy = true;
      stats.train_accuracy = evaluate(model, train_data, label_table).accuracy;
      double score = stats.train_accuracy;
      if (!val_data.empty()) {
        stats.has_val = true;
        stats.val_accuracy = evaluate(model, val_data, label_table).accuracy;
        score = stats.val_accuracy;
      }
      // Strict improvement keeps the earliest epoch on ties.
      if (score > best_score) {
        best_score = score;
        result.best_epoch = epoch;
        result.best_params = model.params();
      }
    }
    result.history.push_back(stats);
  }

  if (result.best_epoch == 0) {
    result.best_epoch = cfg.epochs;
    result.best_params = model.params();
  }
  return result;
}

}  // namespace sentifuse
