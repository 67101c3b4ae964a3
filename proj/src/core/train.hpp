#ifndef SENTIFUSE_CORE_TRAIN_HPP
#define SENTIFUSE_CORE_TRAIN_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/losses.hpp"
#include "core/model.hpp"
#include "core/optim.hpp"

namespace sentifuse {

// Training run configuration. The defaults follow the toolkit's standard
// recipe for classifier heads: 20 epochs of SGD-with-momentum over batches
// of 64 under cross-entropy.
struct TrainConfig {
  size_t epochs = 20;
  size_t batch_size = 64;
  LossKind loss = LossKind::Xent;
  OptimizerKind optimizer = OptimizerKind::SgdMomentum;
  double lr = 0.001;
  double momentum = 0.9;   // SGD only
  double rho = 0.9;        // RMSProp only
  double epsilon = 1e-8;   // RMSProp only
  uint64_t seed = 1;
  bool eval_every_epoch = true;

  // Range checks (epochs/batch_size >= 1, positive rates, ...); violations
  // raise config errors.
  void validate() const;

  std::string to_json_string() const;
  // Missing keys keep their defaults; unknown keys are config errors so
  // typos in config files fail loudly.
  static TrainConfig from_json_string(const std::string& text);
};

// One row of the training trajectory. Accuracies are filled only when
// eval_every_epoch is set (and val_accuracy only when a validation set was
// provided); the has_* flags say which fields are meaningful.
struct EpochStats {
  size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  bool has_accuracy = false;
  double train_accuracy = 0.0;
  bool has_val = false;
  double val_accuracy = 0.0;
};

// Training outcome: the model passed to train_model ends with the
// final-epoch parameters, while best_params snapshots the best epoch by
// validation accuracy (train accuracy when no validation set; the final
// epoch when per-epoch evaluation is off). Accuracy ties keep the earlier
// epoch.
struct TrainResult {
  std::vector<EpochStats> history;
  size_t best_epoch = 0;  // 1-based
  ParamStore best_params;
};

// Evaluation metrics over a labeled set. `labels` fixes the axis order of
// the confusion matrix (rows = true, columns = predicted); per_class maps
// a label name to diagonal/row-total and only contains labels that appear
// in the data.
struct Metrics {
  double accuracy = 0.0;
  std::map<std::string, double> per_class;
  std::vector<std::vector<size_t>> confusion;
  std::vector<Label> labels;

  // {"accuracy": number, "per_class": {label: number}, "confusion": [[int]]}
  std::string to_json_string() const;
};

// The model input a datapoint provides for the given model kind
// (feedforward <- features, text <- encoded tokens, fusion <- text_features
// + features). Pointees live in the datapoint.
ModelInput input_for(const Model& model, const Datapoint& dp);

// The label the model assigns: argmax class for softmax heads,
// nearest-label decision for embedding heads (which require the table).
Label predict_label(const Model& model, const ModelInput& in,
                    const EmbeddingTable* label_table = nullptr);

// Mini-batch training. Deterministic given (seed, config, data): batch
// order and dropout draws are derived from cfg.seed. Softmax heads pair
// with cross-entropy; embedding heads pair with cosine/hinge/mse and need
// label_table both for targets and for accuracy. val_data may be empty.
TrainResult train_model(Model& model, const std::vector<Datapoint>& train_data,
                        const std::vector<Datapoint>& val_data,
                        const TrainConfig& cfg,
                        const EmbeddingTable* label_table = nullptr);

// Confusion-matrix metrics of the model's predictions over labeled data.
Metrics evaluate(const Model& model, const std::vector<Datapoint>& data,
                 const EmbeddingTable* label_table = nullptr);

// Metrics arithmetic from raw confusion counts (rows = true labels in the
// given axis order). evaluate() routes through this; exposed so metric
// identities can be checked directly against counted matrices.
Metrics metrics_from_counts(const std::vector<std::vector<size_t>>& confusion,
                            const std::vector<Label>& labels);

}  // namespace sentifuse

#endif
