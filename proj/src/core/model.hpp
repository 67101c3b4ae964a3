#ifndef SENTIFUSE_CORE_MODEL_HPP
#define SENTIFUSE_CORE_MODEL_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/graph.hpp"
#include "core/layers.hpp"
#include "core/text.hpp"

namespace sentifuse {

// The three model families: feed-forward stacks over a single feature
// vector, the token-sequence BiLSTM text model, and two-branch fusion over
// extracted (text, image) feature vectors.
enum class ModelKind { Feedforward, TextBilstm, Fusion };

// Softmax heads emit a class distribution; embedding-projection heads emit
// a point in label-embedding space classified by nearest label vector.
enum class HeadKind { Softmax, EmbeddingProjection };

const char* model_kind_name(ModelKind k);
ModelKind model_kind_from_name(const std::string& name);
const char* head_kind_name(HeadKind k);
HeadKind head_kind_from_name(const std::string& name);

// One hidden-layer entry of a feed-forward stack.
struct LayerDesc {
  enum class Type { Dense, Dropout, Gate };
  Type type = Type::Dense;
  size_t width = 0;                    // Dense output width
  Activation act = Activation::Relu;   // Dense activation (Linear or Relu)
  double rate = 0.0;                   // Dropout rate
  GateKind gate = GateKind::GL1;       // Gate kind

  static LayerDesc dense(size_t width, Activation act = Activation::Relu);
  static LayerDesc dropout(double rate);
  static LayerDesc gated(GateKind kind);
};

// Declarative model description. Only the fields of the active kind are
// meaningful (plus the head fields, which every kind uses). `classes` names
// the label-set size even for embedding heads, where it selects the allowed
// labels at evaluation time rather than an output width.
struct ModelSpec {
  ModelKind kind = ModelKind::Feedforward;

  // Feedforward.
  size_t input_dim = 0;
  std::vector<LayerDesc> stack;

  // TextBilstm.
  size_t vocab_size = 0;
  size_t embed_dim = 200;
  size_t hidden_dim = 300;

  // Fusion. The image branch is optionally compressed by a ReLU dense
  // layer before gating; gates apply only when `gated` is set.
  size_t text_dim = 600;
  size_t image_dim = 2048;
  bool gated = false;
  GateKind text_gate = GateKind::GL1;
  GateKind image_gate = GateKind::GL2;
  bool compress_image = false;
  size_t compress_dim = 600;
  double fusion_dropout = 0.0;

  // Head.
  HeadKind head = HeadKind::Softmax;
  size_t classes = 2;
  size_t proj_dim = 50;

  // Structural validation; any inconsistency (zero widths, bad rates,
  // unknown combinations) raises a spec error.
  void validate() const;

  // Width of the vector entering the head / leaving the head.
  size_t head_input_dim() const;
  size_t output_dim() const;

  // Labels a classifier with this spec distinguishes: the first `classes`
  // entries of the fixed order for 3-class, negative/positive for 2-class.
  std::vector<Label> class_labels() const;

  std::string to_json_string() const;
  static ModelSpec from_json_string(const std::string& text);
};

// Every parameter name and shape the spec implies, in store order.
std::map<std::string, std::vector<size_t>> expected_param_shapes(
    const ModelSpec& spec);

// Named architecture presets. Image-feature classifiers:
//   image_2class        4096 -> 2048 -> 1024 -> 512 stack, softmax 2
//   image_3class        4096 -> 1024 -> 512 stack, softmax 3
//   embed_2class        image_2class stack with a 50-d projection head
//   embed_3class        image_3class stack with a 50-d projection head
// Text and fusion:
//   text_bilstm            embed 200 -> BiLSTM 300 -> softmax (set vocab_size!)
//   fusion_concat          concat(600 text, 2048 image) -> softmax 2
//   fusion_gated           text GL1, image dense-600-relu + GL2, dropout 0.3
//   fusion_gated_retained  text GL2, raw 2048 image + GL2, dropout 0.3
ModelSpec preset_spec(const std::string& name);
std::vector<std::string> preset_names();

// Input carrier for forward passes; only the pointers the model kind needs
// must be set, and pointees must outlive the call.
struct ModelInput {
  const Tensor* features = nullptr;         // Feedforward
  const Tensor* text = nullptr;             // Fusion text branch
  const Tensor* image = nullptr;            // Fusion image branch
  const EncodedSequence* tokens = nullptr;  // TextBilstm

  static ModelInput of_features(const Tensor& t);
  static ModelInput of_tokens(const EncodedSequence& seq);
  static ModelInput of_pair(const Tensor& text, const Tensor& image);
};

// A built model: immutable spec plus named parameters. Forward passes bind
// the parameters into a caller-supplied graph, so training can take
// gradients with respect to every parameter by name.
class Model {
 public:
  // Fresh seeded initialization (deterministic in seed).
  static Model build(const ModelSpec& spec, uint64_t seed);
  // Adopt existing parameters; names and shapes must match the spec
  // exactly or a spec error is raised.
  static Model from_params(ModelSpec spec, ParamStore params);

  const ModelSpec& spec() const { return spec_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }

  // Head output node (class distribution or projection vector). Train mode
  // needs an rng when the spec contains dropout.
  NodeRef forward(Graph& g, const ModelInput& in, Mode mode,
                  Rng* dropout_rng = nullptr) const;
  // The vector feeding the head ("the layer below the softmax").
  NodeRef penultimate_node(Graph& g, const ModelInput& in, Mode mode,
                           Rng* dropout_rng = nullptr) const;

  // Eval-mode value-level forward passes (dropout off).
  Tensor predict(const ModelInput& in) const;
  Tensor penultimate(const ModelInput& in) const;

  // Same architecture with the head swapped for a linear projection to
  // proj_dim; every retained parameter is copied bit-identically and only
  // the new head is freshly initialized from the seed.
  Model to_embedding_head(size_t proj_dim, uint64_t seed) const;

  // Checkpoint: magic "SFCK", u32 version, u32 manifest length, manifest
  // JSON (spec + parameter names/shapes), then parameter doubles in
  // manifest order as little-endian bits. Round-trips are bit-exact.
  void save(const std::string& path) const;
  static Model load(const std::string& path);

 private:
  Model(ModelSpec spec, ParamStore params);

  ModelSpec spec_;
  ParamStore params_;
};

// Nearest-label decision rule for embedding-head outputs: the allowed
// label whose embedding vector has the highest cosine similarity to the
// output, ties resolved by the fixed label order. The output must have
// nonzero norm and every allowed label must be present in the table.
Label predict_nearest_label(const Tensor& output, const EmbeddingTable& table,
                            const std::vector<Label>& allowed);

}  // namespace sentifuse

#endif
