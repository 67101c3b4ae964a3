#include "core/model.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "core/error.hpp"
#include "core/io_util.hpp"

namespace sentifuse {

using nlohmann::json;

namespace {

constexpr uint32_t kCheckpointVersion = 1;

// Seed streams for the independently initialized parameter groups.
constexpr uint64_t kStreamHead = 1;
constexpr uint64_t kStreamEmbed = 2;
constexpr uint64_t kStreamLstmFwd = 3;
constexpr uint64_t kStreamLstmBwd = 4;
constexpr uint64_t kStreamCompress = 5;
constexpr uint64_t kStreamStackBase = 100;

const Tensor& store_param(const ParamStore& store, const std::string& name) {
  const auto it = store.find(name);
  if (it == store.end()) {
    throw Error(ErrCode::Lookup,
                "model parameter \"" + name + "\" missing from store");
  }
  return it->second;
}

void check_vec_dim(const char* what, const Tensor& t, size_t want) {
  if (t.rank() != 1 || t.size() != want) {
    throw Error(ErrCode::Dimension, std::string(what) + ": expected [" +
                                        std::to_string(want) + "], got " +
                                        t.shape_str());
  }
}

[[noreturn]] void spec_error(const std::string& msg) {
  throw Error(ErrCode::Spec, "model spec: " + msg);
}

const char* layer_type_name(LayerDesc::Type t) {
  switch (t) {
    case LayerDesc::Type::Dense: return "dense";
    case LayerDesc::Type::Dropout: return "dropout";
    case LayerDesc::Type::Gate: return "gate";
  }
  return "unknown";
}

LayerDesc::Type layer_type_from_name(const std::string& name) {
  if (name == "dense") return LayerDesc::Type::Dense;
  if (name == "dropout") return LayerDesc::Type::Dropout;
  if (name == "gate") return LayerDesc::Type::Gate;
  throw Error(ErrCode::Parse, "unknown layer type \"" + name + "\"");
}

json spec_to_json(const ModelSpec& s) {
  json j;
  j["kind"] = model_kind_name(s.kind);
  j["head"] = head_kind_name(s.head);
  j["classes"] = s.classes;
  if (s.head == HeadKind::EmbeddingProjection) j["proj_dim"] = s.proj_dim;
  switch (s.kind) {
    case ModelKind::Feedforward: {
      j["input_dim"] = s.input_dim;
      json stack = json::array();
      for (const auto& ld : s.stack) {
        json e;
        e["type"] = layer_type_name(ld.type);
        switch (ld.type) {
          case LayerDesc::Type::Dense:
            e["width"] = ld.width;
            e["activation"] = activation_name(ld.act);
            break;
          case LayerDesc::Type::Dropout:
            e["rate"] = ld.rate;
            break;
          case LayerDesc::Type::Gate:
            e["gate"] = gate_kind_name(ld.gate);
            break;
        }
        stack.push_back(std::move(e));
      }
      j["stack"] = std::move(stack);
      break;
    }
    case ModelKind::TextBilstm:
      j["vocab_size"] = s.vocab_size;
      j["embed_dim"] = s.embed_dim;
      j["hidden_dim"] = s.hidden_dim;
      break;
    case ModelKind::Fusion:
      j["text_dim"] = s.text_dim;
      j["image_dim"] = s.image_dim;
      j["gated"] = s.gated;
      if (s.gated) {
        j["text_gate"] = gate_kind_name(s.text_gate);
        j["image_gate"] = gate_kind_name(s.image_gate);
      }
      j["compress_image"] = s.compress_image;
      if (s.compress_image) j["compress_dim"] = s.compress_dim;
      j["fusion_dropout"] = s.fusion_dropout;
      break;
  }
  return j;
}

ModelSpec spec_from_json(const json& j) {
  if (!j.is_object()) {
    throw Error(ErrCode::Parse, "model spec: not a JSON object");
  }
  ModelSpec s;
  try {
    s.kind = model_kind_from_name(j.at("kind").get<std::string>());
    s.head = head_kind_from_name(j.at("head").get<std::string>());
    s.classes = j.at("classes").get<size_t>();
    if (j.contains("proj_dim")) s.proj_dim = j.at("proj_dim").get<size_t>();
    switch (s.kind) {
      case ModelKind::Feedforward: {
        s.input_dim = j.at("input_dim").get<size_t>();
        s.stack.clear();
        for (const auto& e : j.at("stack")) {
          LayerDesc ld;
          ld.type = layer_type_from_name(e.at("type").get<std::string>());
          switch (ld.type) {
            case LayerDesc::Type::Dense:
              ld.width = e.at("width").get<size_t>();
              ld.act =
                  activation_from_name(e.at("activation").get<std::string>());
              break;
            case LayerDesc::Type::Dropout:
              ld.rate = e.at("rate").get<double>();
              break;
            case LayerDesc::Type::Gate:
              ld.gate = gate_kind_from_name(e.at("gate").get<std::string>());
              break;
          }
          s.stack.push_back(ld);
        }
        break;
      }
      case ModelKind::TextBilstm:
        s.vocab_size = j.at("vocab_size").get<size_t>();
        s.embed_dim = j.at("embed_dim").get<size_t>();
        s.hidden_dim = j.at("hidden_dim").get<size_t>();
        break;
      case ModelKind::Fusion:
        s.text_dim = j.at("text_dim").get<size_t>();
        s.image_dim = j.at("image_dim").get<size_t>();
        s.gated = j.at("gated").get<bool>();
        if (s.gated) {
          s.text_gate =
              gate_kind_from_name(j.at("text_gate").get<std::string>());
          s.image_gate =
              gate_kind_from_name(j.at("image_gate").get<std::string>());
        }
        s.compress_image = j.at("compress_image").get<bool>();
        if (s.compress_image) {
          s.compress_dim = j.at("compress_dim").get<size_t>();
        }
        s.fusion_dropout = j.at("fusion_dropout").get<double>();
        break;
    }
  } catch (const json::exception& e) {
    throw Error(ErrCode::Parse,
                "model spec: " + strip_exception_tag(e.what()));
  } catch (const Error& e) {
    if (e.code() == ErrCode::Parse || e.code() == ErrCode::Config) {
      throw Error(ErrCode::Parse, std::string("model spec: ") + e.what());
    }
    throw;
  }
  s.validate();
  return s;
}

void add_lstm_shapes(std::map<std::string, std::vector<size_t>>& m,
                     const std::string& prefix, size_t input, size_t hidden) {
  for (const char* w : {"Wi", "Wf", "Wo", "Wg"}) {
    m[prefix + "." + w] = {hidden, input};
  }
  for (const char* u : {"Ui", "Uf", "Uo", "Ug"}) {
    m[prefix + "." + u] = {hidden, hidden};
  }
  for (const char* b : {"bi", "bf", "bo", "bg"}) {
    m[prefix + "." + b] = {hidden};
  }
}

}  // namespace

const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Feedforward: return "feedforward";
    case ModelKind::TextBilstm: return "text_bilstm";
    case ModelKind::Fusion: return "fusion";
  }
  return "unknown";
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "feedforward") return ModelKind::Feedforward;
  if (name == "text_bilstm") return ModelKind::TextBilstm;
  if (name == "fusion") return ModelKind::Fusion;
  throw Error(ErrCode::Config, "unknown model kind \"" + name + "\"");
}

const char* head_kind_name(HeadKind k) {
  return k == HeadKind::Softmax ? "softmax" : "embedding_projection";
}

HeadKind head_kind_from_name(const std::string& name) {
  if (name == "softmax") return HeadKind::Softmax;
  if (name == "embedding_projection") return HeadKind::EmbeddingProjection;
  throw Error(ErrCode::Config, "unknown head kind \"" + name + "\"");
}

LayerDesc LayerDesc::dense(size_t width, Activation act) {
  LayerDesc ld;
  ld.type = Type::Dense;
  ld.width = width;
  ld.act = act;
  return ld;
}

LayerDesc LayerDesc::dropout(double rate) {
  LayerDesc ld;
  ld.type = Type::Dropout;
  ld.rate = rate;
  return ld;
}

LayerDesc LayerDesc::gated(GateKind kind) {
  LayerDesc ld;
  ld.type = Type::Gate;
  ld.gate = kind;
  return ld;
}

void ModelSpec::validate() const {
  if (classes != 2 && classes != 3) {
    spec_error("classes must be 2 or 3, got " + std::to_string(classes));
  }
  if (head == HeadKind::EmbeddingProjection && proj_dim == 0) {
    spec_error("projection head needs proj_dim >= 1");
  }
  switch (kind) {
    case ModelKind::Feedforward: {
      if (input_dim == 0) spec_error("feedforward input_dim must be >= 1");
      for (size_t i = 0; i < stack.size(); ++i) {
        const LayerDesc& ld = stack[i];
        const std::string where = "stack layer " + std::to_string(i);
        switch (ld.type) {
          case LayerDesc::Type::Dense:
            if (ld.width == 0) spec_error(where + ": dense width must be >= 1");
            if (ld.act == Activation::Softmax) {
              spec_error(where + ": softmax belongs to the head only");
            }
            break;
          case LayerDesc::Type::Dropout:
            if (!(ld.rate >= 0.0) || ld.rate >= 1.0) {
              spec_error(where + ": dropout rate must lie in [0, 1)");
            }
            break;
          case LayerDesc::Type::Gate:
            break;
        }
      }
      break;
    }
    case ModelKind::TextBilstm:
      if (vocab_size < 2) spec_error("vocab_size must be >= 2");
      if (embed_dim == 0) spec_error("embed_dim must be >= 1");
      if (hidden_dim == 0) spec_error("hidden_dim must be >= 1");
      break;
    case ModelKind::Fusion:
      if (text_dim == 0) spec_error("text_dim must be >= 1");
      if (image_dim == 0) spec_error("image_dim must be >= 1");
      if (compress_image && compress_dim == 0) {
        spec_error("compress_dim must be >= 1");
      }
      if (!(fusion_dropout >= 0.0) || fusion_dropout >= 1.0) {
        spec_error("fusion_dropout must lie in [0, 1)");
      }
      break;
  }
}

size_t ModelSpec::head_input_dim() const {
  switch (kind) {
    case ModelKind::Feedforward: {
      size_t cur = input_dim;
      for (const auto& ld : stack) {
        if (ld.type == LayerDesc::Type::Dense) cur = ld.width;
      }
      return cur;
    }
    case ModelKind::TextBilstm:
      return 2 * hidden_dim;
    case ModelKind::Fusion:
      return text_dim + (compress_image ? compress_dim : image_dim);
  }
  return 0;
}

size_t ModelSpec::output_dim() const {
  return head == HeadKind::Softmax ? classes : proj_dim;
}

std::vector<Label> ModelSpec::class_labels() const {
  if (classes == 3) {
    return {Label::Negative, Label::Neutral, Label::Positive};
  }
  return {Label::Negative, Label::Positive};
}

std::string ModelSpec::to_json_string() const {
  return spec_to_json(*this).dump();
}

ModelSpec ModelSpec::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrCode::Parse,
                "model spec: invalid JSON: " + strip_exception_tag(e.what()));
  }
  return spec_from_json(j);
}

std::map<std::string, std::vector<size_t>> expected_param_shapes(
    const ModelSpec& spec) {
  spec.validate();
  std::map<std::string, std::vector<size_t>> shapes;
  switch (spec.kind) {
    case ModelKind::Feedforward: {
      size_t cur = spec.input_dim;
      for (size_t i = 0; i < spec.stack.size(); ++i) {
        const LayerDesc& ld = spec.stack[i];
        const std::string prefix = "ff." + std::to_string(i);
        if (ld.type == LayerDesc::Type::Dense) {
          shapes[prefix + ".W"] = {ld.width, cur};
          shapes[prefix + ".b"] = {ld.width};
          cur = ld.width;
        } else if (ld.type == LayerDesc::Type::Gate) {
          shapes[prefix + ".theta"] = {cur};
        }
      }
      break;
    }
    case ModelKind::TextBilstm:
      shapes["embed.table"] = {spec.vocab_size, spec.embed_dim};
      add_lstm_shapes(shapes, "lstm_fwd", spec.embed_dim, spec.hidden_dim);
      add_lstm_shapes(shapes, "lstm_bwd", spec.embed_dim, spec.hidden_dim);
      break;
    case ModelKind::Fusion: {
      if (spec.gated) shapes["text_gate.theta"] = {spec.text_dim};
      if (spec.compress_image) {
        shapes["img_compress.W"] = {spec.compress_dim, spec.image_dim};
        shapes["img_compress.b"] = {spec.compress_dim};
      }
      if (spec.gated) {
        shapes["img_gate.theta"] = {
            spec.compress_image ? spec.compress_dim : spec.image_dim};
      }
      break;
    }
  }
  shapes["head.W"] = {spec.output_dim(), spec.head_input_dim()};
  shapes["head.b"] = {spec.output_dim()};
  return shapes;
}

ModelSpec preset_spec(const std::string& name) {
  ModelSpec s;
  if (name == "image_2class" || name == "embed_2class") {
    s.kind = ModelKind::Feedforward;
    s.input_dim = 4096;
    s.stack = {LayerDesc::dense(2048), LayerDesc::dropout(0.7),
               LayerDesc::dense(1024), LayerDesc::dropout(0.7),
               LayerDesc::dense(512),  LayerDesc::dropout(0.5)};
    s.classes = 2;
  } else if (name == "image_3class" || name == "embed_3class") {
    s.kind = ModelKind::Feedforward;
    s.input_dim = 4096;
    s.stack = {LayerDesc::dense(1024), LayerDesc::dropout(0.5),
               LayerDesc::dense(512), LayerDesc::dropout(0.5)};
    s.classes = 3;
  } else if (name == "text_bilstm") {
    s.kind = ModelKind::TextBilstm;
    s.vocab_size = 0;  // caller must supply the real vocabulary size
    s.embed_dim = 200;
    s.hidden_dim = 300;
    s.classes = 2;
  } else if (name == "fusion_concat") {
    s.kind = ModelKind::Fusion;
    s.text_dim = 600;
    s.image_dim = 2048;
    s.gated = false;
    s.compress_image = false;
    s.fusion_dropout = 0.0;
    s.classes = 2;
  } else if (name == "fusion_gated") {
    s.kind = ModelKind::Fusion;
    s.text_dim = 600;
    s.image_dim = 2048;
    s.gated = true;
    s.text_gate = GateKind::GL1;
    s.image_gate = GateKind::GL2;
    s.compress_image = true;
    s.compress_dim = 600;
    s.fusion_dropout = 0.3;
    s.classes = 2;
  } else if (name == "fusion_gated_retained") {
    s.kind = ModelKind::Fusion;
    s.text_dim = 600;
    s.image_dim = 2048;
    s.gated = true;
    s.text_gate = GateKind::GL2;
    s.image_gate = GateKind::GL2;
    s.compress_image = false;
    s.fusion_dropout = 0.3;
    s.classes = 2;
  } else {
    std::string known;
    for (const auto& p : preset_names()) {
      if (!known.empty()) known += ", ";
      known += p;
    }
    throw Error(ErrCode::Config,
                "unknown preset \"" + name + "\" (known: " + known + ")");
  }
  if (name.rfind("embed_", 0) == 0) {
    s.head = HeadKind::EmbeddingProjection;
    s.proj_dim = 50;
  }
  return s;
}

std::vector<std::string> preset_names() {
  return {"image_2class",  "image_3class",       "embed_2class",
          "embed_3class",  "text_bilstm",        "fusion_concat",
          "fusion_gated",  "fusion_gated_retained"};
}

ModelInput ModelInput::of_features(const Tensor& t) {
  ModelInput in;
  in.features = &t;
  return in;
}

ModelInput ModelInput::of_tokens(const EncodedSequence& seq) {
  ModelInput in;
  in.tokens = &seq;
  return in;
}

ModelInput ModelInput::of_pair(const Tensor& text, const Tensor& image) {
  ModelInput in;
  in.text = &text;
  in.image = &image;
  return in;
}

Model::Model(ModelSpec spec, ParamStore params)
    : spec_(std::move(spec)), params_(std::move(params)) {}

Model Model::build(const ModelSpec& spec, uint64_t seed) {
  spec.validate();
  ParamStore params;
  switch (spec.kind) {
    case ModelKind::Feedforward: {
      size_t cur = spec.input_dim;
      for (size_t i = 0; i < spec.stack.size(); ++i) {
        const LayerDesc& ld = spec.stack[i];
        const std::string prefix = "ff." + std::to_string(i);
        if (ld.type == LayerDesc::Type::Dense) {
          Rng rng(mix_seed(seed, kStreamStackBase + i));
          store_dense(params, prefix, make_dense(cur, ld.width, ld.act, rng));
          cur = ld.width;
        } else if (ld.type == LayerDesc::Type::Gate) {
          params[prefix + ".theta"] = make_gate(ld.gate, cur).theta;
        }
      }
      break;
    }
    case ModelKind::TextBilstm: {
      Rng re(mix_seed(seed, kStreamEmbed));
      params["embed.table"] =
          make_embedding(spec.vocab_size, spec.embed_dim, re).table;
      Rng rf(mix_seed(seed, kStreamLstmFwd));
      store_lstm(params, "lstm_fwd",
                 make_lstm(spec.embed_dim, spec.hidden_dim, rf));
      Rng rb(mix_seed(seed, kStreamLstmBwd));
      store_lstm(params, "lstm_bwd",
                 make_lstm(spec.embed_dim, spec.hidden_dim, rb));
      break;
    }
    case ModelKind::Fusion: {
      if (spec.gated) {
        params["text_gate.theta"] =
            make_gate(spec.text_gate, spec.text_dim).theta;
      }
      if (spec.compress_image) {
        Rng rc(mix_seed(seed, kStreamCompress));
        store_dense(params, "img_compress",
                    make_dense(spec.image_dim, spec.compress_dim,
                               Activation::Relu, rc));
      }
      if (spec.gated) {
        params["img_gate.theta"] =
            make_gate(spec.image_gate,
                      spec.compress_image ? spec.compress_dim : spec.image_dim)
                .theta;
      }
      break;
    }
  }
  Rng rh(mix_seed(seed, kStreamHead));
  const Activation head_act = spec.head == HeadKind::Softmax
                                  ? Activation::Softmax
                                  : Activation::Linear;
  store_dense(params, "head",
              make_dense(spec.head_input_dim(), spec.output_dim(), head_act,
                         rh));
  return from_params(spec, std::move(params));
}

Model Model::from_params(ModelSpec spec, ParamStore params) {
  spec.validate();
  const auto expected = expected_param_shapes(spec);
  for (const auto& [name, shape] : expected) {
    const auto it = params.find(name);
    if (it == params.end()) {
      spec_error("parameter \"" + name + "\" missing");
    }
    if (it->second.shape() != shape) {
      spec_error("parameter \"" + name + "\" has shape " +
                 it->second.shape_str() + ", expected " +
                 Tensor::zeros(shape).shape_str());
    }
  }
  if (params.size() != expected.size()) {
    for (const auto& [name, tensor] : params) {
      (void)tensor;
      if (expected.find(name) == expected.end()) {
        spec_error("unexpected parameter \"" + name + "\"");
      }
    }
  }
  return Model(std::move(spec), std::move(params));
}

NodeRef Model::penultimate_node(Graph& g, const ModelInput& in, Mode mode,
                                Rng* dropout_rng) const {
  switch (spec_.kind) {
    case ModelKind::Feedforward: {
      if (in.features == nullptr) {
        throw Error(ErrCode::Contract,
                    "forward: feedforward model needs ModelInput.features");
      }
      check_vec_dim("forward: features", *in.features, spec_.input_dim);
      NodeRef x = g.input(*in.features);
      for (size_t i = 0; i < spec_.stack.size(); ++i) {
        const LayerDesc& ld = spec_.stack[i];
        const std::string prefix = "ff." + std::to_string(i);
        switch (ld.type) {
          case LayerDesc::Type::Dense:
            x = dense_node(g, bind_dense(g, params_, prefix, ld.act), x);
            break;
          case LayerDesc::Type::Dropout:
            x = dropout_node(g, x, ld.rate, mode, dropout_rng);
            break;
          case LayerDesc::Type::Gate: {
            NodeRef theta = g.parameter(
                prefix + ".theta", store_param(params_, prefix + ".theta"));
            x = gate_node(g, ld.gate, theta, x);
            break;
          }
        }
      }
      return x;
    }
    case ModelKind::TextBilstm: {
      if (in.tokens == nullptr) {
        throw Error(ErrCode::Contract,
                    "forward: text model needs ModelInput.tokens");
      }
      const EncodedSequence& seq = *in.tokens;
      if (seq.true_length > kSequenceLength) {
        throw Error(ErrCode::Contract,
                    "forward: true_length " +
                        std::to_string(seq.true_length) + " exceeds " +
                        std::to_string(kSequenceLength));
      }
      NodeRef table =
          g.parameter("embed.table", store_param(params_, "embed.table"));
      // An all-padding sequence still runs one step over the zero padding
      // embedding, so degenerate inputs stay deterministic instead of
      // erroring.
      const size_t steps = std::max<size_t>(seq.true_length, 1);
      std::vector<NodeRef> xs;
      xs.reserve(steps);
      for (size_t i = 0; i < steps; ++i) {
        xs.push_back(g.embedding_row(table, seq.ids[i]));
      }
      const LstmNodes fwd = bind_lstm(g, params_, "lstm_fwd");
      const LstmNodes bwd = bind_lstm(g, params_, "lstm_bwd");
      return bilstm_encode_node(g, fwd, bwd, xs, spec_.hidden_dim);
    }
    case ModelKind::Fusion: {
      if (in.text == nullptr || in.image == nullptr) {
        throw Error(ErrCode::Contract,
                    "forward: fusion model needs ModelInput.text and .image");
      }
      check_vec_dim("forward: text features", *in.text, spec_.text_dim);
      check_vec_dim("forward: image features", *in.image, spec_.image_dim);
      NodeRef t = g.input(*in.text);
      if (spec_.gated) {
        NodeRef theta = g.parameter("text_gate.theta",
                                    store_param(params_, "text_gate.theta"));
        t = gate_node(g, spec_.text_gate, theta, t);
      }
      NodeRef im = g.input(*in.image);
      if (spec_.compress_image) {
        im = dense_node(
            g, bind_dense(g, params_, "img_compress", Activation::Relu), im);
      }
      if (spec_.gated) {
        NodeRef theta = g.parameter("img_gate.theta",
                                    store_param(params_, "img_gate.theta"));
        im = gate_node(g, spec_.image_gate, theta, im);
      }
      NodeRef cat = g.concat(t, im);
      return dropout_node(g, cat, spec_.fusion_dropout, mode, dropout_rng);
    }
  }
  throw Error(ErrCode::Internal, "forward: unhandled model kind");
}

NodeRef Model::forward(Graph& g, const ModelInput& in, Mode mode,
                       Rng* dropout_rng) const {
  const NodeRef pen = penultimate_node(g, in, mode, dropout_rng);
  const Activation head_act = spec_.head == HeadKind::Softmax
                                  ? Activation::Softmax
                                  : Activation::Linear;
  return dense_node(g, bind_dense(g, params_, "head", head_act), pen);
}

Tensor Model::predict(const ModelInput& in) const {
  Graph g;
  return g.value(forward(g, in, Mode::Eval, nullptr));
}

Tensor Model::penultimate(const ModelInput& in) const {
  Graph g;
  return g.value(penultimate_node(g, in, Mode::Eval, nullptr));
}

Model Model::to_embedding_head(size_t proj_dim, uint64_t seed) const {
  if (proj_dim == 0) {
    spec_error("projection head needs proj_dim >= 1");
  }
  ModelSpec ns = spec_;
  ns.head = HeadKind::EmbeddingProjection;
  ns.proj_dim = proj_dim;
  ParamStore np = params_;
  np.erase("head.W");
  np.erase("head.b");
  Rng rng(mix_seed(seed, kStreamHead));
  store_dense(np, "head",
              make_dense(ns.head_input_dim(), proj_dim, Activation::Linear,
                         rng));
  return from_params(std::move(ns), std::move(np));
}

void Model::save(const std::string& path) const {
  json manifest;
  manifest["model"] = spec_to_json(spec_);
  json plist = json::array();
  for (const auto& [name, tensor] : params_) {
    json e;
    e["name"] = name;
    e["shape"] = tensor.shape();
    plist.push_back(std::move(e));
  }
  manifest["params"] = std::move(plist);
  const std::string text = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrCode::Io, "Model::save: cannot open " + path);
  }
  out.write("SFCK", 4);
  ioutil::put_u32(out, kCheckpointVersion);
  ioutil::put_u32(out, static_cast<uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, tensor] : params_) {
    (void)name;
    for (size_t i = 0; i < tensor.size(); ++i) {
      ioutil::put_f64(out, tensor[i]);
    }
  }
  if (!out) {
    throw Error(ErrCode::Io, "Model::save: write failed for " + path);
  }
}

Model Model::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrCode::Io, "Model::load: cannot open " + path);
  }
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "SFCK", 4) != 0) {
    throw Error(ErrCode::Parse,
                "checkpoint " + path + ": bad magic (expected SFCK)");
  }
  uint32_t version = 0;
  uint32_t manifest_len = 0;
  if (!ioutil::get_u32(in, version) || !ioutil::get_u32(in, manifest_len)) {
    throw Error(ErrCode::Parse, "checkpoint " + path + ": truncated header");
  }
  if (version != kCheckpointVersion) {
    throw Error(ErrCode::Parse, "checkpoint " + path + ": version " +
                                    std::to_string(version) +
                                    " not supported");
  }
  std::string text(manifest_len, '\0');
  if (!in.read(text.data(), manifest_len)) {
    throw Error(ErrCode::Parse, "checkpoint " + path + ": truncated manifest");
  }
  json manifest;
  try {
    manifest = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrCode::Parse, "checkpoint " + path +
                                    ": manifest is not valid JSON: " +
                                    strip_exception_tag(e.what()));
  }
  if (!manifest.is_object() || !manifest.contains("model") ||
      !manifest.contains("params") || !manifest["params"].is_array()) {
    throw Error(ErrCode::Parse,
                "checkpoint " + path + ": manifest missing model/params");
  }
  const ModelSpec spec = spec_from_json(manifest["model"]);

  ParamStore params;
  for (const auto& e : manifest["params"]) {
    std::string name;
    std::vector<size_t> shape;
    try {
      name = e.at("name").get<std::string>();
      shape = e.at("shape").get<std::vector<size_t>>();
    } catch (const json::exception& ex) {
      throw Error(ErrCode::Parse, "checkpoint " + path + ": bad params entry: " +
                                      strip_exception_tag(ex.what()));
    }
    size_t count = 1;
    for (const size_t d : shape) count *= d;
    std::vector<double> values(count);
    for (size_t i = 0; i < count; ++i) {
      if (!ioutil::get_f64(in, values[i])) {
        throw Error(ErrCode::Parse, "checkpoint " + path +
                                        ": truncated data for \"" + name +
                                        "\"");
      }
    }
    if (!params.emplace(name, Tensor(shape, std::move(values))).second) {
      throw Error(ErrCode::Parse, "checkpoint " + path +
                                      ": duplicate parameter \"" + name +
                                      "\"");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrCode::Parse, "checkpoint " + path + ": trailing bytes");
  }
  return from_params(spec, std::move(params));
}

Label predict_nearest_label(const Tensor& output, const EmbeddingTable& table,
                            const std::vector<Label>& allowed) {
  if (allowed.empty()) {
    throw Error(ErrCode::Contract, "predict_nearest_label: empty label set");
  }
  if (output.norm() == 0.0) {
    throw Error(ErrCode::Degenerate,
                "predict_nearest_label: zero-norm output vector");
  }
  bool found = false;
  Label best = Label::Negative;
  double best_cos = 0.0;
  // Walking the fixed order with a strict comparison realizes the
  // documented tie-break: the earlier label keeps a tied score.
  for (const Label l : kLabelOrder) {
    if (std::find(allowed.begin(), allowed.end(), l) == allowed.end()) {
      continue;
    }
    const double c = cosine_similarity(output, table.at(label_name(l)));
    if (!found || c > best_cos) {
      found = true;
      best = l;
      best_cos = c;
    }
  }
  return best;
}

}  // namespace sentifuse
