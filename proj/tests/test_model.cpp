#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "core/error.hpp"
#include "core/model.hpp"
#include "core/rng.hpp"
#include "doctest.h"

using namespace sentifuse;

namespace {

struct TempPath {
  std::string path;
  explicit TempPath(const std::string& name)
      : path("/tmp/sentifuse_test_" + name) {}
  ~TempPath() { std::remove(path.c_str()); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

// Small feed-forward spec used by most tests: 4 -> 3 (relu) -> 2 (linear),
// softmax over 2 classes.
ModelSpec small_ff_spec() {
  ModelSpec s;
  s.kind = ModelKind::Feedforward;
  s.input_dim = 4;
  s.stack = {LayerDesc::dense(3, Activation::Relu),
             LayerDesc::dense(2, Activation::Linear)};
  s.classes = 2;
  return s;
}

ModelSpec small_fusion_spec(bool gated, GateKind text_gate,
                            GateKind image_gate) {
  ModelSpec s;
  s.kind = ModelKind::Fusion;
  s.text_dim = 5;
  s.image_dim = 7;
  s.gated = gated;
  s.text_gate = text_gate;
  s.image_gate = image_gate;
  s.compress_image = false;
  s.fusion_dropout = 0.0;
  s.classes = 2;
  return s;
}

Tensor random_vec(size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return Tensor::vec(std::move(v));
}

bool params_equal(const ParamStore& a, const ParamStore& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, t] : a) {
    const auto it = b.find(name);
    if (it == b.end() || !(it->second == t)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("model kind and head names round-trip") {
  for (const ModelKind k :
       {ModelKind::Feedforward, ModelKind::TextBilstm, ModelKind::Fusion}) {
    CHECK(model_kind_from_name(model_kind_name(k)) == k);
  }
  for (const HeadKind h : {HeadKind::Softmax, HeadKind::EmbeddingProjection}) {
    CHECK(head_kind_from_name(head_kind_name(h)) == h);
  }
  CHECK(std::string(model_kind_name(ModelKind::TextBilstm)) == "text_bilstm");
  CHECK(std::string(head_kind_name(HeadKind::EmbeddingProjection)) ==
        "embedding_projection");
  try {
    model_kind_from_name("rnn");
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrCode::Config);
  }
  try {
    head_kind_from_name("sigmoid");
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrCode::Config);
  }
}

TEST_CASE("spec validation rejects inconsistent structures") {
  auto expect_spec_error = [](const ModelSpec& s) {
    try {
      s.validate();
      FAIL("expected spec error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::Spec);
    }
  };

  ModelSpec s = small_ff_spec();
  s.classes = 4;
  expect_spec_error(s);

  s = small_ff_spec();
  s.input_dim = 0;
  expect_spec_error(s);

  s = small_ff_spec();
  s.stack.push_back(LayerDesc::dense(0));
  expect_spec_error(s);

  s = small_ff_spec();
  s.stack.push_back(LayerDesc::dense(8, Activation::Softmax));
  expect_spec_error(s);

  s = small_ff_spec();
  s.stack.push_back(LayerDesc::dropout(1.0));
  expect_spec_error(s);

  s = small_ff_spec();
  s.stack.push_back(LayerDesc::dropout(-0.1));
  expect_spec_error(s);

  s = small_ff_spec();
  s.head = HeadKind::EmbeddingProjection;
  s.proj_dim = 0;
  expect_spec_error(s);

  s = ModelSpec{};
  s.kind = ModelKind::TextBilstm;
  s.vocab_size = 1;
  expect_spec_error(s);

  s.vocab_size = 10;
  s.embed_dim = 0;
  expect_spec_error(s);

  s.embed_dim = 4;
  s.hidden_dim = 0;
  expect_spec_error(s);

  s = small_fusion_spec(false, GateKind::GL1, GateKind::GL1);
  s.text_dim = 0;
  expect_spec_error(s);

  s = small_fusion_spec(false, GateKind::GL1, GateKind::GL1);
  s.compress_image = true;
  s.compress_dim = 0;
  expect_spec_error(s);

  s = small_fusion_spec(false, GateKind::GL1, GateKind::GL1);
  s.fusion_dropout = 1.0;
  expect_spec_error(s);

  // An empty stack is a plain linear classifier: valid.
  s = small_ff_spec();
  s.stack.clear();
  CHECK_NOTHROW(s.validate());
  CHECK(s.head_input_dim() == 4);
}

TEST_CASE("head input and output dimensions") {
  ModelSpec s = small_ff_spec();
  CHECK(s.head_input_dim() == 2);
  CHECK(s.output_dim() == 2);

  // Dropout and gate layers preserve the running width.
  s.stack = {LayerDesc::dense(8), LayerDesc::dropout(0.5),
             LayerDesc::gated(GateKind::GL1), LayerDesc::dense(6),
             LayerDesc::dropout(0.3)};
  CHECK(s.head_input_dim() == 6);

  s.head = HeadKind::EmbeddingProjection;
  s.proj_dim = 50;
  CHECK(s.output_dim() == 50);

  ModelSpec t;
  t.kind = ModelKind::TextBilstm;
  t.vocab_size = 100;
  t.embed_dim = 200;
  t.hidden_dim = 300;
  CHECK(t.head_input_dim() == 600);
  CHECK(t.output_dim() == 2);

  ModelSpec f = small_fusion_spec(true, GateKind::GL1, GateKind::GL2);
  CHECK(f.head_input_dim() == 12);
  f.compress_image = true;
  f.compress_dim = 3;
  CHECK(f.head_input_dim() == 8);
}

TEST_CASE("class labels follow the fixed order") {
  ModelSpec s = small_ff_spec();
  CHECK(s.class_labels() ==
        std::vector<Label>{Label::Negative, Label::Positive});
  s.classes = 3;
  CHECK(s.class_labels() == std::vector<Label>{Label::Negative, Label::Neutral,
                                               Label::Positive});
}

TEST_CASE("spec JSON serialization round-trips every preset") {
  for (const std::string& name : preset_names()) {
    ModelSpec s = preset_spec(name);
    if (s.kind == ModelKind::TextBilstm) s.vocab_size = 1000;
    const std::string text = s.to_json_string();
    const ModelSpec back = ModelSpec::from_json_string(text);
    // Same serialized form and same implied parameters mean same model.
    CHECK(back.to_json_string() == text);
    CHECK(expected_param_shapes(back) == expected_param_shapes(s));
    CHECK(back.kind == s.kind);
    CHECK(back.head == s.head);
    CHECK(back.classes == s.classes);
  }
}

TEST_CASE("spec JSON parsing rejects malformed input") {
  try {
    ModelSpec::from_json_string("not json");
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrCode::Parse);
  }
  try {
    ModelSpec::from_json_string("{\"kind\":\"feedforward\"}");
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrCode::Parse);
    // The message names the missing key without leaking library internals.
    CHECK(std::string(e.what()).find("head") != std::string::npos);
    CHECK(std::string(e.what()).find("[json.exception") == std::string::npos);
  }
  try {
    ModelSpec::from_json_string(
        "{\"kind\":\"perceptron\",\"head\":\"softmax\",\"classes\":2}");
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrCode::Parse);
  }
  try {
    ModelSpec::from_json_string(
        "{\"kind\":\"feedforward\",\"head\":\"softmax\",\"classes\":2,"
        "\"input_dim\":4,\"stack\":[{\"type\":\"pool\"}]}");
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrCode::Parse);
  }
  // Structurally well-formed JSON with an invalid value is a spec error.
  try {
    ModelSpec::from_json_string(
        "{\"kind\":\"feedforward\",\"head\":\"softmax\",\"classes\":7,"
        "\"input_dim\":4,\"stack\":[]}");
    FAIL("expected spec error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrCode::Spec);
  }
}

TEST_CASE("expected parameter shapes match a hand computation") {
  SUBCASE("feedforward with gate") {
    ModelSpec s;
    s.kind = ModelKind::Feedforward;
    s.input_dim = 10;
    s.stack = {LayerDesc::dense(6), LayerDesc::dropout(0.5),
               LayerDesc::gated(GateKind::GL2), LayerDesc::dense(4)};
    s.classes = 3;
    const auto shapes = expected_param_shapes(s);
    CHECK(shapes.size() == 7);
    CHECK(shapes.at("ff.0.W") == std::vector<size_t>{6, 10});
    CHECK(shapes.at("ff.0.b") == std::vector<size_t>{6});
    CHECK(shapes.at("ff.2.theta") == std::vector<size_t>{6});
    CHECK(shapes.at("ff.3.W") == std::vector<size_t>{4, 6});
    CHECK(shapes.at("ff.3.b") == std::vector<size_t>{4});
    CHECK(shapes.at("head.W") == std::vector<size_t>{3, 4});
    CHECK(shapes.at("head.b") == std::vector<size_t>{3});
  }
  SUBCASE("text bilstm") {
    ModelSpec s;
    s.kind = ModelKind::TextBilstm;
    s.vocab_size = 50;
    s.embed_dim = 8;
    s.hidden_dim = 5;
    const auto shapes = expected_param_shapes(s);
    // embed + 12 per direction + head W/b.
    CHECK(shapes.size() == 1 + 12 + 12 + 2);
    CHECK(shapes.at("embed.table") == std::vector<size_t>{50, 8});
    CHECK(shapes.at("lstm_fwd.Wi") == std::vector<size_t>{5, 8});
    CHECK(shapes.at("lstm_fwd.Ug") == std::vector<size_t>{5, 5});
    CHECK(shapes.at("lstm_bwd.bf") == std::vector<size_t>{5});
    CHECK(shapes.at("head.W") == std::vector<size_t>{2, 10});
  }
  SUBCASE("gated fusion with compression") {
    ModelSpec s = small_fusion_spec(true, GateKind::GL1, GateKind::GL2);
    s.compress_image = true;
    s.compress_dim = 3;
    const auto shapes = expected_param_shapes(s);
    CHECK(shapes.size() == 6);
    CHECK(shapes.at("text_gate.theta") == std::vector<size_t>{5});
    CHECK(shapes.at("img_compress.W") == std::vector<size_t>{3, 7});
    CHECK(shapes.at("img_compress.b") == std::vector<size_t>{3});
    CHECK(shapes.at("img_gate.theta") == std::vector<size_t>{3});
    CHECK(shapes.at("head.W") == std::vector<size_t>{2, 8});
    CHECK(shapes.at("head.b") == std::vector<size_t>{2});
  }
}

TEST_CASE("presets") {
  const auto names = preset_names();
  CHECK(names.size() == 8);

  SUBCASE("every preset builds a coherent spec") {
    for (const std::string& name : names) {
      ModelSpec s = preset_spec(name);
      if (s.kind == ModelKind::TextBilstm) {
        CHECK(s.vocab_size == 0);  // caller must supply it
        s.vocab_size = 1000;
      }
      CHECK_NOTHROW(s.validate());
    }
  }
  SUBCASE("image classifier stacks") {
    const ModelSpec a = preset_spec("image_2class");
    CHECK(a.input_dim == 4096);
    REQUIRE(a.stack.size() == 6);
    CHECK(a.stack[0].width == 2048);
    CHECK(a.stack[1].rate == 0.7);
    CHECK(a.stack[2].width == 1024);
    CHECK(a.stack[4].width == 512);
    CHECK(a.stack[5].rate == 0.5);
    CHECK(a.head_input_dim() == 512);
    CHECK(a.classes == 2);
    CHECK(a.head == HeadKind::Softmax);

    const ModelSpec b = preset_spec("image_3class");
    CHECK(b.classes == 3);
    CHECK(b.head_input_dim() == 512);
    REQUIRE(b.stack.size() == 4);
    CHECK(b.stack[0].width == 1024);
    CHECK(b.stack[1].rate == 0.5);
  }
  SUBCASE("embedding-head variants share the stacks") {
    const ModelSpec a = preset_spec("embed_2class");
    CHECK(a.head == HeadKind::EmbeddingProjection);
    CHECK(a.proj_dim == 50);
    CHECK(a.output_dim() == 50);
    CHECK(a.stack.size() == preset_spec("image_2class").stack.size());
    const ModelSpec b = preset_spec("embed_3class");
    CHECK(b.classes == 3);
    CHECK(b.output_dim() == 50);
  }
  SUBCASE("fusion presets") {
    const ModelSpec c = preset_spec("fusion_concat");
    CHECK(c.head_input_dim() == 2648);
    CHECK_FALSE(c.gated);
    CHECK(c.fusion_dropout == 0.0);

    const ModelSpec g = preset_spec("fusion_gated");
    CHECK(g.gated);
    CHECK(g.text_gate == GateKind::GL1);
    CHECK(g.image_gate == GateKind::GL2);
    CHECK(g.compress_image);
    CHECK(g.head_input_dim() == 1200);
    CHECK(g.fusion_dropout == 0.3);

    const ModelSpec r = preset_spec("fusion_gated_retained");
    CHECK(r.text_gate == GateKind::GL2);
    CHECK_FALSE(r.compress_image);
    CHECK(r.head_input_dim() == 2648);
  }
  SUBCASE("unknown preset names the known set") {
    try {
      preset_spec("resnet");
      FAIL("expected config error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::Config);
      CHECK(std::string(e.what()).find("fusion_gated") != std::string::npos);
    }
  }
}

TEST_CASE("build is deterministic in the seed and matches expected shapes") {
  ModelSpec s = small_ff_spec();
  s.stack.push_back(LayerDesc::gated(GateKind::GL1));
  const Model a = Model::build(s, 42);
  const Model b = Model::build(s, 42);
  const Model c = Model::build(s, 43);
  CHECK(params_equal(a.params(), b.params()));
  CHECK_FALSE(params_equal(a.params(), c.params()));

  const auto shapes = expected_param_shapes(s);
  CHECK(a.params().size() == shapes.size());
  for (const auto& [name, shape] : shapes) {
    REQUIRE(a.params().count(name) == 1);
    CHECK(a.params().at(name).shape() == shape);
  }
}

TEST_CASE("gate parameters initialize to their identity points") {
  ModelSpec s = small_fusion_spec(true, GateKind::GL1, GateKind::GL2);
  const Model m = Model::build(s, 7);
  // GL1 starts as an exact pass-through, GL2 at the center of its sigmoid.
  CHECK(m.params().at("text_gate.theta") == Tensor::ones({5}));
  CHECK(m.params().at("img_gate.theta") == Tensor::zeros({7}));
}

TEST_CASE("from_params rejects wrong parameter sets") {
  const ModelSpec s = small_ff_spec();
  const Model m = Model::build(s, 1);

  ParamStore missing = m.params();
  missing.erase("ff.1.b");
  try {
    Model::from_params(s, missing);
    FAIL("expected spec error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrCode::Spec);
    CHECK(std::string(e.what()).find("ff.1.b") != std::string::npos);
  }

  ParamStore wrong = m.params();
  wrong["ff.0.W"] = Tensor::zeros({3, 5});
  try {
    Model::from_params(s, wrong);
    FAIL("expected spec error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrCode::Spec);
  }

  ParamStore extra = m.params();
  extra["ff.9.W"] = Tensor::zeros({1});
  try {
    Model::from_params(s, extra);
    FAIL("expected spec error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrCode::Spec);
    CHECK(std::string(e.what()).find("ff.9.W") != std::string::npos);
  }
}

TEST_CASE("feedforward forward pass") {
  ModelSpec s = small_ff_spec();
  s.stack.insert(s.stack.begin() + 1, LayerDesc::dropout(0.5));
  const Model m = Model::build(s, 11);
  const Tensor x = Tensor::vec({0.5, -1.0, 2.0, 0.25});
  const ModelInput in = ModelInput::of_features(x);

  SUBCASE("softmax output is a distribution") {
    const Tensor y = m.predict(in);
    REQUIRE(y.size() == 2);
    double sum = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
      CHECK(y[i] > 0.0);
      CHECK(y[i] < 1.0);
      sum += y[i];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("eval mode ignores dropout and is repeatable") {
    CHECK(m.predict(in) == m.predict(in));
  }
  SUBCASE("train mode without an rng is a contract violation") {
    Graph g;
    try {
      m.forward(g, in, Mode::Train, nullptr);
      FAIL("expected contract error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::Contract);
    }
  }
  SUBCASE("train mode dropout is driven by the rng deterministically") {
    Graph g1, g2;
    Rng r1(99), r2(99);
    const Tensor y1 = g1.value(m.forward(g1, in, Mode::Train, &r1));
    const Tensor y2 = g2.value(m.forward(g2, in, Mode::Train, &r2));
    CHECK(y1 == y2);
  }
  SUBCASE("wrong input kind is a contract violation") {
    EncodedSequence seq;
    try {
      m.predict(ModelInput::of_tokens(seq));
      FAIL("expected contract error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::Contract);
    }
  }
  SUBCASE("wrong feature width is a dimension error") {
    try {
      m.predict(ModelInput::of_features(Tensor::vec({1.0, 2.0})));
      FAIL("expected dimension error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::Dimension);
    }
  }
}

TEST_CASE("GL1 gate at initialization is an exact pass-through") {
  ModelSpec s;
  s.kind = ModelKind::Feedforward;
  s.input_dim = 4;
  s.stack = {LayerDesc::dense(3, Activation::Linear),
             LayerDesc::gated(GateKind::GL1)};
  s.classes = 2;
  const Model gated = Model::build(s, 5);

  ModelSpec plain = s;
  plain.stack.pop_back();
  ParamStore pp;
  pp["ff.0.W"] = gated.params().at("ff.0.W");
  pp["ff.0.b"] = gated.params().at("ff.0.b");
  pp["head.W"] = gated.params().at("head.W");
  pp["head.b"] = gated.params().at("head.b");
  const Model ungated = Model::from_params(plain, pp);

  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    const Tensor x = random_vec(4, rng);
    const ModelInput in = ModelInput::of_features(x);
    CHECK(gated.predict(in) == ungated.predict(in));
  }
}

TEST_CASE("text bilstm forward pass") {
  ModelSpec s;
  s.kind = ModelKind::TextBilstm;
  s.vocab_size = 10;
  s.embed_dim = 4;
  s.hidden_dim = 3;
  s.classes = 2;
  const Model m = Model::build(s, 21);

  SUBCASE("encoded sequence produces a distribution") {
    EncodedSequence seq;
    seq.ids[0] = 5;
    seq.ids[1] = 7;
    seq.ids[2] = 1;
    seq.true_length = 3;
    const Tensor y = m.predict(ModelInput::of_tokens(seq));
    REQUIRE(y.size() == 2);
    CHECK(y[0] + y[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.penultimate(ModelInput::of_tokens(seq)).size() == 6);
  }
  SUBCASE("an all-padding sequence is deterministic, not an error") {
    EncodedSequence a, b;
    const Tensor ya = m.predict(ModelInput::of_tokens(a));
    const Tensor yb = m.predict(ModelInput::of_tokens(b));
    CHECK(ya == yb);
    CHECK(ya.size() == 2);
    CHECK(ya.all_finite());
  }
  SUBCASE("sequence order matters") {
    EncodedSequence ab, ba;
    ab.ids[0] = 5;
    ab.ids[1] = 7;
    ab.true_length = 2;
    ba.ids[0] = 7;
    ba.ids[1] = 5;
    ba.true_length = 2;
    const Tensor ya = m.predict(ModelInput::of_tokens(ab));
    const Tensor yb = m.predict(ModelInput::of_tokens(ba));
    CHECK_FALSE(ya == yb);
  }
  SUBCASE("overlong true_length is a contract violation") {
    EncodedSequence seq;
    seq.true_length = kSequenceLength + 1;
    try {
      m.predict(ModelInput::of_tokens(seq));
      FAIL("expected contract error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::Contract);
    }
  }
  SUBCASE("out-of-vocabulary id is out of range") {
    EncodedSequence seq;
    seq.ids[0] = 10;
    seq.true_length = 1;
    try {
      m.predict(ModelInput::of_tokens(seq));
      FAIL("expected out-of-range error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::OutOfRange);
    }
  }
}

TEST_CASE("ungated fusion equals GL1 gating at its identity point") {
  const ModelSpec plain = small_fusion_spec(false, GateKind::GL1,
                                            GateKind::GL1);
  const Model concat_model = Model::build(plain, 31);

  const ModelSpec gated_spec =
      small_fusion_spec(true, GateKind::GL1, GateKind::GL1);
  ParamStore gp = concat_model.params();
  gp["text_gate.theta"] = Tensor::ones({5});
  gp["img_gate.theta"] = Tensor::ones({7});
  const Model gated_model = Model::from_params(gated_spec, gp);

  Rng rng(8);
  for (int i = 0; i < 10; ++i) {
    const Tensor t = random_vec(5, rng);
    const Tensor im = random_vec(7, rng);
    const ModelInput in = ModelInput::of_pair(t, im);
    CHECK(concat_model.predict(in) == gated_model.predict(in));
    CHECK(concat_model.penultimate(in) == gated_model.penultimate(in));
  }
}

TEST_CASE("GL2 gates halve their branch at initialization") {
  const ModelSpec s = small_fusion_spec(true, GateKind::GL2, GateKind::GL2);
  const Model m = Model::build(s, 17);
  Rng rng(4);
  const Tensor t = random_vec(5, rng);
  const Tensor im = random_vec(7, rng);
  const Tensor pen = m.penultimate(ModelInput::of_pair(t, im));
  REQUIRE(pen.size() == 12);
  for (size_t i = 0; i < 5; ++i) {
    CHECK(pen[i] == doctest::Approx(0.5 * t[i]).epsilon(1e-12));
  }
  for (size_t i = 0; i < 7; ++i) {
    CHECK(pen[5 + i] == doctest::Approx(0.5 * im[i]).epsilon(1e-12));
  }
}

TEST_CASE("fusion input contract") {
  const Model m =
      Model::build(small_fusion_spec(false, GateKind::GL1, GateKind::GL1), 1);
  const Tensor t5 = Tensor::ones({5});
  const Tensor i7 = Tensor::ones({7});
  try {
    m.predict(ModelInput::of_features(t5));
    FAIL("expected contract error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrCode::Contract);
  }
  try {
    m.predict(ModelInput::of_pair(i7, t5));  // swapped widths
    FAIL("expected dimension error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrCode::Dimension);
  }
}

TEST_CASE("image compression branch shapes the head input") {
  ModelSpec s = small_fusion_spec(false, GateKind::GL1, GateKind::GL1);
  s.compress_image = true;
  s.compress_dim = 3;
  const Model m = Model::build(s, 12);
  const Tensor t = Tensor::ones({5});
  const Tensor im = Tensor::ones({7});
  const Tensor pen = m.penultimate(ModelInput::of_pair(t, im));
  CHECK(pen.size() == 8);
  // The compressed branch is ReLU output: nonnegative.
  for (size_t i = 5; i < 8; ++i) CHECK(pen[i] >= 0.0);
}

TEST_CASE("to_embedding_head warm start copies every retained parameter") {
  ModelSpec s = small_ff_spec();
  s.classes = 2;
  const Model base = Model::build(s, 77);
  const Model proj = base.to_embedding_head(8, 123);

  CHECK(proj.spec().head == HeadKind::EmbeddingProjection);
  CHECK(proj.spec().proj_dim == 8);
  CHECK(proj.spec().classes == 2);
  CHECK(proj.params().at("head.W").shape() == std::vector<size_t>{8, 2});

  // Retained parameters are bit-identical to the source model.
  for (const auto& [name, tensor] : base.params()) {
    if (name == "head.W" || name == "head.b") continue;
    CHECK(proj.params().at(name) == tensor);
  }
  // The fresh head is seed-deterministic.
  const Model proj2 = base.to_embedding_head(8, 123);
  CHECK(params_equal(proj.params(), proj2.params()));
  const Model proj3 = base.to_embedding_head(8, 124);
  CHECK_FALSE(params_equal(proj.params(), proj3.params()));

  // The source model is untouched and still a softmax classifier.
  CHECK(base.spec().head == HeadKind::Softmax);
  CHECK(base.params().at("head.W").shape() == std::vector<size_t>{2, 2});
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  ModelSpec s = small_fusion_spec(true, GateKind::GL1, GateKind::GL2);
  s.compress_image = true;
  s.compress_dim = 3;
  s.fusion_dropout = 0.3;
  const Model m = Model::build(s, 2024);

  TempPath ck("model_roundtrip.sfck");
  m.save(ck.path);
  const Model back = Model::load(ck.path);

  CHECK(back.spec().to_json_string() == m.spec().to_json_string());
  CHECK(params_equal(back.params(), m.params()));

  Rng rng(5);
  const Tensor t = random_vec(5, rng);
  const Tensor im = random_vec(7, rng);
  const ModelInput in = ModelInput::of_pair(t, im);
  CHECK(back.predict(in) == m.predict(in));

  // Saving the loaded model reproduces the file byte for byte.
  TempPath ck2("model_roundtrip2.sfck");
  back.save(ck2.path);
  CHECK(read_file(ck2.path) == read_file(ck.path));
}

TEST_CASE("checkpoint loading rejects corrupt files") {
  ModelSpec s = small_ff_spec();
  const Model m = Model::build(s, 3);
  TempPath ck("model_corrupt.sfck");
  m.save(ck.path);
  const std::string good = read_file(ck.path);

  SUBCASE("missing file") {
    try {
      Model::load("/tmp/sentifuse_no_such_checkpoint.sfck");
      FAIL("expected io error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::Io);
    }
  }
  SUBCASE("bad magic") {
    std::string bad = good;
    bad[0] = 'X';
    write_file(ck.path, bad);
    try {
      Model::load(ck.path);
      FAIL("expected parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::Parse);
      CHECK(std::string(e.what()).find("magic") != std::string::npos);
    }
  }
  SUBCASE("unsupported version") {
    std::string bad = good;
    bad[4] = 9;
    write_file(ck.path, bad);
    try {
      Model::load(ck.path);
      FAIL("expected parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::Parse);
      CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
  }
  SUBCASE("truncated parameter data") {
    write_file(ck.path, good.substr(0, good.size() - 5));
    try {
      Model::load(ck.path);
      FAIL("expected parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::Parse);
      CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
  }
  SUBCASE("trailing bytes") {
    write_file(ck.path, good + "z");
    try {
      Model::load(ck.path);
      FAIL("expected parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::Parse);
      CHECK(std::string(e.what()).find("trailing") != std::string::npos);
    }
  }
  SUBCASE("garbage manifest") {
    // Keep the header but clobber the manifest body.
    std::string bad = good;
    for (size_t i = 12; i < 20 && i < bad.size(); ++i) bad[i] = '#';
    write_file(ck.path, bad);
    try {
      Model::load(ck.path);
      FAIL("expected parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::Parse);
    }
  }
}

TEST_CASE("nearest-label prediction") {
  EmbeddingTable table;
  table.dim = 3;
  table.vectors["negative"] = Tensor::vec({1.0, 0.0, 0.0});
  table.vectors["neutral"] = Tensor::vec({0.0, 1.0, 0.0});
  table.vectors["positive"] = Tensor::vec({0.0, 0.0, 1.0});
  const std::vector<Label> all = {Label::Negative, Label::Neutral,
                                  Label::Positive};
  const std::vector<Label> two = {Label::Negative, Label::Positive};

  SUBCASE("axis-aligned outputs pick the matching label") {
    CHECK(predict_nearest_label(Tensor::vec({2.0, 0.1, 0.1}), table, all) ==
          Label::Negative);
    CHECK(predict_nearest_label(Tensor::vec({0.1, 2.0, 0.1}), table, all) ==
          Label::Neutral);
    CHECK(predict_nearest_label(Tensor::vec({0.1, 0.1, 2.0}), table, all) ==
          Label::Positive);
  }
  SUBCASE("restricting the label set redirects the decision") {
    // Closest overall is neutral, but it is not allowed.
    const Tensor y = Tensor::vec({0.2, 2.0, 0.3});
    CHECK(predict_nearest_label(y, table, all) == Label::Neutral);
    CHECK(predict_nearest_label(y, table, two) == Label::Positive);
  }
  SUBCASE("matches a brute-force oracle on random outputs") {
    Rng rng(2025);
    for (int trial = 0; trial < 200; ++trial) {
      const std::vector<Label>& allowed = (trial % 2 == 0) ? all : two;
      Tensor y = random_vec(3, rng);
      if (y.norm() == 0.0) continue;
      Label best = allowed.front();
      double best_cos = cosine_similarity(y, table.at(label_name(best)));
      for (const Label l : allowed) {
        const double c = cosine_similarity(y, table.at(label_name(l)));
        if (c > best_cos) {
          best = l;
          best_cos = c;
        }
      }
      CHECK(predict_nearest_label(y, table, allowed) == best);
    }
  }
  SUBCASE("decision is scale invariant") {
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
      const Tensor y = random_vec(3, rng);
      if (y.norm() == 0.0) continue;
      Tensor scaled = y;
      for (size_t i = 0; i < scaled.size(); ++i) scaled[i] *= 17.0;
      CHECK(predict_nearest_label(y, table, all) ==
            predict_nearest_label(scaled, table, all));
    }
  }
  SUBCASE("exact ties resolve to the earlier label in the fixed order") {
    // Equidistant from negative and positive.
    const Tensor y = Tensor::vec({1.0, 0.0, 1.0});
    CHECK(predict_nearest_label(y, table, two) == Label::Negative);
    CHECK(predict_nearest_label(y, table, all) == Label::Negative);
  }
  SUBCASE("contract errors") {
    try {
      predict_nearest_label(Tensor::vec({1.0, 0.0, 0.0}), table, {});
      FAIL("expected contract error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::Contract);
    }
    try {
      predict_nearest_label(Tensor::vec({0.0, 0.0, 0.0}), table, all);
      FAIL("expected degenerate error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::Degenerate);
    }
    EmbeddingTable missing;
    missing.dim = 3;
    missing.vectors["negative"] = Tensor::vec({1.0, 0.0, 0.0});
    try {
      predict_nearest_label(Tensor::vec({1.0, 1.0, 0.0}), missing, two);
      FAIL("expected lookup error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::Lookup);
    }
  }
}

TEST_CASE("embedding-head model emits projection vectors") {
  ModelSpec s = small_ff_spec();
  s.head = HeadKind::EmbeddingProjection;
  s.proj_dim = 8;
  const Model m = Model::build(s, 55);
  const Tensor y = m.predict(ModelInput::of_features(Tensor::ones({4})));
  CHECK(y.size() == 8);
  CHECK(y.all_finite());
}
