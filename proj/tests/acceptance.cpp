// Acceptance suite: one line per criterion, exit 0 only if every criterion
// holds. Each criterion is self-contained and constructs its own data.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/gradcheck.hpp"
#include "core/model.hpp"
#include "core/optim.hpp"
#include "core/pca.hpp"
#include "core/rng.hpp"
#include "core/text.hpp"
#include "core/train.hpp"

namespace {

using namespace sentifuse;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Check {
  bool ok = true;
  std::ostringstream why;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      if (!ok) why << "; ";
      ok = false;
      why << what;
    }
  }
};

std::string format_seconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2fs", s);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared synthetic data.

// Linearly separable image-feature records: a hidden weight vector labels
// each point by the sign of the dot product, with a margin so no point sits
// on the boundary. weight_seed fixes the labeling rule; sample_seed varies
// the draw, so one rule can generate disjoint train and held-out sets.
std::vector<Datapoint> synth_image_set(size_t n, size_t dim,
                                       uint64_t weight_seed,
                                       uint64_t sample_seed) {
  Rng wrng(weight_seed);
  Tensor w = Tensor::uniform({dim}, -1.0, 1.0, wrng);
  Rng rng(sample_seed);
  std::vector<Datapoint> out;
  while (out.size() < n) {
    Tensor x = Tensor::uniform({dim}, -1.0, 1.0, rng);
    double dot = 0.0;
    for (size_t j = 0; j < dim; ++j) dot += w[j] * x[j];
    if (std::abs(dot) < 0.1) continue;
    Datapoint dp;
    dp.id = "s" + std::to_string(out.size());
    dp.anp = "synthetic pair";
    dp.anp_score = dot > 0.0 ? 2.0 : -2.0;
    dp.label = dot > 0.0 ? Label::Positive : Label::Negative;
    dp.features = x;
    out.push_back(std::move(dp));
  }
  return out;
}

ModelSpec classical_spec(size_t dim) {
  ModelSpec spec;
  spec.kind = ModelKind::Feedforward;
  spec.input_dim = dim;
  spec.stack = {LayerDesc::dense(32, Activation::Relu)};
  spec.head = HeadKind::Softmax;
  spec.classes = 2;
  return spec;
}

TrainConfig classical_config(size_t epochs, uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 64;
  cfg.loss = LossKind::Xent;
  cfg.optimizer = OptimizerKind::SgdMomentum;
  cfg.lr = 0.01;
  cfg.momentum = 0.9;
  cfg.seed = seed;
  return cfg;
}

// ---------------------------------------------------------------------------
// Criteria.

Outcome criterion_gradients() {
  const GradCheckSuiteResult suite = run_gradcheck_suite(20, 1e-5, 1e-4);
  Check c;
  c.expect(suite.pass, "a gradient case exceeded tolerance");
  const std::vector<std::string> required = {
      "dense_relu",   "dense_softmax_xent", "dropout_eval", "gate_gl1",
      "gate_gl2",     "embedding_lookup",   "lstm_step",    "bilstm_encode",
      "loss_cosine",  "loss_hinge",         "loss_mse"};
  double worst = 0.0;
  for (const std::string& name : required) {
    bool found = false;
    for (const GradCheckCase& cc : suite.cases) {
      if (cc.name == name) {
        found = true;
        c.expect(cc.pass, "case " + name + " failed");
        worst = std::max(worst, cc.max_rel_diff);
      }
    }
    c.expect(found, "case " + name + " missing from suite");
  }
  if (c.ok) {
    std::ostringstream d;
    d << suite.cases.size() << " cases x " << suite.seeds
      << " seeds, worst relative error " << worst;
    return {true, d.str()};
  }
  return {false, c.why.str()};
}

Outcome criterion_overfit() {
  const std::vector<Datapoint> data = synth_image_set(50, 64, 1001, 2002);
  Model model = Model::build(classical_spec(64), 7);
  const TrainResult r = train_model(model, data, {}, classical_config(200, 3));
  const EpochStats& last = r.history.back();
  Check c;
  c.expect(last.has_accuracy, "no train accuracy recorded");
  c.expect(last.train_accuracy >= 0.95, "train accuracy below 0.95");
  if (c.ok) {
    std::ostringstream d;
    d << "train accuracy " << last.train_accuracy << " after "
      << r.history.size() << " epochs";
    return {true, d.str()};
  }
  return {false, c.why.str()};
}

// Dual-modality records with disjoint signal: 70% of records carry their
// label in the text branch (image branch pure noise), the remaining 30%
// carry it in the image branch (text branch pure noise). A text-only model
// tops out near 0.85 held-out accuracy — it can only guess on the
// image-decided records — while a fused model can recover both signals.
std::vector<Datapoint> synth_dual_set(size_t n, size_t dim, uint64_t seed) {
  Rng dir_rng(seed);
  Tensor a = Tensor::uniform({dim}, -1.0, 1.0, dir_rng);
  Tensor b = Tensor::uniform({dim}, -1.0, 1.0, dir_rng);
  Rng rng(mix_seed(seed, 1));
  std::vector<Datapoint> out;
  for (size_t i = 0; i < n; ++i) {
    const double signal = rng.below(2) ? 1.0 : -1.0;
    const bool text_decides = i % 10 < 7;
    Datapoint dp;
    dp.id = "d" + std::to_string(i);
    dp.anp = "synthetic pair";
    dp.anp_score = signal > 0.0 ? 2.0 : -2.0;
    dp.label = signal > 0.0 ? Label::Positive : Label::Negative;
    Tensor text({dim}), image({dim});
    for (size_t j = 0; j < dim; ++j) {
      text[j] = (text_decides ? signal * a[j] : 0.0) + 0.25 * rng.normal();
      image[j] = (text_decides ? 0.0 : signal * b[j]) + 0.25 * rng.normal();
    }
    dp.text_features = text;
    dp.features = image;
    out.push_back(std::move(dp));
  }
  return out;
}

// The text branch alone, repackaged as plain feature records.
std::vector<Datapoint> text_only_view(const std::vector<Datapoint>& data) {
  std::vector<Datapoint> out = data;
  for (Datapoint& dp : out) dp.features = dp.text_features;
  return out;
}

Outcome criterion_fusion() {
  const size_t dim = 8;
  const std::vector<Datapoint> data = synth_dual_set(500, dim, 0xD0D0);
  SplitConfig split_cfg;
  split_cfg.seed = 11;
  const DataSplit split = split_dataset(data, split_cfg);
  std::vector<Datapoint> heldout = split.val;
  heldout.insert(heldout.end(), split.test.begin(), split.test.end());

  ModelSpec text_spec;
  text_spec.kind = ModelKind::Feedforward;
  text_spec.input_dim = dim;
  text_spec.stack = {LayerDesc::dense(dim, Activation::Relu)};
  text_spec.classes = 2;

  ModelSpec fused_spec;
  fused_spec.kind = ModelKind::Fusion;
  fused_spec.text_dim = dim;
  fused_spec.image_dim = dim;
  fused_spec.gated = true;
  fused_spec.text_gate = GateKind::GL1;
  fused_spec.image_gate = GateKind::GL2;
  fused_spec.classes = 2;

  const std::vector<Datapoint> text_train = text_only_view(split.train);
  const std::vector<Datapoint> text_heldout = text_only_view(heldout);

  double text_sum = 0.0;
  double fused_sum = 0.0;
  const size_t runs = 5;
  for (uint64_t s = 1; s <= runs; ++s) {
    TrainConfig cfg = classical_config(40, 100 + s);
    cfg.lr = 0.05;
    cfg.batch_size = 32;

    Model text_model = Model::build(text_spec, s);
    train_model(text_model, text_train, {}, cfg);
    text_sum += evaluate(text_model, text_heldout).accuracy;

    Model fused_model = Model::build(fused_spec, s);
    train_model(fused_model, split.train, {}, cfg);
    fused_sum += evaluate(fused_model, heldout).accuracy;
  }
  const double text_mean = text_sum / double(runs);
  const double fused_mean = fused_sum / double(runs);
  const double gap = fused_mean - text_mean;

  std::ostringstream d;
  d << "text-only " << text_mean << ", gated fusion " << fused_mean
    << ", gap " << gap << " over " << runs << " seeds";
  return {gap >= 0.10, d.str()};
}

Outcome criterion_embedding_parity() {
  const std::vector<Datapoint> train = synth_image_set(50, 64, 1001, 2002);
  const std::vector<Datapoint> heldout = synth_image_set(100, 64, 1001, 3003);

  EmbeddingTable table;
  table.dim = 4;
  table.vectors["negative"] = Tensor({4});
  table.vectors["negative"][0] = 1.0;
  table.vectors["positive"] = Tensor({4});
  table.vectors["positive"][1] = 1.0;
  table.vectors["neutral"] = Tensor({4});
  table.vectors["neutral"][2] = 1.0;

  ModelSpec embed_spec = classical_spec(64);
  embed_spec.head = HeadKind::EmbeddingProjection;
  embed_spec.proj_dim = 4;

  double classical_sum = 0.0;
  double embed_sum = 0.0;
  const size_t runs = 5;
  for (uint64_t s = 1; s <= runs; ++s) {
    Model classical = Model::build(classical_spec(64), s);
    train_model(classical, train, {}, classical_config(200, 100 + s));
    classical_sum += evaluate(classical, heldout).accuracy;

    TrainConfig embed_cfg = classical_config(200, 100 + s);
    embed_cfg.loss = LossKind::Cosine;
    embed_cfg.optimizer = OptimizerKind::RmsProp;
    Model embed = Model::build(embed_spec, s);
    train_model(embed, train, {}, embed_cfg, &table);
    embed_sum += evaluate(embed, heldout, &table).accuracy;
  }
  const double classical_mean = classical_sum / double(runs);
  const double embed_mean = embed_sum / double(runs);

  std::ostringstream d;
  d << "classical " << classical_mean << ", embedding head " << embed_mean
    << " over " << runs << " seeds";
  return {embed_mean >= classical_mean - 0.05, d.str()};
}

Outcome criterion_labeling() {
  Check c;
  c.expect(label_from_anp_score(2.019) == Label::Positive,
           "2.019 not positive");
  c.expect(label_from_anp_score(-2.128) == Label::Negative,
           "-2.128 not negative");
  c.expect(label_from_anp_score(0.0) == Label::Neutral, "0.0 not neutral");
  c.expect(label_from_anp_score(0.035) == Label::Positive,
           "0.035 not positive");
  c.expect(label_from_anp_score(-0.035) == Label::Negative,
           "-0.035 not negative");
  return {c.ok, c.ok ? "5 score cases exact" : c.why.str()};
}

Outcome criterion_pipeline() {
  Check c;

  // URL substitution, empty-title join.
  const std::vector<std::string> toks =
      tokenize("", "see http://x.co/a now");
  const std::vector<std::string> expected = {".", "see", "href", "now"};
  c.expect(toks == expected, "tokenize URL example mismatch");

  // Truncation at 150 tokens and padding at 5, byte-for-byte.
  std::vector<std::string> long_tokens;
  for (size_t i = 0; i < 150; ++i) {
    long_tokens.push_back("w" + std::to_string(i));
  }
  const Vocabulary vocab = Vocabulary::build({long_tokens});
  const EncodedSequence longe = encode_sequence(vocab, long_tokens);
  c.expect(longe.true_length == kSequenceLength, "150-token true_length");
  bool trunc_exact = true;
  for (size_t i = 0; i < kSequenceLength; ++i) {
    if (longe.ids[i] != vocab.index_of(long_tokens[i])) trunc_exact = false;
  }
  c.expect(trunc_exact, "150-token id mismatch");

  const std::vector<std::string> short_tokens(long_tokens.begin(),
                                              long_tokens.begin() + 5);
  const EncodedSequence shorte = encode_sequence(vocab, short_tokens);
  c.expect(shorte.true_length == 5, "5-token true_length");
  bool pad_exact = true;
  for (size_t i = 0; i < kSequenceLength; ++i) {
    const int32_t want = i < 5 ? vocab.index_of(short_tokens[i]) : 0;
    if (shorte.ids[i] != want) pad_exact = false;
  }
  c.expect(pad_exact, "5-token pad mismatch");

  // Split sizes and same-seed identity.
  const std::vector<Datapoint> data = synth_image_set(100, 4, 5, 6);
  SplitConfig cfg;
  cfg.seed = 9;
  const DataSplit a = split_dataset(data, cfg);
  const DataSplit b = split_dataset(data, cfg);
  c.expect(a.train.size() == 70 && a.val.size() == 20 && a.test.size() == 10,
           "split sizes not 70/20/10");
  auto ids = [](const std::vector<Datapoint>& v) {
    std::vector<std::string> out;
    for (const Datapoint& dp : v) out.push_back(dp.id);
    return out;
  };
  c.expect(ids(a.train) == ids(b.train) && ids(a.val) == ids(b.val) &&
               ids(a.test) == ids(b.test),
           "same-seed splits differ");
  std::vector<std::string> all = ids(a.train);
  for (const std::string& id : ids(a.val)) all.push_back(id);
  for (const std::string& id : ids(a.test)) all.push_back(id);
  std::sort(all.begin(), all.end());
  c.expect(std::set<std::string>(all.begin(), all.end()).size() == 100,
           "split not a disjoint cover");

  return {c.ok, c.ok ? "tokenize/encode/split goldens exact" : c.why.str()};
}

Outcome criterion_gate_bounds() {
  const size_t dim = 16;
  ParamStore params;
  params["g"] = Tensor::zeros({dim});
  SgdMomentumState opt;
  opt.lr = 1.0;
  opt.momentum = 0.9;
  Rng rng(99);
  size_t checked = 0;
  for (size_t step = 0; step < 1000; ++step) {
    Tensor grad({dim});
    for (size_t j = 0; j < dim; ++j) {
      grad[j] = (rng.below(2) ? 1.0 : -1.0) * 1e8 * (1.0 + rng.uniform());
    }
    GradMap grads;
    grads["g"] = grad;
    sgd_momentum_step(opt, params, grads);

    Graph g;
    const NodeRef theta = g.parameter("g", params.at("g"));
    const Tensor gate = g.value(g.sigmoid_open(theta));
    for (size_t j = 0; j < dim; ++j) {
      if (!(gate[j] > 0.0 && gate[j] < 1.0)) {
        std::ostringstream d;
        d << "gate value " << gate[j] << " escaped (0,1) at step " << step;
        return {false, d.str()};
      }
      ++checked;
    }
  }
  std::ostringstream d;
  d << checked << " gate values stayed strictly inside (0,1)";
  return {true, d.str()};
}

Outcome criterion_decision_rule() {
  EmbeddingTable table;
  table.dim = 50;
  Rng rng(0xBEEF);
  for (const Label l : kLabelOrder) {
    table.vectors[label_name(l)] = Tensor::uniform({50}, -1.0, 1.0, rng);
  }
  const std::vector<Label> allowed(kLabelOrder.begin(), kLabelOrder.end());

  for (size_t trial = 0; trial < 10000; ++trial) {
    const Tensor out = Tensor::uniform({50}, -1.0, 1.0, rng);
    const Label got = predict_nearest_label(out, table, allowed);

    // Independent exhaustive scan with its own cosine arithmetic.
    double out_norm = 0.0;
    for (size_t j = 0; j < 50; ++j) out_norm += out[j] * out[j];
    out_norm = std::sqrt(out_norm);
    double best = -2.0;
    Label best_label = Label::Negative;
    for (const Label l : kLabelOrder) {
      const Tensor& v = table.vectors.at(label_name(l));
      double dot = 0.0, vn = 0.0;
      for (size_t j = 0; j < 50; ++j) {
        dot += out[j] * v[j];
        vn += v[j] * v[j];
      }
      const double cosine = dot / (out_norm * std::sqrt(vn));
      if (cosine > best) {
        best = cosine;
        best_label = l;
      }
    }
    if (got != best_label) {
      std::ostringstream d;
      d << "disagreement with exhaustive scan on trial " << trial;
      return {false, d.str()};
    }
  }
  return {true, "10000 random outputs agreed with the exhaustive scan"};
}

Outcome criterion_determinism() {
  const std::vector<Datapoint> data = synth_image_set(50, 64, 1001, 2002);
  const TrainConfig cfg = classical_config(30, 17);

  auto run = [&](const std::string& path) {
    Model m = Model::build(classical_spec(64), 13);
    train_model(m, data, {}, cfg);
    m.save(path);
    return evaluate(m, data).to_json_string();
  };
  const std::string path_a = "/tmp/sentifuse_acceptance_a.sfck";
  const std::string path_b = "/tmp/sentifuse_acceptance_b.sfck";
  const std::string metrics_a = run(path_a);
  const std::string metrics_b = run(path_b);

  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
  };
  Check c;
  const std::string bytes_a = slurp(path_a);
  c.expect(!bytes_a.empty(), "checkpoint missing");
  c.expect(bytes_a == slurp(path_b), "identical runs wrote different bytes");
  c.expect(metrics_a == metrics_b, "identical runs measured differently");

  // Persistence: reloading reproduces metrics and bytes exactly.
  const Model back = Model::load(path_a);
  c.expect(evaluate(back, data).to_json_string() == metrics_a,
           "reloaded checkpoint evaluates differently");
  const std::string path_c = "/tmp/sentifuse_acceptance_c.sfck";
  back.save(path_c);
  c.expect(slurp(path_c) == bytes_a, "save/load/save changed bytes");

  std::remove(path_a.c_str());
  std::remove(path_b.c_str());
  std::remove(path_c.c_str());
  return {c.ok,
          c.ok ? "bit-identical checkpoints and bit-exact reloaded metrics"
               : c.why.str()};
}

Outcome criterion_projection() {
  const size_t dim = 50;
  Rng rng(0xCAFE);
  Tensor direction = Tensor::uniform({dim}, -1.0, 1.0, rng);
  double n = 0.0;
  for (size_t j = 0; j < dim; ++j) n += direction[j] * direction[j];
  n = std::sqrt(n);
  for (size_t j = 0; j < dim; ++j) direction[j] /= n;

  std::vector<Tensor> outputs;
  std::vector<PointMeta> meta;
  std::vector<int> cluster_of;
  for (int cluster = 0; cluster < 2; ++cluster) {
    const double sign = cluster == 0 ? -5.0 : 5.0;
    for (size_t i = 0; i < 40; ++i) {
      Tensor p({dim});
      for (size_t j = 0; j < dim; ++j) {
        p[j] = sign * direction[j] + 0.5 * rng.normal();
      }
      outputs.push_back(p);
      meta.push_back({cluster == 0 ? "cluster a" : "cluster b",
                      cluster == 0 ? "negative" : "positive"});
      cluster_of.push_back(cluster);
    }
  }
  const Projection proj = project_2d(outputs, meta);

  double cx[2] = {0.0, 0.0}, cy[2] = {0.0, 0.0};
  size_t count[2] = {0, 0};
  for (size_t i = 0; i < proj.points.size(); ++i) {
    cx[cluster_of[i]] += proj.points[i].x;
    cy[cluster_of[i]] += proj.points[i].y;
    ++count[cluster_of[i]];
  }
  for (int k = 0; k < 2; ++k) {
    cx[k] /= double(count[k]);
    cy[k] /= double(count[k]);
  }
  double within = 0.0;
  for (size_t i = 0; i < proj.points.size(); ++i) {
    const int k = cluster_of[i];
    const double dx = proj.points[i].x - cx[k];
    const double dy = proj.points[i].y - cy[k];
    within += dx * dx + dy * dy;
  }
  within = std::sqrt(within / double(proj.points.size()));
  const double separation = std::hypot(cx[0] - cx[1], cy[0] - cy[1]);

  std::ostringstream d;
  d << "centroid separation " << separation << " vs within-cluster std "
    << within;
  return {!proj.rank_deficient && separation > 3.0 * within, d.str()};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
  double time_limit_s;  // 0 = no limit
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "gradient-integrity", &criterion_gradients, 60.0},
      {2, "overfit-capacity", &criterion_overfit, 60.0},
      {3, "fusion-value", &criterion_fusion, 300.0},
      {4, "embedding-head-parity", &criterion_embedding_parity, 0.0},
      {5, "labeling-exactness", &criterion_labeling, 0.0},
      {6, "pipeline-goldens", &criterion_pipeline, 0.0},
      {7, "gate-bounds", &criterion_gate_bounds, 0.0},
      {8, "decision-rule-oracle", &criterion_decision_rule, 0.0},
      {9, "determinism-persistence", &criterion_determinism, 0.0},
      {10, "projection-sanity", &criterion_projection, 0.0},
  };

  bool all_pass = true;
  for (const Criterion& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criterion.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (criterion.time_limit_s > 0.0 && elapsed > criterion.time_limit_s) {
      outcome.pass = false;
      outcome.detail += " [exceeded " + format_seconds(criterion.time_limit_s) +
                        " time limit]";
    }
    all_pass = all_pass && outcome.pass;
    std::printf("%s %2d %-24s (%s) %s\n", outcome.pass ? "PASS" : "FAIL",
                criterion.id, criterion.name, format_seconds(elapsed).c_str(),
                outcome.detail.c_str());
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
