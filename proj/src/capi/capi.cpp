#include "sentifuse/sentifuse.h"

#include <cstdlib>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "core/dataset.hpp"
#include "core/error.hpp"
#include "core/gradcheck.hpp"
#include "core/graph.hpp"
#include "core/model.hpp"
#include "core/pca.hpp"
#include "core/text.hpp"
#include "core/train.hpp"

/* Handle definitions: thin value wrappers around the core types. */
struct sf_dataset {
  std::vector<sentifuse::Datapoint> data;
};
struct sf_vocabulary {
  sentifuse::Vocabulary vocab;
};
struct sf_embeddings {
  sentifuse::EmbeddingTable table;
};
struct sf_model {
  sentifuse::Model model;
};

namespace {

using nlohmann::json;

thread_local std::string g_last_error;

sf_status status_of(sentifuse::ErrCode code) {
  using sentifuse::ErrCode;
  switch (code) {
    case ErrCode::Dimension: return SF_ERR_DIMENSION;
    case ErrCode::Contract: return SF_ERR_CONTRACT;
    case ErrCode::Parse: return SF_ERR_PARSE;
    case ErrCode::Lookup: return SF_ERR_LOOKUP;
    case ErrCode::Config: return SF_ERR_CONFIG;
    case ErrCode::Degenerate: return SF_ERR_DEGENERATE;
    case ErrCode::Io: return SF_ERR_IO;
    case ErrCode::Spec: return SF_ERR_SPEC;
    case ErrCode::OutOfRange: return SF_ERR_OUT_OF_RANGE;
    case ErrCode::Internal: return SF_ERR_INTERNAL;
  }
  return SF_ERR_INTERNAL;
}

template <typename F>
sf_status guarded(F&& body) {
  try {
    body();
    return SF_OK;
  } catch (const sentifuse::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SF_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return SF_ERR_INTERNAL;
  }
}

[[noreturn]] void null_argument(const char* what) {
  throw sentifuse::Error(sentifuse::ErrCode::Contract,
                         std::string(what) + " must not be null");
}

template <typename T>
const T& deref(const T* p, const char* what) {
  if (p == nullptr) null_argument(what);
  return *p;
}

template <typename T>
T& deref(T* p, const char* what) {
  if (p == nullptr) null_argument(what);
  return *p;
}

/* Exact-match overload so C-string arguments are null-checked as whole
   strings rather than dereferenced to their first character. */
const char* deref(const char* s, const char* what) {
  if (s == nullptr) null_argument(what);
  return s;
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p == nullptr) {
    throw sentifuse::Error(sentifuse::ErrCode::Internal,
                           "out of memory copying a result string");
  }
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

std::vector<std::vector<std::string>> corpus_of(
    const std::vector<sentifuse::Datapoint>& data) {
  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(data.size());
  for (const sentifuse::Datapoint& dp : data) {
    corpus.push_back(sentifuse::tokenize(dp.title, dp.description));
  }
  return corpus;
}

}  // namespace

extern "C" {

const char* sf_last_error(void) { return g_last_error.c_str(); }

const char* sf_version(void) { return "1.0.0"; }

void sf_string_free(char* s) { std::free(s); }

/* ---- datasets ---- */

sf_status sf_dataset_load(const char* jsonl_path, const char* features_path,
                          sf_dataset** out) {
  return guarded([&] {
    deref(jsonl_path, "jsonl_path");
    deref(out, "out");
    std::vector<sentifuse::Datapoint> data;
    if (features_path != nullptr) {
      const sentifuse::FeatureStore store =
          sentifuse::FeatureStore::load(features_path);
      data = sentifuse::load_dataset(jsonl_path, &store);
    } else {
      data = sentifuse::load_dataset(jsonl_path);
    }
    *out = new sf_dataset{std::move(data)};
  });
}

sf_status sf_dataset_save(const sf_dataset* d, const char* jsonl_path) {
  return guarded([&] {
    sentifuse::save_dataset(deref(jsonl_path, "jsonl_path"),
                            deref(d, "dataset").data);
  });
}

void sf_dataset_free(sf_dataset* d) { delete d; }

size_t sf_dataset_count(const sf_dataset* d) {
  return d == nullptr ? 0 : d->data.size();
}

sf_status sf_dataset_filter_min_words(sf_dataset* d, size_t min_words) {
  return guarded([&] {
    sf_dataset& ds = deref(d, "dataset");
    ds.data = sentifuse::filter_min_words(ds.data, min_words);
  });
}

sf_status sf_dataset_drop_neutral(sf_dataset* d) {
  return guarded([&] {
    sf_dataset& ds = deref(d, "dataset");
    ds.data = sentifuse::drop_neutral(ds.data);
  });
}

sf_status sf_dataset_balance(sf_dataset* d, uint64_t seed) {
  return guarded([&] {
    sf_dataset& ds = deref(d, "dataset");
    ds.data = sentifuse::balance_classes(ds.data, seed);
  });
}

sf_status sf_dataset_split(const sf_dataset* d, double train_frac,
                           double val_frac, double test_frac, uint64_t seed,
                           sf_dataset** train_out, sf_dataset** val_out,
                           sf_dataset** test_out) {
  return guarded([&] {
    const sf_dataset& ds = deref(d, "dataset");
    deref(train_out, "train_out");
    deref(val_out, "val_out");
    deref(test_out, "test_out");
    sentifuse::SplitConfig cfg;
    cfg.train_fraction = train_frac;
    cfg.val_fraction = val_frac;
    cfg.test_fraction = test_frac;
    cfg.seed = seed;
    sentifuse::DataSplit split = sentifuse::split_dataset(ds.data, cfg);
    *train_out = new sf_dataset{std::move(split.train)};
    *val_out = new sf_dataset{std::move(split.val)};
    *test_out = new sf_dataset{std::move(split.test)};
  });
}

/* ---- text pipeline ---- */

sf_status sf_vocabulary_build(const sf_dataset* d, size_t max_tokens,
                              sf_vocabulary** out) {
  return guarded([&] {
    const sf_dataset& ds = deref(d, "dataset");
    deref(out, "out");
    *out = new sf_vocabulary{
        sentifuse::Vocabulary::build(corpus_of(ds.data), max_tokens)};
  });
}

sf_status sf_vocabulary_save(const sf_vocabulary* v, const char* path) {
  return guarded([&] {
    deref(v, "vocabulary").vocab.save(deref(path, "path"));
  });
}

sf_status sf_vocabulary_load(const char* path, sf_vocabulary** out) {
  return guarded([&] {
    deref(out, "out");
    *out = new sf_vocabulary{
        sentifuse::Vocabulary::load(deref(path, "path"))};
  });
}

void sf_vocabulary_free(sf_vocabulary* v) { delete v; }

size_t sf_vocabulary_size(const sf_vocabulary* v) {
  return v == nullptr ? 0 : v->vocab.size();
}

sf_status sf_dataset_encode(sf_dataset* d, const sf_vocabulary* v) {
  return guarded([&] {
    sf_dataset& ds = deref(d, "dataset");
    const sf_vocabulary& vocab = deref(v, "vocabulary");
    for (sentifuse::Datapoint& dp : ds.data) {
      dp.encoded = sentifuse::encode_sequence(
          vocab.vocab, sentifuse::tokenize(dp.title, dp.description));
    }
  });
}

/* ---- embeddings ---- */

sf_status sf_embeddings_load(const char* path, size_t dim,
                             sf_embeddings** out) {
  return guarded([&] {
    deref(out, "out");
    *out = new sf_embeddings{
        sentifuse::load_glove(deref(path, "path"), dim)};
  });
}

void sf_embeddings_free(sf_embeddings* e) { delete e; }

size_t sf_embeddings_count(const sf_embeddings* e) {
  return e == nullptr ? 0 : e->table.vectors.size();
}

/* ---- models ---- */

sf_status sf_preset_spec(const char* name, char** spec_json_out) {
  return guarded([&] {
    deref(spec_json_out, "spec_json_out");
    const sentifuse::ModelSpec spec =
        sentifuse::preset_spec(deref(name, "name"));
    *spec_json_out = dup_string(spec.to_json_string());
  });
}

sf_status sf_model_build(const char* spec_json, uint64_t seed,
                         sf_model** out) {
  return guarded([&] {
    deref(out, "out");
    const sentifuse::ModelSpec spec =
        sentifuse::ModelSpec::from_json_string(deref(spec_json, "spec_json"));
    *out = new sf_model{sentifuse::Model::build(spec, seed)};
  });
}

sf_status sf_model_save(const sf_model* m, const char* path) {
  return guarded(
      [&] { deref(m, "model").model.save(deref(path, "path")); });
}

sf_status sf_model_load(const char* path, sf_model** out) {
  return guarded([&] {
    deref(out, "out");
    *out = new sf_model{sentifuse::Model::load(deref(path, "path"))};
  });
}

void sf_model_free(sf_model* m) { delete m; }

sf_status sf_model_spec_json(const sf_model* m, char** spec_json_out) {
  return guarded([&] {
    deref(spec_json_out, "spec_json_out");
    *spec_json_out = dup_string(deref(m, "model").model.spec().to_json_string());
  });
}

sf_status sf_model_to_embedding_head(const sf_model* m, size_t proj_dim,
                                     uint64_t seed, sf_model** out) {
  return guarded([&] {
    deref(out, "out");
    *out = new sf_model{
        deref(m, "model").model.to_embedding_head(proj_dim, seed)};
  });
}

sf_status sf_dataset_attach_text_features(sf_dataset* d,
                                          const sf_model* text_model) {
  return guarded([&] {
    sf_dataset& ds = deref(d, "dataset");
    const sentifuse::Model& tm = deref(text_model, "text_model").model;
    if (tm.spec().kind != sentifuse::ModelKind::TextBilstm) {
      throw sentifuse::Error(
          sentifuse::ErrCode::Config,
          "attach_text_features: the text model must be a text_bilstm");
    }
    for (sentifuse::Datapoint& dp : ds.data) {
      dp.text_features =
          tm.penultimate(sentifuse::ModelInput::of_tokens(dp.encoded));
    }
  });
}

/* ---- training / evaluation / projection / gradcheck ---- */

sf_status sf_train(sf_model* m, const sf_dataset* train,
                   const sf_dataset* val, const char* config_json,
                   const sf_embeddings* label_table, char** history_json_out,
                   sf_model** best_out) {
  return guarded([&] {
    sf_model& model = deref(m, "model");
    const sf_dataset& train_ds = deref(train, "train");
    const sentifuse::TrainConfig cfg = sentifuse::TrainConfig::from_json_string(
        deref(config_json, "config_json"));
    static const std::vector<sentifuse::Datapoint> kNoData;
    const std::vector<sentifuse::Datapoint>& val_data =
        val == nullptr ? kNoData : val->data;
    const sentifuse::EmbeddingTable* table =
        label_table == nullptr ? nullptr : &label_table->table;

    const sentifuse::TrainResult result = sentifuse::train_model(
        model.model, train_ds.data, val_data, cfg, table);

    if (history_json_out != nullptr) {
      json j;
      j["best_epoch"] = result.best_epoch;
      json hist = json::array();
      for (const sentifuse::EpochStats& s : result.history) {
        json e;
        e["epoch"] = s.epoch;
        e["train_loss"] = s.train_loss;
        if (s.has_accuracy) e["train_accuracy"] = s.train_accuracy;
        if (s.has_val) e["val_accuracy"] = s.val_accuracy;
        hist.push_back(std::move(e));
      }
      j["history"] = std::move(hist);
      *history_json_out = dup_string(j.dump());
    }
    if (best_out != nullptr) {
      *best_out = new sf_model{sentifuse::Model::from_params(
          model.model.spec(), result.best_params)};
    }
  });
}

sf_status sf_evaluate(const sf_model* m, const sf_dataset* data,
                      const sf_embeddings* label_table,
                      char** metrics_json_out) {
  return guarded([&] {
    const sf_model& model = deref(m, "model");
    const sf_dataset& ds = deref(data, "data");
    deref(metrics_json_out, "metrics_json_out");
    const sentifuse::EmbeddingTable* table =
        label_table == nullptr ? nullptr : &label_table->table;
    const sentifuse::Metrics metrics =
        sentifuse::evaluate(model.model, ds.data, table);
    *metrics_json_out = dup_string(metrics.to_json_string());
  });
}

sf_status sf_project(const sf_model* m, const sf_dataset* data,
                     char** csv_out) {
  return guarded([&] {
    const sf_model& model = deref(m, "model");
    const sf_dataset& ds = deref(data, "data");
    deref(csv_out, "csv_out");
    std::vector<sentifuse::Tensor> outputs;
    std::vector<sentifuse::PointMeta> meta;
    outputs.reserve(ds.data.size());
    meta.reserve(ds.data.size());
    const bool use_head = model.model.spec().head ==
                          sentifuse::HeadKind::EmbeddingProjection;
    for (const sentifuse::Datapoint& dp : ds.data) {
      const sentifuse::ModelInput in = sentifuse::input_for(model.model, dp);
      outputs.push_back(use_head ? model.model.predict(in)
                                 : model.model.penultimate(in));
      meta.push_back({dp.anp, sentifuse::label_name(dp.label)});
    }
    const sentifuse::Projection projection =
        sentifuse::project_2d(outputs, meta);
    *csv_out = dup_string(sentifuse::projection_csv(projection));
  });
}

sf_status sf_gradcheck(uint32_t seeds, char** report_json_out,
                       int* passed_out) {
  return guarded([&] {
    deref(passed_out, "passed_out");
    const sentifuse::GradCheckSuiteResult result =
        sentifuse::run_gradcheck_suite(seeds == 0 ? 20 : seeds);
    if (report_json_out != nullptr) {
      *report_json_out = dup_string(result.to_json());
    }
    *passed_out = result.pass ? 1 : 0;
  });
}

void sf_testing_corrupt_tanh(int enable) {
  sentifuse::testing::corrupt_tanh_backward.store(enable != 0);
}

} /* extern "C" */
