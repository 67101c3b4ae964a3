// Command-line front end. Everything goes through the public C interface;
// the only extras here are argument parsing, file plumbing, and JSON
// assembly for configs.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "sentifuse/sentifuse.h"

using nlohmann::json;

namespace {

// Exit codes: 0 success, 1 runtime failure, 2 usage error.
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CliError {
  std::string message;
};

// Wraps a C-API call; converts failure into an exception carrying the
// library's error message.
void require_ok(sf_status status, const std::string& doing) {
  if (status != SF_OK) {
    throw CliError{doing + ": " + sf_last_error()};
  }
}

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { sf_string_free(p); }
  std::string str() const { return p == nullptr ? std::string() : p; }
};

struct DatasetHandle {
  sf_dataset* d = nullptr;
  ~DatasetHandle() { sf_dataset_free(d); }
};

struct ModelHandle {
  sf_model* m = nullptr;
  ~ModelHandle() { sf_model_free(m); }
};

struct VocabularyHandle {
  sf_vocabulary* v = nullptr;
  ~VocabularyHandle() { sf_vocabulary_free(v); }
};

struct EmbeddingsHandle {
  sf_embeddings* e = nullptr;
  ~EmbeddingsHandle() { sf_embeddings_free(e); }
};

std::string read_text_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CliError{std::string(what) + ": cannot open " + path};
  }
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

void write_text_file(const std::string& path, const std::string& content,
                     const char* what) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw CliError{std::string(what) + ": cannot open " + path};
  }
  out << content;
  if (!out) {
    throw CliError{std::string(what) + ": write failed for " + path};
  }
}

// Shared flag state for the train subcommand.
struct TrainArgs {
  std::string data;
  std::string val;
  std::string out_dir;
  std::string arch;
  std::string spec_path;
  std::string config_path;
  std::string vocab_path;
  std::string glove_path;
  std::string text_model_path;
  size_t glove_dim = 50;
  long long seed = 1;
  bool seed_given = false;
  std::string loss;
  std::string optimizer;
  long long epochs = -1;
  long long batch_size = -1;
  double lr = -1.0;
  bool lr_given = false;
  double momentum = -1.0;
  bool momentum_given = false;
};

struct PrepareArgs {
  std::string data;
  std::string features;
  std::string out_dir;
  long long seed = 1;
  bool two_class = false;
  long long min_words = 5;
  long long max_tokens = 0;
  double train_frac = 0.7;
  double val_frac = 0.2;
  double test_frac = 0.1;
};

struct EvalArgs {
  std::string model;
  std::string data;
  std::string glove_path;
  std::string text_model_path;
  size_t glove_dim = 50;
};

struct ProjectArgs {
  std::string model;
  std::string data;
  std::string text_model_path;
  std::string out;
};

struct GradcheckArgs {
  long long seeds = 20;
  std::string out;
  bool corrupt_tanh = false;
};

sf_dataset* load_dataset(const std::string& path, const std::string& features) {
  sf_dataset* d = nullptr;
  require_ok(sf_dataset_load(path.c_str(),
                             features.empty() ? nullptr : features.c_str(), &d),
             "loading " + path);
  return d;
}

sf_model* load_model(const std::string& path) {
  sf_model* m = nullptr;
  require_ok(sf_model_load(path.c_str(), &m), "loading model " + path);
  return m;
}

sf_embeddings* load_embeddings(const std::string& path, size_t dim) {
  sf_embeddings* e = nullptr;
  require_ok(sf_embeddings_load(path.c_str(), dim, &e),
             "loading embeddings " + path);
  return e;
}

// Fusion models consume per-record text features extracted by a trained
// text model; this attaches them when the user names one.
void maybe_attach_text_features(sf_dataset* data, const std::string& path) {
  if (path.empty()) return;
  ModelHandle text_model;
  text_model.m = load_model(path);
  require_ok(sf_dataset_attach_text_features(data, text_model.m),
             "attaching text features");
}

int run_prepare(const PrepareArgs& args) {
  DatasetHandle d;
  d.d = load_dataset(args.data, args.features);
  require_ok(sf_dataset_filter_min_words(d.d, (size_t)args.min_words),
             "filtering short records");
  if (args.two_class) {
    require_ok(sf_dataset_drop_neutral(d.d), "dropping neutral records");
  }
  require_ok(sf_dataset_balance(d.d, (uint64_t)args.seed),
             "balancing classes");

  VocabularyHandle vocab;
  require_ok(sf_vocabulary_build(d.d, (size_t)args.max_tokens, &vocab.v),
             "building vocabulary");
  require_ok(sf_dataset_encode(d.d, vocab.v), "encoding text");

  DatasetHandle train, val, test;
  require_ok(sf_dataset_split(d.d, args.train_frac, args.val_frac,
                              args.test_frac, (uint64_t)args.seed, &train.d,
                              &val.d, &test.d),
             "splitting dataset");

  std::filesystem::create_directories(args.out_dir);
  const std::string base = args.out_dir + "/";
  require_ok(sf_dataset_save(train.d, (base + "train.jsonl").c_str()),
             "writing train split");
  require_ok(sf_dataset_save(val.d, (base + "val.jsonl").c_str()),
             "writing val split");
  require_ok(sf_dataset_save(test.d, (base + "test.jsonl").c_str()),
             "writing test split");
  require_ok(sf_vocabulary_save(vocab.v, (base + "vocab.tsv").c_str()),
             "writing vocabulary");

  std::cerr << "prepared " << sf_dataset_count(train.d) << "/"
            << sf_dataset_count(val.d) << "/" << sf_dataset_count(test.d)
            << " records (train/val/test) into " << args.out_dir << "\n";
  return 0;
}

// Builds the model spec JSON: either a preset (patched with the vocabulary
// size when one is supplied) or a spec file taken verbatim.
std::string resolve_spec(const TrainArgs& args) {
  if (!args.spec_path.empty()) {
    return read_text_file(args.spec_path, "reading spec");
  }
  OwnedString preset;
  require_ok(sf_preset_spec(args.arch.c_str(), &preset.p),
             "resolving preset " + args.arch);
  std::string spec = preset.str();
  if (!args.vocab_path.empty()) {
    VocabularyHandle vocab;
    require_ok(sf_vocabulary_load(args.vocab_path.c_str(), &vocab.v),
               "loading vocabulary " + args.vocab_path);
    json j = json::parse(spec);
    if (j.contains("vocab_size")) {
      j["vocab_size"] = sf_vocabulary_size(vocab.v);
      spec = j.dump();
    }
  }
  return spec;
}

// Merges the config file (if any) with command-line overrides into the
// JSON object sf_train expects.
std::string resolve_train_config(const TrainArgs& args) {
  json cfg = json::object();
  if (!args.config_path.empty()) {
    const std::string text = read_text_file(args.config_path, "reading config");
    try {
      cfg = json::parse(text);
    } catch (const json::exception& e) {
      throw CliError{"parsing config " + args.config_path + ": " + e.what()};
    }
    if (!cfg.is_object()) {
      throw CliError{"parsing config " + args.config_path +
                     ": expected a JSON object"};
    }
  }
  if (args.seed_given || !cfg.contains("seed")) {
    cfg["seed"] = args.seed;
  }
  if (!args.loss.empty()) cfg["loss"] = args.loss;
  if (!args.optimizer.empty()) cfg["optimizer"] = args.optimizer;
  if (args.epochs >= 0) cfg["epochs"] = args.epochs;
  if (args.batch_size >= 0) cfg["batch_size"] = args.batch_size;
  if (args.lr_given) cfg["lr"] = args.lr;
  if (args.momentum_given) cfg["momentum"] = args.momentum;
  return cfg.dump();
}

int run_train(const TrainArgs& args) {
  if (args.arch.empty() == args.spec_path.empty()) {
    throw CliError{"exactly one of --arch or --spec is required"};
  }

  DatasetHandle train;
  train.d = load_dataset(args.data, "");
  DatasetHandle val;
  if (!args.val.empty()) {
    val.d = load_dataset(args.val, "");
  }

  ModelHandle text_model;
  if (!args.text_model_path.empty()) {
    text_model.m = load_model(args.text_model_path);
    require_ok(sf_dataset_attach_text_features(train.d, text_model.m),
               "attaching text features to train split");
    if (val.d != nullptr) {
      require_ok(sf_dataset_attach_text_features(val.d, text_model.m),
                 "attaching text features to val split");
    }
  }

  EmbeddingsHandle table;
  if (!args.glove_path.empty()) {
    table.e = load_embeddings(args.glove_path, args.glove_dim);
  }

  const std::string spec = resolve_spec(args);
  ModelHandle model;
  require_ok(sf_model_build(spec.c_str(), (uint64_t)args.seed, &model.m),
             "building model");

  const std::string cfg = resolve_train_config(args);
  OwnedString history;
  ModelHandle best;
  require_ok(sf_train(model.m, train.d, val.d, cfg.c_str(), table.e,
                      &history.p, &best.m),
             "training");

  std::filesystem::create_directories(args.out_dir);
  const std::string base = args.out_dir + "/";
  require_ok(sf_model_save(model.m, (base + "model.sfck").c_str()),
             "writing final checkpoint");
  require_ok(sf_model_save(best.m, (base + "model.best.sfck").c_str()),
             "writing best checkpoint");
  write_text_file(base + "history.json", history.str() + "\n",
                  "writing history");

  // Metrics for the final model on the validation split when present,
  // otherwise on the training split.
  OwnedString metrics;
  require_ok(
      sf_evaluate(model.m, val.d != nullptr ? val.d : train.d, table.e,
                  &metrics.p),
      "evaluating");
  write_text_file(base + "metrics.json", metrics.str() + "\n",
                  "writing metrics");

  const json h = json::parse(history.str());
  std::cerr << "trained " << h.at("history").size() << " epochs; best epoch "
            << h.at("best_epoch").get<long long>() << "; artifacts in "
            << args.out_dir << "\n";
  return 0;
}

int run_eval(const EvalArgs& args) {
  ModelHandle model;
  model.m = load_model(args.model);
  DatasetHandle data;
  data.d = load_dataset(args.data, "");
  maybe_attach_text_features(data.d, args.text_model_path);
  EmbeddingsHandle table;
  if (!args.glove_path.empty()) {
    table.e = load_embeddings(args.glove_path, args.glove_dim);
  }
  OwnedString metrics;
  require_ok(sf_evaluate(model.m, data.d, table.e, &metrics.p), "evaluating");
  std::cout << metrics.str() << "\n";
  return 0;
}

int run_project(const ProjectArgs& args) {
  ModelHandle model;
  model.m = load_model(args.model);
  DatasetHandle data;
  data.d = load_dataset(args.data, "");
  maybe_attach_text_features(data.d, args.text_model_path);
  OwnedString csv;
  require_ok(sf_project(model.m, data.d, &csv.p), "projecting");
  if (args.out.empty()) {
    std::cout << csv.str();
  } else {
    write_text_file(args.out, csv.str(), "writing projection");
  }
  return 0;
}

int run_gradcheck(const GradcheckArgs& args) {
  if (args.corrupt_tanh) {
    sf_testing_corrupt_tanh(1);
  }
  OwnedString report;
  int passed = 0;
  const sf_status status = sf_gradcheck((size_t)args.seeds, &report.p, &passed);
  sf_testing_corrupt_tanh(0);
  require_ok(status, "running gradient checks");
  if (args.out.empty()) {
    std::cout << report.str() << "\n";
  } else {
    write_text_file(args.out, report.str() + "\n", "writing report");
  }
  if (passed != 1) {
    std::cerr << "gradient check FAILED\n";
    return kExitRuntime;
  }
  std::cerr << "gradient check passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sentifuse — multimodal sentiment classification toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "print help for every subcommand");

  PrepareArgs prepare_args;
  CLI::App* prepare =
      app.add_subcommand("prepare",
                         "filter, balance, split, and encode a raw dataset");
  prepare->add_option("--data", prepare_args.data, "raw JSONL dataset")
      ->required();
  prepare->add_option("--features", prepare_args.features,
                      "image-feature sidecar (binary, with .idx index)");
  prepare->add_option("--out", prepare_args.out_dir, "output directory")
      ->required();
  prepare->add_option("--seed", prepare_args.seed,
                      "seed for balancing and splitting");
  prepare->add_flag("--two-class", prepare_args.two_class,
                    "drop neutral records before balancing");
  prepare->add_option("--min-words", prepare_args.min_words,
                      "minimum words of combined text per record");
  prepare->add_option("--max-tokens", prepare_args.max_tokens,
                      "vocabulary size cap (0 = unlimited)");
  prepare->add_option("--train-frac", prepare_args.train_frac,
                      "training fraction");
  prepare->add_option("--val-frac", prepare_args.val_frac,
                      "validation fraction");
  prepare->add_option("--test-frac", prepare_args.test_frac, "test fraction");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a model");
  train->add_option("--data", train_args.data, "training split JSONL")
      ->required();
  train->add_option("--val", train_args.val, "validation split JSONL");
  train->add_option("--out", train_args.out_dir, "output directory")
      ->required();
  train->add_option("--arch", train_args.arch,
                    "model preset (see README for the list)");
  train->add_option("--spec", train_args.spec_path,
                    "model spec JSON file (alternative to --arch)");
  train->add_option("--config", train_args.config_path,
                    "training config JSON file");
  train->add_option("--vocab", train_args.vocab_path,
                    "vocabulary file (patches vocab_size into text presets)");
  train->add_option("--glove", train_args.glove_path,
                    "label-embedding table for embedding-head training");
  train->add_option("--glove-dim", train_args.glove_dim,
                    "expected embedding dimension");
  train
      ->add_option("--text-model", train_args.text_model_path,
                   "trained text checkpoint; attaches text features for "
                   "fusion models")
      ->check(CLI::ExistingFile);
  auto* seed_opt = train->add_option(
      "--seed", train_args.seed, "seed for model init and training order");
  train->add_option("--loss", train_args.loss, "loss function")
      ->check(CLI::IsMember({"xent", "cosine", "hinge", "mse"}));
  train->add_option("--optimizer", train_args.optimizer, "optimizer")
      ->check(CLI::IsMember({"sgd", "rmsprop"}));
  train->add_option("--epochs", train_args.epochs, "training epochs");
  train->add_option("--batch-size", train_args.batch_size, "minibatch size");
  auto* lr_opt = train->add_option("--lr", train_args.lr, "learning rate");
  auto* momentum_opt =
      train->add_option("--momentum", train_args.momentum, "momentum");

  EvalArgs eval_args;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "evaluate a checkpoint on a split");
  eval_cmd->add_option("--model", eval_args.model, "checkpoint file")
      ->required();
  eval_cmd->add_option("--data", eval_args.data, "split JSONL")->required();
  eval_cmd->add_option("--glove", eval_args.glove_path,
                       "label-embedding table for embedding heads");
  eval_cmd->add_option("--glove-dim", eval_args.glove_dim,
                       "expected embedding dimension");
  eval_cmd
      ->add_option("--text-model", eval_args.text_model_path,
                   "trained text checkpoint; attaches text features for "
                   "fusion models")
      ->check(CLI::ExistingFile);

  ProjectArgs project_args;
  CLI::App* project =
      app.add_subcommand("project", "emit a 2-D projection CSV for plotting");
  project->add_option("--model", project_args.model, "checkpoint file")
      ->required();
  project->add_option("--data", project_args.data, "split JSONL")->required();
  project
      ->add_option("--text-model", project_args.text_model_path,
                   "trained text checkpoint; attaches text features for "
                   "fusion models")
      ->check(CLI::ExistingFile);
  project->add_option("--out", project_args.out,
                      "CSV output path (default: standard output)");

  GradcheckArgs gradcheck_args;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient suite");
  gradcheck->add_option("--seed", gradcheck_args.seeds,
                        "number of random seeds to test");
  gradcheck->add_option("--out", gradcheck_args.out,
                        "write the JSON report here instead of stdout");
  gradcheck
      ->add_flag("--corrupt-tanh", gradcheck_args.corrupt_tanh,
                 "test hook: corrupt one backward rule (expect failure)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    std::cerr << "run '" << (argc > 0 ? argv[0] : "sentifuse")
              << " --help' for usage\n";
    return kExitUsage;
  }

  train_args.seed_given = seed_opt->count() > 0;
  train_args.lr_given = lr_opt->count() > 0;
  train_args.momentum_given = momentum_opt->count() > 0;

  try {
    if (prepare->parsed()) return run_prepare(prepare_args);
    if (train->parsed()) return run_train(train_args);
    if (eval_cmd->parsed()) return run_eval(eval_args);
    if (project->parsed()) return run_project(project_args);
    if (gradcheck->parsed()) return run_gradcheck(gradcheck_args);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
