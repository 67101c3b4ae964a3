#include "core/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "core/error.hpp"
#include "core/io_util.hpp"
#include "core/rng.hpp"

namespace sentifuse {

using nlohmann::json;

namespace {

const std::array<std::string, 3> kLabelNames = {"negative", "neutral",
                                                "positive"};

size_t whitespace_word_count(const std::string& s) {
  std::istringstream stream(s);
  std::string word;
  size_t n = 0;
  while (stream >> word) ++n;
  return n;
}

uint32_t read_u32_or_throw(std::istream& in, const std::string& path,
                           const char* what) {
  uint32_t v = 0;
  if (!ioutil::get_u32(in, v)) {
    throw Error(ErrCode::Parse,
                std::string("feature file ") + path + ": truncated " + what);
  }
  return v;
}

// --- JSONL record parsing -------------------------------------------------

[[noreturn]] void line_error(const std::string& path, size_t line_no,
                             const std::string& msg) {
  throw Error(ErrCode::Parse,
              path + ":" + std::to_string(line_no) + ": " + msg);
}

std::string require_string(const json& rec, const char* key,
                           const std::string& path, size_t line_no) {
  const auto it = rec.find(key);
  if (it == rec.end() || !it->is_string()) {
    line_error(path, line_no,
               std::string("missing or non-string field \"") + key + "\"");
  }
  return it->get<std::string>();
}

Tensor tensor_from_number_array(const json& arr, const char* key,
                                const std::string& path, size_t line_no) {
  if (!arr.is_array() || arr.empty()) {
    line_error(path, line_no,
               std::string("field \"") + key + "\" must be a nonempty array");
  }
  std::vector<double> values;
  values.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) {
      line_error(path, line_no,
                 std::string("field \"") + key + "\" has a non-number entry");
    }
    values.push_back(v.get<double>());
  }
  return Tensor::vec(values);
}

Datapoint datapoint_from_json(const json& rec, const FeatureStore* store,
                              const std::string& path, size_t line_no) {
  Datapoint dp;
  dp.id = require_string(rec, "id", path, line_no);
  dp.title = require_string(rec, "title", path, line_no);
  dp.description = require_string(rec, "description", path, line_no);
  dp.anp = require_string(rec, "anp", path, line_no);
  if (whitespace_word_count(dp.anp) != 2) {
    line_error(path, line_no,
               "field \"anp\" must be exactly two words, got \"" + dp.anp +
                   "\"");
  }

  const auto score_it = rec.find("anp_score");
  if (score_it == rec.end() || !score_it->is_number()) {
    line_error(path, line_no, "missing or non-number field \"anp_score\"");
  }
  dp.anp_score = score_it->get<double>();
  if (!std::isfinite(dp.anp_score)) {
    line_error(path, line_no, "field \"anp_score\" is not finite");
  }

  const bool has_inline = rec.contains("features");
  const bool has_ref = rec.contains("features_ref");
  if (has_inline == has_ref) {
    line_error(path, line_no,
               "record needs exactly one of \"features\" / \"features_ref\"");
  }
  if (has_inline) {
    dp.features =
        tensor_from_number_array(rec.at("features"), "features", path, line_no);
  } else {
    if (!rec.at("features_ref").is_string()) {
      line_error(path, line_no, "field \"features_ref\" must be a string");
    }
    const std::string ref = rec.at("features_ref").get<std::string>();
    if (store == nullptr) {
      throw Error(ErrCode::Config,
                  path + ":" + std::to_string(line_no) +
                      ": record uses \"features_ref\" but no feature store "
                      "was supplied");
    }
    dp.features = store->features_of(ref);
  }

  if (const auto it = rec.find("tags"); it != rec.end()) {
    if (!it->is_array()) {
      line_error(path, line_no, "field \"tags\" must be an array");
    }
    for (const auto& t : *it) {
      if (!t.is_string()) {
        line_error(path, line_no, "field \"tags\" has a non-string entry");
      }
      dp.tags.push_back(t.get<std::string>());
    }
  }

  if (const auto it = rec.find("label"); it != rec.end()) {
    if (!it->is_string()) {
      line_error(path, line_no, "field \"label\" must be a string");
    }
    try {
      dp.label = label_from_name(it->get<std::string>());
    } catch (const Error& e) {
      line_error(path, line_no, e.what());
    }
  } else {
    dp.label = label_from_anp_score(dp.anp_score);
  }

  if (const auto it = rec.find("ids"); it != rec.end()) {
    if (!it->is_array() || it->size() != kSequenceLength) {
      line_error(path, line_no,
                 "field \"ids\" must be an array of length " +
                     std::to_string(kSequenceLength));
    }
    for (size_t i = 0; i < kSequenceLength; ++i) {
      const auto& v = (*it)[i];
      if (!v.is_number_integer()) {
        line_error(path, line_no, "field \"ids\" has a non-integer entry");
      }
      dp.encoded.ids[i] = v.get<int32_t>();
    }
    const auto len_it = rec.find("true_length");
    if (len_it == rec.end() || !len_it->is_number_unsigned()) {
      line_error(path, line_no,
                 "field \"ids\" requires an unsigned \"true_length\"");
    }
    dp.encoded.true_length = len_it->get<size_t>();
    if (dp.encoded.true_length > kSequenceLength) {
      line_error(path, line_no, "field \"true_length\" exceeds " +
                                    std::to_string(kSequenceLength));
    }
  }

  if (const auto it = rec.find("text_features"); it != rec.end()) {
    dp.text_features =
        tensor_from_number_array(*it, "text_features", path, line_no);
  }

  return dp;
}

json datapoint_to_json(const Datapoint& dp) {
  json rec;
  rec["id"] = dp.id;
  rec["title"] = dp.title;
  rec["description"] = dp.description;
  rec["anp"] = dp.anp;
  rec["anp_score"] = dp.anp_score;
  if (!dp.tags.empty()) rec["tags"] = dp.tags;
  rec["features"] = dp.features.values();
  rec["label"] = label_name(dp.label);
  if (dp.encoded.true_length > 0) {
    rec["ids"] = dp.encoded.ids;
    rec["true_length"] = dp.encoded.true_length;
  }
  if (dp.text_features.size() > 0) {
    rec["text_features"] = dp.text_features.values();
  }
  return rec;
}

}  // namespace

const std::string& label_name(Label label) {
  return kLabelNames[static_cast<size_t>(label)];
}

Label label_from_name(const std::string& name) {
  for (size_t i = 0; i < kLabelNames.size(); ++i) {
    if (kLabelNames[i] == name) return static_cast<Label>(i);
  }
  throw Error(ErrCode::Config, "unknown label name \"" + name +
                                   "\" (expected negative|neutral|positive)");
}

Label label_from_anp_score(double score) {
  if (!std::isfinite(score)) {
    throw Error(ErrCode::Contract, "label_from_anp_score: non-finite score");
  }
  if (score >= 0.035) return Label::Positive;
  if (score <= -0.035) return Label::Negative;
  return Label::Neutral;
}

FeatureStore FeatureStore::load(const std::string& bin_path) {
  std::ifstream in(bin_path, std::ios::binary);
  if (!in) {
    throw Error(ErrCode::Io, "FeatureStore::load: cannot open " + bin_path);
  }
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "SFV1", 4) != 0) {
    throw Error(ErrCode::Parse,
                "feature file " + bin_path + ": bad magic (expected SFV1)");
  }
  const uint32_t count = read_u32_or_throw(in, bin_path, "record count");
  const uint32_t dim = read_u32_or_throw(in, bin_path, "dimension");
  if (dim == 0) {
    throw Error(ErrCode::Parse, "feature file " + bin_path + ": zero dimension");
  }

  FeatureStore fs;
  fs.dim_ = dim;
  fs.data_.resize(static_cast<size_t>(count) * dim);
  for (size_t i = 0; i < fs.data_.size(); ++i) {
    if (!ioutil::get_f32(in, fs.data_[i])) {
      throw Error(ErrCode::Parse,
                  "feature file " + bin_path + ": truncated feature body");
    }
  }

  const std::string idx_path = bin_path + ".idx";
  std::ifstream idx(idx_path, std::ios::binary);
  if (!idx) {
    throw Error(ErrCode::Io, "FeatureStore::load: cannot open " + idx_path);
  }
  std::string line;
  while (std::getline(idx, line)) {
    if (line.empty()) continue;
    if (fs.index_.count(line) > 0) {
      throw Error(ErrCode::Parse,
                  "feature index " + idx_path + ": duplicate id \"" + line +
                      "\"");
    }
    fs.index_.emplace(line, fs.ids_.size());
    fs.ids_.push_back(line);
  }
  if (fs.ids_.size() != count) {
    throw Error(ErrCode::Parse,
                "feature index " + idx_path + ": " +
                    std::to_string(fs.ids_.size()) + " ids for " +
                    std::to_string(count) + " records");
  }
  return fs;
}

void FeatureStore::save(const std::string& bin_path,
                        const std::vector<std::string>& ids,
                        const std::vector<Tensor>& features) {
  if (ids.size() != features.size()) {
    throw Error(ErrCode::Dimension,
                "FeatureStore::save: " + std::to_string(ids.size()) +
                    " ids for " + std::to_string(features.size()) +
                    " feature vectors");
  }
  if (features.empty()) {
    throw Error(ErrCode::Contract, "FeatureStore::save: empty store");
  }
  const size_t dim = features[0].size();
  for (const auto& f : features) {
    if (f.size() != dim) {
      throw Error(ErrCode::Dimension,
                  "FeatureStore::save: inconsistent feature dimensions");
    }
  }

  std::ofstream out(bin_path, std::ios::binary);
  if (!out) {
    throw Error(ErrCode::Io, "FeatureStore::save: cannot open " + bin_path);
  }
  out.write("SFV1", 4);
  ioutil::put_u32(out, static_cast<uint32_t>(ids.size()));
  ioutil::put_u32(out, static_cast<uint32_t>(dim));
  for (const auto& f : features) {
    for (size_t i = 0; i < dim; ++i) {
      ioutil::put_f32(out, static_cast<float>(f[i]));
    }
  }
  if (!out) {
    throw Error(ErrCode::Io, "FeatureStore::save: write failed for " + bin_path);
  }

  const std::string idx_path = bin_path + ".idx";
  std::ofstream idx(idx_path, std::ios::binary);
  if (!idx) {
    throw Error(ErrCode::Io, "FeatureStore::save: cannot open " + idx_path);
  }
  for (const auto& id : ids) idx << id << '\n';
  if (!idx) {
    throw Error(ErrCode::Io, "FeatureStore::save: write failed for " + idx_path);
  }
}

Tensor FeatureStore::features_of(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) {
    throw Error(ErrCode::Lookup,
                "FeatureStore: no features for id \"" + id + "\"");
  }
  std::vector<double> values(dim_);
  const float* row = data_.data() + it->second * dim_;
  for (size_t i = 0; i < dim_; ++i) values[i] = static_cast<double>(row[i]);
  return Tensor::vec(values);
}

std::vector<Datapoint> load_dataset(const std::string& path,
                                    const FeatureStore* store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrCode::Io, "load_dataset: cannot open " + path);
  }
  std::vector<Datapoint> data;
  std::string line;
  size_t line_no = 0;
  size_t feature_dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      line_error(path, line_no,
                 "invalid JSON: " + strip_exception_tag(e.what()));
    }
    if (!rec.is_object()) {
      line_error(path, line_no, "record is not a JSON object");
    }
    Datapoint dp = datapoint_from_json(rec, store, path, line_no);
    if (feature_dim == 0) {
      feature_dim = dp.features.size();
    } else if (dp.features.size() != feature_dim) {
      line_error(path, line_no,
                 "feature dimension " + std::to_string(dp.features.size()) +
                     " differs from earlier records (" +
                     std::to_string(feature_dim) + ")");
    }
    data.push_back(std::move(dp));
  }
  return data;
}

void save_dataset(const std::string& path,
                  const std::vector<Datapoint>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrCode::Io, "save_dataset: cannot open " + path);
  }
  for (const auto& dp : data) {
    out << datapoint_to_json(dp).dump() << '\n';
  }
  if (!out) {
    throw Error(ErrCode::Io, "save_dataset: write failed for " + path);
  }
}

std::vector<Datapoint> filter_min_words(const std::vector<Datapoint>& data,
                                        size_t min_words) {
  std::vector<Datapoint> kept;
  for (const auto& dp : data) {
    const size_t words = whitespace_word_count(dp.title) +
                         whitespace_word_count(dp.description);
    if (words >= min_words) kept.push_back(dp);
  }
  return kept;
}

std::vector<Datapoint> drop_neutral(const std::vector<Datapoint>& data) {
  std::vector<Datapoint> kept;
  for (const auto& dp : data) {
    if (dp.label != Label::Neutral) kept.push_back(dp);
  }
  return kept;
}

std::vector<Datapoint> balance_classes(const std::vector<Datapoint>& data,
                                       uint64_t seed) {
  std::array<std::vector<size_t>, 3> by_class;
  for (size_t i = 0; i < data.size(); ++i) {
    by_class[static_cast<size_t>(data[i].label)].push_back(i);
  }
  size_t minority = std::numeric_limits<size_t>::max();
  for (const auto& members : by_class) {
    if (!members.empty()) minority = std::min(minority, members.size());
  }
  if (minority == std::numeric_limits<size_t>::max()) return {};  // no records

  std::vector<size_t> keep;
  for (size_t c = 0; c < by_class.size(); ++c) {
    auto members = by_class[c];
    if (members.empty()) continue;
    Rng rng(mix_seed(seed, c));
    rng.shuffle(members);
    members.resize(minority);
    keep.insert(keep.end(), members.begin(), members.end());
  }
  // Restore original relative order so balancing only removes records.
  std::sort(keep.begin(), keep.end());

  std::vector<Datapoint> out;
  out.reserve(keep.size());
  for (const size_t i : keep) out.push_back(data[i]);
  return out;
}

DataSplit split_dataset(const std::vector<Datapoint>& data,
                        const SplitConfig& cfg) {
  const double sum =
      cfg.train_fraction + cfg.val_fraction + cfg.test_fraction;
  if (!(cfg.train_fraction > 0.0) || !(cfg.val_fraction > 0.0) ||
      !(cfg.test_fraction > 0.0) || std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrCode::Config,
                "split_dataset: fractions must be positive and sum to 1");
  }
  const size_t n = data.size();
  if (n < 10) {
    throw Error(ErrCode::Contract,
                "split_dataset: need at least 10 records, got " +
                    std::to_string(n));
  }

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(cfg.seed);
  rng.shuffle(order);

  // The 1e-9 nudge absorbs representation error (0.7 * 100 sits a hair
  // below 70.0) without changing genuine floor semantics.
  const size_t n_train = static_cast<size_t>(
      std::floor(cfg.train_fraction * static_cast<double>(n) + 1e-9));
  const size_t n_val = static_cast<size_t>(
      std::floor(cfg.val_fraction * static_cast<double>(n) + 1e-9));

  DataSplit split;
  for (size_t i = 0; i < n; ++i) {
    const Datapoint& dp = data[order[i]];
    if (i < n_train) {
      split.train.push_back(dp);
    } else if (i < n_train + n_val) {
      split.val.push_back(dp);
    } else {
      split.test.push_back(dp);
    }
  }
  return split;
}

std::vector<std::vector<size_t>> epoch_batches(size_t n, size_t batch_size,
                                               uint64_t seed,
                                               uint64_t epoch) {
  if (batch_size == 0) {
    throw Error(ErrCode::Config, "epoch_batches: batch_size must be >= 1");
  }
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_seed(seed, epoch));
  rng.shuffle(order);

  std::vector<std::vector<size_t>> batches;
  for (size_t start = 0; start < n; start += batch_size) {
    const size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<ptrdiff_t>(start),
                         order.begin() + static_cast<ptrdiff_t>(end));
  }
  return batches;
}

const Tensor& EmbeddingTable::at(const std::string& token) const {
  const auto it = vectors.find(token);
  if (it == vectors.end()) {
    throw Error(ErrCode::Lookup,
                "EmbeddingTable: no vector for token \"" + token + "\"");
  }
  return it->second;
}

EmbeddingTable load_glove(const std::string& path, size_t dim) {
  if (dim == 0) {
    throw Error(ErrCode::Config, "load_glove: dimension must be >= 1");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrCode::Io, "load_glove: cannot open " + path);
  }
  EmbeddingTable table;
  table.dim = dim;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream stream(line);
    std::string token;
    if (!(stream >> token)) {
      throw Error(ErrCode::Parse, "load_glove: " + path + ":" +
                                      std::to_string(line_no) + ": blank line");
    }
    std::vector<double> values;
    values.reserve(dim);
    double v = 0.0;
    while (stream >> v) values.push_back(v);
    if (!stream.eof()) {
      throw Error(ErrCode::Parse, "load_glove: " + path + ":" +
                                      std::to_string(line_no) +
                                      ": non-numeric value");
    }
    if (values.size() != dim) {
      throw Error(ErrCode::Parse,
                  "load_glove: " + path + ":" + std::to_string(line_no) +
                      ": expected " + std::to_string(dim) + " values, found " +
                      std::to_string(values.size()));
    }
    table.vectors[token] = Tensor::vec(values);  // last occurrence wins
  }
  return table;
}

}  // namespace sentifuse
