#ifndef SENTIFUSE_CORE_DATASET_HPP
#define SENTIFUSE_CORE_DATASET_HPP

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "core/tensor.hpp"
#include "core/text.hpp"

namespace sentifuse {

// Sentiment classes in their fixed order. The numeric order (negative <
// neutral < positive) is load-bearing: score labeling is monotone in it and
// nearest-label ties resolve by it.
enum class Label : int { Negative = 0, Neutral = 1, Positive = 2 };

inline constexpr std::array<Label, 3> kLabelOrder = {
    Label::Negative, Label::Neutral, Label::Positive};

const std::string& label_name(Label label);
Label label_from_name(const std::string& name);

// Weak label from an ANP sentiment score: >= 0.035 positive, <= -0.035
// negative, the open band between is neutral. Boundaries are inclusive on
// the outer classes. Non-finite scores are a contract error.
Label label_from_anp_score(double score);

// One dataset record. `tags` is carried through ingestion but no model
// consumes it. `encoded` and `text_features` stay empty until the text
// pipeline / a text feature extractor fills them.
struct Datapoint {
  std::string id;
  std::string title;
  std::string description;
  std::string anp;  // exactly two whitespace-separated words
  double anp_score = 0.0;
  std::vector<std::string> tags;
  Tensor features;        // image feature vector [d]
  Label label = Label::Neutral;
  EncodedSequence encoded;
  Tensor text_features;   // text feature vector, empty until extracted
};

// Binary feature file: magic "SFV1", u32 record count, u32 dimension, then
// count x dimension little-endian 32-bit floats. Record ids live in a
// companion text file at <path>.idx, one id per line in body order.
class FeatureStore {
 public:
  static FeatureStore load(const std::string& bin_path);
  static void save(const std::string& bin_path,
                   const std::vector<std::string>& ids,
                   const std::vector<Tensor>& features);

  size_t count() const { return ids_.size(); }
  size_t dim() const { return dim_; }
  bool contains(const std::string& id) const {
    return index_.find(id) != index_.end();
  }
  // Feature vector for a record id, widened to doubles (exact). Unknown
  // ids are a lookup error naming the id.
  Tensor features_of(const std::string& id) const;

 private:
  size_t dim_ = 0;
  std::vector<float> data_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, size_t> index_;
};

// JSON Lines ingestion. Each record carries "id", "title", "description",
// "anp", "anp_score", and exactly one of "features" (inline array) or
// "features_ref" (id into `store`). Optional fields: "tags", and the
// fields split files add back ("label", "ids", "true_length",
// "text_features"). Labels are computed from anp_score unless the record
// carries one. Malformed lines raise parse errors naming the line; a
// features_ref with no store supplied is a config error; an unknown ref id
// is a lookup error.
std::vector<Datapoint> load_dataset(const std::string& path,
                                    const FeatureStore* store = nullptr);

// Writes records back out as JSON Lines (the split-file format): all core
// fields plus label, encoded ids, and text features when present.
void save_dataset(const std::string& path,
                  const std::vector<Datapoint>& data);

// Keeps records whose title + description contain at least `min_words`
// whitespace-separated words combined. Order-preserving and idempotent.
std::vector<Datapoint> filter_min_words(const std::vector<Datapoint>& data,
                                        size_t min_words = 10);

// Drops neutral-labeled records (two-class experiments).
std::vector<Datapoint> drop_neutral(const std::vector<Datapoint>& data);

// Seeded downsampling of every class to the smallest present class size.
// Surviving records keep their original relative order.
std::vector<Datapoint> balance_classes(const std::vector<Datapoint>& data,
                                       uint64_t seed);

struct SplitConfig {
  double train_fraction = 0.70;
  double val_fraction = 0.20;
  double test_fraction = 0.10;
  uint64_t seed = 0;
};

struct DataSplit {
  std::vector<Datapoint> train;
  std::vector<Datapoint> val;
  std::vector<Datapoint> test;
};

// Seeded shuffle, then sizes floor(train*n), floor(val*n), remainder.
// Fractions must be positive and sum to 1; |data| must be at least 10.
DataSplit split_dataset(const std::vector<Datapoint>& data,
                        const SplitConfig& cfg);

// Batch index order for one epoch: a seeded reshuffle of 0..n-1 (the
// shuffle depends on both seed and epoch) chunked into batch_size groups,
// final short batch included.
std::vector<std::vector<size_t>> epoch_batches(size_t n, size_t batch_size,
                                               uint64_t seed, uint64_t epoch);

// Token -> vector table (GloVe-style). std::map keeps iteration
// deterministic.
struct EmbeddingTable {
  size_t dim = 0;
  std::map<std::string, Tensor> vectors;

  bool contains(const std::string& token) const {
    return vectors.find(token) != vectors.end();
  }
  // Vector for a token; unknown tokens are a lookup error naming the token.
  const Tensor& at(const std::string& token) const;
};

// GloVe text format: one "token v1 ... v<dim>" line per token. A line with
// the wrong number of values is a parse error naming the line; duplicate
// tokens keep the last occurrence; an empty file yields an empty table.
EmbeddingTable load_glove(const std::string& path, size_t dim);

}  // namespace sentifuse

#endif
