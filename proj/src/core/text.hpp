#ifndef SENTIFUSE_CORE_TEXT_HPP
#define SENTIFUSE_CORE_TEXT_HPP

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace sentifuse {

// Fixed encoded length for every text sequence: longer token lists are
// truncated, shorter ones are postpadded with the padding index 0.
inline constexpr size_t kSequenceLength = 101;

// Reserved vocabulary indices. Real tokens start at index 2.
inline constexpr int32_t kPadIndex = 0;
inline constexpr int32_t kUnkIndex = 1;

// Tokenize a record's text: the title and description are joined with a
// lone period token, lowercased, and split on whitespace. Leading and
// trailing punctuation characters detach as standalone single-character
// tokens (internal punctuation such as apostrophes stays put). A remaining
// core token that looks like a URL (scheme:// or www.) becomes the literal
// token "href"; one of the form rel=... becomes "rel".
std::vector<std::string> tokenize(const std::string& title,
                                  const std::string& description);

// Token -> dense integer index map. Index 0 is padding, index 1 is the
// unknown token; real tokens occupy 2..size()-1 ordered by descending
// corpus frequency with lexicographic tie-break.
class Vocabulary {
 public:
  Vocabulary() = default;

  // Counts every token in the corpus and assigns indices by frequency.
  // max_tokens caps the number of real tokens kept (0 = no cap).
  // Throws a contract error on an empty corpus.
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus,
                          size_t max_tokens = 0);

  // Total number of indices, reserved ones included (so at least 2).
  size_t size() const { return tokens_.size() + 2; }

  bool contains(const std::string& token) const {
    return index_.find(token) != index_.end();
  }

  // Index of a token; unknown tokens map to kUnkIndex.
  int32_t index_of(const std::string& token) const;

  // Token at an index. Reserved indices yield the sentinels "<pad>" and
  // "<unk>"; an index outside [0, size()) is an error.
  const std::string& token_at(int32_t index) const;

  // One "token<TAB>index" line per real token, in index order. A saved
  // file reloads to a vocabulary that saves to identical bytes.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> tokens_;  // tokens_[i] has index i + 2
  std::unordered_map<std::string, int32_t> index_;
};

// A fixed-length encoded sequence: exactly kSequenceLength indices, zero
// padded past true_length.
struct EncodedSequence {
  std::array<int32_t, kSequenceLength> ids{};
  size_t true_length = 0;
};

// Map tokens to indices (unknown -> 1), truncate to kSequenceLength,
// postpad with 0.
EncodedSequence encode_sequence(const Vocabulary& vocab,
                                const std::vector<std::string>& tokens);

// Tokens for the first true_length indices of an encoded sequence.
std::vector<std::string> decode_sequence(const Vocabulary& vocab,
                                         const EncodedSequence& seq);

}  // namespace sentifuse

#endif
