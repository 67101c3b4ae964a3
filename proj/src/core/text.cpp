#include "core/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "core/error.hpp"

namespace sentifuse {

namespace {

bool is_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

// URL shapes handled: an alphabetic scheme followed by "://", or a bare
// www. prefix. Checked on the lowercased core token after punctuation
// detachment.
bool looks_like_url(const std::string& t) {
  if (t.rfind("www.", 0) == 0 && t.size() > 4) return true;
  const size_t pos = t.find("://");
  if (pos == std::string::npos || pos == 0 || pos + 3 >= t.size()) {
    return false;
  }
  for (size_t i = 0; i < pos; ++i) {
    const char c = t[i];
    const bool scheme_char = (c >= 'a' && c <= 'z') ||
                             (i > 0 && ((c >= '0' && c <= '9') || c == '+' ||
                                        c == '-' || c == '.'));
    if (!scheme_char) return false;
  }
  return true;
}

bool looks_like_rel_attr(const std::string& t) {
  return t.rfind("rel=", 0) == 0;
}

// Split one whitespace-delimited word into up to three parts: leading
// punctuation characters, the core, trailing punctuation characters. The
// core is then rewritten by the URL / rel rules.
void emit_word(const std::string& word, std::vector<std::string>& out) {
  size_t begin = 0;
  size_t end = word.size();
  while (begin < end && is_punct(word[begin])) ++begin;
  while (end > begin && is_punct(word[end - 1])) --end;

  for (size_t i = 0; i < begin; ++i) out.push_back(std::string(1, word[i]));

  if (begin < end) {
    std::string core = word.substr(begin, end - begin);
    if (looks_like_url(core)) {
      out.push_back("href");
    } else if (looks_like_rel_attr(core)) {
      out.push_back("rel");
    } else {
      out.push_back(std::move(core));
    }
  }

  for (size_t i = end; i < word.size(); ++i) {
    out.push_back(std::string(1, word[i]));
  }
}

const std::string kPadToken = "<pad>";
const std::string kUnkToken = "<unk>";

}  // namespace

std::vector<std::string> tokenize(const std::string& title,
                                  const std::string& description) {
  std::string combined = title + " . " + description;
  std::transform(combined.begin(), combined.end(), combined.begin(),
                 [](unsigned char c) { return std::tolower(c); });

  std::vector<std::string> tokens;
  std::istringstream stream(combined);
  std::string word;
  while (stream >> word) emit_word(word, tokens);
  return tokens;
}

Vocabulary Vocabulary::build(
    const std::vector<std::vector<std::string>>& corpus, size_t max_tokens) {
  if (corpus.empty()) {
    throw Error(ErrCode::Contract, "Vocabulary::build: empty corpus");
  }

  // std::map keys are already in lexicographic order, which is exactly the
  // tie-break needed once entries are stably sorted by count.
  std::map<std::string, uint64_t> counts;
  for (const auto& doc : corpus) {
    for (const auto& token : doc) ++counts[token];
  }

  std::vector<std::pair<std::string, uint64_t>> entries(counts.begin(),
                                                        counts.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;
                   });
  if (max_tokens > 0 && entries.size() > max_tokens) {
    entries.resize(max_tokens);
  }

  Vocabulary v;
  v.tokens_.reserve(entries.size());
  for (const auto& [token, count] : entries) {
    (void)count;
    v.index_.emplace(token, static_cast<int32_t>(v.tokens_.size() + 2));
    v.tokens_.push_back(token);
  }
  return v;
}

int32_t Vocabulary::index_of(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? kUnkIndex : it->second;
}

const std::string& Vocabulary::token_at(int32_t index) const {
  if (index == kPadIndex) return kPadToken;
  if (index == kUnkIndex) return kUnkToken;
  const size_t slot = static_cast<size_t>(index) - 2;
  if (index < 0 || slot >= tokens_.size()) {
    throw Error(ErrCode::OutOfRange,
                "Vocabulary::token_at: index " + std::to_string(index) +
                    " outside [0, " + std::to_string(size()) + ")");
  }
  return tokens_[slot];
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrCode::Io, "Vocabulary::save: cannot open " + path);
  }
  for (size_t i = 0; i < tokens_.size(); ++i) {
    out << tokens_[i] << '\t' << i + 2 << '\n';
  }
  if (!out) {
    throw Error(ErrCode::Io, "Vocabulary::save: write failed for " + path);
  }
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrCode::Io, "Vocabulary::load: cannot open " + path);
  }
  Vocabulary v;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw Error(ErrCode::Parse, "Vocabulary::load: " + path + ":" +
                                      std::to_string(line_no) +
                                      ": expected token<TAB>index");
    }
    std::string token = line.substr(0, tab);
    int32_t index = 0;
    try {
      size_t used = 0;
      index = std::stoi(line.substr(tab + 1), &used);
      if (tab + 1 + used != line.size()) {
        throw std::invalid_argument("trailing characters");
      }
    } catch (const std::exception&) {
      throw Error(ErrCode::Parse, "Vocabulary::load: " + path + ":" +
                                      std::to_string(line_no) +
                                      ": bad index field");
    }
    const int32_t expected = static_cast<int32_t>(v.tokens_.size() + 2);
    if (index != expected) {
      throw Error(ErrCode::Parse,
                  "Vocabulary::load: " + path + ":" + std::to_string(line_no) +
                      ": expected index " + std::to_string(expected) +
                      ", found " + std::to_string(index));
    }
    if (v.index_.count(token) > 0) {
      throw Error(ErrCode::Parse, "Vocabulary::load: " + path + ":" +
                                      std::to_string(line_no) +
                                      ": duplicate token '" + token + "'");
    }
    v.index_.emplace(token, index);
    v.tokens_.push_back(std::move(token));
  }
  return v;
}

EncodedSequence encode_sequence(const Vocabulary& vocab,
                                const std::vector<std::string>& tokens) {
  EncodedSequence seq;
  seq.true_length = std::min(tokens.size(), kSequenceLength);
  for (size_t i = 0; i < seq.true_length; ++i) {
    seq.ids[i] = vocab.index_of(tokens[i]);
  }
  // Remaining entries are already kPadIndex via value initialization.
  return seq;
}

std::vector<std::string> decode_sequence(const Vocabulary& vocab,
                                         const EncodedSequence& seq) {
  if (seq.true_length > kSequenceLength) {
    throw Error(ErrCode::Contract,
                "decode_sequence: true_length " +
                    std::to_string(seq.true_length) + " exceeds " +
                    std::to_string(kSequenceLength));
  }
  std::vector<std::string> tokens;
  tokens.reserve(seq.true_length);
  for (size_t i = 0; i < seq.true_length; ++i) {
    tokens.push_back(vocab.token_at(seq.ids[i]));
  }
  return tokens;
}

}  // namespace sentifuse
