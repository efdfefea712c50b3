#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "triage/corpus.hpp"

namespace triage {

using TokenId = std::int32_t;

// One token of an encoded string with its byte range in that string.
struct TokenPiece {
  TokenId id = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// A whitespace/punctuation pre-token of the input text.
struct PreToken {
  std::string_view text;
  std::size_t begin = 0;
};

// Words are maximal runs of ASCII alphanumerics and non-ASCII code points;
// every other printable ASCII character is a single-character token.
std::vector<PreToken> pre_tokenize(std::string_view text);

// Word-level vocabulary with per-character fallback. Words outside the
// vocabulary are spelled as character tokens; characters outside the
// vocabulary map to the unknown id.
class Tokenizer {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnknown = 1;
  static constexpr TokenId kSequenceStart = 2;
  static constexpr TokenId kSeparator = 3;
  static constexpr std::size_t kSpecialCount = 4;
  static constexpr int kFormatVersion = 1;

  explicit Tokenizer(std::vector<std::string> vocabulary);

  std::size_t vocab_size() const { return vocabulary_.size(); }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  const std::string& token(TokenId id) const;
  // Returns kUnknown when absent.
  TokenId id_of(std::string_view token) const;
  bool is_special(TokenId id) const { return id >= 0 && id < static_cast<TokenId>(kSpecialCount); }

  std::vector<TokenPiece> encode_with_offsets(std::string_view text) const;
  std::vector<TokenId> encode(std::string_view text) const;
  std::size_t count_tokens(std::string_view text) const;
  // Non-special tokens joined by single spaces.
  std::string decode(std::span<const TokenId> ids) const;

  std::string serialize() const;
  static Tokenizer deserialize(std::string_view data);
  void save(const std::string& path) const;
  static Tokenizer load(const std::string& path);
  // SHA-256 of the serialized form.
  std::string hash() const;

 private:
  std::vector<std::string> vocabulary_;
  std::unordered_map<std::string, TokenId> index_;
};

// Deterministic in (texts, vocab_size): specials, then every observed
// character by descending frequency, then whole words by descending frequency
// (ties broken lexicographically). Texts are cleaned first.
Tokenizer train_tokenizer(std::span<const std::string> texts, std::size_t vocab_size);
Tokenizer train_tokenizer(const Corpus& corpus, std::size_t vocab_size);

}  // namespace triage
