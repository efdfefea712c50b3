#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "triage/corpus.hpp"
#include "triage/tokenizer.hpp"

namespace triage {

struct TokenSequence {
  std::vector<TokenId> ids;

  std::size_t length() const { return ids.size(); }
  bool operator==(const TokenSequence&) const = default;
};

// Where an assembled token came from. Special tokens carry document = -1.
struct TokenOrigin {
  int document = -1;  // index into Instance::documents (chronological order)
  std::size_t begin = 0;
  std::size_t end = 0;  // byte range in the cleaned document text
};

struct AssembledInstance {
  TokenSequence tokens;
  std::vector<TokenOrigin> origins;         // one per token
  std::vector<std::string> cleaned_texts;   // per document, chronological order
};

// sequence_start, then documents most recent first, joined by separators.
AssembledInstance assemble_instance(const Instance& instance, const Tokenizer& tokenizer);

// sequence_start followed by the tokens of a single document.
TokenSequence document_sequence(const ClinicalDocument& document, const Tokenizer& tokenizer);

// Keeps the first min(n, max_len) ids.
TokenSequence truncate(const TokenSequence& seq, std::size_t max_len);

// Fixed-size non-overlapping segments; only the final one is padded.
struct SegmentBatch {
  std::size_t segment_size = 0;
  std::size_t original_length = 0;
  std::vector<TokenId> ids;       // count() x segment_size, row-major
  std::vector<std::uint8_t> mask; // 1 for real tokens

  std::size_t count() const { return segment_size == 0 ? 0 : ids.size() / segment_size; }
  std::span<const TokenId> segment_ids(std::size_t k) const {
    return std::span<const TokenId>(ids).subspan(k * segment_size, segment_size);
  }
  std::span<const std::uint8_t> segment_mask(std::size_t k) const {
    return std::span<const std::uint8_t>(mask).subspan(k * segment_size, segment_size);
  }
  std::size_t padding() const { return ids.size() - original_length; }
};

inline constexpr std::size_t kMinSegmentSize = 8;

SegmentBatch segment(const TokenSequence& seq, std::size_t segment_size,
                     TokenId pad_id = Tokenizer::kPad);

// Concatenates the unmasked positions in order.
TokenSequence desegment(const SegmentBatch& batch);

}  // namespace triage
