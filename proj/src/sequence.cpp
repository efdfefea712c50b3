#include "triage/sequence.hpp"

#include "triage/errors.hpp"
#include "triage/text.hpp"

namespace triage {

AssembledInstance assemble_instance(const Instance& instance, const Tokenizer& tokenizer) {
  AssembledInstance out;
  out.tokens.ids.push_back(Tokenizer::kSequenceStart);
  out.origins.push_back({});
  out.cleaned_texts.reserve(instance.documents.size());
  for (const ClinicalDocument& doc : instance.documents) {
    out.cleaned_texts.push_back(clean_text(doc.text));
  }
  const auto count = static_cast<int>(instance.documents.size());
  for (int d = count - 1; d >= 0; --d) {
    if (d != count - 1) {
      out.tokens.ids.push_back(Tokenizer::kSeparator);
      out.origins.push_back({});
    }
    for (const TokenPiece& piece :
         tokenizer.encode_with_offsets(out.cleaned_texts[static_cast<std::size_t>(d)])) {
      out.tokens.ids.push_back(piece.id);
      out.origins.push_back({d, piece.begin, piece.end});
    }
  }
  return out;
}

TokenSequence document_sequence(const ClinicalDocument& document, const Tokenizer& tokenizer) {
  TokenSequence seq;
  seq.ids.push_back(Tokenizer::kSequenceStart);
  const auto ids = tokenizer.encode(clean_text(document.text));
  seq.ids.insert(seq.ids.end(), ids.begin(), ids.end());
  return seq;
}

TokenSequence truncate(const TokenSequence& seq, std::size_t max_len) {
  if (max_len < 1) throw ArgumentError("truncate: max_len must be >= 1");
  TokenSequence out;
  const std::size_t n = std::min(seq.ids.size(), max_len);
  out.ids.assign(seq.ids.begin(), seq.ids.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

SegmentBatch segment(const TokenSequence& seq, std::size_t segment_size, TokenId pad_id) {
  if (segment_size < kMinSegmentSize) {
    throw ArgumentError("segment size must be at least " + std::to_string(kMinSegmentSize));
  }
  SegmentBatch batch;
  batch.segment_size = segment_size;
  batch.original_length = seq.ids.size();
  const std::size_t k = std::max<std::size_t>(1, (seq.ids.size() + segment_size - 1) / segment_size);
  batch.ids.assign(k * segment_size, pad_id);
  batch.mask.assign(k * segment_size, 0);
  std::copy(seq.ids.begin(), seq.ids.end(), batch.ids.begin());
  std::fill(batch.mask.begin(), batch.mask.begin() + static_cast<std::ptrdiff_t>(seq.ids.size()), 1);
  return batch;
}

TokenSequence desegment(const SegmentBatch& batch) {
  TokenSequence out;
  out.ids.reserve(batch.original_length);
  for (std::size_t i = 0; i < batch.ids.size(); ++i) {
    if (batch.mask[i]) out.ids.push_back(batch.ids[i]);
  }
  return out;
}

}  // namespace triage
