#include "triage/strategies.hpp"

#include <algorithm>
#include <json.hpp>

#include "triage/errors.hpp"

namespace triage {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::BruteForce: return "brute_force";
    case Strategy::Concat512: return "concat_512";
    case Strategy::Concat4096: return "concat_4096";
    case Strategy::SegmentBatch: return "segment_batch";
  }
  return "segment_batch";
}

Strategy parse_strategy(std::string_view s) {
  for (Strategy x : kAllStrategies) {
    if (to_string(x) == s) return x;
  }
  throw ArgumentError("unknown strategy '" + std::string(s) +
                      "' (expected brute_force, concat_512, concat_4096 or segment_batch)");
}

std::size_t concat_max_len(Strategy s) {
  if (s == Strategy::Concat512) return 512;
  if (s == Strategy::Concat4096) return 4096;
  return 0;
}

VoteRecord tally_votes(std::vector<Vote> votes) {
  if (votes.empty()) throw ArgumentError("no votes to tally");
  std::array<std::size_t, kTeamCount> count{};
  std::array<double, kTeamCount> mass{};
  for (const Vote& v : votes) {
    ++count[static_cast<std::size_t>(team_index(v.team))];
    for (std::size_t t = 0; t < kTeamCount && t < v.probabilities.size(); ++t) mass[t] += v.probabilities[t];
  }
  const std::size_t top = *std::max_element(count.begin(), count.end());
  std::vector<std::size_t> tied;
  for (std::size_t t = 0; t < kTeamCount; ++t)
    if (count[t] == top) tied.push_back(t);
  std::size_t winner = tied.front();
  for (std::size_t t : tied) {
    if (mass[t] > mass[winner]) winner = t;  // strict: equal mass keeps the lower id
  }
  VoteRecord r;
  r.votes = std::move(votes);
  r.modal_team = team_from_index(static_cast<int>(winner));
  r.tie_broken = tied.size() > 1;
  return r;
}

TriageRecommendation recommendation_from_logits(const RowVector<float>& logits) {
  const RowVector<double> p = softmax<double>(logits.cast<double>());
  TriageRecommendation r;
  r.probabilities.assign(p.data(), p.data() + p.size());
  Eigen::Index arg = 0;
  p.maxCoeff(&arg);
  r.predicted = team_from_index(static_cast<int>(arg));
  return r;
}

HeadOutput apply_head(const EncoderModel<float>& model, const Matrix<float>& states) {
  HeadOutput out;
  if (model.config().head == HeadKind::PooledMlp) {
    out.logits = classify_pooled<float>(model, pool<float>(states, model.config().pooling));
  } else {
    out.attention = classify_label_attention<float>(model, states);
    out.logits = out.attention->logits;
  }
  return out;
}

namespace {

std::size_t padded_width(std::size_t n, std::size_t max_len, bool fixed_shape) {
  if (!fixed_shape) return n;
  const std::size_t rounded = (std::max<std::size_t>(n, 1) + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  return std::max(n, std::min(rounded, max_len));
}

// Encodes one sequence padded to `width`; returns the unmasked states.
Matrix<float> encode_one(const EncoderModel<float>& model, const TokenSequence& seq, std::size_t width) {
  EncodeBatch batch = EncodeBatch::from_sequences(std::span<const TokenSequence>(&seq, 1), width);
  return std::move(encode<float>(model, batch).front().states);
}

TokenSequence capped(const TokenSequence& seq, std::size_t cap) { return truncate(seq, cap); }

}  // namespace

std::vector<TokenSequence> strategy_rows(const AssembledInstance& assembled, const Instance& instance,
                                         const Tokenizer& tokenizer, Strategy strategy,
                                         const StrategyOptions& options) {
  std::vector<TokenSequence> rows;
  switch (strategy) {
    case Strategy::BruteForce:
      for (const auto& doc : instance.documents) {
        rows.push_back(truncate(document_sequence(doc, tokenizer), options.document_max_len));
      }
      break;
    case Strategy::Concat512:
    case Strategy::Concat4096:
      rows.push_back(truncate(assembled.tokens, concat_max_len(strategy)));
      break;
    case Strategy::SegmentBatch: {
      const TokenSequence seq = capped(assembled.tokens, options.max_total_tokens);
      const SegmentBatch batch = segment(seq, options.segment_size);
      for (std::size_t k = 0; k < batch.count(); ++k) {
        TokenSequence row;
        auto ids = batch.segment_ids(k);
        auto mask = batch.segment_mask(k);
        for (std::size_t j = 0; j < ids.size(); ++j)
          if (mask[j]) row.ids.push_back(ids[j]);
        if (!row.ids.empty()) rows.push_back(std::move(row));
      }
      break;
    }
  }
  return rows;
}

BruteForceResult infer_brute_force(const Instance& instance, const EncoderModel<float>& model,
                                   const Tokenizer& tokenizer, const StrategyOptions& options) {
  if (instance.documents.empty()) {
    throw ArgumentError("brute_force: instance " + instance.instance_id + " has no documents to vote");
  }
  std::vector<TokenSequence> rows;
  std::size_t width = 0;
  for (const auto& doc : instance.documents) {
    rows.push_back(truncate(document_sequence(doc, tokenizer), options.document_max_len));
    width = std::max(width, rows.back().length());
  }
  if (options.fixed_shape) width = std::max(width, options.document_max_len);
  // All documents go through the encoder as one padded batch.
  const auto outputs = encode<float>(model, EncodeBatch::from_sequences(rows, width));
  std::vector<Vote> votes;
  std::vector<double> mean(kTeamCount, 0.0);
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const HeadOutput head = apply_head(model, outputs[i].states);
    TriageRecommendation r = recommendation_from_logits(head.logits);
    for (std::size_t t = 0; t < kTeamCount; ++t) mean[t] += r.probabilities[t] / static_cast<double>(outputs.size());
    votes.push_back({i, r.predicted, std::move(r.probabilities)});
  }
  BruteForceResult out;
  out.votes = tally_votes(std::move(votes));
  out.recommendation.probabilities = std::move(mean);
  out.recommendation.predicted = out.votes.modal_team;
  return out;
}

TriageRecommendation infer_concat_truncate(const Instance& instance, const EncoderModel<float>& model,
                                           const Tokenizer& tokenizer, std::size_t max_len,
                                           const StrategyOptions& options) {
  if (max_len > static_cast<std::size_t>(model.config().max_positions)) {
    throw ArgumentError("concat: max_len " + std::to_string(max_len) + " exceeds model max positions");
  }
  const AssembledInstance assembled = assemble_instance(instance, tokenizer);
  const TokenSequence seq = truncate(assembled.tokens, max_len);
  const Matrix<float> states = encode_one(model, seq, padded_width(seq.length(), max_len, options.fixed_shape));
  const HeadOutput head = apply_head(model, states);
  TriageRecommendation r = recommendation_from_logits(head.logits);
  if (head.attention) r.per_label_attention = head.attention->attention.cast<double>();
  return r;
}

SegmentBatchResult infer_segment_batch(const Instance& instance, const EncoderModel<float>& model,
                                       const Tokenizer& tokenizer, std::size_t segment_size,
                                       const StrategyOptions& options) {
  SegmentBatchResult out;
  out.assembled = assemble_instance(instance, tokenizer);
  const TokenSequence seq = capped(out.assembled.tokens, options.max_total_tokens);
  out.capped = seq.length() < out.assembled.tokens.length();
  out.used_tokens = seq.length();
  const SegmentBatch batch = segment(seq, segment_size);
  std::vector<EncoderOutput<float>> encoded;
  if (options.fixed_shape) {
    encoded = encode<float>(model, EncodeBatch::from_segments(batch));
  } else {
    for (std::size_t k = 0; k < batch.count(); ++k) {
      TokenSequence row;
      for (std::size_t j = 0; j < segment_size; ++j)
        if (batch.segment_mask(k)[j]) row.ids.push_back(batch.segment_ids(k)[j]);
      EncoderOutput<float> o;
      o.states = encode_one(model, row, row.length());
      encoded.push_back(std::move(o));
    }
  }
  // Re-join the per-segment states in sequence order, dropping pads.
  out.states.resize(static_cast<Eigen::Index>(seq.length()), model.config().hidden);
  Eigen::Index at = 0;
  for (const auto& e : encoded) {
    out.states.middleRows(at, e.states.rows()) = e.states;
    at += e.states.rows();
  }
  const HeadOutput head = apply_head(model, out.states);
  out.recommendation = recommendation_from_logits(head.logits);
  if (head.attention) {
    out.recommendation.per_label_attention = head.attention->attention.cast<double>();
    out.head = head.attention;
  }
  return out;
}

StrategyResult run_strategy(Strategy strategy, const Instance& instance, const EncoderModel<float>& model,
                            const Tokenizer& tokenizer, const StrategyOptions& options) {
  StrategyResult r;
  r.strategy = strategy;
  switch (strategy) {
    case Strategy::BruteForce: {
      auto bf = infer_brute_force(instance, model, tokenizer, options);
      r.recommendation = std::move(bf.recommendation);
      r.votes = std::move(bf.votes);
      break;
    }
    case Strategy::Concat512:
    case Strategy::Concat4096:
      r.recommendation = infer_concat_truncate(instance, model, tokenizer, concat_max_len(strategy), options);
      break;
    case Strategy::SegmentBatch:
      r.recommendation = infer_segment_batch(instance, model, tokenizer, options.segment_size, options).recommendation;
      break;
  }
  return r;
}

std::string strategy_result_to_json(const StrategyResult& result, std::string_view attention_ref) {
  ojson j;
  j["strategy"] = to_string(result.strategy);
  ojson probs = ojson::object();
  for (std::size_t t = 0; t < result.recommendation.probabilities.size(); ++t) {
    probs[std::string(team_code(team_from_index(static_cast<int>(t))))] = result.recommendation.probabilities[t];
  }
  j["probabilities"] = probs;
  j["predicted"] = team_code(result.recommendation.predicted);
  if (result.votes) {
    ojson votes = ojson::array();
    for (const Vote& v : result.votes->votes) {
      votes.push_back({{"document", v.document}, {"team", team_code(v.team)}, {"probabilities", v.probabilities}});
    }
    j["votes"] = {{"entries", votes},
                  {"modal_team", team_code(result.votes->modal_team)},
                  {"tie_broken", result.votes->tie_broken}};
  }
  if (!attention_ref.empty()) j["attention_ref"] = attention_ref;
  return j.dump();
}

}  // namespace triage
