#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "triage/encoder.hpp"
#include "triage/sequence.hpp"

namespace triage {

enum class Strategy { BruteForce, Concat512, Concat4096, SegmentBatch };

inline constexpr Strategy kAllStrategies[] = {Strategy::BruteForce, Strategy::Concat512,
                                              Strategy::Concat4096, Strategy::SegmentBatch};

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view s);  // throws ArgumentError

struct StrategyOptions {
  std::size_t document_max_len = 512;
  std::size_t segment_size = 512;
  std::size_t max_total_tokens = 12000;
  // Pad inference inputs to fixed shapes the way a batched encoder would:
  // documents and concat_512 inputs to 512, concat_4096 inputs to a multiple
  // of 512, segments to s. Outputs are unaffected; only cost changes.
  bool fixed_shape = true;
};

inline constexpr std::size_t kPadMultiple = 512;

// 512 for concat_512, 4096 for concat_4096, 0 otherwise.
std::size_t concat_max_len(Strategy s);

struct TriageRecommendation {
  std::vector<double> probabilities;  // over teams, sums to 1
  Team predicted = Team::ED;
  // T x n label-aware attention over the tokens fed to the head.
  std::optional<Eigen::MatrixXd> per_label_attention;
};

struct Vote {
  std::size_t document = 0;  // chronological document index
  Team team = Team::ED;
  std::vector<double> probabilities;
};

struct VoteRecord {
  std::vector<Vote> votes;
  Team modal_team = Team::ED;
  bool tie_broken = false;
};

// Modal vote; ties go to the team with the largest summed probability over
// all votes, then to the lowest team id.
VoteRecord tally_votes(std::vector<Vote> votes);

// Shared recommendation builder: softmax over logits, argmax as prediction.
TriageRecommendation recommendation_from_logits(const RowVector<float>& logits);

// Pooled or label-attention head over the given states.
struct HeadOutput {
  RowVector<float> logits;
  std::optional<LabelAttentionOutput<float>> attention;
};
HeadOutput apply_head(const EncoderModel<float>& model, const Matrix<float>& states);

struct BruteForceResult {
  TriageRecommendation recommendation;
  VoteRecord votes;
};

// Method A: one vote per document. Throws ArgumentError on zero documents.
BruteForceResult infer_brute_force(const Instance& instance, const EncoderModel<float>& model,
                                   const Tokenizer& tokenizer, const StrategyOptions& options = {});

// Method B: reverse-chronological concatenation, head truncation to max_len.
TriageRecommendation infer_concat_truncate(const Instance& instance, const EncoderModel<float>& model,
                                           const Tokenizer& tokenizer, std::size_t max_len,
                                           const StrategyOptions& options = {});

struct SegmentBatchResult {
  TriageRecommendation recommendation;
  AssembledInstance assembled;     // full assembly before any cap
  std::size_t used_tokens = 0;     // tokens fed to the encoder
  bool capped = false;             // head-truncated to max_total_tokens
  Matrix<float> states;            // used_tokens x d
  std::optional<LabelAttentionOutput<float>> head;
};

// Method C: segment, encode segments as one batch, re-join unpadded states
// in order and classify.
SegmentBatchResult infer_segment_batch(const Instance& instance, const EncoderModel<float>& model,
                                       const Tokenizer& tokenizer, std::size_t segment_size,
                                       const StrategyOptions& options = {});

// Tokens a strategy feeds to the encoder for one instance: a row per document
// (brute force), one row (concat), or the segments (segment batch).
std::vector<TokenSequence> strategy_rows(const AssembledInstance& assembled, const Instance& instance,
                                         const Tokenizer& tokenizer, Strategy strategy,
                                         const StrategyOptions& options);

struct StrategyResult {
  Strategy strategy = Strategy::SegmentBatch;
  TriageRecommendation recommendation;
  std::optional<VoteRecord> votes;
};

StrategyResult run_strategy(Strategy strategy, const Instance& instance, const EncoderModel<float>& model,
                            const Tokenizer& tokenizer, const StrategyOptions& options = {});

// {strategy, probabilities, predicted, votes?, attention_ref?}
std::string strategy_result_to_json(const StrategyResult& result, std::string_view attention_ref = {});

}  // namespace triage
