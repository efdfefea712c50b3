#pragma once

#include <optional>
#include <string>
#include <vector>

#include "triage/projection.hpp"
#include "triage/strategies.hpp"

namespace triage {

struct ExplanationSpan {
  int document = 0;           // chronological index into the instance's documents
  std::size_t char_start = 0;  // byte offsets into the cleaned document text
  std::size_t char_end = 0;
  std::size_t token_index = 0;  // position in the assembled sequence
  double weight = 0;            // soft-maxed attention for the shown label
  double display_weight = 0;    // min-max rescaled over the instance's spans
  std::vector<double> label_weights;  // raw attention for every team
};

struct ExplainedDocument {
  std::string doc_id;
  std::string timestamp;
  std::string cleaned_text;
};

struct ExplanationBundle {
  std::string instance_id;
  TriageRecommendation recommendation;  // attention matrix dropped
  Team shown_label = Team::ED;          // row displayed (predicted by default)
  std::vector<ExplainedDocument> documents;  // chronological
  std::vector<ExplanationSpan> spans;
  double excluded_weight = 0;  // attention held by start/separator tokens
  std::size_t token_count = 0;
  bool capped = false;
  std::string normalization =
      "weights are soft-maxed per label over all input tokens; spans omit start and separator "
      "tokens, whose total is excluded_weight; display_weight is a per-instance min-max rescale";
};

// Runs the segment-batch path and maps the label-attention row back to the
// source documents. Throws StateError for pooled-head models.
ExplanationBundle explain_instance(const Instance& instance, const EncoderModel<float>& model,
                                   const Tokenizer& tokenizer, const StrategyOptions& options = {},
                                   std::optional<Team> label = std::nullopt);

// Same, from an already computed segment-batch result.
ExplanationBundle explain_segment_result(const Instance& instance, SegmentBatchResult result,
                                         std::optional<Team> label = std::nullopt);

std::string explanation_to_json(const ExplanationBundle& bundle);

// The label-attention value vector of the predicted label, one row per
// instance. Requires a label-attention head.
Eigen::RowVectorXd instance_embedding(const Instance& instance, const EncoderModel<float>& model,
                                      const Tokenizer& tokenizer, const StrategyOptions& options = {});
Eigen::MatrixXd embed_training_set(const Corpus& corpus, std::span<const std::size_t> indices,
                                   const EncoderModel<float>& model, const Tokenizer& tokenizer,
                                   const StrategyOptions& options = {});

}  // namespace triage
