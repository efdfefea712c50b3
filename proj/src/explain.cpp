#include "triage/explain.hpp"

#include <algorithm>
#include <json.hpp>

#include "triage/errors.hpp"

namespace triage {

using ojson = nlohmann::ordered_json;

namespace {

void require_label_attention(const EncoderModel<float>& model) {
  if (model.config().head != HeadKind::LabelAttention) {
    throw StateError("explanations need a label_attention head; this model uses " +
                     std::string(to_string(model.config().head)));
  }
}

}  // namespace

ExplanationBundle explain_instance(const Instance& instance, const EncoderModel<float>& model,
                                   const Tokenizer& tokenizer, const StrategyOptions& options,
                                   std::optional<Team> label) {
  require_label_attention(model);
  StrategyOptions o = options;
  o.fixed_shape = false;
  return explain_segment_result(instance, infer_segment_batch(instance, model, tokenizer, o.segment_size, o), label);
}

ExplanationBundle explain_segment_result(const Instance& instance, SegmentBatchResult r, std::optional<Team> label) {
  if (!r.recommendation.per_label_attention) throw StateError("segment result carries no label attention");
  ExplanationBundle b;
  b.instance_id = instance.instance_id;
  b.shown_label = label.value_or(r.recommendation.predicted);
  b.token_count = r.used_tokens;
  b.capped = r.capped;
  const Eigen::MatrixXd& attention = *r.recommendation.per_label_attention;
  const auto row = static_cast<Eigen::Index>(team_index(b.shown_label));
  for (std::size_t d = 0; d < instance.documents.size(); ++d) {
    b.documents.push_back({instance.documents[d].doc_id, instance.documents[d].timestamp.iso_timestamp(),
                           r.assembled.cleaned_texts[d]});
  }
  double lo = 1.0;
  double hi = 0.0;
  for (std::size_t t = 0; t < r.used_tokens; ++t) {
    const TokenOrigin& o = r.assembled.origins[t];
    const double w = attention(row, static_cast<Eigen::Index>(t));
    if (o.document < 0) {
      b.excluded_weight += w;
      continue;
    }
    ExplanationSpan s;
    s.document = o.document;
    s.char_start = o.begin;
    s.char_end = o.end;
    s.token_index = t;
    s.weight = w;
    s.label_weights.resize(kTeamCount);
    for (std::size_t k = 0; k < kTeamCount; ++k) s.label_weights[k] = attention(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t));
    lo = std::min(lo, w);
    hi = std::max(hi, w);
    b.spans.push_back(std::move(s));
  }
  for (auto& s : b.spans) s.display_weight = hi > lo ? (s.weight - lo) / (hi - lo) : 1.0;
  b.recommendation = std::move(r.recommendation);
  b.recommendation.per_label_attention.reset();
  return b;
}

std::string explanation_to_json(const ExplanationBundle& b) {
  ojson j;
  j["schema_version"] = 1;
  j["instance_id"] = b.instance_id;
  j["predicted"] = team_code(b.recommendation.predicted);
  ojson probs = ojson::object();
  for (std::size_t t = 0; t < b.recommendation.probabilities.size(); ++t) {
    probs[std::string(team_code(team_from_index(static_cast<int>(t))))] = b.recommendation.probabilities[t];
  }
  j["probabilities"] = probs;
  j["shown_label"] = team_code(b.shown_label);
  j["token_count"] = b.token_count;
  j["capped"] = b.capped;
  j["excluded_weight"] = b.excluded_weight;
  j["normalization"] = b.normalization;
  ojson docs = ojson::array();
  for (std::size_t d = 0; d < b.documents.size(); ++d) {
    docs.push_back({{"index", d},
                    {"doc_id", b.documents[d].doc_id},
                    {"timestamp", b.documents[d].timestamp},
                    {"text", b.documents[d].cleaned_text}});
  }
  j["documents"] = docs;
  ojson spans = ojson::array();
  for (const auto& s : b.spans) {
    spans.push_back({{"document", s.document},
                     {"start", s.char_start},
                     {"end", s.char_end},
                     {"token", s.token_index},
                     {"weight", s.weight},
                     {"display_weight", s.display_weight},
                     {"label_weights", s.label_weights}});
  }
  j["spans"] = spans;
  return j.dump();
}

Eigen::RowVectorXd instance_embedding(const Instance& instance, const EncoderModel<float>& model,
                                      const Tokenizer& tokenizer, const StrategyOptions& options) {
  require_label_attention(model);
  StrategyOptions o = options;
  o.fixed_shape = false;
  SegmentBatchResult r = infer_segment_batch(instance, model, tokenizer, o.segment_size, o);
  const auto row = static_cast<Eigen::Index>(team_index(r.recommendation.predicted));
  return r.head->values.row(row).cast<double>();
}

Eigen::MatrixXd embed_training_set(const Corpus& corpus, std::span<const std::size_t> indices,
                                   const EncoderModel<float>& model, const Tokenizer& tokenizer,
                                   const StrategyOptions& options) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), model.config().hidden);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = instance_embedding(corpus.instances.at(indices[i]), model, tokenizer, options);
  }
  return out;
}

}  // namespace triage
