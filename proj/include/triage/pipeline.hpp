#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "triage/checkpoint.hpp"
#include "triage/dataset.hpp"
#include "triage/metrics.hpp"

namespace triage {

// Everything needed to train one strategy on one corpus split.
struct ExperimentConfig {
  ModelConfig model;  // vocab_size and head are overridden per run
  TrainConfig train;
  StrategyOptions options;
  double eval_fraction = 0.2;
  std::uint64_t split_seed = 11;
  int lora_rank = 0;
  std::vector<LoraTarget> lora_targets = {LoraTarget::Query, LoraTarget::Key, LoraTarget::Value};
  std::size_t per_class_cap = 0;  // 0 keeps every training example
  int threads = 1;
};

// Sections "model", "train", "strategy", "split" and "lora"; absent keys keep
// their defaults. Throws ConfigError.
ExperimentConfig experiment_config_from_json(std::string_view text);
std::string experiment_config_to_json(const ExperimentConfig& config);

// Methods A and B classify with the pooled head, C with label attention.
HeadKind default_head(Strategy strategy);

struct PreparedSplit {
  std::vector<PreparedInstance> train;
  std::vector<PreparedInstance> eval;
};

// Labelled instances, patient-disjoint split, tokenized and assembled.
PreparedSplit prepare_split(const Corpus& corpus, const Tokenizer& tokenizer, double eval_fraction,
                            std::uint64_t seed);

struct TrainOutcome {
  EncoderModel<float> model;
  FitResult fit;
  std::size_t train_examples = 0;
};

// Trains a model for `strategy`, early-stopping on instance-level macro F1
// over the eval split. With `base`, its encoder is reused under a fresh head
// (and LoRA adapters when lora_rank > 0).
TrainOutcome train_strategy(const Corpus& corpus, const PreparedSplit& split, const Tokenizer& tokenizer,
                            Strategy strategy, const ExperimentConfig& config,
                            const EncoderModel<float>* base = nullptr, std::ostream* log = nullptr);

struct StrategyEvaluation {
  Strategy strategy = Strategy::SegmentBatch;
  EvalOutput output;
  MetricsReport metrics;
  std::vector<StratumResult> strata;
};

StrategyEvaluation evaluate_split(const Corpus& corpus, std::span<const PreparedInstance> prepared,
                                  const EncoderModel<float>& model, const Tokenizer& tokenizer,
                                  Strategy strategy, const StrategyOptions& options, int threads = 1);

CheckpointMeta checkpoint_meta(const Tokenizer& tokenizer, Strategy strategy, const StrategyOptions& options,
                               std::string extra_json = "{}");

}  // namespace triage
