#pragma once

#include <span>
#include <vector>

#include "triage/strategies.hpp"
#include "triage/train.hpp"

namespace triage {

// Tokenized view of the labelled instances of a corpus, assembled once and
// shared by every strategy.
struct PreparedInstance {
  std::size_t corpus_index = 0;
  int label = 0;
  AssembledInstance assembled;
};

std::vector<PreparedInstance> prepare_instances(const Corpus& corpus, std::span<const std::size_t> indices,
                                                const Tokenizer& tokenizer);

// Training examples for a strategy: one per document for brute force (each
// document carries its instance's label), one per instance otherwise.
std::vector<Example> build_examples(const Corpus& corpus, std::span<const PreparedInstance> prepared,
                                    const Tokenizer& tokenizer, Strategy strategy,
                                    const StrategyOptions& options);

// At most `cap` examples per class, drawn without replacement; order kept.
std::vector<Example> subsample_per_class(std::span<const Example> examples, std::size_t cap,
                                         std::uint64_t seed);

struct EvalOutput {
  std::vector<std::string> ids;
  std::vector<int> predictions;
  std::vector<int> gold;
  std::vector<std::size_t> lengths;  // assembled token length
  std::size_t routed = 0;            // zero-document instances sent to concat_512 under brute force
};

// Instance-level predictions of a strategy. Zero-document instances cannot
// vote and are routed to concat_512 under brute force.
EvalOutput evaluate_strategy(const Corpus& corpus, std::span<const PreparedInstance> prepared,
                             const EncoderModel<float>& model, const Tokenizer& tokenizer, Strategy strategy,
                             StrategyOptions options, int threads = 1);

}  // namespace triage
