#include "triage/pipeline.hpp"

#include <json.hpp>

#include "triage/errors.hpp"

namespace triage {

using ojson = nlohmann::ordered_json;

namespace {

template <typename T>
void read(const ojson& section, const char* key, T& field) {
  if (section.contains(key)) field = section.at(key).get<T>();
}

LoraTarget parse_lora_target(const std::string& s) {
  for (LoraTarget t : {LoraTarget::Query, LoraTarget::Key, LoraTarget::Value}) {
    if (to_string(t) == s) return t;
  }
  throw ConfigError("unknown LoRA target '" + s + "'");
}

}  // namespace

ExperimentConfig experiment_config_from_json(std::string_view text) {
  ExperimentConfig c;
  try {
    const ojson j = ojson::parse(text);
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    if (j.contains("model")) c.model = model_config_from_json(j.at("model").dump());
    if (j.contains("train")) {
      const ojson& t = j.at("train");
      read(t, "learning_rate", c.train.learning_rate);
      read(t, "batch_size", c.train.batch_size);
      read(t, "gradient_accumulation_steps", c.train.gradient_accumulation_steps);
      read(t, "warmup_fraction", c.train.warmup_fraction);
      read(t, "max_epochs", c.train.max_epochs);
      read(t, "patience", c.train.patience);
      read(t, "beta1", c.train.beta1);
      read(t, "beta2", c.train.beta2);
      read(t, "epsilon", c.train.epsilon);
      read(t, "weight_decay", c.train.weight_decay);
      read(t, "seed", c.train.seed);
      read(t, "per_class_cap", c.per_class_cap);
      read(t, "threads", c.threads);
    }
    if (j.contains("strategy")) {
      const ojson& s = j.at("strategy");
      read(s, "document_max_len", c.options.document_max_len);
      read(s, "segment_size", c.options.segment_size);
      read(s, "max_total_tokens", c.options.max_total_tokens);
      read(s, "fixed_shape", c.options.fixed_shape);
    }
    if (j.contains("split")) {
      read(j.at("split"), "eval_fraction", c.eval_fraction);
      read(j.at("split"), "seed", c.split_seed);
    }
    if (j.contains("lora")) {
      const ojson& l = j.at("lora");
      read(l, "rank", c.lora_rank);
      if (l.contains("targets")) {
        c.lora_targets.clear();
        for (const auto& t : l.at("targets")) c.lora_targets.push_back(parse_lora_target(t.get<std::string>()));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid experiment config: ") + e.what());
  }
  c.train.validate();
  if (c.eval_fraction <= 0 || c.eval_fraction >= 1) throw ConfigError("split.eval_fraction must be in (0, 1)");
  if (c.lora_rank < 0) throw ConfigError("lora.rank must be non-negative");
  return c;
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
  ojson j;
  j["model"] = ojson::parse(model_config_to_json(c.model));
  j["train"] = {{"learning_rate", c.train.learning_rate},
                {"batch_size", c.train.batch_size},
                {"gradient_accumulation_steps", c.train.gradient_accumulation_steps},
                {"warmup_fraction", c.train.warmup_fraction},
                {"max_epochs", c.train.max_epochs},
                {"patience", c.train.patience},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"epsilon", c.train.epsilon},
                {"weight_decay", c.train.weight_decay},
                {"seed", c.train.seed},
                {"per_class_cap", c.per_class_cap},
                {"threads", c.threads}};
  j["strategy"] = {{"document_max_len", c.options.document_max_len},
                   {"segment_size", c.options.segment_size},
                   {"max_total_tokens", c.options.max_total_tokens},
                   {"fixed_shape", c.options.fixed_shape}};
  j["split"] = {{"eval_fraction", c.eval_fraction}, {"seed", c.split_seed}};
  ojson targets = ojson::array();
  for (LoraTarget t : c.lora_targets) targets.push_back(to_string(t));
  j["lora"] = {{"rank", c.lora_rank}, {"targets", targets}};
  return j.dump(2);
}

HeadKind default_head(Strategy strategy) {
  return strategy == Strategy::SegmentBatch ? HeadKind::LabelAttention : HeadKind::PooledMlp;
}

PreparedSplit prepare_split(const Corpus& corpus, const Tokenizer& tokenizer, double eval_fraction,
                            std::uint64_t seed) {
  const Split split = split_by_patient(corpus, eval_fraction, seed);
  auto labelled = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::size_t> keep;
    for (std::size_t i : idx) {
      const Instance& inst = corpus.instances[i];
      if (inst.acceptance == Acceptance::Accepted && inst.label) keep.push_back(i);
    }
    return keep;
  };
  const auto train = labelled(split.train);
  const auto eval = labelled(split.eval);
  return {prepare_instances(corpus, train, tokenizer), prepare_instances(corpus, eval, tokenizer)};
}

TrainOutcome train_strategy(const Corpus& corpus, const PreparedSplit& split, const Tokenizer& tokenizer,
                            Strategy strategy, const ExperimentConfig& config, const EncoderModel<float>* base,
                            std::ostream* log) {
  if (split.train.empty() || split.eval.empty()) throw ArgumentError("train_strategy: empty train or eval split");
  const HeadKind head = default_head(strategy);
  TrainOutcome out;
  if (base) {
    if (base->adapted()) throw ArgumentError("train_strategy: base model still carries adapters; merge them first");
    if (static_cast<std::size_t>(base->config().vocab_size) != tokenizer.vocab_size()) {
      throw ArgumentError("train_strategy: base model vocabulary does not match the tokenizer");
    }
    out.model = *base;
    out.model.reset_head(head, config.train.seed + 1);
  } else {
    ModelConfig mc = config.model;
    mc.vocab_size = static_cast<int>(tokenizer.vocab_size());
    mc.head = head;
    out.model = EncoderModel<float>(mc, config.train.seed);
  }
  if (config.lora_rank > 0) out.model.inject_lora(config.lora_rank, config.lora_targets, config.train.seed + 2);

  std::vector<Example> train = build_examples(corpus, split.train, tokenizer, strategy, config.options);
  if (config.per_class_cap > 0) train = subsample_per_class(train, config.per_class_cap, config.train.seed);
  out.train_examples = train.size();

  const Evaluator evaluator = [&](const EncoderModel<float>& m) {
    const EvalOutput e = evaluate_strategy(corpus, split.eval, m, tokenizer, strategy, config.options, config.threads);
    return compute_metrics(e.predictions, e.gold, m.config().num_labels).macro_f1;
  };
  out.fit = fit(out.model, train, {}, config.train, log, evaluator);
  return out;
}

StrategyEvaluation evaluate_split(const Corpus& corpus, std::span<const PreparedInstance> prepared,
                                  const EncoderModel<float>& model, const Tokenizer& tokenizer, Strategy strategy,
                                  const StrategyOptions& options, int threads) {
  StrategyEvaluation r;
  r.strategy = strategy;
  r.output = evaluate_strategy(corpus, prepared, model, tokenizer, strategy, options, threads);
  r.metrics = compute_metrics(r.output.predictions, r.output.gold, model.config().num_labels);
  r.strata = stratified_f1(r.output.predictions, r.output.gold, r.output.lengths, model.config().num_labels);
  return r;
}

CheckpointMeta checkpoint_meta(const Tokenizer& tokenizer, Strategy strategy, const StrategyOptions& options,
                               std::string extra_json) {
  CheckpointMeta meta;
  meta.tokenizer_hash = tokenizer.hash();
  meta.strategy = std::string(to_string(strategy));
  meta.max_len = strategy == Strategy::BruteForce ? options.document_max_len : concat_max_len(strategy);
  meta.segment_size = options.segment_size;
  meta.extra_json = std::move(extra_json);
  return meta;
}

}  // namespace triage
