#include "triage/model.hpp"

#include <algorithm>
#include <cmath>

#include "triage/errors.hpp"
#include "triage/random.hpp"

namespace triage {

std::string_view to_string(HeadKind h) {
  return h == HeadKind::PooledMlp ? "pooled_mlp" : "label_attention";
}

std::string_view to_string(Pooling p) {
  return p == Pooling::SequenceStart ? "sequence_start" : "masked_mean";
}

std::string_view to_string(LoraTarget t) {
  switch (t) {
    case LoraTarget::Query: return "query";
    case LoraTarget::Key: return "key";
    case LoraTarget::Value: return "value";
  }
  return "query";
}

HeadKind parse_head_kind(std::string_view s) {
  if (s == "pooled_mlp") return HeadKind::PooledMlp;
  if (s == "label_attention") return HeadKind::LabelAttention;
  throw ConfigError("unknown head kind '" + std::string(s) + "'");
}

Pooling parse_pooling(std::string_view s) {
  if (s == "sequence_start") return Pooling::SequenceStart;
  if (s == "masked_mean") return Pooling::MaskedMean;
  throw ConfigError("unknown pooling '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  if (vocab_size < 5) throw ConfigError("vocab_size too small");
  if (hidden < 1 || heads < 1 || hidden % heads != 0) {
    throw ConfigError("hidden dimension must be a positive multiple of heads");
  }
  if (layers < 0) throw ConfigError("layers must be non-negative");
  if (feed_forward < 1) throw ConfigError("feed_forward must be positive");
  if (max_positions < 1) throw ConfigError("max_positions must be positive");
  if (!(dropout >= 0 && dropout < 1)) throw ConfigError("dropout must be in [0,1)");
  if (num_labels < 2) throw ConfigError("num_labels must be >= 2");
}

namespace {

template <typename S>
Matrix<S> normal_matrix(Rng& rng, int rows, int cols, double sd) {
  Matrix<S> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(rng.normal(0.0, sd));
  return m;
}

template <typename S>
Matrix<S> constant(int rows, int cols, double value) {
  return Matrix<S>::Constant(rows, cols, static_cast<S>(value));
}

template <typename S>
void init_head(Weights<S>& w, const ModelConfig& c, Rng& rng) {
  const int d = c.hidden;
  const int t = c.num_labels;
  w.pool_w.resize(0, 0);
  w.pool_b.resize(0, 0);
  w.classifier_w.resize(0, 0);
  w.classifier_b.resize(0, 0);
  w.label_query.resize(0, 0);
  w.label_out.resize(0, 0);
  w.label_bias.resize(0, 0);
  if (c.head == HeadKind::PooledMlp) {
    w.pool_w = normal_matrix<S>(rng, d, d, c.init_range);
    w.pool_b = constant<S>(1, d, 0);
    w.classifier_w = normal_matrix<S>(rng, d, t, c.init_range);
    w.classifier_b = constant<S>(1, t, 0);
  } else {
    w.label_query = normal_matrix<S>(rng, t, d, c.init_range);
    w.label_out = normal_matrix<S>(rng, t, d, c.init_range);
    w.label_bias = constant<S>(1, t, 0);
  }
}

template <typename S>
std::pair<Matrix<S>*, Matrix<S>*> adapter_pair(LayerWeights<S>& l, LoraTarget t) {
  switch (t) {
    case LoraTarget::Query: return {&l.query_lora_a, &l.query_lora_b};
    case LoraTarget::Key: return {&l.key_lora_a, &l.key_lora_b};
    case LoraTarget::Value: return {&l.value_lora_a, &l.value_lora_b};
  }
  return {nullptr, nullptr};
}

template <typename S>
Matrix<S>& base_projection(LayerWeights<S>& l, LoraTarget t) {
  switch (t) {
    case LoraTarget::Query: return l.query_w;
    case LoraTarget::Key: return l.key_w;
    case LoraTarget::Value: return l.value_w;
  }
  return l.query_w;
}

}  // namespace

template <typename S>
EncoderModel<S>::EncoderModel(ModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const int d = config_.hidden;
  const int f = config_.feed_forward;
  auto& w = weights_;
  w.token_embedding = normal_matrix<S>(rng, config_.vocab_size, d, config_.init_range);
  if (config_.positional_embeddings) {
    w.position_embedding = normal_matrix<S>(rng, config_.max_positions, d, config_.init_range);
  }
  w.emb_ln_gamma = constant<S>(1, d, 1);
  w.emb_ln_beta = constant<S>(1, d, 0);
  w.layers.resize(static_cast<std::size_t>(config_.layers));
  for (auto& l : w.layers) {
    l.query_w = normal_matrix<S>(rng, d, d, config_.init_range);
    l.query_b = constant<S>(1, d, 0);
    l.key_w = normal_matrix<S>(rng, d, d, config_.init_range);
    l.key_b = constant<S>(1, d, 0);
    l.value_w = normal_matrix<S>(rng, d, d, config_.init_range);
    l.value_b = constant<S>(1, d, 0);
    l.out_w = normal_matrix<S>(rng, d, d, config_.init_range);
    l.out_b = constant<S>(1, d, 0);
    l.ln1_gamma = constant<S>(1, d, 1);
    l.ln1_beta = constant<S>(1, d, 0);
    l.ff1_w = normal_matrix<S>(rng, d, f, config_.init_range);
    l.ff1_b = constant<S>(1, f, 0);
    l.ff2_w = normal_matrix<S>(rng, f, d, config_.init_range);
    l.ff2_b = constant<S>(1, d, 0);
    l.ln2_gamma = constant<S>(1, d, 1);
    l.ln2_beta = constant<S>(1, d, 0);
  }
  init_head(w, config_, rng);
}

template <typename S>
void EncoderModel<S>::inject_lora(int rank, std::vector<LoraTarget> targets, std::uint64_t seed) {
  if (adapted()) throw StateError("model already carries LoRA adapters");
  if (rank < 1) throw ArgumentError("LoRA rank must be >= 1");
  if (targets.empty()) throw ArgumentError("LoRA needs at least one target projection");
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  Rng rng(seed);
  const int d = config_.hidden;
  // A ~ U(-1/sqrt(k), 1/sqrt(k)), B = 0 so the adapted function starts equal
  // to the base function.
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  for (auto& layer : weights_.layers) {
    for (LoraTarget t : targets) {
      auto [a, b] = adapter_pair(layer, t);
      a->resize(rank, d);
      for (Eigen::Index i = 0; i < a->size(); ++i) {
        a->data()[i] = static_cast<S>(rng.uniform(-bound, bound));
      }
      *b = Matrix<S>::Zero(d, rank);
    }
  }
  lora_rank_ = rank;
  lora_targets_ = std::move(targets);
}

template <typename S>
void EncoderModel<S>::merge_lora() {
  if (!adapted()) throw StateError("model has no LoRA adapters to merge");
  for (auto& layer : weights_.layers) {
    for (LoraTarget t : lora_targets_) {
      auto [a, b] = adapter_pair(layer, t);
      // Stored weights are W^T, so W + BA becomes W^T + A^T B^T.
      base_projection(layer, t).noalias() += a->transpose() * b->transpose();
      a->resize(0, 0);
      b->resize(0, 0);
    }
  }
  lora_rank_ = 0;
  lora_targets_.clear();
}

template <typename S>
void EncoderModel<S>::reset_head(HeadKind head, std::uint64_t seed) {
  config_.head = head;
  Rng rng(seed);
  init_head(weights_, config_, rng);
}

template <typename S>
ParameterCount EncoderModel<S>::count_parameters() const {
  ParameterCount count;
  weights_.visit([&](const std::string&, const Matrix<S>& m, ParamGroup g) {
    const auto n = static_cast<std::size_t>(m.size());
    count.total += n;
    if (is_trainable(g)) count.trainable += n;
  });
  return count;
}

template <typename S>
void EncoderModel<S>::set_adapter_state(int rank, std::vector<LoraTarget> targets) {
  lora_rank_ = rank;
  lora_targets_ = std::move(targets);
}

std::size_t expected_head_parameters(const ModelConfig& c) {
  const auto d = static_cast<std::size_t>(c.hidden);
  const auto t = static_cast<std::size_t>(c.num_labels);
  if (c.head == HeadKind::PooledMlp) return d * d + d + d * t + t;
  return 2 * t * d + t;
}

std::size_t expected_adapter_parameters(const ModelConfig& c, int lora_rank, int lora_targets) {
  return 2 * static_cast<std::size_t>(lora_rank) * static_cast<std::size_t>(c.hidden) *
         static_cast<std::size_t>(lora_targets) * static_cast<std::size_t>(c.layers);
}

std::size_t expected_total_parameters(const ModelConfig& c, int lora_rank, int lora_targets) {
  const auto d = static_cast<std::size_t>(c.hidden);
  const auto f = static_cast<std::size_t>(c.feed_forward);
  std::size_t total = static_cast<std::size_t>(c.vocab_size) * d + 2 * d;
  if (c.positional_embeddings) total += static_cast<std::size_t>(c.max_positions) * d;
  const std::size_t per_layer = 4 * (d * d + d) + 2 * d + (d * f + f) + (f * d + d) + 2 * d;
  total += per_layer * static_cast<std::size_t>(c.layers);
  return total + expected_head_parameters(c) + expected_adapter_parameters(c, lora_rank, lora_targets);
}

template class EncoderModel<float>;
template class EncoderModel<double>;

}  // namespace triage
