#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace triage {

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using RowVector = Eigen::Matrix<S, 1, Eigen::Dynamic>;

enum class HeadKind { PooledMlp, LabelAttention };
enum class Pooling { SequenceStart, MaskedMean };
enum class LoraTarget { Query, Key, Value };

std::string_view to_string(HeadKind h);
std::string_view to_string(Pooling p);
std::string_view to_string(LoraTarget t);
HeadKind parse_head_kind(std::string_view s);
Pooling parse_pooling(std::string_view s);

struct ModelConfig {
  int vocab_size = 8000;
  int hidden = 128;
  int layers = 4;
  int heads = 4;
  int feed_forward = 512;
  int max_positions = 4096;
  double dropout = 0.1;
  int num_labels = 5;
  HeadKind head = HeadKind::PooledMlp;
  Pooling pooling = Pooling::SequenceStart;
  bool positional_embeddings = true;
  double init_range = 0.02;
  double layer_norm_eps = 1e-5;

  void validate() const;  // throws ConfigError
  bool operator==(const ModelConfig&) const = default;
};

// Parameter roles; adapter and head parameters stay trainable under LoRA.
enum class ParamGroup { Base, Adapter, Head };

template <typename S>
struct LayerWeights {
  Matrix<S> query_w, query_b, key_w, key_b, value_w, value_b, out_w, out_b;
  Matrix<S> ln1_gamma, ln1_beta;
  Matrix<S> ff1_w, ff1_b, ff2_w, ff2_b;
  Matrix<S> ln2_gamma, ln2_beta;
  // Low-rank adapters, paired as (A: r x k, B: d x r); empty when absent.
  Matrix<S> query_lora_a, query_lora_b, key_lora_a, key_lora_b, value_lora_a, value_lora_b;
};

// All tensors of an encoder with its classification head. Projection
// weights are stored input-major (d_in x d_out) so activations multiply on
// the right; biases and layer-norm parameters are 1 x d rows.
template <typename S>
struct Weights {
  Matrix<S> token_embedding;     // vocab x d
  Matrix<S> position_embedding;  // max_positions x d (empty when disabled)
  Matrix<S> emb_ln_gamma, emb_ln_beta;
  std::vector<LayerWeights<S>> layers;
  // pooled_mlp head
  Matrix<S> pool_w, pool_b, classifier_w, classifier_b;
  // label_attention head
  Matrix<S> label_query;  // T x d
  Matrix<S> label_out;    // T x d
  Matrix<S> label_bias;   // 1 x T

  // Visits every non-empty tensor in a fixed order.
  template <typename F>
  void visit(F&& f);
  template <typename F>
  void visit(F&& f) const;

  Weights zeros_like() const;
  template <typename T>
  Weights<T> cast() const;
};

struct ParameterCount {
  std::size_t total = 0;
  std::size_t trainable = 0;
};

template <typename S>
class EncoderModel {
 public:
  EncoderModel() = default;
  EncoderModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  Weights<S>& weights() { return weights_; }
  const Weights<S>& weights() const { return weights_; }

  bool adapted() const { return lora_rank_ > 0; }
  int lora_rank() const { return lora_rank_; }
  const std::vector<LoraTarget>& lora_targets() const { return lora_targets_; }
  bool is_trainable(ParamGroup group) const {
    return !frozen_ && (!adapted() || group != ParamGroup::Base);
  }
  // Freezes every parameter group (feature extraction only).
  void set_frozen(bool frozen) { frozen_ = frozen; }
  bool frozen() const { return frozen_; }

  // Adds h = Wx + B(Ax) adapters with B = 0 and freezes the base weights.
  void inject_lora(int rank, std::vector<LoraTarget> targets, std::uint64_t seed);
  // Folds W += BA into the base weights and removes the adapters.
  void merge_lora();
  // Replaces the classification head with a freshly initialised one.
  void reset_head(HeadKind head, std::uint64_t seed);

  ParameterCount count_parameters() const;

  template <typename T>
  EncoderModel<T> cast() const;

  // Restores adapter bookkeeping after loading tensors from a checkpoint.
  void set_adapter_state(int rank, std::vector<LoraTarget> targets);
  void set_config(const ModelConfig& config) { config_ = config; }

 private:
  ModelConfig config_;
  Weights<S> weights_;
  int lora_rank_ = 0;
  std::vector<LoraTarget> lora_targets_;
  bool frozen_ = false;
};

// Closed-form parameter counts, used as an independent check of
// count_parameters().
std::size_t expected_total_parameters(const ModelConfig& config, int lora_rank = 0,
                                      int lora_targets = 0);
std::size_t expected_adapter_parameters(const ModelConfig& config, int lora_rank,
                                        int lora_targets);
std::size_t expected_head_parameters(const ModelConfig& config);

// ---------------------------------------------------------------------------

template <typename S>
template <typename F>
void Weights<S>::visit(F&& f) {
  auto v = [&](const std::string& name, Matrix<S>& m, ParamGroup g) {
    if (m.size() > 0) f(name, m, g);
  };
  v("embeddings.token", token_embedding, ParamGroup::Base);
  v("embeddings.position", position_embedding, ParamGroup::Base);
  v("embeddings.ln.gamma", emb_ln_gamma, ParamGroup::Base);
  v("embeddings.ln.beta", emb_ln_beta, ParamGroup::Base);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    const std::string p = "layer" + std::to_string(i) + ".";
    v(p + "attn.query.w", l.query_w, ParamGroup::Base);
    v(p + "attn.query.b", l.query_b, ParamGroup::Base);
    v(p + "attn.key.w", l.key_w, ParamGroup::Base);
    v(p + "attn.key.b", l.key_b, ParamGroup::Base);
    v(p + "attn.value.w", l.value_w, ParamGroup::Base);
    v(p + "attn.value.b", l.value_b, ParamGroup::Base);
    v(p + "attn.out.w", l.out_w, ParamGroup::Base);
    v(p + "attn.out.b", l.out_b, ParamGroup::Base);
    v(p + "ln1.gamma", l.ln1_gamma, ParamGroup::Base);
    v(p + "ln1.beta", l.ln1_beta, ParamGroup::Base);
    v(p + "ff1.w", l.ff1_w, ParamGroup::Base);
    v(p + "ff1.b", l.ff1_b, ParamGroup::Base);
    v(p + "ff2.w", l.ff2_w, ParamGroup::Base);
    v(p + "ff2.b", l.ff2_b, ParamGroup::Base);
    v(p + "ln2.gamma", l.ln2_gamma, ParamGroup::Base);
    v(p + "ln2.beta", l.ln2_beta, ParamGroup::Base);
    v(p + "lora.query.a", l.query_lora_a, ParamGroup::Adapter);
    v(p + "lora.query.b", l.query_lora_b, ParamGroup::Adapter);
    v(p + "lora.key.a", l.key_lora_a, ParamGroup::Adapter);
    v(p + "lora.key.b", l.key_lora_b, ParamGroup::Adapter);
    v(p + "lora.value.a", l.value_lora_a, ParamGroup::Adapter);
    v(p + "lora.value.b", l.value_lora_b, ParamGroup::Adapter);
  }
  v("head.pool.w", pool_w, ParamGroup::Head);
  v("head.pool.b", pool_b, ParamGroup::Head);
  v("head.classifier.w", classifier_w, ParamGroup::Head);
  v("head.classifier.b", classifier_b, ParamGroup::Head);
  v("head.label.query", label_query, ParamGroup::Head);
  v("head.label.out", label_out, ParamGroup::Head);
  v("head.label.bias", label_bias, ParamGroup::Head);
}

template <typename S>
template <typename F>
void Weights<S>::visit(F&& f) const {
  const_cast<Weights<S>*>(this)->visit(
      [&](const std::string& name, Matrix<S>& m, ParamGroup g) {
        f(name, static_cast<const Matrix<S>&>(m), g);
      });
}

template <typename S>
Weights<S> Weights<S>::zeros_like() const {
  Weights<S> out = *this;
  out.visit([](const std::string&, Matrix<S>& m, ParamGroup) { m.setZero(); });
  return out;
}

template <typename S>
template <typename T>
Weights<T> Weights<S>::cast() const {
  Weights<T> out;
  out.layers.resize(layers.size());
  auto copy = [](Matrix<T>& dst, const Matrix<S>& s) { dst = s.template cast<T>(); };
  copy(out.token_embedding, token_embedding);
  copy(out.position_embedding, position_embedding);
  copy(out.emb_ln_gamma, emb_ln_gamma);
  copy(out.emb_ln_beta, emb_ln_beta);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i];
    auto& b = out.layers[i];
    copy(b.query_w, a.query_w); copy(b.query_b, a.query_b);
    copy(b.key_w, a.key_w); copy(b.key_b, a.key_b);
    copy(b.value_w, a.value_w); copy(b.value_b, a.value_b);
    copy(b.out_w, a.out_w); copy(b.out_b, a.out_b);
    copy(b.ln1_gamma, a.ln1_gamma); copy(b.ln1_beta, a.ln1_beta);
    copy(b.ff1_w, a.ff1_w); copy(b.ff1_b, a.ff1_b);
    copy(b.ff2_w, a.ff2_w); copy(b.ff2_b, a.ff2_b);
    copy(b.ln2_gamma, a.ln2_gamma); copy(b.ln2_beta, a.ln2_beta);
    copy(b.query_lora_a, a.query_lora_a); copy(b.query_lora_b, a.query_lora_b);
    copy(b.key_lora_a, a.key_lora_a); copy(b.key_lora_b, a.key_lora_b);
    copy(b.value_lora_a, a.value_lora_a); copy(b.value_lora_b, a.value_lora_b);
  }
  copy(out.pool_w, pool_w); copy(out.pool_b, pool_b);
  copy(out.classifier_w, classifier_w); copy(out.classifier_b, classifier_b);
  copy(out.label_query, label_query); copy(out.label_out, label_out);
  copy(out.label_bias, label_bias);
  return out;
}

template <typename S>
template <typename T>
EncoderModel<T> EncoderModel<S>::cast() const {
  EncoderModel<T> out;
  out.set_config(config_);
  out.weights() = weights_.template cast<T>();
  out.set_adapter_state(lora_rank_, lora_targets_);
  return out;
}

}  // namespace triage
