#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "triage/encoder.hpp"

namespace triage {

// One supervised example: the rows fed to the encoder (several for segment
// batches) and the gold team index.
struct Example {
  std::string id;
  std::vector<TokenSequence> rows;
  int label = 0;
  std::size_t length = 0;  // source token length before truncation
};

struct TrainConfig {
  double learning_rate = 1e-5;
  int batch_size = 8;
  int gradient_accumulation_steps = 2;
  double warmup_fraction = 0.1;
  int max_epochs = 10;
  int patience = 3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
  std::uint64_t seed = 13;

  void validate() const;  // throws ConfigError
};

// -log softmax(logits)[gold], evaluated in double precision.
template <typename S>
double loss(const RowVector<S>& logits, int gold);

// d(loss)/d(logits) = softmax(logits) - onehot(gold).
template <typename S>
RowVector<S> loss_gradient(const RowVector<S>& logits, int gold);

template <typename S>
struct BatchGradient {
  double loss = 0;  // mean over the batch
  Weights<S> grads;
  std::vector<std::string> parameters;  // names of tensors that received gradient
};

// Mean-reduced gradients of the batch loss. `dropout_rng` enables training
// dropout; pass nullptr for a deterministic pass. Throws StateError naming the
// batch when the loss is not finite.
template <typename S>
BatchGradient<S> backward(const EncoderModel<S>& model, std::span<const Example* const> batch,
                          Rng* dropout_rng = nullptr, std::string_view batch_id = "batch");
template <typename S>
BatchGradient<S> backward(const EncoderModel<S>& model, std::span<const Example> batch,
                          Rng* dropout_rng = nullptr, std::string_view batch_id = "batch");

template <typename S>
double batch_loss(const EncoderModel<S>& model, std::span<const Example> batch);

struct GradCheckEntry {
  std::string tensor;
  Eigen::Index index = 0;
  double analytic = 0;
  double numeric = 0;
  double relative_error = 0;
};

struct GradCheckResult {
  double max_relative_error = 0;
  std::vector<GradCheckEntry> entries;
};

// Relative error is |a - n| / max(|a|, |n|, floor).
inline constexpr double kGradCheckFloor = 1e-6;

// Central differences on at least `samples` trainable coordinates, every
// trainable tensor included.
GradCheckResult grad_check(EncoderModel<double>& model, std::span<const Example> batch, double eps,
                           std::size_t samples = 200, std::uint64_t seed = 1);

template <typename S>
struct OptimizerState {
  Weights<S> first_moment;
  Weights<S> second_moment;
  long step = 0;
  double weight_decay = 0.01;

  static OptimizerState zeros(const Weights<S>& like, double weight_decay);
};

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

// One AdamW update of a single tensor at (1-based) step `step`.
template <typename S>
void adamw_update(Matrix<S>& param, const Matrix<S>& grad, Matrix<S>& m, Matrix<S>& v, long step,
                  double lr, const AdamSettings& settings);

// Updates every trainable tensor of the model. Throws ArgumentError on shape
// mismatch.
template <typename S>
void adamw_step(EncoderModel<S>& model, const Weights<S>& grads, OptimizerState<S>& state,
                double lr, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

// Linear warm-up to base_lr, then linear decay to 0 at total_steps.
double lr_at(long step, long warmup_steps, long total_steps, double base_lr);

class EarlyStopper {
 public:
  explicit EarlyStopper(int patience);
  // Records an evaluation; returns true when training should stop.
  bool update(double score);
  bool last_improved() const { return last_improved_; }
  int best_index() const { return best_index_; }  // 0-based evaluation index
  double best_score() const { return best_; }

 private:
  int patience_;
  int seen_ = 0;
  int bad_ = 0;
  int best_index_ = -1;
  double best_ = 0;
  bool last_improved_ = false;
};

struct EpochRecord {
  int epoch = 0;
  long step = 0;
  double train_loss = 0;
  double eval_f1 = 0;
  double lr = 0;
};

struct FitResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_f1 = 0;
  long optimizer_steps = 0;
  std::size_t examples_consumed = 0;
};

// Macro F1 of a model over a set; fit uses example-level argmax by default.
using Evaluator = std::function<double(const EncoderModel<float>&)>;

template <typename S>
std::vector<int> predict_examples(const EncoderModel<S>& model, std::span<const Example> examples);

// Trains in place and leaves the model holding the best-F1 weights.
FitResult fit(EncoderModel<float>& model, std::span<const Example> train,
              std::span<const Example> eval, const TrainConfig& config, std::ostream* log = nullptr,
              const Evaluator& evaluator = {});

}  // namespace triage
