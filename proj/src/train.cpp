#include "triage/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "triage/errors.hpp"
#include "triage/metrics.hpp"

namespace triage {

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (gradient_accumulation_steps < 1) throw ConfigError("gradient_accumulation_steps must be positive");
  if (!(warmup_fraction >= 0 && warmup_fraction < 1)) throw ConfigError("warmup_fraction must be in [0,1)");
  if (max_epochs < 1) throw ConfigError("max_epochs must be positive");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw ConfigError("betas must be in [0,1)");
  if (!(epsilon > 0)) throw ConfigError("epsilon must be positive");
  if (weight_decay < 0) throw ConfigError("weight_decay must be non-negative");
}

template <typename S>
double loss(const RowVector<S>& logits, int gold) {
  if (gold < 0 || gold >= logits.size()) {
    throw ArgumentError("gold label " + std::to_string(gold) + " outside [0, " +
                        std::to_string(logits.size()) + ")");
  }
  const Eigen::RowVectorXd z = logits.template cast<double>();
  const double mx = z.maxCoeff();
  const double lse = mx + std::log((z.array() - mx).exp().sum());
  return lse - z(gold);
}

template <typename S>
RowVector<S> loss_gradient(const RowVector<S>& logits, int gold) {
  if (gold < 0 || gold >= logits.size()) throw ArgumentError("gold label out of range");
  RowVector<S> g = softmax<S>(logits);
  g(gold) -= S(1);
  return g;
}

namespace {

template <typename S>
std::vector<std::string> trainable_names(const EncoderModel<S>& model) {
  std::vector<std::string> names;
  model.weights().visit([&](const std::string& name, const Matrix<S>&, ParamGroup g) {
    if (model.is_trainable(g)) names.push_back(name);
  });
  return names;
}

}  // namespace

template <typename S>
BatchGradient<S> backward(const EncoderModel<S>& model, std::span<const Example* const> batch,
                          Rng* dropout_rng, std::string_view batch_id) {
  if (batch.empty()) throw ArgumentError("backward: empty batch");
  BatchGradient<S> out;
  out.grads = model.weights().zeros_like();
  out.parameters = trainable_names(model);
  const S scale = S(1) / static_cast<S>(batch.size());
  for (const Example* ex : batch) {
    ExampleCache<S> cache;
    RowVector<S> logits = forward_example<S>(model, ex->rows, &cache, dropout_rng);
    const double l = loss<S>(logits, ex->label);
    if (!std::isfinite(l)) {
      throw StateError("non-finite loss in " + std::string(batch_id) + " (example " + ex->id + ")");
    }
    out.loss += l;
    if (out.parameters.empty()) continue;
    RowVector<S> d = loss_gradient<S>(logits, ex->label) * scale;
    backward_example<S>(model, cache, d, out.grads);
  }
  out.loss /= static_cast<double>(batch.size());
  return out;
}

template <typename S>
BatchGradient<S> backward(const EncoderModel<S>& model, std::span<const Example> batch,
                          Rng* dropout_rng, std::string_view batch_id) {
  std::vector<const Example*> ptrs;
  for (const auto& e : batch) ptrs.push_back(&e);
  return backward<S>(model, std::span<const Example* const>(ptrs), dropout_rng, batch_id);
}

template <typename S>
double batch_loss(const EncoderModel<S>& model, std::span<const Example> batch) {
  double total = 0;
  for (const auto& ex : batch) total += loss<S>(forward_example<S>(model, ex.rows, nullptr, nullptr), ex.label);
  return total / static_cast<double>(batch.size());
}

GradCheckResult grad_check(EncoderModel<double>& model, std::span<const Example> batch, double eps,
                           std::size_t samples, std::uint64_t seed) {
  const BatchGradient<double> analytic = backward<double>(model, batch);
  // Pair every trainable parameter tensor with its gradient.
  std::vector<std::pair<std::string, Matrix<double>*>> params;
  std::vector<const Matrix<double>*> grads;
  model.weights().visit([&](const std::string& name, Matrix<double>& m, ParamGroup g) {
    if (model.is_trainable(g)) params.emplace_back(name, &m);
  });
  analytic.grads.visit([&](const std::string& name, const Matrix<double>& m, ParamGroup g) {
    if (model.is_trainable(g)) grads.push_back(&m);
    (void)name;
  });
  GradCheckResult result;
  if (params.empty()) return result;

  Rng rng(seed);
  std::vector<std::pair<std::size_t, Eigen::Index>> coords;
  const std::size_t per_tensor = std::max<std::size_t>(2, samples / params.size() + 1);
  for (std::size_t t = 0; t < params.size(); ++t) {
    const Matrix<double>& g = *grads[t];
    std::vector<Eigen::Index> nonzero;
    for (Eigen::Index i = 0; i < g.size(); ++i)
      if (g.data()[i] != 0.0) nonzero.push_back(i);
    for (std::size_t k = 0; k < per_tensor; ++k) {
      // Half of the draws target coordinates that carry gradient (sparse
      // embedding rows would otherwise be checked only at zeros).
      if (!nonzero.empty() && k % 2 == 0) {
        coords.emplace_back(t, nonzero[rng.below(nonzero.size())]);
      } else {
        coords.emplace_back(t, static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(g.size()))));
      }
    }
  }
  for (const auto& [t, i] : coords) {
    double& theta = params[t].second->data()[i];
    const double saved = theta;
    theta = saved + eps;
    const double plus = batch_loss<double>(model, batch);
    theta = saved - eps;
    const double minus = batch_loss<double>(model, batch);
    theta = saved;
    GradCheckEntry e;
    e.tensor = params[t].first;
    e.index = i;
    e.analytic = grads[t]->data()[i];
    e.numeric = (plus - minus) / (2 * eps);
    const double den = std::max({std::abs(e.analytic), std::abs(e.numeric), kGradCheckFloor});
    e.relative_error = std::abs(e.analytic - e.numeric) / den;
    result.max_relative_error = std::max(result.max_relative_error, e.relative_error);
    result.entries.push_back(std::move(e));
  }
  return result;
}

template <typename S>
OptimizerState<S> OptimizerState<S>::zeros(const Weights<S>& like, double weight_decay) {
  OptimizerState<S> s;
  s.first_moment = like.zeros_like();
  s.second_moment = like.zeros_like();
  s.weight_decay = weight_decay;
  return s;
}

template <typename S>
void adamw_update(Matrix<S>& param, const Matrix<S>& grad, Matrix<S>& m, Matrix<S>& v, long step,
                  double lr, const AdamSettings& st) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols() || m.rows() != param.rows() ||
      m.cols() != param.cols() || v.rows() != param.rows() || v.cols() != param.cols()) {
    throw ArgumentError("adamw: shape mismatch");
  }
  if (step < 1) throw ArgumentError("adamw: step must be >= 1");
  const S b1 = static_cast<S>(st.beta1);
  const S b2 = static_cast<S>(st.beta2);
  m = b1 * m + (S(1) - b1) * grad;
  v = b2 * v + (S(1) - b2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(step));
  const S step_size = static_cast<S>(lr / c1);
  const S sqrt_c2 = static_cast<S>(std::sqrt(c2));
  const S eps = static_cast<S>(st.epsilon);
  if (st.weight_decay > 0) param *= static_cast<S>(1.0 - lr * st.weight_decay);
  param.array() -= step_size * m.array() / (v.array().sqrt() / sqrt_c2 + eps);
}

template <typename S>
void adamw_step(EncoderModel<S>& model, const Weights<S>& grads, OptimizerState<S>& state, double lr,
                double beta1, double beta2, double epsilon) {
  std::vector<std::pair<Matrix<S>*, ParamGroup>> params;
  std::vector<const Matrix<S>*> g;
  std::vector<Matrix<S>*> m;
  std::vector<Matrix<S>*> v;
  model.weights().visit([&](const std::string&, Matrix<S>& p, ParamGroup group) { params.emplace_back(&p, group); });
  grads.visit([&](const std::string&, const Matrix<S>& x, ParamGroup) { g.push_back(&x); });
  state.first_moment.visit([&](const std::string&, Matrix<S>& x, ParamGroup) { m.push_back(&x); });
  state.second_moment.visit([&](const std::string&, Matrix<S>& x, ParamGroup) { v.push_back(&x); });
  if (g.size() != params.size() || m.size() != params.size() || v.size() != params.size()) {
    throw ArgumentError("adamw: gradient/state tensors do not match the model");
  }
  ++state.step;
  const AdamSettings st{beta1, beta2, epsilon, state.weight_decay};
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!model.is_trainable(params[i].second)) continue;
    adamw_update<S>(*params[i].first, *g[i], *m[i], *v[i], state.step, lr, st);
  }
}

double lr_at(long step, long warmup_steps, long total_steps, double base_lr) {
  if (step <= 0) return warmup_steps > 0 ? 0.0 : base_lr;
  if (step < warmup_steps) return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (step >= total_steps) return 0.0;
  return base_lr * static_cast<double>(total_steps - step) /
         static_cast<double>(std::max<long>(1, total_steps - warmup_steps));
}

EarlyStopper::EarlyStopper(int patience) : patience_(patience) {
  if (patience < 1) throw ArgumentError("patience must be >= 1");
}

bool EarlyStopper::update(double score) {
  last_improved_ = best_index_ < 0 || score > best_;
  if (last_improved_) {
    best_ = score;
    best_index_ = seen_;
    bad_ = 0;
  } else {
    ++bad_;
  }
  ++seen_;
  return bad_ >= patience_;
}

template <typename S>
std::vector<int> predict_examples(const EncoderModel<S>& model, std::span<const Example> examples) {
  std::vector<int> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    RowVector<S> logits = forward_example<S>(model, ex.rows, nullptr, nullptr);
    Eigen::Index arg = 0;
    logits.maxCoeff(&arg);
    out.push_back(static_cast<int>(arg));
  }
  return out;
}

FitResult fit(EncoderModel<float>& model, std::span<const Example> train, std::span<const Example> eval,
              const TrainConfig& config, std::ostream* log, const Evaluator& evaluator) {
  config.validate();
  if (train.empty()) throw ArgumentError("fit: empty training split");
  if (eval.empty() && !evaluator) throw ArgumentError("fit: empty evaluation split");
  const std::size_t micro = static_cast<std::size_t>(config.batch_size);
  const std::size_t accum = static_cast<std::size_t>(config.gradient_accumulation_steps);
  const std::size_t steps_per_epoch = train.size() / (micro * accum);
  if (steps_per_epoch == 0) {
    throw ArgumentError("fit: training split smaller than one effective batch (" +
                        std::to_string(micro * accum) + " examples)");
  }
  const long total_steps = static_cast<long>(steps_per_epoch) * config.max_epochs;
  const long warmup = static_cast<long>(std::ceil(config.warmup_fraction * static_cast<double>(total_steps)));

  Rng order_rng(config.seed);
  Rng dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  OptimizerState<float> state = OptimizerState<float>::zeros(model.weights(), config.weight_decay);

  auto evaluate = [&]() -> double {
    if (evaluator) return evaluator(model);
    std::vector<int> gold;
    for (const auto& ex : eval) gold.push_back(ex.label);
    const auto pred = predict_examples<float>(model, eval);
    return compute_metrics(pred, gold, model.config().num_labels).macro_f1;
  };

  FitResult result;
  EarlyStopper stopper(config.patience);
  Weights<float> best = model.weights();
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0;
    std::size_t cursor = 0;
    double lr = 0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      Weights<float> total;
      for (std::size_t a = 0; a < accum; ++a) {
        std::vector<const Example*> batch;
        for (std::size_t b = 0; b < micro; ++b) batch.push_back(&train[order[cursor++]]);
        const std::string id = "epoch " + std::to_string(epoch) + " step " + std::to_string(step + 1) +
                               " micro-batch " + std::to_string(a);
        auto g = backward<float>(model, std::span<const Example* const>(batch),
                                 &dropout_rng, id);
        loss_sum += g.loss;
        if (a == 0) {
          total = std::move(g.grads);
        } else {
          std::vector<Matrix<float>*> dst;
          total.visit([&](const std::string&, Matrix<float>& m, ParamGroup) { dst.push_back(&m); });
          std::size_t k = 0;
          g.grads.visit([&](const std::string&, Matrix<float>& m, ParamGroup) { *dst[k++] += m; });
        }
      }
      if (accum > 1) {
        const float inv = 1.0f / static_cast<float>(accum);
        total.visit([&](const std::string&, Matrix<float>& m, ParamGroup) { m *= inv; });
      }
      ++step;
      lr = lr_at(step, warmup, total_steps, config.learning_rate);
      adamw_step<float>(model, total, state, lr, config.beta1, config.beta2, config.epsilon);
      result.examples_consumed += micro * accum;
    }
    const double f1 = evaluate();
    EpochRecord rec{epoch, step, loss_sum / static_cast<double>(steps_per_epoch * accum), f1, lr};
    result.history.push_back(rec);
    if (log) {
      *log << "epoch=" << rec.epoch << " step=" << rec.step << " loss=" << rec.train_loss
           << " eval_f1=" << rec.eval_f1 << " lr=" << rec.lr << '\n';
      log->flush();
    }
    const bool stop = stopper.update(f1);
    if (stopper.last_improved()) best = model.weights();
    if (stop) break;
  }
  result.optimizer_steps = step;
  result.best_epoch = stopper.best_index() + 1;
  result.best_f1 = stopper.best_score();
  model.weights() = std::move(best);
  return result;
}

#define TRIAGE_INSTANTIATE(S)                                                                     \
  template double loss<S>(const RowVector<S>&, int);                                             \
  template RowVector<S> loss_gradient<S>(const RowVector<S>&, int);                              \
  template BatchGradient<S> backward<S>(const EncoderModel<S>&, std::span<const Example* const>, \
                                        Rng*, std::string_view);                                 \
  template BatchGradient<S> backward<S>(const EncoderModel<S>&, std::span<const Example>, Rng*,  \
                                        std::string_view);                                       \
  template double batch_loss<S>(const EncoderModel<S>&, std::span<const Example>);               \
  template struct OptimizerState<S>;                                                             \
  template void adamw_update<S>(Matrix<S>&, const Matrix<S>&, Matrix<S>&, Matrix<S>&, long,      \
                                double, const AdamSettings&);                                    \
  template void adamw_step<S>(EncoderModel<S>&, const Weights<S>&, OptimizerState<S>&, double,   \
                              double, double, double);                                           \
  template std::vector<int> predict_examples<S>(const EncoderModel<S>&, std::span<const Example>);

TRIAGE_INSTANTIATE(float)
TRIAGE_INSTANTIATE(double)

}  // namespace triage
