#include <doctest.h>

#include <set>
#include <sstream>

#include "support.hpp"
#include "triage/errors.hpp"
#include "triage/metrics.hpp"
#include "triage/train.hpp"

using namespace triage;
using support::random_sequence;
using support::tiny_config;

namespace {

std::vector<Example> random_examples(std::uint64_t seed, std::size_t n, int vocab = 40, bool multi_row = false) {
  Rng rng(seed);
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    Example ex;
    ex.id = "ex" + std::to_string(i);
    const int rows = multi_row ? rng.range(1, 3) : 1;
    for (int r = 0; r < rows; ++r) {
      TokenSequence s = random_sequence(rng, static_cast<std::size_t>(rng.range(2, 10)), vocab);
      s.ids[0] = Tokenizer::kSequenceStart;
      ex.rows.push_back(s);
    }
    ex.label = rng.range(0, 4);
    out.push_back(ex);
  }
  return out;
}

// Two classes told apart by a single token.
std::vector<Example> separable_examples(std::size_t n) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    Example ex;
    ex.id = "sep" + std::to_string(i);
    ex.label = static_cast<int>(i % 2);
    const TokenId marker = ex.label == 0 ? 10 : 11;
    ex.rows.push_back(TokenSequence{{Tokenizer::kSequenceStart, marker, 12, marker}});
    out.push_back(ex);
  }
  return out;
}

double max_abs_diff(const Weights<float>& a, const Weights<float>& b) {
  std::vector<const Matrix<float>*> left;
  a.visit([&](const std::string&, const Matrix<float>& m, ParamGroup) { left.push_back(&m); });
  double worst = 0;
  std::size_t k = 0;
  b.visit([&](const std::string&, const Matrix<float>& m, ParamGroup) {
    worst = std::max(worst, static_cast<double>((m - *left[k++]).cwiseAbs().maxCoeff()));
  });
  return worst;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("cross-entropy values") {
    RowVector<double> uniform = RowVector<double>::Zero(5);
    CHECK(loss<double>(uniform, 3) == doctest::Approx(std::log(5.0)).epsilon(1e-15));
    RowVector<double> strong = RowVector<double>::Zero(5);
    strong(2) = 60;
    CHECK(loss<double>(strong, 2) < 1e-20);
    CHECK_THROWS_AS(loss<double>(uniform, 5), ArgumentError);
    CHECK_THROWS_AS(loss<double>(uniform, -1), ArgumentError);

    Rng rng(4);
    for (int t = 0; t < 50; ++t) {
      RowVector<float> l(5);
      for (Eigen::Index i = 0; i < 5; ++i) l(i) = static_cast<float>(rng.normal(0, 5));
      long double z = 0;
      for (Eigen::Index i = 0; i < 5; ++i) z += std::exp(static_cast<long double>(l(i)));
      const long double ref = std::log(z) - static_cast<long double>(l(1));
      CHECK(std::abs(loss<float>(l, 1) - static_cast<double>(ref)) < 1e-12);
    }
  }

  TEST_CASE("zero classifier gradient matches softmax regression") {
    EncoderModel<double> m(tiny_config(HeadKind::PooledMlp), 3);
    m.weights().classifier_w.setZero();
    m.weights().classifier_b.setZero();
    const auto batch = random_examples(5, 1);
    ExampleCache<double> cache;
    forward_example<double>(m, batch[0].rows, &cache, nullptr);
    RowVector<double> residual = RowVector<double>::Constant(5, 0.2);
    residual(batch[0].label) -= 1.0;
    const auto g = backward<double>(m, std::span<const Example>(batch));
    CHECK((g.grads.classifier_b - residual).cwiseAbs().maxCoeff() < 1e-12);
    const Matrix<double> expected = cache.pool_hidden.transpose() * residual;
    CHECK((g.grads.classifier_w - expected).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("duplicated examples give the single-example gradient") {
    const EncoderModel<double> m(tiny_config(HeadKind::LabelAttention), 3);
    auto one = random_examples(6, 1);
    std::vector<Example> two = {one[0], one[0]};
    const auto a = backward<double>(m, std::span<const Example>(one));
    const auto b = backward<double>(m, std::span<const Example>(two));
    CHECK((a.grads.label_query - b.grads.label_query).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((a.grads.token_embedding - b.grads.token_embedding).cwiseAbs().maxCoeff() < 1e-14);
  }

  TEST_CASE("frozen model receives no gradient") {
    EncoderModel<double> m(tiny_config(HeadKind::PooledMlp), 3);
    m.set_frozen(true);
    const auto batch = random_examples(7, 2);
    const auto g = backward<double>(m, std::span<const Example>(batch));
    CHECK(g.parameters.empty());
    CHECK(g.grads.token_embedding.cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("LoRA leaves base tensors without gradient") {
    EncoderModel<double> m(tiny_config(HeadKind::PooledMlp), 3);
    m.inject_lora(2, {LoraTarget::Query, LoraTarget::Value}, 1);
    const auto batch = random_examples(8, 2);
    const auto g = backward<double>(m, std::span<const Example>(batch));
    for (const auto& name : g.parameters) {
      CHECK((name.find("lora") != std::string::npos || name.rfind("head.", 0) == 0));
    }
    CHECK(g.grads.layers[0].query_w.cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("gradient check for every trainable layer kind") {
    const auto batch = random_examples(9, 3, 40, true);
    SUBCASE("pooled head, positions, embeddings, attention, feed-forward") {
      EncoderModel<double> m(tiny_config(HeadKind::PooledMlp), 12);
      const auto r = grad_check(m, batch, 1e-5, 400);
      std::set<std::string> tensors;
      for (const auto& e : r.entries) tensors.insert(e.tensor);
      CHECK(tensors.count("embeddings.token"));
      CHECK(tensors.count("layer1.ff2.w"));
      CHECK(tensors.count("head.pool.w"));
      CHECK(r.entries.size() >= 200);
      CHECK(r.max_relative_error < 1e-4);
    }
    SUBCASE("label attention head with masked-mean pooling config") {
      ModelConfig c = tiny_config(HeadKind::LabelAttention);
      c.pooling = Pooling::MaskedMean;
      EncoderModel<double> m(c, 13);
      CHECK(grad_check(m, batch, 1e-5).max_relative_error < 1e-4);
    }
    SUBCASE("LoRA adapters") {
      EncoderModel<double> m(tiny_config(HeadKind::LabelAttention), 14);
      m.inject_lora(3, {LoraTarget::Query, LoraTarget::Key, LoraTarget::Value}, 2);
      Rng rng(1);
      for (auto& l : m.weights().layers) {
        for (Matrix<double>* b : {&l.query_lora_b, &l.key_lora_b, &l.value_lora_b})
          for (Eigen::Index i = 0; i < b->size(); ++i) b->data()[i] = rng.uniform(-0.3, 0.3);
      }
      const auto r = grad_check(m, batch, 1e-5);
      for (const auto& e : r.entries) CHECK((e.tensor.find("lora") != std::string::npos || e.tensor.rfind("head.", 0) == 0));
      CHECK(r.max_relative_error < 1e-4);
    }
    SUBCASE("coarse eps is reported, not asserted") {
      EncoderModel<double> m(tiny_config(HeadKind::PooledMlp), 12);
      const auto r = grad_check(m, batch, 1e-1);
      MESSAGE("grad_check eps=1e-1 max relative error " << r.max_relative_error);
      CHECK(std::isfinite(r.max_relative_error));
    }
  }

  TEST_CASE("AdamW single-step oracle") {
    const double lr = 0.01, g = 0.5, theta = 2.0, wd = 0.01;
    Matrix<double> p(1, 1), grad(1, 1), m = Matrix<double>::Zero(1, 1), v = Matrix<double>::Zero(1, 1);
    p(0, 0) = theta;
    grad(0, 0) = g;
    adamw_update<double>(p, grad, m, v, 1, lr, {0.9, 0.999, 1e-8, wd});
    // m_hat = g, v_hat = g^2 at step one.
    const double expected = theta * (1 - lr * wd) - lr * g / (std::abs(g) + 1e-8);
    CHECK(p(0, 0) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(m(0, 0) == doctest::Approx(0.1 * g));
    CHECK(v(0, 0) == doctest::Approx(0.001 * g * g));

    Matrix<double> still(1, 1), zero = Matrix<double>::Zero(1, 1);
    still(0, 0) = 3;
    Matrix<double> m2 = zero, v2 = zero;
    adamw_update<double>(still, zero, m2, v2, 1, lr, {0.9, 0.999, 1e-8, 0.0});
    CHECK(still(0, 0) == 3);
    adamw_update<double>(still, zero, m2, v2, 2, lr, {0.9, 0.999, 1e-8, 0.1});
    CHECK(still(0, 0) == doctest::Approx(3 * (1 - lr * 0.1)).epsilon(1e-15));

    Matrix<double> wrong(2, 1);
    CHECK_THROWS_AS(adamw_update<double>(p, wrong, m, v, 1, lr, {}), ArgumentError);
  }

  TEST_CASE("adamw_step rejects mismatched gradients") {
    EncoderModel<float> m(tiny_config(HeadKind::PooledMlp), 1);
    auto state = OptimizerState<float>::zeros(m.weights(), 0.01);
    Weights<float> grads = m.weights().zeros_like();
    grads.classifier_b.resize(1, 3);
    CHECK_THROWS_AS(adamw_step<float>(m, grads, state, 1e-3), ArgumentError);
  }

  TEST_CASE("linear schedule") {
    CHECK(lr_at(0, 10, 100, 1.0) == 0.0);
    CHECK(lr_at(5, 10, 100, 1.0) == doctest::Approx(0.5));
    CHECK(lr_at(10, 10, 100, 1.0) == 1.0);
    CHECK(lr_at(55, 10, 100, 1.0) == doctest::Approx(0.5));
    CHECK(lr_at(100, 10, 100, 1.0) == 0.0);
  }

  TEST_CASE("early stopping with patience 3") {
    EarlyStopper s(3);
    const std::vector<double> history = {0.5, 0.6, 0.59, 0.58, 0.57};
    std::vector<bool> stops;
    for (double f : history) stops.push_back(s.update(f));
    CHECK(stops == std::vector<bool>{false, false, false, false, true});
    CHECK(s.best_index() == 1);
    CHECK(s.best_score() == 0.6);
    CHECK_THROWS_AS(EarlyStopper(0), ArgumentError);
  }

  TEST_CASE("accumulation matches one larger batch") {
    const auto train = random_examples(21, 32);
    const auto eval = random_examples(22, 8);
    const EncoderModel<float> start(tiny_config(HeadKind::PooledMlp), 5);
    TrainConfig c;
    c.learning_rate = 1e-3;
    c.max_epochs = 2;
    c.weight_decay = 0.01;
    c.batch_size = 8;
    c.gradient_accumulation_steps = 2;
    EncoderModel<float> accumulated = start;
    const FitResult a = fit(accumulated, train, eval, c);
    c.batch_size = 16;
    c.gradient_accumulation_steps = 1;
    EncoderModel<float> single = start;
    const FitResult b = fit(single, train, eval, c);
    CHECK(a.optimizer_steps == b.optimizer_steps);
    CHECK(max_abs_diff(accumulated.weights(), single.weights()) < 1e-4);
    CHECK(a.history[0].train_loss == doctest::Approx(b.history[0].train_loss).epsilon(1e-5));
  }

  TEST_CASE("fit is deterministic and keeps its bookkeeping") {
    const auto train = random_examples(31, 40);
    const auto eval = random_examples(32, 10);
    TrainConfig c;
    c.learning_rate = 3e-3;
    c.max_epochs = 3;
    c.batch_size = 4;
    c.gradient_accumulation_steps = 3;
    EncoderModel<float> m1(tiny_config(HeadKind::LabelAttention), 8);
    EncoderModel<float> m2 = m1;
    std::ostringstream log1, log2;
    const FitResult r1 = fit(m1, train, eval, c, &log1);
    const FitResult r2 = fit(m2, train, eval, c, &log2);
    CHECK(log1.str() == log2.str());
    CHECK(max_abs_diff(m1.weights(), m2.weights()) == 0.0);
    CHECK(r1.optimizer_steps * c.gradient_accumulation_steps ==
          static_cast<long>(r1.examples_consumed) / c.batch_size);
    CHECK(r1.optimizer_steps == 3 * (40 / 12));
    CHECK(log1.str().find("epoch=1 step=3") != std::string::npos);
  }

  TEST_CASE("fit returns the best-F1 weights") {
    const auto train = random_examples(41, 24);
    const auto eval = random_examples(42, 12);
    TrainConfig c;
    c.learning_rate = 1e-2;
    c.max_epochs = 6;
    c.patience = 2;
    c.batch_size = 4;
    c.gradient_accumulation_steps = 1;
    EncoderModel<float> m(tiny_config(HeadKind::PooledMlp), 9);
    const FitResult r = fit(m, train, eval, c);
    double best = 0;
    for (const auto& h : r.history) best = std::max(best, h.eval_f1);
    CHECK(r.best_f1 == best);
    CHECK(r.history[static_cast<std::size_t>(r.best_epoch - 1)].eval_f1 == best);
    std::vector<int> gold;
    for (const auto& e : eval) gold.push_back(e.label);
    CHECK(compute_metrics(predict_examples<float>(m, eval), gold).macro_f1 == doctest::Approx(best).epsilon(1e-12));
  }

  TEST_CASE("fit argument errors") {
    EncoderModel<float> m(tiny_config(HeadKind::PooledMlp), 1);
    const auto some = random_examples(1, 4);
    TrainConfig c;
    c.batch_size = 8;
    CHECK_THROWS_AS(fit(m, {}, some, c), ArgumentError);
    CHECK_THROWS_AS(fit(m, some, {}, c), ArgumentError);
    CHECK_THROWS_AS(fit(m, some, some, c), ArgumentError);  // smaller than one effective batch
    c.learning_rate = 0;
    CHECK_THROWS_AS(fit(m, some, some, c), ConfigError);
  }

  TEST_CASE("loss falls monotonically on a separable toy set") {
    EncoderModel<float> m(tiny_config(HeadKind::PooledMlp), 17);
    const auto data = separable_examples(16);
    auto state = OptimizerState<float>::zeros(m.weights(), 0.0);
    double previous = batch_loss<float>(m, data);
    for (int step = 0; step < 10; ++step) {
      const auto g = backward<float>(m, std::span<const Example>(data));
      adamw_step<float>(m, g.grads, state, 1e-3);
      const double now = batch_loss<float>(m, data);
      CHECK(now < previous);
      previous = now;
    }
  }
}
