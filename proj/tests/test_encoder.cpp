#include <doctest.h>

#include "support.hpp"
#include "triage/encoder.hpp"
#include "triage/errors.hpp"

using namespace triage;
using support::random_sequence;
using support::tiny_config;

namespace {

Matrix<double> states_of(const EncoderModel<double>& m, const std::vector<TokenId>& ids) {
  return encode_row<double>(m, ids, {}, nullptr, nullptr);
}

void randomize_adapters(EncoderModel<double>& m, Rng& rng) {
  for (auto& l : m.weights().layers) {
    for (Matrix<double>* b : {&l.query_lora_b, &l.key_lora_b, &l.value_lora_b}) {
      for (Eigen::Index i = 0; i < b->size(); ++i) b->data()[i] = rng.uniform(-0.2, 0.2);
    }
  }
}

RowVector<double> logits_of(const EncoderModel<double>& m, const TokenSequence& s) {
  std::vector<TokenSequence> rows = {s};
  return forward_example<double>(m, rows, nullptr, nullptr);
}

}  // namespace

TEST_SUITE("encoder") {
  TEST_CASE("identical sequences in one batch encode identically") {
    const EncoderModel<float> m(tiny_config(HeadKind::PooledMlp), 1);
    Rng rng(2);
    const TokenSequence s = random_sequence(rng, 20, 40);
    const std::vector<TokenSequence> rows = {s, s};
    const auto out = encode(m, EncodeBatch::from_sequences(rows));
    REQUIRE(out.size() == 2);
    CHECK(out[0].states == out[1].states);
    CHECK(out[0].states.rows() == 20);
    CHECK(out[0].states.allFinite());
  }

  TEST_CASE("appending padding leaves real positions unchanged") {
    const EncoderModel<float> m(tiny_config(HeadKind::PooledMlp), 1);
    Rng rng(3);
    const TokenSequence s = random_sequence(rng, 17, 40);
    const std::vector<TokenSequence> rows = {s};
    const auto plain = encode(m, EncodeBatch::from_sequences(rows));
    const auto padded = encode(m, EncodeBatch::from_sequences(rows, 48));
    CHECK((plain[0].states - padded[0].states).cwiseAbs().maxCoeff() < 1e-6);
  }

  TEST_CASE("without positions, permuting tokens permutes outputs") {
    ModelConfig c = tiny_config(HeadKind::PooledMlp);
    c.positional_embeddings = false;
    const EncoderModel<double> m(c, 4);
    Rng rng(5);
    const TokenSequence s = random_sequence(rng, 12, 40);
    std::vector<std::size_t> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<TokenId> permuted(12);
    for (std::size_t i = 0; i < 12; ++i) permuted[i] = s.ids[perm[i]];
    const Matrix<double> a = states_of(m, s.ids);
    const Matrix<double> b = states_of(m, permuted);
    for (std::size_t i = 0; i < 12; ++i) {
      CHECK((b.row(static_cast<Eigen::Index>(i)) - a.row(static_cast<Eigen::Index>(perm[i]))).cwiseAbs().maxCoeff() <
            1e-10);
    }
  }

  TEST_CASE("encode validates ids and lengths") {
    const EncoderModel<float> m(tiny_config(HeadKind::PooledMlp), 1);
    TokenSequence bad;
    bad.ids = {2, 5, 40};
    std::vector<TokenSequence> rows = {TokenSequence{{2, 3}}, bad};
    CHECK_THROWS_AS(encode(m, EncodeBatch::from_sequences(rows)), ArgumentError);
    TokenSequence longer;
    longer.ids.assign(65, 4);
    rows = {longer};
    CHECK_THROWS_AS(encode(m, EncodeBatch::from_sequences(rows)), ArgumentError);
  }

  TEST_CASE("pooling") {
    Matrix<double> h(2, 3);
    h << 1, 2, 3, 5, 6, 7;
    CHECK(pool<double>(h, Pooling::SequenceStart) == h.row(0));
    const RowVector<double> mean = pool<double>(h, Pooling::MaskedMean);
    CHECK(mean(0) == 3);
    CHECK(mean(2) == 5);
    Matrix<double> one = h.topRows(1);
    CHECK(pool<double>(one, Pooling::MaskedMean) == one.row(0));

    // Changing the pooling mode leaves the states alone.
    ModelConfig c = tiny_config(HeadKind::PooledMlp);
    const EncoderModel<double> first(c, 9);
    c.pooling = Pooling::MaskedMean;
    EncoderModel<double> second = first;
    second.set_config(c);
    const std::vector<TokenId> ids = {2, 7, 8, 9};
    CHECK(states_of(first, ids) == states_of(second, ids));
  }

  TEST_CASE("zero head weights give uniform probabilities") {
    EncoderModel<double> m(tiny_config(HeadKind::PooledMlp), 1);
    m.weights().classifier_w.setZero();
    m.weights().classifier_b.setZero();
    const RowVector<double> p = softmax<double>(logits_of(m, TokenSequence{{2, 5, 6}}));
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(p(i) == doctest::Approx(0.2).epsilon(1e-12));
  }

  TEST_CASE("softmax normalises and respects argmax") {
    RowVector<double> l(5);
    l << 1, 0, 0, 0, 0;
    Eigen::Index arg;
    softmax<double>(l).maxCoeff(&arg);
    CHECK(arg == 0);
    Rng rng(6);
    for (int t = 0; t < 100; ++t) {
      for (Eigen::Index i = 0; i < 5; ++i) l(i) = rng.normal(0, 10);
      const RowVector<double> p = softmax<double>(l);
      CHECK(std::abs(p.sum() - 1.0) < 1e-9);
      Eigen::Index a1, a2;
      p.maxCoeff(&a1);
      RowVector<double> shifted = l.array() + 17.0;
      softmax<double>(shifted).maxCoeff(&a2);
      CHECK(a1 == a2);
    }
  }

  TEST_CASE("label attention: single position and duplicate states") {
    const EncoderModel<double> m(tiny_config(HeadKind::LabelAttention), 1);
    Rng rng(7);
    Matrix<double> h = Matrix<double>::Random(1, 16);
    const auto one = classify_label_attention<double>(m, h);
    CHECK(one.attention.rows() == 5);
    for (Eigen::Index l = 0; l < 5; ++l) CHECK(one.attention(l, 0) == doctest::Approx(1.0));

    Matrix<double> dup = Matrix<double>::Random(4, 16);
    dup.row(3) = dup.row(1);
    const auto r = classify_label_attention<double>(m, dup);
    for (Eigen::Index l = 0; l < 5; ++l) {
      CHECK(r.attention(l, 1) == doctest::Approx(r.attention(l, 3)).epsilon(1e-12));
      CHECK(std::abs(r.attention.row(l).sum() - 1.0) < 1e-9);
    }
    CHECK_THROWS_AS(classify_label_attention<double>(m, Matrix<double>(0, 16)), ArgumentError);
    const EncoderModel<double> pooled(tiny_config(HeadKind::PooledMlp), 1);
    CHECK_THROWS_AS(classify_label_attention<double>(pooled, dup), StateError);
  }

  TEST_CASE("label attention matches a dense loop oracle") {
    const EncoderModel<double> m(tiny_config(HeadKind::LabelAttention), 11);
    Matrix<double> h(3, 16);
    for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = std::sin(0.37 * static_cast<double>(i));
    const auto r = classify_label_attention<double>(m, h);
    const auto& w = m.weights();
    for (int l = 0; l < 5; ++l) {
      double score[3], mx = -1e300;
      for (int t = 0; t < 3; ++t) {
        score[t] = 0;
        for (int k = 0; k < 16; ++k) score[t] += w.label_query(l, k) * h(t, k);
        mx = std::max(mx, score[t]);
      }
      double z = 0;
      for (double& s : score) z += (s = std::exp(s - mx));
      double logit = w.label_bias(0, l);
      for (int k = 0; k < 16; ++k) {
        double v = 0;
        for (int t = 0; t < 3; ++t) v += score[t] / z * h(t, k);
        logit += w.label_out(l, k) * v;
      }
      CHECK(r.logits(l) == doctest::Approx(logit).epsilon(1e-12));
      for (int t = 0; t < 3; ++t) CHECK(r.attention(l, t) == doctest::Approx(score[t] / z).epsilon(1e-12));
    }
  }

  TEST_CASE("self-attention rows sum to one") {
    const EncoderModel<double> m(tiny_config(HeadKind::PooledMlp), 3);
    RowCache<double> cache;
    const std::vector<TokenId> ids = {2, 4, 5, 6, 0, 0};
    const std::vector<std::uint8_t> mask = {1, 1, 1, 1, 0, 0};
    encode_row<double>(m, ids, mask, &cache, nullptr);
    for (const auto& layer : cache.layers) {
      for (const auto& p : layer.probs) {
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
          CHECK(std::abs(p.row(r).sum() - 1.0) < 1e-6);
          CHECK(p(r, 4) == 0.0);
        }
      }
    }
  }

  TEST_CASE("fresh LoRA leaves the function unchanged") {
    for (HeadKind head : {HeadKind::PooledMlp, HeadKind::LabelAttention}) {
      const EncoderModel<double> base(tiny_config(head), 21);
      EncoderModel<double> adapted = base;
      adapted.inject_lora(4, {LoraTarget::Query, LoraTarget::Key, LoraTarget::Value}, 5);
      Rng rng(22);
      for (int t = 0; t < 20; ++t) {
        const TokenSequence s = random_sequence(rng, static_cast<std::size_t>(rng.range(1, 40)), 40);
        CHECK(logits_of(base, s) == logits_of(adapted, s));
      }
    }
  }

  TEST_CASE("merged and adapted models agree") {
    EncoderModel<double> adapted(tiny_config(HeadKind::LabelAttention), 31);
    adapted.inject_lora(4, {LoraTarget::Query, LoraTarget::Key, LoraTarget::Value}, 6);
    Rng rng(32);
    randomize_adapters(adapted, rng);
    EncoderModel<double> merged = adapted;
    merged.merge_lora();
    CHECK_FALSE(merged.adapted());
    CHECK(merged.weights().layers[0].query_lora_a.size() == 0);
    double worst = 0;
    for (int t = 0; t < 100; ++t) {
      const TokenSequence s = random_sequence(rng, static_cast<std::size_t>(rng.range(1, 40)), 40);
      worst = std::max(worst, (logits_of(adapted, s) - logits_of(merged, s)).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-6);
    CHECK_THROWS_AS(merged.merge_lora(), StateError);
  }

  TEST_CASE("merging a zero adapter leaves the weights unchanged") {
    const EncoderModel<float> base(tiny_config(HeadKind::PooledMlp), 41);
    EncoderModel<float> m = base;
    m.inject_lora(2, {LoraTarget::Query, LoraTarget::Value}, 1);
    m.merge_lora();
    CHECK(m.weights().layers[1].query_w == base.weights().layers[1].query_w);
    CHECK(m.weights().layers[1].value_w == base.weights().layers[1].value_w);
  }

  TEST_CASE("LoRA state errors") {
    EncoderModel<float> m(tiny_config(HeadKind::PooledMlp), 1);
    CHECK_THROWS_AS(m.merge_lora(), StateError);
    m.inject_lora(2, {LoraTarget::Query}, 1);
    CHECK_THROWS_AS(m.inject_lora(2, {LoraTarget::Query}, 1), StateError);
    EncoderModel<float> fresh(tiny_config(HeadKind::PooledMlp), 1);
    CHECK_THROWS_AS(fresh.inject_lora(0, {LoraTarget::Query}, 1), ArgumentError);
  }

  TEST_CASE("parameter counts match hand-derived formulas") {
    // One layer, d = 8: every tensor written out.
    ModelConfig c = tiny_config(HeadKind::PooledMlp, 30, 8, 1);
    const std::size_t V = 30, P = 64, d = 8, F = 16, T = 5;
    const std::size_t embeddings = V * d + P * d + 2 * d;
    const std::size_t layer = 4 * (d * d + d) + 2 * d + (d * F + F) + (F * d + d) + 2 * d;
    const std::size_t pooled_head = (d * d + d) + (d * T + T);
    const std::size_t label_head = 2 * T * d + T;

    EncoderModel<float> m(c, 1);
    auto n = m.count_parameters();
    CHECK(n.total == embeddings + layer + pooled_head);
    CHECK(n.trainable == n.total);
    CHECK(expected_total_parameters(c) == n.total);

    c.head = HeadKind::LabelAttention;
    EncoderModel<float> la(c, 1);
    CHECK(la.count_parameters().total == embeddings + layer + label_head);

    const std::size_t r = 2;
    la.inject_lora(static_cast<int>(r), {LoraTarget::Query, LoraTarget::Key, LoraTarget::Value}, 1);
    n = la.count_parameters();
    CHECK(n.trainable == 3 * (r * d + d * r) + label_head);
    CHECK(n.total == embeddings + layer + label_head + 3 * 2 * r * d);
    CHECK(expected_adapter_parameters(c, static_cast<int>(r), 3) == 3 * 2 * r * d);
    CHECK(expected_head_parameters(c) == label_head);

    la.set_frozen(true);
    CHECK(la.count_parameters().trainable == 0);
  }

  TEST_CASE("desk-scale LoRA trainable count") {
    ModelConfig c;
    c.vocab_size = 8000;
    c.head = HeadKind::LabelAttention;
    EncoderModel<float> m(c, 1);
    const std::size_t full = m.count_parameters().trainable;
    m.inject_lora(8, {LoraTarget::Query, LoraTarget::Key, LoraTarget::Value}, 1);
    const std::size_t d = 128, L = 4, r = 8, T = 5;
    CHECK(m.count_parameters().trainable == 2 * r * d * 3 * L + (2 * T * d + T));
    CHECK(m.count_parameters().trainable * 20 < full);
  }

  TEST_CASE("reset_head swaps the head and keeps the encoder") {
    EncoderModel<float> m(tiny_config(HeadKind::PooledMlp), 1);
    const auto before = m.weights().layers[0].query_w;
    m.reset_head(HeadKind::LabelAttention, 3);
    CHECK(m.config().head == HeadKind::LabelAttention);
    CHECK(m.weights().pool_w.size() == 0);
    CHECK(m.weights().label_query.rows() == 5);
    CHECK(m.weights().layers[0].query_w == before);
  }
}
