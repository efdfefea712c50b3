#include "triage/encoder.hpp"

#include <cmath>
#include <limits>

#include "triage/errors.hpp"

namespace triage {

namespace {

template <typename S>
struct LayerNormResult {
  Matrix<S> out;
  Matrix<S> xhat;
  ColVector<S> inv;
};

template <typename S>
LayerNormResult<S> layer_norm(const Matrix<S>& x, const Matrix<S>& gamma, const Matrix<S>& beta,
                              double eps) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  LayerNormResult<S> r;
  r.xhat.resize(n, d);
  r.inv.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const S mean = x.row(i).mean();
    const S var = (x.row(i).array() - mean).square().mean();
    const S inv = S(1) / std::sqrt(var + static_cast<S>(eps));
    r.inv(i) = inv;
    r.xhat.row(i) = (x.row(i).array() - mean) * inv;
  }
  r.out = (r.xhat.array().rowwise() * gamma.row(0).array()).rowwise() + beta.row(0).array();
  return r;
}

// Returns d(loss)/dx and accumulates gamma/beta gradients when requested.
template <typename S>
Matrix<S> layer_norm_backward(const Matrix<S>& dy, const Matrix<S>& xhat, const ColVector<S>& inv,
                              const Matrix<S>& gamma, Matrix<S>* dgamma, Matrix<S>* dbeta) {
  if (dgamma) dgamma->row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  if (dbeta) dbeta->row(0) += dy.colwise().sum();
  const Eigen::Index d = dy.cols();
  Matrix<S> dxhat = dy.array().rowwise() * gamma.row(0).array();
  Matrix<S> dx(dy.rows(), d);
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const S sum = dxhat.row(i).sum();
    const S dot = dxhat.row(i).dot(xhat.row(i));
    dx.row(i) = (inv(i) / static_cast<S>(d)) *
                (static_cast<S>(d) * dxhat.row(i).array() - sum - xhat.row(i).array() * dot).matrix();
  }
  return dx;
}

template <typename S>
S gelu(S x) {
  return static_cast<S>(0.5) * x * (S(1) + std::erf(x / std::sqrt(S(2))));
}

template <typename S>
S gelu_grad(S x) {
  const S cdf = static_cast<S>(0.5) * (S(1) + std::erf(x / std::sqrt(S(2))));
  const S pdf = std::exp(static_cast<S>(-0.5) * x * x) / std::sqrt(static_cast<S>(2 * M_PI));
  return cdf + x * pdf;
}

// Inverted dropout; returns an empty matrix when disabled.
template <typename S>
Matrix<S> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng* rng) {
  if (!rng || p <= 0) return {};
  Matrix<S> m(rows, cols);
  const S keep = static_cast<S>(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng->uniform() < p ? S(0) : keep;
  return m;
}

template <typename S>
void apply_mask(Matrix<S>& x, const Matrix<S>& mask) {
  if (mask.size() > 0) x.array() *= mask.array();
}

template <typename S>
Matrix<S> add_bias(Matrix<S> x, const Matrix<S>& b) {
  x.rowwise() += b.row(0);
  return x;
}

template <typename S>
const Matrix<S>& lora_a(const LayerWeights<S>& l, int k) {
  return k == 0 ? l.query_lora_a : k == 1 ? l.key_lora_a : l.value_lora_a;
}
template <typename S>
const Matrix<S>& lora_b(const LayerWeights<S>& l, int k) {
  return k == 0 ? l.query_lora_b : k == 1 ? l.key_lora_b : l.value_lora_b;
}
template <typename S>
Matrix<S>& lora_a(LayerWeights<S>& l, int k) {
  return k == 0 ? l.query_lora_a : k == 1 ? l.key_lora_a : l.value_lora_a;
}
template <typename S>
Matrix<S>& lora_b(LayerWeights<S>& l, int k) {
  return k == 0 ? l.query_lora_b : k == 1 ? l.key_lora_b : l.value_lora_b;
}
template <typename S>
const Matrix<S>& proj_w(const LayerWeights<S>& l, int k) {
  return k == 0 ? l.query_w : k == 1 ? l.key_w : l.value_w;
}
template <typename S>
const Matrix<S>& proj_b(const LayerWeights<S>& l, int k) {
  return k == 0 ? l.query_b : k == 1 ? l.key_b : l.value_b;
}
template <typename S>
Matrix<S>& proj_w(LayerWeights<S>& l, int k) {
  return k == 0 ? l.query_w : k == 1 ? l.key_w : l.value_w;
}
template <typename S>
Matrix<S>& proj_b(LayerWeights<S>& l, int k) {
  return k == 0 ? l.query_b : k == 1 ? l.key_b : l.value_b;
}

// x W + b, plus (x A^T) B^T when the projection carries an adapter.
template <typename S>
Matrix<S> project(const LayerWeights<S>& l, int k, const Matrix<S>& x, Matrix<S>* z_out) {
  Matrix<S> y = add_bias<S>(x * proj_w(l, k), proj_b(l, k));
  const Matrix<S>& a = lora_a(l, k);
  if (a.size() > 0) {
    Matrix<S> z = x * a.transpose();
    y.noalias() += z * lora_b(l, k).transpose();
    if (z_out) *z_out = std::move(z);
  }
  return y;
}

template <typename S>
Matrix<S>& z_of(LayerCache<S>& c, int k) {
  return k == 0 ? c.query_z : k == 1 ? c.key_z : c.value_z;
}
template <typename S>
const Matrix<S>& z_of(const LayerCache<S>& c, int k) {
  return k == 0 ? c.query_z : k == 1 ? c.key_z : c.value_z;
}

template <typename S>
void row_softmax_inplace(Matrix<S>& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const S mx = m.row(i).maxCoeff();
    if (!std::isfinite(static_cast<double>(mx))) {
      m.row(i).setZero();  // no visible keys
      continue;
    }
    m.row(i) = (m.row(i).array() - mx).exp();
    m.row(i) /= m.row(i).sum();
  }
}

template <typename S>
Matrix<S> layer_forward(const ModelConfig& c, const LayerWeights<S>& l, const Matrix<S>& x,
                        std::span<const std::uint8_t> mask, LayerCache<S>* cache, Rng* rng) {
  const Eigen::Index n = x.rows();
  const int d = c.hidden;
  const int heads = c.heads;
  const int dk = d / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dk));

  Matrix<S> zq, zk, zv;
  Matrix<S> q = project(l, 0, x, &zq);
  Matrix<S> k = project(l, 1, x, &zk);
  Matrix<S> v = project(l, 2, x, &zv);

  Matrix<S> context(n, d);
  std::vector<Matrix<S>> probs;
  if (cache) probs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Matrix<S> p = (q.middleCols(h * dk, dk) * k.middleCols(h * dk, dk).transpose()) * scale;
    if (!mask.empty()) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!mask[static_cast<std::size_t>(j)]) p.col(j).setConstant(-std::numeric_limits<S>::infinity());
      }
    }
    row_softmax_inplace(p);
    context.middleCols(h * dk, dk).noalias() = p * v.middleCols(h * dk, dk);
    if (cache) probs.push_back(std::move(p));
  }

  Matrix<S> attn = add_bias<S>(context * l.out_w, l.out_b);
  Matrix<S> attn_drop = dropout_mask<S>(n, d, c.dropout, rng);
  apply_mask(attn, attn_drop);
  auto ln1 = layer_norm<S>(x + attn, l.ln1_gamma, l.ln1_beta, c.layer_norm_eps);

  Matrix<S> pre = add_bias<S>(ln1.out * l.ff1_w, l.ff1_b);
  Matrix<S> act = pre.unaryExpr([](S t) { return gelu(t); });
  Matrix<S> ff = add_bias<S>(act * l.ff2_w, l.ff2_b);
  Matrix<S> ff_drop = dropout_mask<S>(n, d, c.dropout, rng);
  apply_mask(ff, ff_drop);
  auto ln2 = layer_norm<S>(ln1.out + ff, l.ln2_gamma, l.ln2_beta, c.layer_norm_eps);

  if (cache) {
    cache->input = x;
    cache->query = std::move(q);
    cache->key = std::move(k);
    cache->value = std::move(v);
    cache->query_z = std::move(zq);
    cache->key_z = std::move(zk);
    cache->value_z = std::move(zv);
    cache->probs = std::move(probs);
    cache->context = std::move(context);
    cache->attn_dropout = std::move(attn_drop);
    cache->ln1_xhat = std::move(ln1.xhat);
    cache->ln1_inv = std::move(ln1.inv);
    cache->ln1_out = ln1.out;
    cache->ff_pre = std::move(pre);
    cache->ff_act = std::move(act);
    cache->ff_dropout = std::move(ff_drop);
    cache->ln2_xhat = std::move(ln2.xhat);
    cache->ln2_inv = std::move(ln2.inv);
  }
  return std::move(ln2.out);
}

template <typename S>
Matrix<S> layer_backward(const EncoderModel<S>& model, const LayerWeights<S>& l,
                         const LayerCache<S>& cache, const Matrix<S>& dy, LayerWeights<S>& g) {
  const ModelConfig& c = model.config();
  const bool base = model.is_trainable(ParamGroup::Base);
  const int d = c.hidden;
  const int heads = c.heads;
  const int dk = d / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dk));

  // LN2(ln1_out + ff)
  Matrix<S> dsum2 = layer_norm_backward<S>(dy, cache.ln2_xhat, cache.ln2_inv, l.ln2_gamma,
                                           base ? &g.ln2_gamma : nullptr, base ? &g.ln2_beta : nullptr);
  Matrix<S> dff = dsum2;
  apply_mask(dff, cache.ff_dropout);
  if (base) {
    g.ff2_w.noalias() += cache.ff_act.transpose() * dff;
    g.ff2_b.row(0) += dff.colwise().sum();
  }
  Matrix<S> dact = dff * l.ff2_w.transpose();
  Matrix<S> dpre = dact.array() * cache.ff_pre.unaryExpr([](S t) { return gelu_grad(t); }).array();
  if (base) {
    g.ff1_w.noalias() += cache.ln1_out.transpose() * dpre;
    g.ff1_b.row(0) += dpre.colwise().sum();
  }
  Matrix<S> dln1 = dsum2;
  dln1.noalias() += dpre * l.ff1_w.transpose();

  // LN1(x + attn)
  Matrix<S> dsum1 = layer_norm_backward<S>(dln1, cache.ln1_xhat, cache.ln1_inv, l.ln1_gamma,
                                           base ? &g.ln1_gamma : nullptr, base ? &g.ln1_beta : nullptr);
  Matrix<S> dattn = dsum1;
  apply_mask(dattn, cache.attn_dropout);
  if (base) {
    g.out_w.noalias() += cache.context.transpose() * dattn;
    g.out_b.row(0) += dattn.colwise().sum();
  }
  Matrix<S> dcontext = dattn * l.out_w.transpose();

  const Eigen::Index n = dy.rows();
  Matrix<S> dq(n, d), dk_(n, d), dv(n, d);
  for (int h = 0; h < heads; ++h) {
    const Matrix<S>& p = cache.probs[static_cast<std::size_t>(h)];
    auto dctx_h = dcontext.middleCols(h * dk, dk);
    dv.middleCols(h * dk, dk).noalias() = p.transpose() * dctx_h;
    Matrix<S> dp = dctx_h * cache.value.middleCols(h * dk, dk).transpose();
    ColVector<S> rows = (dp.array() * p.array()).rowwise().sum();
    Matrix<S> ds = (p.array() * (dp.colwise() - rows).array()) * scale;
    dq.middleCols(h * dk, dk).noalias() = ds * cache.key.middleCols(h * dk, dk);
    dk_.middleCols(h * dk, dk).noalias() = ds.transpose() * cache.query.middleCols(h * dk, dk);
  }

  Matrix<S> dx = dsum1;
  const Matrix<S>* grads_in[3] = {&dq, &dk_, &dv};
  for (int k = 0; k < 3; ++k) {
    const Matrix<S>& dproj = *grads_in[k];
    if (base) {
      proj_w(g, k).noalias() += cache.input.transpose() * dproj;
      proj_b(g, k).row(0) += dproj.colwise().sum();
    }
    dx.noalias() += dproj * proj_w(l, k).transpose();
    const Matrix<S>& a = lora_a(l, k);
    if (a.size() > 0) {
      const Matrix<S>& z = z_of(cache, k);
      const Matrix<S>& b = lora_b(l, k);
      Matrix<S> dz = dproj * b;
      if (model.is_trainable(ParamGroup::Adapter)) {
        lora_b(g, k).noalias() += dproj.transpose() * z;
        lora_a(g, k).noalias() += dz.transpose() * cache.input;
      }
      dx.noalias() += dz * a;
    }
  }
  return dx;
}

}  // namespace

template <typename S>
Matrix<S> encode_row(const EncoderModel<S>& model, std::span<const TokenId> ids,
                     std::span<const std::uint8_t> mask, RowCache<S>* cache, Rng* dropout_rng) {
  const ModelConfig& c = model.config();
  const Weights<S>& w = model.weights();
  const auto n = static_cast<Eigen::Index>(ids.size());
  Matrix<S> x(n, c.hidden);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = w.token_embedding.row(ids[static_cast<std::size_t>(i)]);
  }
  if (c.positional_embeddings) x += w.position_embedding.topRows(n);
  auto ln = layer_norm<S>(x, w.emb_ln_gamma, w.emb_ln_beta, c.layer_norm_eps);
  Matrix<S> drop = dropout_mask<S>(n, c.hidden, c.dropout, dropout_rng);
  Matrix<S> h = std::move(ln.out);
  apply_mask(h, drop);

  if (cache) {
    cache->ids.assign(ids.begin(), ids.end());
    cache->mask.assign(mask.begin(), mask.end());
    cache->emb_xhat = std::move(ln.xhat);
    cache->emb_inv = std::move(ln.inv);
    cache->emb_dropout = std::move(drop);
    cache->layers.assign(w.layers.size(), {});
  }
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    h = layer_forward(c, w.layers[i], h, mask, cache ? &cache->layers[i] : nullptr, dropout_rng);
  }
  return h;
}

template <typename S>
void backward_row(const EncoderModel<S>& model, const RowCache<S>& cache, const Matrix<S>& d_states,
                  Weights<S>& grads) {
  const Weights<S>& w = model.weights();
  Matrix<S> d = d_states;
  for (std::size_t i = w.layers.size(); i-- > 0;) {
    d = layer_backward(model, w.layers[i], cache.layers[i], d, grads.layers[i]);
  }
  if (!model.is_trainable(ParamGroup::Base)) return;
  apply_mask(d, cache.emb_dropout);
  Matrix<S> dx = layer_norm_backward<S>(d, cache.emb_xhat, cache.emb_inv, w.emb_ln_gamma,
                                        &grads.emb_ln_gamma, &grads.emb_ln_beta);
  for (Eigen::Index i = 0; i < dx.rows(); ++i) {
    grads.token_embedding.row(cache.ids[static_cast<std::size_t>(i)]) += dx.row(i);
  }
  if (model.config().positional_embeddings) grads.position_embedding.topRows(dx.rows()) += dx;
}

EncodeBatch EncodeBatch::from_sequences(std::span<const TokenSequence> sequences, std::size_t width) {
  EncodeBatch b;
  b.rows = sequences.size();
  for (const auto& s : sequences) b.width = std::max(b.width, s.length());
  b.width = std::max(b.width, width);
  b.ids.assign(b.rows * b.width, Tokenizer::kPad);
  b.mask.assign(b.rows * b.width, 0);
  for (std::size_t r = 0; r < b.rows; ++r) {
    const auto& ids = sequences[r].ids;
    std::copy(ids.begin(), ids.end(), b.ids.begin() + static_cast<std::ptrdiff_t>(r * b.width));
    std::fill_n(b.mask.begin() + static_cast<std::ptrdiff_t>(r * b.width), ids.size(), std::uint8_t{1});
  }
  return b;
}

EncodeBatch EncodeBatch::from_segments(const SegmentBatch& segments) {
  EncodeBatch b;
  b.rows = segments.count();
  b.width = segments.segment_size;
  b.ids = segments.ids;
  b.mask = segments.mask;
  return b;
}

template <typename S>
RowVector<S> pool(const Matrix<S>& states, Pooling pooling) {
  if (states.rows() == 0) return RowVector<S>::Zero(states.cols());
  if (pooling == Pooling::SequenceStart) return states.row(0);
  return states.colwise().mean();
}

template <typename S>
std::vector<EncoderOutput<S>> encode(const EncoderModel<S>& model, const EncodeBatch& batch) {
  const ModelConfig& c = model.config();
  if (batch.ids.size() != batch.rows * batch.width || batch.mask.size() != batch.ids.size()) {
    throw ArgumentError("encode: batch ids/mask do not match rows x width");
  }
  if (batch.width > static_cast<std::size_t>(c.max_positions)) {
    throw ArgumentError("encode: sequence length " + std::to_string(batch.width) +
                        " exceeds max positions " + std::to_string(c.max_positions) +
                        " (sequence 0)");
  }
  for (std::size_t r = 0; r < batch.rows; ++r) {
    for (std::size_t j = 0; j < batch.width; ++j) {
      const TokenId id = batch.ids[r * batch.width + j];
      if (id < 0 || id >= c.vocab_size) {
        throw ArgumentError("encode: token id " + std::to_string(id) + " out of range in sequence " +
                            std::to_string(r));
      }
    }
  }
  std::vector<EncoderOutput<S>> out;
  out.reserve(batch.rows);
  for (std::size_t r = 0; r < batch.rows; ++r) {
    std::span<const TokenId> ids(batch.ids.data() + r * batch.width, batch.width);
    std::span<const std::uint8_t> mask(batch.mask.data() + r * batch.width, batch.width);
    Matrix<S> h = encode_row<S>(model, ids, mask, nullptr, nullptr);
    EncoderOutput<S> o;
    Eigen::Index kept = 0;
    for (std::uint8_t m : mask) kept += m ? 1 : 0;
    o.states.resize(kept, c.hidden);
    Eigen::Index k = 0;
    for (std::size_t j = 0; j < batch.width; ++j) {
      if (mask[j]) o.states.row(k++) = h.row(static_cast<Eigen::Index>(j));
    }
    o.pooled = pool<S>(o.states, c.pooling);
    out.push_back(std::move(o));
  }
  return out;
}

template <typename S>
RowVector<S> classify_pooled(const EncoderModel<S>& model, const RowVector<S>& pooled) {
  const Weights<S>& w = model.weights();
  if (w.pool_w.size() == 0) throw StateError("model does not carry a pooled_mlp head");
  RowVector<S> hidden = (pooled * w.pool_w + w.pool_b.row(0)).array().tanh().matrix();
  return hidden * w.classifier_w + w.classifier_b.row(0);
}

template <typename S>
LabelAttentionOutput<S> classify_label_attention(const EncoderModel<S>& model, const Matrix<S>& states) {
  const Weights<S>& w = model.weights();
  if (w.label_query.size() == 0) throw StateError("model does not carry a label_attention head");
  if (states.rows() == 0) throw ArgumentError("label attention over an empty (all-masked) input");
  LabelAttentionOutput<S> r;
  r.attention = w.label_query * states.transpose();
  row_softmax_inplace(r.attention);
  r.values = r.attention * states;
  r.logits = (w.label_out.array() * r.values.array()).rowwise().sum().transpose().matrix() +
             w.label_bias.row(0);
  return r;
}

template <typename S>
RowVector<S> softmax(const RowVector<S>& logits) {
  const S mx = logits.maxCoeff();
  RowVector<S> e = (logits.array() - mx).exp().matrix();
  return e / e.sum();
}

template <typename S>
RowVector<S> forward_example(const EncoderModel<S>& model, std::span<const TokenSequence> rows,
                             ExampleCache<S>* cache, Rng* dropout_rng) {
  const ModelConfig& c = model.config();
  if (rows.empty()) throw ArgumentError("forward_example: no input rows");
  std::vector<Matrix<S>> outs;
  Eigen::Index total = 0;
  if (cache) {
    cache->rows.assign(rows.size(), {});
    cache->row_lengths.clear();
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& ids = rows[i].ids;
    if (ids.size() > static_cast<std::size_t>(c.max_positions)) {
      throw ArgumentError("forward_example: row " + std::to_string(i) + " exceeds max positions");
    }
    outs.push_back(encode_row<S>(model, ids, {}, cache ? &cache->rows[i] : nullptr, dropout_rng));
    total += outs.back().rows();
    if (cache) cache->row_lengths.push_back(outs.back().rows());
  }
  Matrix<S> states(total, c.hidden);
  Eigen::Index at = 0;
  for (auto& o : outs) {
    states.middleRows(at, o.rows()) = o;
    at += o.rows();
  }

  RowVector<S> logits;
  if (c.head == HeadKind::PooledMlp) {
    RowVector<S> pooled = pool<S>(states, c.pooling);
    const Weights<S>& w = model.weights();
    RowVector<S> hidden = (pooled * w.pool_w + w.pool_b.row(0)).array().tanh().matrix();
    logits = hidden * w.classifier_w + w.classifier_b.row(0);
    if (cache) {
      cache->pooled = std::move(pooled);
      cache->pool_hidden = std::move(hidden);
    }
  } else {
    auto r = classify_label_attention<S>(model, states);
    logits = r.logits;
    if (cache) {
      cache->attention = std::move(r.attention);
      cache->values = std::move(r.values);
    }
  }
  if (cache) cache->states = std::move(states);
  return logits;
}

template <typename S>
void backward_example(const EncoderModel<S>& model, const ExampleCache<S>& cache,
                      const RowVector<S>& d_logits, Weights<S>& grads) {
  const ModelConfig& c = model.config();
  const Weights<S>& w = model.weights();
  const Matrix<S>& h = cache.states;
  Matrix<S> d_states = Matrix<S>::Zero(h.rows(), h.cols());
  const bool head = model.is_trainable(ParamGroup::Head);

  if (c.head == HeadKind::PooledMlp) {
    if (head) {
      grads.classifier_w.noalias() += cache.pool_hidden.transpose() * d_logits;
      grads.classifier_b.row(0) += d_logits;
    }
    RowVector<S> dhidden = d_logits * w.classifier_w.transpose();
    RowVector<S> dpre = (dhidden.array() * (S(1) - cache.pool_hidden.array().square())).matrix();
    if (head) {
      grads.pool_w.noalias() += cache.pooled.transpose() * dpre;
      grads.pool_b.row(0) += dpre;
    }
    RowVector<S> dpooled = dpre * w.pool_w.transpose();
    if (c.pooling == Pooling::SequenceStart) {
      d_states.row(0) += dpooled;
    } else {
      d_states.rowwise() += dpooled / static_cast<S>(h.rows());
    }
  } else {
    const Matrix<S>& alpha = cache.attention;
    const Matrix<S>& values = cache.values;
    // logit_l = w_l . v_l + b_l
    Matrix<S> dvalues = w.label_out.array().colwise() * d_logits.transpose().array();
    if (head) {
      grads.label_out.array() += values.array().colwise() * d_logits.transpose().array();
      grads.label_bias.row(0) += d_logits;
    }
    // v_l = alpha_l H
    Matrix<S> dalpha = dvalues * h.transpose();
    d_states.noalias() += alpha.transpose() * dvalues;
    ColVector<S> dots = (dalpha.array() * alpha.array()).rowwise().sum();
    Matrix<S> dscores = alpha.array() * (dalpha.colwise() - dots).array();
    // scores = U H^T
    if (head) grads.label_query.noalias() += dscores * h;
    d_states.noalias() += dscores.transpose() * w.label_query;
  }

  if (!model.is_trainable(ParamGroup::Base) && !model.is_trainable(ParamGroup::Adapter)) return;
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < cache.rows.size(); ++i) {
    const Eigen::Index n = cache.row_lengths[i];
    backward_row<S>(model, cache.rows[i], d_states.middleRows(at, n), grads);
    at += n;
  }
}

#define TRIAGE_INSTANTIATE(S)                                                                    \
  template Matrix<S> encode_row<S>(const EncoderModel<S>&, std::span<const TokenId>,           \
                                   std::span<const std::uint8_t>, RowCache<S>*, Rng*);          \
  template void backward_row<S>(const EncoderModel<S>&, const RowCache<S>&, const Matrix<S>&, \
                                Weights<S>&);                                                   \
  template std::vector<EncoderOutput<S>> encode<S>(const EncoderModel<S>&, const EncodeBatch&); \
  template RowVector<S> pool<S>(const Matrix<S>&, Pooling);                                     \
  template RowVector<S> classify_pooled<S>(const EncoderModel<S>&, const RowVector<S>&);        \
  template LabelAttentionOutput<S> classify_label_attention<S>(const EncoderModel<S>&,          \
                                                               const Matrix<S>&);               \
  template RowVector<S> softmax<S>(const RowVector<S>&);                                        \
  template RowVector<S> forward_example<S>(const EncoderModel<S>&,                              \
                                           std::span<const TokenSequence>, ExampleCache<S>*,    \
                                           Rng*);                                               \
  template void backward_example<S>(const EncoderModel<S>&, const ExampleCache<S>&,             \
                                    const RowVector<S>&, Weights<S>&);

TRIAGE_INSTANTIATE(float)
TRIAGE_INSTANTIATE(double)

}  // namespace triage
