#include "triage/dataset.hpp"

#include <algorithm>
#include <thread>

#include "triage/errors.hpp"

namespace triage {

std::vector<PreparedInstance> prepare_instances(const Corpus& corpus, std::span<const std::size_t> indices,
                                                const Tokenizer& tokenizer) {
  std::vector<PreparedInstance> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    const Instance& inst = corpus.instances.at(i);
    if (!inst.label) throw ArgumentError("instance " + inst.instance_id + " has no label");
    out.push_back({i, team_index(*inst.label), assemble_instance(inst, tokenizer)});
  }
  return out;
}

std::vector<Example> build_examples(const Corpus& corpus, std::span<const PreparedInstance> prepared,
                                    const Tokenizer& tokenizer, Strategy strategy,
                                    const StrategyOptions& options) {
  std::vector<Example> out;
  for (const PreparedInstance& p : prepared) {
    const Instance& inst = corpus.instances[p.corpus_index];
    auto rows = strategy_rows(p.assembled, inst, tokenizer, strategy, options);
    if (strategy == Strategy::BruteForce) {
      for (std::size_t d = 0; d < rows.size(); ++d) {
        Example e;
        e.id = inst.documents[d].doc_id;
        e.label = p.label;
        e.length = rows[d].length();
        e.rows.push_back(std::move(rows[d]));
        out.push_back(std::move(e));
      }
    } else {
      Example e;
      e.id = inst.instance_id;
      e.label = p.label;
      e.length = p.assembled.tokens.length();
      e.rows = std::move(rows);
      out.push_back(std::move(e));
    }
  }
  return out;
}

std::vector<Example> subsample_per_class(std::span<const Example> examples, std::size_t cap, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto c = static_cast<std::size_t>(examples[i].label);
    if (by_class.size() <= c) by_class.resize(c + 1);
    by_class[c].push_back(i);
  }
  Rng rng(seed);
  std::vector<std::size_t> keep;
  for (auto& idx : by_class) {
    if (idx.size() > cap) {
      rng.shuffle(idx);
      idx.resize(cap);
    }
    keep.insert(keep.end(), idx.begin(), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  std::vector<Example> out;
  out.reserve(keep.size());
  for (std::size_t i : keep) out.push_back(examples[i]);
  return out;
}

EvalOutput evaluate_strategy(const Corpus& corpus, std::span<const PreparedInstance> prepared,
                             const EncoderModel<float>& model, const Tokenizer& tokenizer, Strategy strategy,
                             StrategyOptions options, int threads) {
  // Padding changes cost, not outputs; evaluation runs unpadded.
  options.fixed_shape = false;
  const std::size_t n = prepared.size();
  EvalOutput out;
  out.ids.resize(n);
  out.predictions.resize(n);
  out.gold.resize(n);
  out.lengths.resize(n);
  std::vector<std::uint8_t> routed(n, 0);
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < n; i += step) {
      const PreparedInstance& p = prepared[i];
      const Instance& inst = corpus.instances[p.corpus_index];
      Strategy s = strategy;
      if (s == Strategy::BruteForce && inst.documents.empty()) {
        s = Strategy::Concat512;
        routed[i] = 1;
      }
      const StrategyResult r = run_strategy(s, inst, model, tokenizer, options);
      out.ids[i] = inst.instance_id;
      out.predictions[i] = team_index(r.recommendation.predicted);
      out.gold[i] = p.label;
      out.lengths[i] = p.assembled.tokens.length();
    }
  };
  const auto t = static_cast<std::size_t>(std::max(1, threads));
  if (t == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < t; ++k) pool.emplace_back(work, k, t);
    for (auto& th : pool) th.join();
  }
  for (auto r : routed) out.routed += r;
  return out;
}

}  // namespace triage
