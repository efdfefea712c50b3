#pragma once

// Fixtures and independent oracles shared by the unit tests and the
// acceptance runner. Oracles deliberately avoid the library code they check.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "triage/corpus.hpp"
#include "triage/model.hpp"
#include "triage/random.hpp"
#include "triage/sequence.hpp"
#include "triage/tokenizer.hpp"

namespace support {

using namespace triage;

inline Date day(int offset) { return Date::from_ymd(2022, 1, 1) + offset; }

struct DocSpec {
  int day = 0;
  std::string text;
};

inline Instance make_instance(std::string id, int referral_day, std::vector<DocSpec> docs,
                              std::optional<int> discharge_day = std::nullopt,
                              std::optional<Team> label = Team::ED) {
  Instance inst;
  inst.instance_id = std::move(id);
  inst.patient_id = "P-" + inst.instance_id;
  inst.referral_date = day(referral_day);
  if (discharge_day) inst.discharge_date = day(*discharge_day);
  inst.label = label;
  inst.acceptance = Acceptance::Accepted;
  int n = 0;
  for (auto& d : docs) {
    ClinicalDocument doc;
    doc.doc_id = inst.instance_id + "-D" + std::to_string(++n);
    doc.timestamp = day(d.day);
    doc.text = std::move(d.text);
    inst.documents.push_back(std::move(doc));
  }
  return inst;
}

inline ModelConfig tiny_config(HeadKind head, int vocab = 40, int hidden = 16, int layers = 2) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.hidden = hidden;
  c.layers = layers;
  c.heads = 2;
  c.feed_forward = 2 * hidden;
  c.max_positions = 64;
  c.dropout = 0.0;
  c.head = head;
  c.init_range = 0.3;  // large enough that every path carries gradient
  return c;
}

inline TokenSequence random_sequence(Rng& rng, std::size_t n, int vocab) {
  TokenSequence s;
  s.ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) s.ids.push_back(static_cast<TokenId>(rng.below(static_cast<std::uint64_t>(vocab))));
  return s;
}

// A small generated corpus with its tokenizer, shared by the strategy,
// explanation and service tests.
struct World {
  Corpus corpus;
  Tokenizer tokenizer;
};

inline const World& small_world() {
  static const World w = [] {
    CorpusConfig c;
    c.n_patients = 40;
    c.seed = 5;
    Corpus corpus = generate_corpus(c);
    Tokenizer tok = train_tokenizer(corpus, 600);
    return World{std::move(corpus), std::move(tok)};
  }();
  return w;
}

inline ModelConfig world_config(HeadKind head, int max_positions = 4096) {
  ModelConfig c = tiny_config(head, static_cast<int>(small_world().tokenizer.vocab_size()), 16, 1);
  c.max_positions = max_positions;
  return c;
}

// ---------------------------------------------------------------- acceptance

// Day-by-day walk over the timeline of one referral. Written against the
// prose rule: censored when fewer than 14 days separate referral and
// extraction; accepted when some note lands on day 1..14 after referral, or
// when the referral is still open on day 15; otherwise not accepted.
inline Acceptance acceptance_oracle(int referral, std::optional<int> discharge, const std::vector<int>& note_days,
                                    int extraction) {
  int days_observed = 0;
  for (int t = referral; t < extraction; ++t) ++days_observed;
  if (days_observed < 14) return Acceptance::Censored;
  bool open_on_day15 = true;
  bool note_seen = false;
  for (int offset = 1; offset <= 15; ++offset) {
    const int t = referral + offset;
    if (offset <= 14) {
      for (int n : note_days) {
        if (n == t) note_seen = true;
      }
    }
    if (discharge && *discharge < t) open_on_day15 = false;
  }
  return (note_seen || open_on_day15) ? Acceptance::Accepted : Acceptance::NotAccepted;
}

// ---------------------------------------------------------------- segmentation

// Rebuilds the sequence by scanning the padded grid position by position.
inline bool segmentation_roundtrip_oracle(const TokenSequence& x, const SegmentBatch& b) {
  const std::size_t s = b.segment_size;
  const std::size_t n = x.ids.size();
  const std::size_t k = n == 0 ? 1 : (n + s - 1) / s;
  if (b.count() != k || b.original_length != n || b.mask.size() != k * s) return false;
  std::vector<TokenId> rebuilt;
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < s; ++c) {
      const std::size_t flat = r * s + c;
      const bool real = flat < n;
      if (static_cast<bool>(b.mask[flat]) != real) return false;
      if (!real && r + 1 != k) return false;  // padding only in the last segment
      if (real) rebuilt.push_back(b.ids[flat]);
    }
  }
  return rebuilt == x.ids;
}

// ---------------------------------------------------------------- metrics

struct MetricsScenario {
  const char* name;
  std::vector<int> predictions;
  std::vector<int> gold;
  double accuracy;
  double macro_precision;
  double macro_recall;
  double macro_f1;
  double weighted_f1;
};

// Values worked out by hand from the confusion tables; classes absent from
// both predictions and gold are left out of the macro mean.
inline std::vector<MetricsScenario> metrics_scenarios() {
  return {
      // A: P 1/2 R 1 F 2/3; B: P 1 R 1/2 F 2/3
      {"two-class swap", {0, 0, 1}, {0, 1, 1}, 2.0 / 3, 3.0 / 4, 3.0 / 4, 2.0 / 3, 2.0 / 3},
      {"perfect", {0, 1, 2, 3, 4, 0}, {0, 1, 2, 3, 4, 0}, 1.0, 1.0, 1.0, 1.0, 1.0},
      // class 0: P 1/2 R 1 F 2/3; classes 1, 2 never predicted: all zero
      {"collapsed predictor", {0, 0, 0, 0}, {0, 0, 1, 2}, 1.0 / 2, 1.0 / 6, 1.0 / 3, 2.0 / 9, 1.0 / 3},
      // class 0: P 1 R 2/3 F 4/5; class 1 perfect; class 2 predicted only: zero
      {"spurious class", {0, 0, 2, 1}, {0, 0, 0, 1}, 3.0 / 4, 2.0 / 3, 5.0 / 9, 3.0 / 5, 17.0 / 20},
      // every class: one hit, one false positive, one miss
      {"rotation", {0, 1, 2, 3, 4, 1, 2, 3, 4, 0}, {0, 1, 2, 3, 4, 0, 1, 2, 3, 4}, 0.5, 0.5, 0.5, 0.5, 0.5},
  };
}

}  // namespace support
