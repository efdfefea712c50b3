#include <doctest.h>

#include <map>
#include <set>

#include "support.hpp"
#include "triage/errors.hpp"
#include "triage/text.hpp"
#include "triage/tokenizer.hpp"

using namespace triage;
using support::make_instance;

namespace {

Tokenizer small_tokenizer() {
  const std::vector<std::string> texts = {"the patient reports low mood", "mood low, sleep poor",
                                          "new note", "old note", "alpha beta gamma delta"};
  return train_tokenizer(texts, 200);
}

}  // namespace

TEST_SUITE("textpipe") {
  TEST_CASE("clean_text examples") {
    CHECK(clean_text("a\r\nb\tc") == "a b c");
    CHECK(clean_text("already clean") == "already clean");
    CHECK(clean_text("x\xffy") == "xy");
    CHECK(clean_text("  lots   of\n\n space ") == "lots of space");
    CHECK(clean_text("") == "");
    // Valid multi-byte text and acronyms survive untouched.
    CHECK(clean_text("caf\xc3\xa9 SMI BPAD") == "caf\xc3\xa9 SMI BPAD");
    // Truncated multi-byte sequence is dropped.
    CHECK(clean_text("ok\xe2\x82") == "ok");
  }

  TEST_CASE("clean_text is idempotent on random byte strings") {
    Rng rng(3);
    for (int trial = 0; trial < 2000; ++trial) {
      std::string raw;
      const int n = rng.range(0, 40);
      for (int i = 0; i < n; ++i) {
        static const char alphabet[] = {'a', 'b', ' ', '\t', '\r', '\n', '\x01', '\x7f', '.'};
        if (rng.bernoulli(0.2)) {
          raw.push_back(static_cast<char>(rng.range(0x80, 0xff)));
        } else {
          raw.push_back(alphabet[rng.below(sizeof(alphabet))]);
        }
      }
      const std::string once = clean_text(raw);
      CHECK(clean_text(once) == once);
      CHECK(once.find('\r') == std::string::npos);
      CHECK(once.find('\t') == std::string::npos);
      CHECK(once.find("  ") == std::string::npos);
    }
  }

  TEST_CASE("tokenizer covers every word when the vocabulary is large") {
    const std::vector<std::string> texts = {"aa aa ab"};
    const Tokenizer tok = train_tokenizer(texts, 100);
    CHECK(tok.id_of("aa") != Tokenizer::kUnknown);
    CHECK(tok.id_of("ab") != Tokenizer::kUnknown);
    CHECK(tok.encode("aa ab").size() == 2);
  }

  TEST_CASE("tokenizer is deterministic") {
    const Corpus corpus = generate_corpus([] {
      CorpusConfig c;
      c.n_patients = 30;
      return c;
    }());
    CHECK(train_tokenizer(corpus, 500).vocabulary() == train_tokenizer(corpus, 500).vocabulary());
  }

  TEST_CASE("word ranking matches an independent frequency count") {
    const std::vector<std::string> texts = {"zeta zeta zeta beta beta alpha gamma gamma", "beta zeta omega",
                                            "omega omega omega omega"};
    const Tokenizer tok = train_tokenizer(texts, 1000);
    std::map<std::string, int> counts;
    for (const auto& t : texts) {
      std::string word;
      for (char c : t + " ") {
        if (c == ' ') {
          if (!word.empty()) ++counts[word];
          word.clear();
        } else {
          word += c;
        }
      }
    }
    std::vector<std::pair<int, std::string>> ranked;
    for (const auto& [w, n] : counts) ranked.emplace_back(-n, w);
    std::sort(ranked.begin(), ranked.end());
    for (std::size_t i = 0; i + 1 < ranked.size(); ++i) {
      CHECK(tok.id_of(ranked[i].second) < tok.id_of(ranked[i + 1].second));
    }
  }

  TEST_CASE("tokenizer errors and unknown text") {
    const std::vector<std::string> texts = {"aa"};
    CHECK_THROWS_AS(train_tokenizer(texts, Tokenizer::kSpecialCount + 25), ArgumentError);
    const std::vector<std::string> empty;
    CHECK_THROWS_AS(train_tokenizer(empty, 100), ArgumentError);
    const std::vector<std::string> blank = {"   "};
    CHECK_THROWS_AS(train_tokenizer(blank, 100), ArgumentError);
    const Tokenizer tok = train_tokenizer(texts, 100);
    const auto ids = tok.encode("q");
    REQUIRE(ids.size() == 1);
    CHECK(ids[0] == Tokenizer::kUnknown);
  }

  TEST_CASE("encode then decode round-trips in-vocabulary text modulo whitespace") {
    const Tokenizer tok = small_tokenizer();
    CHECK(tok.decode(tok.encode("the patient  reports\tlow mood")) == "the patient reports low mood");
    // Out-of-vocabulary words spell out as characters.
    const auto pieces = tok.encode_with_offsets("moody");
    CHECK(pieces.size() > 1);
    CHECK(pieces.front().begin == 0);
    CHECK(pieces.back().end == 5);
  }

  TEST_CASE("tokenizer serialisation round-trips and hashes stably") {
    const Tokenizer tok = small_tokenizer();
    const Tokenizer back = Tokenizer::deserialize(tok.serialize());
    CHECK(back.vocabulary() == tok.vocabulary());
    CHECK(back.hash() == tok.hash());
    CHECK(tok.hash().size() == 64);
    CHECK_THROWS_AS(Tokenizer::deserialize("garbage"), FormatError);
  }

  TEST_CASE("special ids are distinct and dense") {
    const Tokenizer tok = small_tokenizer();
    std::set<TokenId> specials = {Tokenizer::kPad, Tokenizer::kUnknown, Tokenizer::kSequenceStart,
                                  Tokenizer::kSeparator};
    CHECK(specials.size() == Tokenizer::kSpecialCount);
    for (std::size_t i = 0; i < tok.vocab_size(); ++i) CHECK(tok.id_of(tok.token(static_cast<TokenId>(i))) == static_cast<TokenId>(i));
  }

  TEST_CASE("assemble puts the most recent document first") {
    const Tokenizer tok = small_tokenizer();
    const Instance inst = make_instance("i", 0, {{1, "old"}, {2, "new"}});
    const auto a = assemble_instance(inst, tok);
    std::vector<TokenId> expected = {Tokenizer::kSequenceStart};
    for (TokenId id : tok.encode("new")) expected.push_back(id);
    expected.push_back(Tokenizer::kSeparator);
    for (TokenId id : tok.encode("old")) expected.push_back(id);
    CHECK(a.tokens.ids == expected);
    CHECK(a.origins.size() == expected.size());
    CHECK(a.origins[0].document == -1);
    CHECK(a.origins[1].document == 1);
    CHECK(a.origins.back().document == 0);
  }

  TEST_CASE("assemble: single document has no separator; zero documents give only the start token") {
    const Tokenizer tok = small_tokenizer();
    const auto one = assemble_instance(make_instance("i", 0, {{1, "new note"}}), tok);
    CHECK(std::count(one.tokens.ids.begin(), one.tokens.ids.end(), Tokenizer::kSeparator) == 0);
    const auto none = assemble_instance(make_instance("j", 0, {}), tok);
    CHECK(none.tokens.ids == std::vector<TokenId>{Tokenizer::kSequenceStart});
  }

  TEST_CASE("assemble length is one plus document tokens plus separators") {
    const Tokenizer tok = small_tokenizer();
    std::string doc;
    for (int i = 0; i < 120; ++i) doc += (i % 2 ? "alpha " : "beta ");
    const auto a = assemble_instance(make_instance("i", 0, {{1, doc}, {2, doc}, {3, doc}}), tok);
    CHECK(a.tokens.length() == 363);

    Rng rng(8);
    static const char* words[] = {"mood", "low", "sleep", "zz", "poor", ","};
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<support::DocSpec> docs;
      std::size_t expected = 1;
      const int c = rng.range(0, 6);
      for (int d = 0; d < c; ++d) {
        std::string text;
        const int n = rng.range(1, 30);
        for (int w = 0; w < n; ++w) text += std::string(words[rng.below(6)]) + " ";
        expected += tok.count_tokens(text);
        docs.push_back({d, text});
      }
      if (c > 1) expected += static_cast<std::size_t>(c - 1);
      CHECK(assemble_instance(make_instance("r", 0, docs), tok).tokens.length() == expected);
    }
  }

  TEST_CASE("truncate keeps a prefix") {
    TokenSequence s;
    for (int i = 0; i < 4097; ++i) s.ids.push_back(i % 50);
    CHECK(truncate(s, 4096).length() == 4096);
    TokenSequence s700;
    s700.ids.assign(s.ids.begin(), s.ids.begin() + 700);
    const TokenSequence t = truncate(s700, 512);
    CHECK(t.length() == 512);
    CHECK(std::equal(t.ids.begin(), t.ids.end(), s700.ids.begin()));
    TokenSequence s100;
    s100.ids.assign(s.ids.begin(), s.ids.begin() + 100);
    CHECK(truncate(s100, 512) == s100);
    CHECK_THROWS_AS(truncate(s100, 0), ArgumentError);
  }

  TEST_CASE("segment: worked examples") {
    TokenSequence s;
    s.ids.assign(1300, 7);
    const SegmentBatch b = segment(s, 512);
    CHECK(b.count() == 3);
    CHECK(b.padding() == 236);
    CHECK(support::segmentation_roundtrip_oracle(s, b));

    s.ids.assign(512, 7);
    const SegmentBatch exact = segment(s, 512);
    CHECK(exact.count() == 1);
    CHECK(exact.padding() == 0);

    const SegmentBatch empty = segment(TokenSequence{}, 128);
    CHECK(empty.count() == 1);
    CHECK(empty.original_length == 0);
    CHECK(std::all_of(empty.mask.begin(), empty.mask.end(), [](auto m) { return m == 0; }));
    CHECK(desegment(empty).ids.empty());

    CHECK_THROWS_AS(segment(s, 7), ArgumentError);
  }

  TEST_CASE("segment count bound and round trip on random sequences") {
    Rng rng(21);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n = static_cast<std::size_t>(rng.range(0, 3000));
      const std::size_t s = static_cast<std::size_t>(rng.range(8, 600));
      const TokenSequence x = support::random_sequence(rng, n, 100);
      const SegmentBatch b = segment(x, s);
      const std::size_t k = b.count();
      CHECK((k - 1) * s < std::max<std::size_t>(n, 1));
      CHECK(std::max<std::size_t>(n, 1) <= k * s);
      CHECK(desegment(b) == x);
      CHECK(support::segmentation_roundtrip_oracle(x, b));
    }
  }
}
