#include "triage/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "triage/errors.hpp"
#include "triage/hash.hpp"
#include "triage/text.hpp"

namespace triage {

namespace {

constexpr std::string_view kMagic = "triage-tokenizer";
constexpr std::string_view kSpecialNames[] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};

std::size_t codepoint_length(std::string_view s, std::size_t i) {
  const auto b = static_cast<unsigned char>(s[i]);
  std::size_t len = 1;
  if ((b & 0xE0) == 0xC0) {
    len = 2;
  } else if ((b & 0xF0) == 0xE0) {
    len = 3;
  } else if ((b & 0xF8) == 0xF0) {
    len = 4;
  }
  return std::min(len, s.size() - i);
}

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_word_byte(unsigned char c) {
  return c >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

}  // namespace

std::vector<PreToken> pre_tokenize(std::string_view text) {
  std::vector<PreToken> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      ++i;
      continue;
    }
    if (is_word_byte(c)) {
      const std::size_t start = i;
      while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) {
        i += codepoint_length(text, i);
      }
      out.push_back({text.substr(start, i - start), start});
      continue;
    }
    if (c < 0x20 || c == 0x7F) {
      ++i;
      continue;
    }
    out.push_back({text.substr(i, 1), i});
    ++i;
  }
  return out;
}

Tokenizer::Tokenizer(std::vector<std::string> vocabulary) : vocabulary_(std::move(vocabulary)) {
  if (vocabulary_.size() < kSpecialCount) {
    throw ArgumentError("tokenizer vocabulary smaller than the special token set");
  }
  for (std::size_t i = 0; i < kSpecialCount; ++i) {
    if (vocabulary_[i] != kSpecialNames[i]) {
      throw FormatError("tokenizer special token " + std::to_string(i) + " must be " +
                        std::string(kSpecialNames[i]));
    }
  }
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
    if (vocabulary_[i].empty()) throw FormatError("empty token in vocabulary");
    if (!index_.emplace(vocabulary_[i], static_cast<TokenId>(i)).second) {
      throw FormatError("duplicate token in vocabulary: " + vocabulary_[i]);
    }
  }
}

const std::string& Tokenizer::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= vocabulary_.size()) {
    throw ArgumentError("token id out of range: " + std::to_string(id));
  }
  return vocabulary_[static_cast<std::size_t>(id)];
}

TokenId Tokenizer::id_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnknown : it->second;
}

std::vector<TokenPiece> Tokenizer::encode_with_offsets(std::string_view text) const {
  std::vector<TokenPiece> out;
  for (const PreToken& pre : pre_tokenize(text)) {
    auto it = index_.find(std::string(pre.text));
    if (it != index_.end() && !is_special(it->second)) {
      out.push_back({it->second, pre.begin, pre.begin + pre.text.size()});
      continue;
    }
    for (std::size_t i = 0; i < pre.text.size();) {
      const std::size_t len = codepoint_length(pre.text, i);
      auto ch = index_.find(std::string(pre.text.substr(i, len)));
      const TokenId id = (ch == index_.end() || is_special(ch->second)) ? kUnknown : ch->second;
      out.push_back({id, pre.begin + i, pre.begin + i + len});
      i += len;
    }
  }
  return out;
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const TokenPiece& p : encode_with_offsets(text)) ids.push_back(p.id);
  return ids;
}

std::size_t Tokenizer::count_tokens(std::string_view text) const {
  return encode_with_offsets(text).size();
}

std::string Tokenizer::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (is_special(id)) continue;
    if (!out.empty()) out.push_back(' ');
    out += token(id);
  }
  return out;
}

std::string Tokenizer::serialize() const {
  std::ostringstream out;
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "size " << vocabulary_.size() << '\n';
  out << "specials pad=" << kPad << " unk=" << kUnknown << " cls=" << kSequenceStart
      << " sep=" << kSeparator << '\n';
  for (const std::string& tok : vocabulary_) out << tok << '\n';
  return out.str();
}

Tokenizer Tokenizer::deserialize(std::string_view data) {
  std::istringstream in{std::string(data)};
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic) throw FormatError("not a tokenizer file");
  if (version != kFormatVersion) {
    throw FormatError("unsupported tokenizer format version " + std::to_string(version));
  }
  std::string key;
  std::size_t size = 0;
  if (!(in >> key >> size) || key != "size") throw FormatError("tokenizer header missing size");
  std::string specials_line;
  std::getline(in, specials_line);  // rest of the size line
  std::getline(in, specials_line);
  std::ostringstream expected;
  expected << "specials pad=" << kPad << " unk=" << kUnknown << " cls=" << kSequenceStart
           << " sep=" << kSeparator;
  if (specials_line != expected.str()) throw FormatError("tokenizer special ids mismatch");
  std::vector<std::string> vocab;
  vocab.reserve(size);
  std::string line;
  while (vocab.size() < size && std::getline(in, line)) vocab.push_back(line);
  if (vocab.size() != size) throw FormatError("tokenizer file truncated");
  return Tokenizer(std::move(vocab));
}

void Tokenizer::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write tokenizer file: " + path);
  out << serialize();
}

Tokenizer Tokenizer::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open tokenizer file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

std::string Tokenizer::hash() const { return sha256_hex(serialize()); }

Tokenizer train_tokenizer(std::span<const std::string> texts, std::size_t vocab_size) {
  if (vocab_size < Tokenizer::kSpecialCount + 26) {
    throw ArgumentError("vocab_size must be at least " +
                        std::to_string(Tokenizer::kSpecialCount + 26));
  }
  std::map<std::string, std::size_t> word_counts;
  std::map<std::string, std::size_t> char_counts;
  for (const std::string& raw : texts) {
    const std::string cleaned = clean_text(raw);
    for (const PreToken& pre : pre_tokenize(cleaned)) {
      ++word_counts[std::string(pre.text)];
      for (std::size_t i = 0; i < pre.text.size();) {
        const std::size_t len = codepoint_length(pre.text, i);
        ++char_counts[std::string(pre.text.substr(i, len))];
        i += len;
      }
    }
  }
  if (word_counts.empty()) throw ArgumentError("train_tokenizer: empty corpus");

  using Entry = std::pair<std::string, std::size_t>;
  auto by_frequency = [](const Entry& a, const Entry& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  };
  std::vector<Entry> chars(char_counts.begin(), char_counts.end());
  std::vector<Entry> words;
  for (const auto& e : word_counts) {
    if (char_counts.count(e.first) == 0) words.push_back(e);
  }
  std::sort(chars.begin(), chars.end(), by_frequency);
  std::sort(words.begin(), words.end(), by_frequency);

  std::vector<std::string> vocab(std::begin(kSpecialNames), std::end(kSpecialNames));
  for (const auto& [c, n] : chars) {
    if (vocab.size() >= vocab_size) break;
    vocab.push_back(c);
  }
  for (const auto& [w, n] : words) {
    if (vocab.size() >= vocab_size) break;
    vocab.push_back(w);
  }
  return Tokenizer(std::move(vocab));
}

Tokenizer train_tokenizer(const Corpus& corpus, std::size_t vocab_size) {
  std::vector<std::string> texts;
  for (const Instance& inst : corpus.instances) {
    for (const ClinicalDocument& doc : inst.documents) texts.push_back(doc.text);
  }
  return train_tokenizer(texts, vocab_size);
}

}  // namespace triage
