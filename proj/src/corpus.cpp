#include "triage/corpus.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>

#include "triage/errors.hpp"
#include "triage/lexicon.hpp"
#include "triage/random.hpp"

namespace triage {

namespace {

constexpr double kProbabilityTolerance = 1e-9;
// Quartile distance of a standard normal: Phi^-1(0.75).
constexpr double kNormalQ3 = 0.6744897501960817;

std::string zero_pad(std::size_t value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, value);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Enum names

std::string_view to_string(AuthorRole r) {
  switch (r) {
    case AuthorRole::Doctor: return "doctor";
    case AuthorRole::Nurse: return "nurse";
    case AuthorRole::Psychologist: return "psychologist";
    case AuthorRole::OT: return "OT";
    case AuthorRole::Admin: return "admin";
  }
  return "doctor";
}

std::string_view to_string(DocCategory c) {
  switch (c) {
    case DocCategory::MSE: return "MSE";
    case DocCategory::MDTSummary: return "MDT_summary";
    case DocCategory::Assessment: return "assessment";
    case DocCategory::Admin: return "admin";
    case DocCategory::Contact: return "contact";
  }
  return "assessment";
}

std::string_view to_string(Acceptance a) {
  switch (a) {
    case Acceptance::Accepted: return "accepted";
    case Acceptance::NotAccepted: return "not_accepted";
    case Acceptance::Censored: return "censored";
  }
  return "censored";
}

std::string_view to_string(SignalPosition p) {
  switch (p) {
    case SignalPosition::Uniform: return "uniform";
    case SignalPosition::Head: return "head";
    case SignalPosition::Tail: return "tail";
  }
  return "uniform";
}

std::string_view to_string(AcceptanceClause c) {
  switch (c) {
    case AcceptanceClause::Censored: return "censored";
    case AcceptanceClause::NoteWithinWindow: return "note_within_window";
    case AcceptanceClause::OpenAfterWindow: return "open_after_window";
    case AcceptanceClause::None: return "none";
  }
  return "none";
}

AuthorRole parse_author_role(std::string_view s) {
  for (auto r : {AuthorRole::Doctor, AuthorRole::Nurse, AuthorRole::Psychologist, AuthorRole::OT,
                 AuthorRole::Admin}) {
    if (to_string(r) == s) return r;
  }
  throw FormatError("unknown author_role '" + std::string(s) + "'");
}

DocCategory parse_doc_category(std::string_view s) {
  for (auto c : {DocCategory::MSE, DocCategory::MDTSummary, DocCategory::Assessment,
                 DocCategory::Admin, DocCategory::Contact}) {
    if (to_string(c) == s) return c;
  }
  throw FormatError("unknown category '" + std::string(s) + "'");
}

Acceptance parse_acceptance(std::string_view s) {
  for (auto a : {Acceptance::Accepted, Acceptance::NotAccepted, Acceptance::Censored}) {
    if (to_string(a) == s) return a;
  }
  throw FormatError("unknown acceptance '" + std::string(s) + "'");
}

SignalPosition parse_signal_position(std::string_view s) {
  for (auto p : {SignalPosition::Uniform, SignalPosition::Head, SignalPosition::Tail}) {
    if (to_string(p) == s) return p;
  }
  throw ConfigError("unknown signal_position '" + std::string(s) + "'");
}

const Instance* Corpus::find(std::string_view instance_id) const {
  for (const auto& inst : instances) {
    if (inst.instance_id == instance_id) return &inst;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Configuration

std::array<BounceRow, kTeamCount> CorpusConfig::default_bounce_matrix() {
  std::array<BounceRow, kTeamCount> m{};
  for (std::size_t f = 0; f < kTeamCount; ++f) {
    for (std::size_t g = 0; g < kTeamCount; ++g) m[f][g] = (f == g) ? 0.0 : 0.03;
    m[f][kTeamCount] = 0.88;
  }
  return m;
}

void CorpusConfig::validate() const {
  if (n_patients <= 0) throw ConfigError("n_patients must be positive");
  double total = 0;
  for (double p : team_priors) {
    if (!(p >= 0)) throw ConfigError("team_priors entries must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance) {
    throw ConfigError("team_priors must sum to 1");
  }
  for (std::size_t f = 0; f < kTeamCount; ++f) {
    double row = 0;
    for (double p : bounce_matrix[f]) {
      if (!(p >= 0)) throw ConfigError("bounce_matrix entries must be non-negative");
      row += p;
    }
    if (std::abs(row - 1.0) > kProbabilityTolerance) {
      throw ConfigError("bounce_matrix row " + std::to_string(f) + " must sum to 1");
    }
  }
  if (!(noise_ratio >= 0 && noise_ratio <= 1)) throw ConfigError("noise_ratio must be in [0,1]");
  if (!(signal_density > 0 && signal_density <= 1)) {
    throw ConfigError("signal_density must be in (0,1]");
  }
  for (const LengthTarget* t : {&doc_length, &instance_length}) {
    if (!(t->p25 > 0 && t->p25 < t->p50 && t->p50 < t->p75)) {
      throw ConfigError("length targets must satisfy 0 < p25 < p50 < p75");
    }
  }
  if (history_span_days < 90) throw ConfigError("history_span_days must be >= 90");
  if (max_documents < 1) throw ConfigError("max_documents must be >= 1");
}

// ---------------------------------------------------------------------------
// Segmentation and the acceptance heuristic

SegmentationResult segment_history(const PatientRecord& record) {
  std::vector<Referral> referrals = record.referrals;
  std::stable_sort(referrals.begin(), referrals.end(),
                   [](const Referral& a, const Referral& b) { return a.date < b.date; });

  SegmentationResult result;
  const Date open_end(std::numeric_limits<int>::max());
  std::vector<Date> window_end;
  for (std::size_t i = 0; i < referrals.size(); ++i) {
    const Referral& r = referrals[i];
    if (r.discharge && *r.discharge < r.date) {
      throw ArgumentError("discharge before referral for patient " + record.patient_id);
    }
    window_end.push_back(r.discharge.value_or(open_end));
    Instance inst;
    inst.instance_id = record.patient_id + "-R" + std::to_string(i + 1);
    inst.patient_id = record.patient_id;
    inst.referral_date = r.date;
    inst.discharge_date = r.discharge;
    inst.label = r.team;
    result.instances.push_back(std::move(inst));
  }
  for (std::size_t i = 0; i + 1 < referrals.size(); ++i) {
    if (window_end[i] >= referrals[i + 1].date) {
      result.warnings.push_back("patient " + record.patient_id + ": referral windows starting " +
                                referrals[i].date.iso() + " and " + referrals[i + 1].date.iso() +
                                " overlap; shared documents assigned to the later referral");
    }
  }

  for (const ClinicalDocument& doc : record.documents) {
    for (std::size_t i = referrals.size(); i-- > 0;) {
      if (referrals[i].date <= doc.timestamp && doc.timestamp <= window_end[i]) {
        result.instances[i].documents.push_back(doc);
        break;
      }
    }
  }
  for (Instance& inst : result.instances) {
    std::sort(inst.documents.begin(), inst.documents.end(),
              [](const ClinicalDocument& a, const ClinicalDocument& b) {
                if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                return a.doc_id < b.doc_id;
              });
  }
  return result;
}

AcceptanceDecision label_acceptance(const Instance& instance, Date extraction_date) {
  const Date referral = instance.referral_date;
  if (extraction_date < referral) {
    throw ArgumentError("extraction date precedes referral date for " + instance.instance_id);
  }
  if (extraction_date - referral < kAcceptanceWindowDays) {
    return {Acceptance::Censored, AcceptanceClause::Censored};
  }
  const Date window_close = referral + kAcceptanceWindowDays;
  for (const ClinicalDocument& doc : instance.documents) {
    if (doc.timestamp > referral && doc.timestamp <= window_close) {
      return {Acceptance::Accepted, AcceptanceClause::NoteWithinWindow};
    }
  }
  if (!instance.discharge_date || *instance.discharge_date > window_close) {
    return {Acceptance::Accepted, AcceptanceClause::OpenAfterWindow};
  }
  return {Acceptance::NotAccepted, AcceptanceClause::None};
}

// ---------------------------------------------------------------------------
// Generator

namespace {

// Distribution of first-referral teams such that the accepted-team marginal
// equals the configured priors: p = (diag(stay) + B^T) q.
std::array<double, kTeamCount> first_referral_distribution(const CorpusConfig& cfg) {
  Eigen::Matrix<double, kTeamCount, kTeamCount> m;
  Eigen::Matrix<double, kTeamCount, 1> p;
  for (std::size_t g = 0; g < kTeamCount; ++g) {
    p(static_cast<Eigen::Index>(g)) = cfg.team_priors[g];
    for (std::size_t f = 0; f < kTeamCount; ++f) {
      double v = cfg.bounce_matrix[f][g];
      if (f == g) v += cfg.bounce_matrix[f][kTeamCount];
      m(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(f)) = v;
    }
  }
  Eigen::FullPivLU<Eigen::Matrix<double, kTeamCount, kTeamCount>> lu(m);
  if (!lu.isInvertible()) {
    throw ConfigError("bounce_matrix does not determine a first-referral distribution");
  }
  const Eigen::Matrix<double, kTeamCount, 1> q = lu.solve(p);
  std::array<double, kTeamCount> out{};
  double total = 0;
  for (std::size_t f = 0; f < kTeamCount; ++f) {
    const double v = q(static_cast<Eigen::Index>(f));
    if (v < -1e-9) {
      throw ConfigError("team_priors are unreachable under the configured bounce_matrix");
    }
    out[f] = std::max(0.0, v);
    total += out[f];
  }
  for (double& v : out) v /= total;
  return out;
}

struct LogNormal {
  double median;
  double sigma;
};

LogNormal fit_lognormal(const LengthTarget& t) {
  return {t.p50, std::log(t.p75 / t.p25) / (2 * kNormalQ3)};
}

class DocumentWriter {
 public:
  DocumentWriter(Rng& rng, const CorpusConfig& cfg) : rng_(rng), cfg_(cfg) {}

  // Emits roughly `token_budget` tokens (words and punctuation each count one).
  std::string write(DocCategory category, AuthorRole role, std::optional<Team> signal_team,
                    int token_budget) {
    std::vector<std::string> tokens;
    push_header(tokens, category, role);
    const auto& filler = filler_lexicon();
    const std::vector<std::string>* team_terms =
        signal_team ? &team_lexicon(*signal_team) : nullptr;
    std::vector<std::size_t> body_slots;
    bool has_signal = false;
    while (static_cast<int>(tokens.size()) < token_budget) {
      const int remaining = token_budget - static_cast<int>(tokens.size());
      const int words = std::max(1, std::min(rng_.range(6, 14), remaining - 1));
      for (int w = 0; w < words; ++w) {
        if (team_terms && rng_.bernoulli(cfg_.signal_density)) {
          tokens.push_back((*team_terms)[rng_.below(team_terms->size())]);
          has_signal = true;
        } else {
          body_slots.push_back(tokens.size());
          tokens.push_back(filler[rng_.below(filler.size())]);
        }
      }
      if (static_cast<int>(tokens.size()) < token_budget) tokens.emplace_back(".");
    }
    if (team_terms && !has_signal) {
      const std::size_t slot =
          body_slots.empty() ? tokens.size() : body_slots[rng_.below(body_slots.size())];
      const std::string& term = (*team_terms)[rng_.below(team_terms->size())];
      if (slot == tokens.size()) {
        tokens.push_back(term);
      } else {
        tokens[slot] = term;
      }
    }
    std::string text;
    for (const std::string& tok : tokens) {
      const bool punct = tok.size() == 1 && (tok[0] == '.' || tok[0] == ':' || tok[0] == ',');
      if (!text.empty() && !punct) text.push_back(' ');
      text += tok;
    }
    return text;
  }

 private:
  static void push_header(std::vector<std::string>& tokens, DocCategory category,
                          AuthorRole role) {
    switch (category) {
      case DocCategory::MSE: tokens.insert(tokens.end(), {"MSE"}); break;
      case DocCategory::MDTSummary: tokens.insert(tokens.end(), {"MDT", "summary"}); break;
      case DocCategory::Assessment: tokens.insert(tokens.end(), {"Assessment"}); break;
      case DocCategory::Admin: tokens.insert(tokens.end(), {"Admin", "note"}); break;
      case DocCategory::Contact: tokens.insert(tokens.end(), {"Contact", "note"}); break;
    }
    tokens.emplace_back("by");
    tokens.emplace_back(to_string(role));
    tokens.emplace_back(":");
  }

  Rng& rng_;
  const CorpusConfig& cfg_;
};

AuthorRole role_for(DocCategory category, Rng& rng) {
  switch (category) {
    case DocCategory::MSE: return rng.bernoulli(0.6) ? AuthorRole::Doctor : AuthorRole::Nurse;
    case DocCategory::MDTSummary: return AuthorRole::Doctor;
    case DocCategory::Assessment: {
      constexpr AuthorRole roles[] = {AuthorRole::Doctor, AuthorRole::Nurse,
                                      AuthorRole::Psychologist, AuthorRole::OT};
      return roles[rng.below(4)];
    }
    case DocCategory::Admin: return AuthorRole::Admin;
    case DocCategory::Contact: return rng.bernoulli(0.5) ? AuthorRole::Nurse : AuthorRole::Admin;
  }
  return AuthorRole::Doctor;
}

class PatientGenerator {
 public:
  PatientGenerator(const CorpusConfig& cfg, Rng& rng)
      : cfg_(cfg), rng_(rng), writer_(rng, cfg) {
    doc_model_ = fit_lognormal(cfg.doc_length);
    const LogNormal inst = fit_lognormal(cfg.instance_length);
    const double doc_mean = doc_model_.median * std::exp(0.5 * doc_model_.sigma * doc_model_.sigma);
    count_model_ = {inst.median / doc_mean, inst.sigma};
  }

  // Adds documents for one episode. `days` are offsets from `start`; documents
  // are emitted in chronological order and `signal_team` is planted into the
  // documents selected by the signal position rule.
  void add_episode(PatientRecord& rec, Date start, const std::vector<int>& days,
                   Team signal_team) {
    const std::size_t c = days.size();
    // Position k in most-recent-first order corresponds to chronological c-1-k.
    std::vector<bool> signal_recent_first(c, false);
    const std::size_t n_signal =
        c == 0 ? 0
               : std::max<std::size_t>(
                     1, static_cast<std::size_t>(std::lround((1.0 - cfg_.noise_ratio) * c)));
    switch (cfg_.signal_position) {
      case SignalPosition::Head:
        for (std::size_t k = 0; k < n_signal; ++k) signal_recent_first[k] = true;
        break;
      case SignalPosition::Tail:
        for (std::size_t k = 0; k < n_signal; ++k) signal_recent_first[c - 1 - k] = true;
        break;
      case SignalPosition::Uniform: {
        std::vector<std::size_t> order(c);
        std::iota(order.begin(), order.end(), 0);
        rng_.shuffle(order);
        for (std::size_t k = 0; k < n_signal; ++k) signal_recent_first[order[k]] = true;
        break;
      }
    }
    for (std::size_t i = 0; i < c; ++i) {
      const bool signal = signal_recent_first[c - 1 - i];
      DocCategory category;
      if (signal) {
        constexpr DocCategory clinical[] = {DocCategory::MSE, DocCategory::MDTSummary,
                                            DocCategory::Assessment};
        category = clinical[rng_.below(3)];
      } else {
        constexpr double weights[] = {0.15, 0.1, 0.15, 0.3, 0.3};
        category = static_cast<DocCategory>(rng_.categorical(weights));
      }
      const AuthorRole role = role_for(category, rng_);
      const int budget = std::clamp(
          static_cast<int>(std::lround(rng_.lognormal(doc_model_.median, doc_model_.sigma))), 8,
          4000);
      ClinicalDocument doc;
      doc.doc_id = rec.patient_id + "-D" + zero_pad(rec.documents.size() + 1, 4);
      doc.timestamp = start + days[i];
      doc.category = category;
      doc.author_role = role;
      doc.text = writer_.write(category, role, signal ? std::optional<Team>(signal_team)
                                                      : std::nullopt,
                               budget);
      rec.documents.push_back(std::move(doc));
    }
  }

  std::size_t draw_document_count() {
    const double c = rng_.lognormal(count_model_.median, count_model_.sigma);
    return static_cast<std::size_t>(std::clamp<long>(std::lround(c), 1, cfg_.max_documents));
  }

  // Accepted episode: open, or discharged more than 14 days after referral.
  void accepted_episode(PatientRecord& rec, Date referral, Team team) {
    const Date extraction = cfg_.extraction_date;
    std::optional<Date> discharge;
    const int available = extraction - referral;
    if (!rng_.bernoulli(0.35) && available > kAcceptanceWindowDays + 1) {
      const int duration = std::clamp(
          kAcceptanceWindowDays + 1 + static_cast<int>(std::lround(rng_.lognormal(90, 0.8))),
          kAcceptanceWindowDays + 1, available);
      discharge = referral + duration;
    }
    const int last_day = (discharge ? *discharge : extraction) - referral;
    const std::size_t c = draw_document_count();
    std::vector<int> days(c);
    days[0] = rng_.bernoulli(0.5) ? 0 : rng_.range(1, std::min(kAcceptanceWindowDays, last_day));
    for (std::size_t i = 1; i < c; ++i) days[i] = rng_.range(0, last_day);
    std::sort(days.begin(), days.end());
    rec.referrals.push_back({referral, team, discharge});
    add_episode(rec, referral, days, team);
  }

  // Not accepted: every document on the referral day; discharged within 14 days.
  Date rejected_episode(PatientRecord& rec, Date referral, Team team, Team signal_team) {
    const int stay = rng_.bernoulli(0.6) ? 0 : rng_.range(1, kAcceptanceWindowDays - 1);
    const Date discharge = referral + stay;
    const std::size_t c = draw_document_count();
    rec.referrals.push_back({referral, team, discharge});
    add_episode(rec, referral, std::vector<int>(c, 0), signal_team);
    return discharge;
  }

 private:
  const CorpusConfig& cfg_;
  Rng& rng_;
  DocumentWriter writer_;
  LogNormal doc_model_{};
  LogNormal count_model_{};
};

}  // namespace

Corpus generate_corpus(const CorpusConfig& config) {
  config.validate();
  const auto first_dist = first_referral_distribution(config);
  Rng rng(config.seed);
  PatientGenerator gen(config, rng);
  const Date extraction = config.extraction_date;
  const Date earliest = extraction - config.history_span_days;

  Corpus corpus;
  corpus.instances.reserve(static_cast<std::size_t>(config.n_patients));
  for (int p = 0; p < config.n_patients; ++p) {
    PatientRecord rec;
    rec.patient_id = "P" + zero_pad(static_cast<std::size_t>(p + 1), 6);

    const Team first = team_from_index(static_cast<int>(rng.categorical(first_dist)));
    const std::size_t next = rng.categorical(config.bounce_matrix[static_cast<std::size_t>(team_index(first))]);
    if (next == kTeamCount) {
      const Date referral = earliest + static_cast<int>(rng.below(static_cast<std::uint64_t>(config.history_span_days)));
      gen.accepted_episode(rec, referral, first);
    } else {
      const Team second = team_from_index(static_cast<int>(next));
      const Date referral = earliest + static_cast<int>(rng.below(static_cast<std::uint64_t>(config.history_span_days - 45)));
      const Date discharge = gen.rejected_episode(rec, referral, first, second);
      const int gap_max = 29 - (discharge - referral);
      const Date second_referral = discharge + rng.range(1, std::max(1, gap_max));
      gen.accepted_episode(rec, second_referral, second);
    }

    SegmentationResult seg = segment_history(rec);
    PatientEntry entry{rec.patient_id, {}};
    for (Instance& inst : seg.instances) {
      inst.acceptance = label_acceptance(inst, extraction).status;
      entry.instance_ids.push_back(inst.instance_id);
      corpus.instances.push_back(std::move(inst));
    }
    corpus.patients.push_back(std::move(entry));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Statistics

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ArgumentError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

Percentiles summarize(const std::vector<double>& values) {
  Percentiles out;
  out.count = values.size();
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  out.p25 = percentile(values, 0.25);
  out.p50 = percentile(values, 0.50);
  out.p75 = percentile(values, 0.75);
  out.p90 = percentile(values, 0.90);
  return out;
}

CorpusStats corpus_stats(const Corpus& corpus, const TokenCounter& count_tokens) {
  if (corpus.instances.empty()) throw ArgumentError("corpus_stats: empty corpus");
  std::vector<double> doc_lengths;
  std::vector<double> inst_lengths;
  std::vector<double> accepted;
  std::vector<double> not_accepted;
  for (const Instance& inst : corpus.instances) {
    double total = 0;
    for (const ClinicalDocument& doc : inst.documents) {
      const auto n = static_cast<double>(count_tokens(doc.text));
      doc_lengths.push_back(n);
      total += n;
    }
    inst_lengths.push_back(total);
    if (inst.acceptance == Acceptance::Accepted) accepted.push_back(total);
    if (inst.acceptance == Acceptance::NotAccepted) not_accepted.push_back(total);
  }
  CorpusStats stats;
  stats.document_tokens = summarize(doc_lengths);
  stats.instance_tokens = summarize(inst_lengths);
  if (!accepted.empty()) stats.median_accepted = percentile(accepted, 0.5);
  if (!not_accepted.empty()) stats.median_not_accepted = percentile(not_accepted, 0.5);
  return stats;
}

BounceTable bounce_matrix(const Corpus& corpus, int window_days) {
  std::map<std::string, std::vector<const Instance*>> by_patient;
  for (const Instance& inst : corpus.instances) {
    if (inst.label) by_patient[inst.patient_id].push_back(&inst);
  }
  BounceTable table;
  for (auto& [pid, list] : by_patient) {
    std::sort(list.begin(), list.end(), [](const Instance* a, const Instance* b) {
      if (a->referral_date != b->referral_date) return a->referral_date < b->referral_date;
      return a->instance_id < b->instance_id;
    });
    const auto first = static_cast<std::size_t>(team_index(*list[0]->label));
    std::size_t column = kTeamCount;
    if (list.size() >= 2 && list[1]->referral_date - list[0]->referral_date <= window_days) {
      column = static_cast<std::size_t>(team_index(*list[1]->label));
    }
    ++table.counts[first][column];
  }
  for (std::size_t f = 0; f < kTeamCount; ++f) {
    const std::size_t total =
        std::accumulate(table.counts[f].begin(), table.counts[f].end(), std::size_t{0});
    if (total == 0) {
      table.probability[f][kTeamCount] = 1.0;
      continue;
    }
    for (std::size_t c = 0; c < kBounceColumns; ++c) {
      table.probability[f][c] = static_cast<double>(table.counts[f][c]) / static_cast<double>(total);
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Splits

bool is_eval_patient(std::string_view patient_id, double eval_fraction, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : patient_id) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  // splitmix64 finaliser over hash and seed
  std::uint64_t z = h ^ (seed + 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return static_cast<double>(z % 1000000ULL) < eval_fraction * 1e6;
}

Split split_by_patient(const Corpus& corpus, double eval_fraction, std::uint64_t seed) {
  if (!(eval_fraction > 0 && eval_fraction < 1)) {
    throw ArgumentError("eval_fraction must be in (0,1)");
  }
  Split split;
  for (std::size_t i = 0; i < corpus.instances.size(); ++i) {
    if (is_eval_patient(corpus.instances[i].patient_id, eval_fraction, seed)) {
      split.eval.push_back(i);
    } else {
      split.train.push_back(i);
    }
  }
  return split;
}

std::vector<std::size_t> labelled_indices(const Corpus& corpus) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < corpus.instances.size(); ++i) {
    const Instance& inst = corpus.instances[i];
    if (inst.acceptance == Acceptance::Accepted && inst.label) out.push_back(i);
  }
  return out;
}

}  // namespace triage
