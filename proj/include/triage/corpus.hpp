#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "triage/date.hpp"
#include "triage/team.hpp"

namespace triage {

enum class AuthorRole { Doctor, Nurse, Psychologist, OT, Admin };
enum class DocCategory { MSE, MDTSummary, Assessment, Admin, Contact };
enum class Acceptance { Accepted, NotAccepted, Censored };

std::string_view to_string(AuthorRole r);
std::string_view to_string(DocCategory c);
std::string_view to_string(Acceptance a);
AuthorRole parse_author_role(std::string_view s);
DocCategory parse_doc_category(std::string_view s);
Acceptance parse_acceptance(std::string_view s);

struct ClinicalDocument {
  std::string doc_id;
  Date timestamp;
  AuthorRole author_role = AuthorRole::Doctor;
  DocCategory category = DocCategory::Assessment;
  std::string text;

  bool operator==(const ClinicalDocument&) const = default;
};

// A referral-demarcated collection of documents. `label` is the team the
// referral was made to; for accepted instances it is the classification target.
struct Instance {
  std::string instance_id;
  std::string patient_id;
  Date referral_date;
  std::optional<Date> discharge_date;
  std::vector<ClinicalDocument> documents;  // ascending by (timestamp, doc_id)
  std::optional<Team> label;
  Acceptance acceptance = Acceptance::Censored;

  bool operator==(const Instance&) const = default;
};

struct PatientEntry {
  std::string patient_id;
  std::vector<std::string> instance_ids;
};

struct Corpus {
  std::vector<Instance> instances;
  std::vector<PatientEntry> patients;

  const Instance* find(std::string_view instance_id) const;
};

enum class SignalPosition { Uniform, Head, Tail };
std::string_view to_string(SignalPosition p);
SignalPosition parse_signal_position(std::string_view s);

// Token-count percentile targets for the log-normal length models.
struct LengthTarget {
  double p25 = 0;
  double p50 = 0;
  double p75 = 0;
};

inline constexpr std::size_t kBounceColumns = kTeamCount + 1;  // last column: no onward referral
using BounceRow = std::array<double, kBounceColumns>;

struct CorpusConfig {
  int n_patients = 2000;
  // Distribution of accepted-team labels.
  std::array<double, kTeamCount> team_priors = {0.10, 0.12, 0.40, 0.25, 0.13};
  LengthTarget doc_length{62, 120, 217};
  LengthTarget instance_length{429, 1323, 3658};
  // Which documents (in most-recent-first order) carry team signal.
  SignalPosition signal_position = SignalPosition::Uniform;
  // Fraction of an instance's documents that are team-agnostic filler.
  double noise_ratio = 0.7;
  // Fraction of word slots that are team terms inside a signal-bearing document.
  double signal_density = 0.15;
  // Row f: probability that a first referral to team f is followed within
  // 30 days by a referral to each team, or (last column) by none.
  std::array<BounceRow, kTeamCount> bounce_matrix = default_bounce_matrix();
  std::uint64_t seed = 7;
  Date extraction_date = Date::from_ymd(2023, 6, 30);
  int history_span_days = 1095;
  int max_documents = 400;

  static std::array<BounceRow, kTeamCount> default_bounce_matrix();
  // Throws ConfigError on violation of the probability-vector invariants.
  void validate() const;
};

// Referral events of one patient, before segmentation into instances.
struct Referral {
  Date date;
  Team team = Team::ED;
  std::optional<Date> discharge;
};

struct PatientRecord {
  std::string patient_id;
  std::vector<ClinicalDocument> documents;
  std::vector<Referral> referrals;
};

struct SegmentationResult {
  std::vector<Instance> instances;
  std::vector<std::string> warnings;
};

// Splits a patient's record into one instance per referral window
// [referral, discharge] (open windows run to the end of the record).
// Documents in overlapping windows go to the later referral.
SegmentationResult segment_history(const PatientRecord& record);

enum class AcceptanceClause { Censored, NoteWithinWindow, OpenAfterWindow, None };
std::string_view to_string(AcceptanceClause c);

struct AcceptanceDecision {
  Acceptance status = Acceptance::Censored;
  AcceptanceClause clause = AcceptanceClause::None;
};

inline constexpr int kAcceptanceWindowDays = 14;

// The 14-day heuristic: censored when extraction is less than 14 days after
// referral; otherwise accepted when a document falls in (referral, referral+14]
// or the referral is still open after referral+14.
AcceptanceDecision label_acceptance(const Instance& instance, Date extraction_date);

Corpus generate_corpus(const CorpusConfig& config);

struct Percentiles {
  std::size_t count = 0;
  double mean = 0;
  double p25 = 0;
  double p50 = 0;
  double p75 = 0;
  double p90 = 0;
};

// Linear interpolation between closest ranks; values need not be sorted.
double percentile(std::vector<double> values, double q);
Percentiles summarize(const std::vector<double>& values);

struct CorpusStats {
  Percentiles document_tokens;
  Percentiles instance_tokens;
  std::optional<double> median_accepted;
  std::optional<double> median_not_accepted;
};

using TokenCounter = std::function<std::size_t(std::string_view)>;

// Instance length is the sum of its documents' token counts.
CorpusStats corpus_stats(const Corpus& corpus, const TokenCounter& count_tokens);

struct BounceTable {
  // Rows: first-referral team; columns: next team within the window, or none.
  std::array<BounceRow, kTeamCount> probability{};
  std::array<std::array<std::size_t, kBounceColumns>, kTeamCount> counts{};
};

BounceTable bounce_matrix(const Corpus& corpus, int window_days = 30);

// Patient-disjoint split. Assignment depends only on (patient_id, seed).
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
};
bool is_eval_patient(std::string_view patient_id, double eval_fraction, std::uint64_t seed);
Split split_by_patient(const Corpus& corpus, double eval_fraction, std::uint64_t seed);

// Accepted, labelled instances: the classification data set.
std::vector<std::size_t> labelled_indices(const Corpus& corpus);

// Persistence: one JSON object per line.
std::string instance_to_json_line(const Instance& instance);
Instance instance_from_json_line(std::string_view line);
void write_corpus(const Corpus& corpus, const std::string& path);
Corpus read_corpus(const std::string& path);

std::string corpus_config_to_json(const CorpusConfig& config);
CorpusConfig corpus_config_from_json(std::string_view text);

}  // namespace triage
