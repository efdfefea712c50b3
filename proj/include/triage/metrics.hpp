#pragma once

#include <array>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "triage/team.hpp"

namespace triage {

struct ClassMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t support = 0;    // gold count
  std::size_t predicted = 0;  // prediction count
  // False when the class appears in neither predictions nor gold; such
  // classes are left out of the macro average.
  bool present = false;
};

struct MetricsReport {
  std::size_t count = 0;
  double accuracy = 0;
  double macro_precision = 0;
  double macro_recall = 0;
  double macro_f1 = 0;
  double micro_f1 = 0;  // equals accuracy for single-label data
  double weighted_f1 = 0;
  std::vector<ClassMetrics> per_class;
};

using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

// Per-class precision/recall/F1 with 0 when a denominator is 0.
// Throws ArgumentError on empty or mismatched input or labels outside [0, T).
MetricsReport compute_metrics(std::span<const int> predictions, std::span<const int> gold,
                              int num_classes = static_cast<int>(kTeamCount));

// cell (i, j) = count(gold = i, pred = j)
ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> gold,
                                 int num_classes = static_cast<int>(kTeamCount));

struct LengthStratum {
  std::string_view name;
  std::size_t lower = 0;  // exclusive
  std::size_t upper = 0;  // inclusive
};

inline constexpr std::array<LengthStratum, 4> kLengthStrata = {{
    {"short", 0, 128},
    {"medium", 128, 512},
    {"long", 512, 4096},
    {"extra_long", 4096, std::numeric_limits<std::size_t>::max()},
}};

// Index into kLengthStrata; lengths must be positive.
std::size_t stratum_of(std::size_t length);

struct StratumResult {
  std::string name;
  std::size_t count = 0;
  std::optional<double> macro_f1;  // absent for empty strata
};

std::vector<StratumResult> stratified_f1(std::span<const int> predictions, std::span<const int> gold,
                                         std::span<const std::size_t> lengths,
                                         int num_classes = static_cast<int>(kTeamCount));

std::string metrics_to_json(const MetricsReport& report, int indent = 2);
std::string confusion_to_json(const ConfusionMatrix& matrix);
std::string strata_to_json(const std::vector<StratumResult>& strata);

struct NamedMetrics {
  std::string name;
  MetricsReport report;
};

// Aligned-column table with one row per method: accuracy, F1, precision, recall.
std::string format_metrics_table(const std::vector<NamedMetrics>& rows);

struct NamedStrata {
  std::string name;
  std::vector<StratumResult> strata;
};
// Rows: methods; columns: length strata.
std::string format_strata_table(const std::vector<NamedStrata>& rows);
std::string strata_to_csv(const std::vector<NamedStrata>& rows);

}  // namespace triage
