#include "triage/metrics.hpp"

#include <cstdio>
#include <json.hpp>
#include <sstream>

#include "triage/errors.hpp"

namespace triage {

using ojson = nlohmann::ordered_json;

namespace {

void check_inputs(std::span<const int> predictions, std::span<const int> gold, int num_classes) {
  if (predictions.size() != gold.size()) {
    throw ArgumentError("predictions and gold differ in length");
  }
  if (num_classes < 1) throw ArgumentError("num_classes must be positive");
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || gold[i] >= num_classes || predictions[i] < 0 || predictions[i] >= num_classes) {
      throw ArgumentError("label out of range at position " + std::to_string(i));
    }
  }
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> gold,
                                 int num_classes) {
  check_inputs(predictions, gold, num_classes);
  const auto t = static_cast<std::size_t>(num_classes);
  ConfusionMatrix m(t, std::vector<std::size_t>(t, 0));
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++m[static_cast<std::size_t>(gold[i])][static_cast<std::size_t>(predictions[i])];
  }
  return m;
}

MetricsReport compute_metrics(std::span<const int> predictions, std::span<const int> gold,
                              int num_classes) {
  if (gold.empty()) throw ArgumentError("compute_metrics: empty input");
  const ConfusionMatrix m = confusion_matrix(predictions, gold, num_classes);
  const auto t = static_cast<std::size_t>(num_classes);
  MetricsReport r;
  r.count = gold.size();
  r.per_class.resize(t);
  std::size_t correct = 0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < t; ++c) {
    std::size_t support = 0;
    std::size_t predicted = 0;
    for (std::size_t j = 0; j < t; ++j) {
      support += m[c][j];
      predicted += m[j][c];
    }
    const std::size_t tp = m[c][c];
    correct += tp;
    ClassMetrics& cm = r.per_class[c];
    cm.support = support;
    cm.predicted = predicted;
    cm.present = support + predicted > 0;
    cm.precision = ratio(tp, predicted);
    cm.recall = ratio(tp, support);
    cm.f1 = ratio(2 * tp, support + predicted);
    if (cm.present) {
      ++present;
      r.macro_precision += cm.precision;
      r.macro_recall += cm.recall;
      r.macro_f1 += cm.f1;
    }
    r.weighted_f1 += cm.f1 * static_cast<double>(support);
  }
  r.accuracy = ratio(correct, r.count);
  r.micro_f1 = r.accuracy;
  r.macro_precision /= static_cast<double>(present);
  r.macro_recall /= static_cast<double>(present);
  r.macro_f1 /= static_cast<double>(present);
  r.weighted_f1 /= static_cast<double>(r.count);
  return r;
}

std::size_t stratum_of(std::size_t length) {
  if (length == 0) throw ArgumentError("instance length must be positive");
  for (std::size_t i = 0; i < kLengthStrata.size(); ++i) {
    if (length > kLengthStrata[i].lower && length <= kLengthStrata[i].upper) return i;
  }
  return kLengthStrata.size() - 1;
}

std::vector<StratumResult> stratified_f1(std::span<const int> predictions, std::span<const int> gold,
                                         std::span<const std::size_t> lengths, int num_classes) {
  check_inputs(predictions, gold, num_classes);
  if (lengths.size() != gold.size()) throw ArgumentError("lengths and gold differ in length");
  std::vector<std::vector<int>> p(kLengthStrata.size()), g(kLengthStrata.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const std::size_t s = stratum_of(lengths[i]);
    p[s].push_back(predictions[i]);
    g[s].push_back(gold[i]);
  }
  std::vector<StratumResult> out;
  for (std::size_t s = 0; s < kLengthStrata.size(); ++s) {
    StratumResult r;
    r.name = std::string(kLengthStrata[s].name);
    r.count = g[s].size();
    if (!g[s].empty()) r.macro_f1 = compute_metrics(p[s], g[s], num_classes).macro_f1;
    out.push_back(std::move(r));
  }
  return out;
}

std::string metrics_to_json(const MetricsReport& r, int indent) {
  ojson j;
  j["count"] = r.count;
  j["accuracy"] = r.accuracy;
  j["macro_precision"] = r.macro_precision;
  j["macro_recall"] = r.macro_recall;
  j["macro_f1"] = r.macro_f1;
  j["micro_f1"] = r.micro_f1;
  j["weighted_f1"] = r.weighted_f1;
  ojson per = ojson::object();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    const std::string key = c < kTeamCount ? std::string(team_code(team_from_index(static_cast<int>(c))))
                                           : std::to_string(c);
    per[key] = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
                {"support", m.support}, {"predicted", m.predicted}};
  }
  j["per_class"] = per;
  return j.dump(indent);
}

std::string confusion_to_json(const ConfusionMatrix& matrix) { return ojson(matrix).dump(); }

std::string strata_to_json(const std::vector<StratumResult>& strata) {
  ojson arr = ojson::array();
  for (const auto& s : strata) {
    arr.push_back({{"stratum", s.name},
                   {"count", s.count},
                   {"macro_f1", s.macro_f1 ? ojson(*s.macro_f1) : ojson(nullptr)}});
  }
  return arr.dump(2);
}

std::string format_metrics_table(const std::vector<NamedMetrics>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %8s %8s %9s %8s %7s\n", "method", "accuracy", "f1",
                "precision", "recall", "n");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-24s %8.3f %8.3f %9.3f %8.3f %7zu\n", r.name.c_str(),
                  r.report.accuracy, r.report.macro_f1, r.report.macro_precision,
                  r.report.macro_recall, r.report.count);
    out << line;
  }
  return out.str();
}

std::string format_strata_table(const std::vector<NamedStrata>& rows) {
  std::ostringstream out;
  char cell[64];
  std::snprintf(cell, sizeof cell, "%-24s", "method");
  out << cell;
  for (const auto& s : kLengthStrata) {
    std::snprintf(cell, sizeof cell, " %16s", std::string(s.name).c_str());
    out << cell;
  }
  out << '\n';
  for (const auto& r : rows) {
    std::snprintf(cell, sizeof cell, "%-24s", r.name.c_str());
    out << cell;
    for (const auto& s : r.strata) {
      if (s.macro_f1) {
        std::snprintf(cell, sizeof cell, " %9.3f (%4zu)", *s.macro_f1, s.count);
      } else {
        std::snprintf(cell, sizeof cell, " %16s", "-");
      }
      out << cell;
    }
    out << '\n';
  }
  return out.str();
}

std::string strata_to_csv(const std::vector<NamedStrata>& rows) {
  std::ostringstream out;
  out << "method,stratum,count,macro_f1\n";
  for (const auto& r : rows) {
    for (const auto& s : r.strata) {
      out << r.name << ',' << s.name << ',' << s.count << ',';
      if (s.macro_f1) out << *s.macro_f1;
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace triage
