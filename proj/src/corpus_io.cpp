#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <unordered_map>

#include "triage/corpus.hpp"
#include "triage/errors.hpp"

namespace triage {

using ojson = nlohmann::ordered_json;

namespace {

ojson document_to_json(const ClinicalDocument& doc) {
  ojson j;
  j["doc_id"] = doc.doc_id;
  j["timestamp"] = doc.timestamp.iso_timestamp();
  j["author_role"] = to_string(doc.author_role);
  j["category"] = to_string(doc.category);
  j["text"] = doc.text;
  return j;
}

template <typename J>
const J& require(const J& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw FormatError(std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

template <typename J>
std::string require_string(const J& j, const char* key) {
  const J& v = require(j, key);
  if (!v.is_string()) throw FormatError(std::string("field '") + key + "' must be a string");
  return v.template get<std::string>();
}

}  // namespace

std::string instance_to_json_line(const Instance& inst) {
  ojson j;
  j["instance_id"] = inst.instance_id;
  j["patient_id"] = inst.patient_id;
  j["referral_date"] = inst.referral_date.iso();
  j["discharge_date"] = inst.discharge_date ? ojson(inst.discharge_date->iso()) : ojson(nullptr);
  j["acceptance"] = to_string(inst.acceptance);
  j["label"] = inst.label ? ojson(team_code(*inst.label)) : ojson(nullptr);
  ojson docs = ojson::array();
  for (const auto& d : inst.documents) docs.push_back(document_to_json(d));
  j["documents"] = std::move(docs);
  return j.dump();
}

Instance instance_from_json_line(std::string_view line) {
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed instance JSON: ") + e.what());
  }
  try {
    Instance inst;
    inst.instance_id = require_string(j, "instance_id");
    inst.patient_id = require_string(j, "patient_id");
    inst.referral_date = Date::parse(require_string(j, "referral_date"));
    if (j.contains("discharge_date") && !j.at("discharge_date").is_null()) {
      inst.discharge_date = Date::parse(require_string(j, "discharge_date"));
    }
    inst.acceptance = j.contains("acceptance") ? parse_acceptance(require_string(j, "acceptance"))
                                               : Acceptance::Censored;
    if (j.contains("label") && !j.at("label").is_null()) {
      const auto code = require_string(j, "label");
      auto team = parse_team(code);
      if (!team) throw FormatError("unknown label '" + code + "'");
      inst.label = *team;
    }
    const ojson& docs = require(j, "documents");
    if (!docs.is_array()) throw FormatError("'documents' must be an array");
    for (const ojson& d : docs) {
      ClinicalDocument doc;
      doc.doc_id = require_string(d, "doc_id");
      doc.timestamp = Date::parse(require_string(d, "timestamp"));
      doc.author_role = parse_author_role(require_string(d, "author_role"));
      doc.category = parse_doc_category(require_string(d, "category"));
      doc.text = require_string(d, "text");
      inst.documents.push_back(std::move(doc));
    }
    if (inst.discharge_date && *inst.discharge_date < inst.referral_date) {
      throw FormatError("discharge_date precedes referral_date in " + inst.instance_id);
    }
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed instance JSON: ") + e.what());
  }
}

void write_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open corpus file for writing: " + path);
  for (const Instance& inst : corpus.instances) out << instance_to_json_line(inst) << '\n';
  if (!out) throw std::runtime_error("failed writing corpus file: " + path);
}

Corpus read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      corpus.instances.push_back(instance_from_json_line(line));
    } catch (const FormatError& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::unordered_map<std::string, std::size_t> patient_index;
  for (const Instance& inst : corpus.instances) {
    auto [it, inserted] = patient_index.try_emplace(inst.patient_id, corpus.patients.size());
    if (inserted) corpus.patients.push_back({inst.patient_id, {}});
    corpus.patients[it->second].instance_ids.push_back(inst.instance_id);
  }
  return corpus;
}

std::string corpus_config_to_json(const CorpusConfig& c) {
  ojson j;
  j["n_patients"] = c.n_patients;
  ojson priors;
  for (std::size_t i = 0; i < kTeamCount; ++i) priors[std::string(team_code(team_from_index(static_cast<int>(i))))] = c.team_priors[i];
  j["team_priors"] = priors;
  j["doc_length_target"] = {{"p25", c.doc_length.p25}, {"p50", c.doc_length.p50}, {"p75", c.doc_length.p75}};
  j["instance_length_target"] = {{"p25", c.instance_length.p25},
                                 {"p50", c.instance_length.p50},
                                 {"p75", c.instance_length.p75}};
  j["signal_position"] = to_string(c.signal_position);
  j["noise_ratio"] = c.noise_ratio;
  j["signal_density"] = c.signal_density;
  ojson rows = ojson::array();
  for (const auto& row : c.bounce_matrix) rows.push_back(ojson(std::vector<double>(row.begin(), row.end())));
  j["bounce_matrix"] = rows;
  j["seed"] = c.seed;
  j["extraction_date"] = c.extraction_date.iso();
  j["history_span_days"] = c.history_span_days;
  j["max_documents"] = c.max_documents;
  return j.dump(2);
}

CorpusConfig corpus_config_from_json(std::string_view text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed corpus config: ") + e.what());
  }
  CorpusConfig c;
  try {
    if (j.contains("n_patients")) c.n_patients = j.at("n_patients").get<int>();
    if (j.contains("team_priors")) {
      const auto& p = j.at("team_priors");
      for (std::size_t i = 0; i < kTeamCount; ++i) {
        const std::string code(team_code(team_from_index(static_cast<int>(i))));
        if (!p.contains(code)) throw ConfigError("team_priors missing " + code);
        c.team_priors[i] = p.at(code).get<double>();
      }
    }
    auto length = [&](const char* key, LengthTarget& t) {
      if (!j.contains(key)) return;
      const auto& v = j.at(key);
      t.p25 = v.at("p25").get<double>();
      t.p50 = v.at("p50").get<double>();
      t.p75 = v.at("p75").get<double>();
    };
    length("doc_length_target", c.doc_length);
    length("instance_length_target", c.instance_length);
    if (j.contains("signal_position")) c.signal_position = parse_signal_position(j.at("signal_position").get<std::string>());
    if (j.contains("noise_ratio")) c.noise_ratio = j.at("noise_ratio").get<double>();
    if (j.contains("signal_density")) c.signal_density = j.at("signal_density").get<double>();
    if (j.contains("bounce_matrix")) {
      const auto& rows = j.at("bounce_matrix");
      if (!rows.is_array() || rows.size() != kTeamCount) throw ConfigError("bounce_matrix must have 5 rows");
      for (std::size_t f = 0; f < kTeamCount; ++f) {
        const auto& row = rows.at(f);
        if (!row.is_array() || row.size() != kBounceColumns) throw ConfigError("bounce_matrix rows must have 6 columns");
        for (std::size_t g = 0; g < kBounceColumns; ++g) c.bounce_matrix[f][g] = row.at(g).get<double>();
      }
    }
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("extraction_date")) c.extraction_date = Date::parse(j.at("extraction_date").get<std::string>());
    if (j.contains("history_span_days")) c.history_span_days = j.at("history_span_days").get<int>();
    if (j.contains("max_documents")) c.max_documents = j.at("max_documents").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid corpus config: ") + e.what());
  } catch (const FormatError& e) {
    throw ConfigError(std::string("invalid corpus config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace triage
