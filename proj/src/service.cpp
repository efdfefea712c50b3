#include "triage/service.hpp"

#include <httplib.h>

#include <charconv>
#include <json.hpp>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "triage/errors.hpp"
#include "triage/hash.hpp"

namespace triage {

using ojson = nlohmann::ordered_json;

struct TriageService::Published {
  ServiceAssets assets;
  std::unordered_map<std::string, std::size_t> index;  // instance_id -> corpus position
  // Pre-rendered /v1/map bodies keyed by label filter ("" = all).
  std::map<std::string, std::pair<std::string, std::string>> map_bodies;  // body, etag
};

HttpResponse error_response(int status, std::string_view code, std::string_view message) {
  HttpResponse r;
  r.status = status;
  r.body = ojson{{"code", code}, {"message", message}}.dump();
  return r;
}

namespace {

HttpResponse json_response(const ojson& j, int status = 200) {
  HttpResponse r;
  r.status = status;
  r.body = j.dump();
  return r;
}

ojson probabilities_json(const std::vector<double>& p) {
  ojson o = ojson::object();
  for (std::size_t t = 0; t < p.size(); ++t) o[std::string(team_code(team_from_index(static_cast<int>(t))))] = p[t];
  return o;
}

std::optional<std::size_t> parse_size(const std::optional<std::string>& s) {
  if (!s) return std::nullopt;
  std::size_t v = 0;
  auto [end, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
  if (ec != std::errc() || end != s->data() + s->size()) throw ArgumentError("not a non-negative integer: '" + *s + "'");
  return v;
}

}  // namespace

TriageService::TriageService() : started_(std::chrono::steady_clock::now()) {}

void TriageService::load(ServiceAssets assets) {
  auto p = std::make_shared<Published>(Published{std::move(assets), {}, {}});
  for (std::size_t i = 0; i < p->assets.corpus.instances.size(); ++i) {
    p->index.emplace(p->assets.corpus.instances[i].instance_id, i);
  }
  if (p->assets.projection) {
    auto render = [&](const std::string& key, std::optional<Team> filter) {
      std::string body = projection_to_json(*p->assets.projection, filter);
      std::string etag = "\"" + sha256_hex(body).substr(0, 32) + "\"";
      p->map_bodies[key] = {std::move(body), std::move(etag)};
    };
    render("", std::nullopt);
    for (Team t : kAllTeams) render(std::string(team_code(t)), t);
  }
  std::lock_guard lock(mutex_);
  published_ = std::move(p);
}

std::shared_ptr<const TriageService::Published> TriageService::snapshot() const {
  std::lock_guard lock(mutex_);
  return published_;
}

bool TriageService::ready() const { return snapshot() != nullptr; }

HttpResponse TriageService::health() const {
  const auto p = snapshot();
  const double uptime =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["status"] = p ? "ok" : "loading";
  j["model_hash"] = p ? ojson(p->assets.model_hash) : ojson(nullptr);
  j["uptime_s"] = uptime;
  if (p) {
    j["instances"] = p->assets.corpus.instances.size();
    j["projection"] = p->assets.projection.has_value();
    j["head"] = to_string(p->assets.model.config().head);
  }
  return json_response(j, p ? 200 : 503);
}

HttpResponse TriageService::map(const std::optional<std::string>& label,
                                const std::optional<std::string>& if_none_match) const {
  const auto p = snapshot();
  if (!p) return error_response(503, "model_not_loaded", "the service is still loading");
  if (p->map_bodies.empty()) return error_response(503, "projection_unavailable", "no projection was fitted at startup");
  std::string key;
  if (label && !label->empty()) {
    if (!parse_team(*label)) return error_response(400, "unknown_label", "unknown team label '" + *label + "'");
    key = *label;
  }
  const auto& [body, etag] = p->map_bodies.at(key);
  HttpResponse r;
  r.headers.emplace_back("ETag", etag);
  r.headers.emplace_back("Cache-Control", "no-cache");
  if (if_none_match && *if_none_match == etag) {
    r.status = 304;
    return r;
  }
  r.body = body;
  return r;
}

HttpResponse TriageService::triage(std::string_view body) const {
  const auto p = snapshot();
  if (!p) return error_response(503, "model_not_loaded", "the model is not loaded yet");
  const ServiceAssets& a = p->assets;

  ojson req;
  try {
    req = ojson::parse(body);
  } catch (const nlohmann::json::exception&) {
    return error_response(400, "malformed_json", "request body is not valid JSON");
  }
  if (!req.is_object()) return error_response(400, "malformed_request", "request body must be a JSON object");

  Instance instance;
  try {
    if (req.contains("instance")) {
      if (!req.at("instance").is_object()) return error_response(400, "malformed_request", "'instance' must be an object");
      instance = instance_from_json_line(req.at("instance").dump());
    } else if (req.contains("instance_id")) {
      if (!req.at("instance_id").is_string()) return error_response(400, "malformed_request", "'instance_id' must be a string");
      const auto id = req.at("instance_id").get<std::string>();
      auto it = p->index.find(id);
      if (it == p->index.end()) return error_response(404, "unknown_instance", "no stored instance '" + id + "'");
      instance = a.corpus.instances[it->second];
    } else {
      return error_response(400, "malformed_request", "request needs 'instance' or 'instance_id'");
    }
  } catch (const FormatError& e) {
    return error_response(400, "malformed_instance", e.what());
  }

  Strategy strategy = Strategy::SegmentBatch;
  std::optional<Team> label;
  std::vector<std::string> excluded;
  try {
    if (req.contains("strategy")) {
      if (!req.at("strategy").is_string()) return error_response(400, "malformed_request", "'strategy' must be a string");
      strategy = parse_strategy(req.at("strategy").get<std::string>());
    }
    if (req.contains("label") && !req.at("label").is_null()) {
      const auto code = req.at("label").get<std::string>();
      label = parse_team(code);
      if (!label) return error_response(400, "unknown_label", "unknown team label '" + code + "'");
    }
    if (req.contains("excluded_doc_ids")) {
      const auto& ex = req.at("excluded_doc_ids");
      if (!ex.is_array()) return error_response(400, "malformed_request", "'excluded_doc_ids' must be an array");
      for (const auto& e : ex) {
        if (!e.is_string()) return error_response(400, "malformed_request", "excluded_doc_ids must be strings");
        excluded.push_back(e.get<std::string>());
      }
    }
  } catch (const ArgumentError& e) {
    return error_response(400, "malformed_request", e.what());
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, "malformed_request", e.what());
  }

  // What-if exclusion happens before assembly so the explanation matches the
  // input the model actually saw.
  std::unordered_set<std::string> drop(excluded.begin(), excluded.end());
  for (const auto& id : drop) {
    const bool known = std::any_of(instance.documents.begin(), instance.documents.end(),
                                   [&](const ClinicalDocument& d) { return d.doc_id == id; });
    if (!known) return error_response(422, "unknown_document", "document '" + id + "' is not part of the instance");
  }
  if (!drop.empty()) {
    std::erase_if(instance.documents, [&](const ClinicalDocument& d) { return drop.count(d.doc_id) > 0; });
    if (instance.documents.empty()) return error_response(422, "no_documents", "no documents remain");
  }
  if (strategy == Strategy::BruteForce && instance.documents.empty()) {
    return error_response(422, "no_documents", "brute_force needs at least one document");
  }

  ojson out;
  out["schema_version"] = kSchemaVersion;
  out["instance_id"] = instance.instance_id;
  out["strategy"] = to_string(strategy);
  out["excluded_doc_ids"] = excluded;
  out["model_hash"] = a.model_hash;
  try {
    ojson rec;
    if (strategy == Strategy::SegmentBatch) {
      StrategyOptions o = a.options;
      o.fixed_shape = false;
      SegmentBatchResult r = infer_segment_batch(instance, a.model, a.tokenizer, o.segment_size, o);
      rec["probabilities"] = probabilities_json(r.recommendation.probabilities);
      rec["predicted"] = team_code(r.recommendation.predicted);
      if (r.head) {
        if (a.projection) {
          const auto row = static_cast<Eigen::Index>(team_index(r.recommendation.predicted));
          const QueryPlacement q = project_query(*a.projection, r.head->values.row(row).cast<double>());
          out["map_position"] = {{"x", q.x}, {"y", q.y}, {"approximate", q.approximate}};
        }
        const ExplanationBundle b = explain_segment_result(instance, std::move(r), label);
        out["recommendation"] = rec;
        out["explanation"] = ojson::parse(explanation_to_json(b));
      } else {
        out["recommendation"] = rec;
      }
    } else {
      const StrategyResult r = run_strategy(strategy, instance, a.model, a.tokenizer, a.options);
      rec = ojson::parse(strategy_result_to_json(r));
      rec.erase("strategy");
      out["recommendation"] = rec;
    }
  } catch (const ArgumentError& e) {
    return error_response(422, "unprocessable_instance", e.what());
  }
  return json_response(out);
}

HttpResponse TriageService::list_instances(const std::optional<std::string>& offset_s,
                                           const std::optional<std::string>& limit_s) const {
  const auto p = snapshot();
  if (!p) return error_response(503, "model_not_loaded", "the service is still loading");
  std::size_t offset = 0;
  std::size_t limit = 50;
  try {
    offset = parse_size(offset_s).value_or(0);
    limit = parse_size(limit_s).value_or(50);
  } catch (const ArgumentError& e) {
    return error_response(400, "bad_pagination", e.what());
  }
  if (limit == 0 || limit > 500) return error_response(400, "bad_pagination", "limit must be in [1, 500]");
  const auto& instances = p->assets.corpus.instances;
  ojson items = ojson::array();
  for (std::size_t i = offset; i < instances.size() && i < offset + limit; ++i) {
    const Instance& inst = instances[i];
    items.push_back({{"instance_id", inst.instance_id},
                     {"patient_id", inst.patient_id},
                     {"referral_date", inst.referral_date.iso()},
                     {"acceptance", to_string(inst.acceptance)},
                     {"label", inst.label ? ojson(team_code(*inst.label)) : ojson(nullptr)},
                     {"document_count", inst.documents.size()}});
  }
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["total"] = instances.size();
  j["offset"] = offset;
  j["limit"] = limit;
  j["items"] = std::move(items);
  return json_response(j);
}

HttpResponse TriageService::get_instance(std::string_view instance_id) const {
  const auto p = snapshot();
  if (!p) return error_response(503, "model_not_loaded", "the service is still loading");
  auto it = p->index.find(std::string(instance_id));
  if (it == p->index.end()) {
    return error_response(404, "unknown_instance", "no stored instance '" + std::string(instance_id) + "'");
  }
  HttpResponse r;
  r.body = instance_to_json_line(p->assets.corpus.instances[it->second]);
  return r;
}

namespace {

void send(httplib::Response& res, const HttpResponse& r) {
  res.status = r.status;
  for (const auto& [k, v] : r.headers) res.set_header(k, v);
  res.set_header("Access-Control-Allow-Origin", "*");
  if (!r.body.empty()) res.set_content(r.body, r.content_type);
}

std::optional<std::string> param(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  return req.get_param_value(key);
}

}  // namespace

void register_routes(httplib::Server& server, const TriageService& service, const std::string& static_dir) {
  server.Get("/v1/health", [&service](const httplib::Request&, httplib::Response& res) { send(res, service.health()); });
  server.Get("/v1/map", [&service](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> inm;
    if (req.has_header("If-None-Match")) inm = req.get_header_value("If-None-Match");
    send(res, service.map(param(req, "label"), inm));
  });
  server.Post("/v1/triage", [&service](const httplib::Request& req, httplib::Response& res) {
    send(res, service.triage(req.body));
  });
  server.Options("/v1/triage", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "POST, GET, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  server.Get("/v1/instances", [&service](const httplib::Request& req, httplib::Response& res) {
    send(res, service.list_instances(param(req, "offset"), param(req, "limit")));
  });
  server.Get(R"(/v1/instances/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    send(res, service.get_instance(req.matches[1].str()));
  });
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      if (ep) std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    send(res, error_response(500, "internal_error", what));
  });
  server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.body.empty() && res.status == 404) {
      send(res, error_response(404, "not_found", "no route for " + req.path));
    }
  });
  if (!static_dir.empty()) server.set_mount_point("/", static_dir);
}

}  // namespace triage
