#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <thread>
#include <unistd.h>

#include "support.hpp"
#include "triage/checkpoint.hpp"
#include "triage/errors.hpp"
#include "triage/hash.hpp"
#include "triage/service.hpp"

// httplib pulls in <resolv.h>, whose macros clash with Eigen; keep it last.
#include <httplib.h>

using namespace triage;
using support::small_world;
using support::world_config;
using json = nlohmann::json;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("triage_test_" + std::to_string(::getpid()) + "_" + name);
}

struct LoadedService {
  TriageService service;
  std::string checkpoint_sha;
  std::vector<std::string> train_ids;
};

// A label-attention model saved to disk, reloaded, and published with a PCA map.
LoadedService& loaded() {
  static LoadedService* s = [] {
    auto* out = new LoadedService;
    const auto& w = small_world();
    const EncoderModel<float> model(world_config(HeadKind::LabelAttention, 512), 5);
    const auto path = temp_path("service.ckpt");
    CheckpointMeta meta;
    meta.tokenizer_hash = w.tokenizer.hash();
    meta.strategy = "segment_batch";
    meta.segment_size = 128;
    save_checkpoint(path.string(), model, meta);
    out->checkpoint_sha = sha256_file(path.string());

    StrategyOptions options;
    options.segment_size = 128;
    EncoderModel<float> reloaded = load_checkpoint(path.string()).model;
    std::vector<std::size_t> idx;
    std::vector<std::string> ids;
    std::vector<Team> labels;
    for (std::size_t i = 0; i < w.corpus.instances.size() && idx.size() < 20; ++i) {
      if (w.corpus.instances[i].label && w.corpus.instances[i].acceptance == Acceptance::Accepted) {
        idx.push_back(i);
        ids.push_back(w.corpus.instances[i].instance_id);
        labels.push_back(*w.corpus.instances[i].label);
      }
    }
    out->train_ids = ids;
    ProjectionMap projection = fit_projection(embed_training_set(w.corpus, idx, reloaded, w.tokenizer, options), ids,
                                              labels, ProjectionMethod::Pca);
    ServiceAssets a{std::move(reloaded), w.tokenizer, out->checkpoint_sha, options, w.corpus, std::move(projection)};
    out->service.load(std::move(a));
    std::filesystem::remove(path);
    return out;
  }();
  return *s;
}

const Instance& instance_with_documents(std::size_t min_docs = 3) {
  for (const auto& inst : small_world().corpus.instances) {
    if (inst.documents.size() >= min_docs) return inst;
  }
  throw std::runtime_error("fixture corpus has no multi-document instance");
}

json body_of(const HttpResponse& r) { return json::parse(r.body); }

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("health before and after loading") {
    TriageService empty;
    CHECK_FALSE(empty.ready());
    const HttpResponse h = empty.health();
    CHECK(h.status == 503);
    CHECK(body_of(h)["status"] == "loading");
    CHECK(body_of(h)["model_hash"].is_null());
    CHECK(empty.triage(R"({"instance_id":"x"})").status == 503);
    CHECK(empty.map(std::nullopt, std::nullopt).status == 503);

    LoadedService& s = loaded();
    const HttpResponse ok = s.service.health();
    CHECK(ok.status == 200);
    CHECK(body_of(ok)["status"] == "ok");
    CHECK(body_of(ok)["model_hash"] == s.checkpoint_sha);
    CHECK(body_of(ok)["schema_version"] == kSchemaVersion);
  }

  TEST_CASE("sha256 matches published test vectors") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  }

  TEST_CASE("triage by instance id with an explanation") {
    LoadedService& s = loaded();
    const Instance& inst = instance_with_documents();
    const HttpResponse r = s.service.triage(json{{"instance_id", inst.instance_id}}.dump());
    REQUIRE(r.status == 200);
    const json j = body_of(r);
    CHECK(j["strategy"] == "segment_batch");
    CHECK(j["model_hash"] == s.checkpoint_sha);
    CHECK(j["recommendation"]["probabilities"].size() == kTeamCount);
    CHECK(j["explanation"]["instance_id"] == inst.instance_id);
    CHECK(j.contains("map_position"));
    double total = 0;
    for (const auto& [code, p] : j["recommendation"]["probabilities"].items()) total += p.get<double>();
    CHECK(std::abs(total - 1.0) < 1e-6);
  }

  TEST_CASE("an empty exclusion list changes nothing but the echo") {
    LoadedService& s = loaded();
    const Instance& inst = instance_with_documents();
    json plain = body_of(s.service.triage(json{{"instance_id", inst.instance_id}}.dump()));
    json empty = body_of(s.service.triage(
        json{{"instance_id", inst.instance_id}, {"excluded_doc_ids", json::array()}}.dump()));
    CHECK(plain == empty);
  }

  TEST_CASE("exclusion is applied before assembly") {
    LoadedService& s = loaded();
    const Instance& inst = instance_with_documents();
    const std::string dropped = inst.documents.back().doc_id;
    const json j = body_of(
        s.service.triage(json{{"instance_id", inst.instance_id}, {"excluded_doc_ids", {dropped}}}.dump()));
    CHECK(j["excluded_doc_ids"] == json::array({dropped}));
    CHECK(j["explanation"]["documents"].size() == inst.documents.size() - 1);
    for (const auto& d : j["explanation"]["documents"]) CHECK(d["doc_id"] != dropped);
  }

  TEST_CASE("triage error codes") {
    LoadedService& s = loaded();
    const Instance& inst = instance_with_documents();
    auto code_of = [](const HttpResponse& r) { return json::parse(r.body)["code"].get<std::string>(); };

    CHECK(s.service.triage("{oops").status == 400);
    CHECK(code_of(s.service.triage("{oops")) == "malformed_json");
    CHECK(s.service.triage("[1,2]").status == 400);
    CHECK(s.service.triage("{}").status == 400);
    CHECK(s.service.triage(R"({"instance": {"instance_id": 3}})").status == 400);
    CHECK(s.service.triage(json{{"instance_id", inst.instance_id}, {"strategy", "nope"}}.dump()).status == 400);
    CHECK(s.service.triage(json{{"instance_id", inst.instance_id}, {"label", "XX"}}.dump()).status == 400);
    CHECK(s.service.triage(json{{"instance_id", inst.instance_id}, {"excluded_doc_ids", "D1"}}.dump()).status == 400);

    const HttpResponse missing = s.service.triage(R"({"instance_id":"no-such-instance"})");
    CHECK(missing.status == 404);
    CHECK(code_of(missing) == "unknown_instance");

    const HttpResponse bad_doc =
        s.service.triage(json{{"instance_id", inst.instance_id}, {"excluded_doc_ids", {"not-a-doc"}}}.dump());
    CHECK(bad_doc.status == 422);
    CHECK(code_of(bad_doc) == "unknown_document");

    json all = json::array();
    for (const auto& d : inst.documents) all.push_back(d.doc_id);
    const HttpResponse none = s.service.triage(json{{"instance_id", inst.instance_id}, {"excluded_doc_ids", all}}.dump());
    CHECK(none.status == 422);
    CHECK(json::parse(none.body)["message"] == "no documents remain");

    for (const HttpResponse& e : {s.service.triage("{oops"), missing, bad_doc, none}) {
      const json j = json::parse(e.body);
      CHECK(j.contains("code"));
      CHECK(j.contains("message"));
    }
  }

  TEST_CASE("triage with an inline instance and every strategy") {
    LoadedService& s = loaded();
    const Instance& inst = instance_with_documents();
    const json payload = json::parse(instance_to_json_line(inst));
    for (Strategy st : kAllStrategies) {
      if (st == Strategy::Concat4096) {
        // The fixture model only has 512 positions.
        const HttpResponse too_long = s.service.triage(json{{"instance", payload}, {"strategy", "concat_4096"}}.dump());
        CHECK(too_long.status == 422);
        CHECK(body_of(too_long)["code"] == "unprocessable_instance");
        continue;
      }
      const HttpResponse r = s.service.triage(json{{"instance", payload}, {"strategy", to_string(st)}}.dump());
      CAPTURE(to_string(st));
      REQUIRE(r.status == 200);
      const json j = body_of(r);
      CHECK(j["strategy"] == to_string(st));
      CHECK(j["recommendation"].contains("predicted"));
      CHECK(j["recommendation"].contains("votes") == (st == Strategy::BruteForce));
    }
    Instance bare = inst;
    bare.documents.clear();
    const json bare_payload = json::parse(instance_to_json_line(bare));
    CHECK(s.service.triage(json{{"instance", bare_payload}, {"strategy", "brute_force"}}.dump()).status == 422);
    CHECK(s.service.triage(json{{"instance", bare_payload}, {"strategy", "concat_512"}}.dump()).status == 200);
  }

  TEST_CASE("concurrent identical requests return identical bodies") {
    LoadedService& s = loaded();
    const std::string body = json{{"instance_id", instance_with_documents().instance_id}}.dump();
    const std::string expected = s.service.triage(body).body;
    std::vector<std::string> got(6);
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < got.size(); ++t) {
      threads.emplace_back([&, t] { got[t] = s.service.triage(body).body; });
    }
    for (auto& t : threads) t.join();
    for (const auto& g : got) CHECK(g == expected);
  }

  TEST_CASE("map endpoint: filter, caching and errors") {
    LoadedService& s = loaded();
    const HttpResponse all = s.service.map(std::nullopt, std::nullopt);
    REQUIRE(all.status == 200);
    const json j = body_of(all);
    CHECK(j["points"].size() == s.train_ids.size());
    CHECK(s.service.map(std::nullopt, std::nullopt).body == all.body);

    std::string etag;
    for (const auto& [k, v] : all.headers) {
      if (k == "ETag") etag = v;
    }
    REQUIRE_FALSE(etag.empty());
    CHECK(s.service.map(std::nullopt, etag).status == 304);
    CHECK(s.service.map(std::nullopt, std::string("\"stale\"")).status == 200);

    const json oa = body_of(s.service.map(std::string("OA"), std::nullopt));
    for (const auto& p : oa["points"]) CHECK(p["team"] == "OA");
    CHECK(s.service.map(std::string("XX"), std::nullopt).status == 400);

    TriageService no_map;
    no_map.load(ServiceAssets{EncoderModel<float>(world_config(HeadKind::PooledMlp, 512), 1), small_world().tokenizer,
                              "h", StrategyOptions{}, Corpus{}, std::nullopt});
    const HttpResponse unavailable = no_map.map(std::nullopt, std::nullopt);
    CHECK(unavailable.status == 503);
    CHECK(body_of(unavailable)["code"] == "projection_unavailable");
  }

  TEST_CASE("instance listing and lookup") {
    LoadedService& s = loaded();
    const auto& corpus = small_world().corpus;
    const json page = body_of(s.service.list_instances(std::nullopt, std::nullopt));
    CHECK(page["total"] == corpus.instances.size());
    CHECK(page["limit"] == 50);
    CHECK(page["items"].size() == std::min<std::size_t>(50, corpus.instances.size()));
    const json second = body_of(s.service.list_instances(std::string("2"), std::string("3")));
    REQUIRE(second["items"].size() == 3);
    CHECK(second["items"][0]["instance_id"] == corpus.instances[2].instance_id);
    CHECK(s.service.list_instances(std::string("-1"), std::nullopt).status == 400);
    CHECK(s.service.list_instances(std::nullopt, std::string("0")).status == 400);
    CHECK(s.service.list_instances(std::nullopt, std::string("501")).status == 400);
    CHECK(s.service.list_instances(std::string("abc"), std::nullopt).status == 400);

    const HttpResponse one = s.service.get_instance(corpus.instances[0].instance_id);
    CHECK(one.status == 200);
    CHECK(instance_from_json_line(one.body) == corpus.instances[0]);
    CHECK(s.service.get_instance("missing").status == 404);
  }

  TEST_CASE("HTTP round trip") {
    LoadedService& s = loaded();
    httplib::Server server;
    register_routes(server, s.service);
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread runner([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    const auto health = client.Get("/v1/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(json::parse(health->body)["model_hash"] == s.checkpoint_sha);
    CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");

    const auto map = client.Get("/v1/map");
    REQUIRE(map);
    CHECK(map->status == 200);
    const auto cached = client.Get("/v1/map", {{"If-None-Match", map->get_header_value("ETag")}});
    REQUIRE(cached);
    CHECK(cached->status == 304);

    const std::string id = instance_with_documents().instance_id;
    const auto triage = client.Post("/v1/triage", json{{"instance_id", id}}.dump(), "application/json");
    REQUIRE(triage);
    CHECK(triage->status == 200);
    CHECK(triage->body == s.service.triage(json{{"instance_id", id}}.dump()).body);

    const auto listed = client.Get("/v1/instances?offset=1&limit=2");
    REQUIRE(listed);
    CHECK(json::parse(listed->body)["items"].size() == 2);
    const auto one = client.Get(("/v1/instances/" + id).c_str());
    REQUIRE(one);
    CHECK(one->status == 200);
    const auto nowhere = client.Get("/v1/nowhere");
    REQUIRE(nowhere);
    CHECK(nowhere->status == 404);
    CHECK(json::parse(nowhere->body).contains("code"));

    server.stop();
    runner.join();
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("checkpoints round-trip weights, adapters and metadata") {
    EncoderModel<float> m(support::tiny_config(HeadKind::LabelAttention), 3);
    m.inject_lora(2, {LoraTarget::Query, LoraTarget::Value}, 4);
    CheckpointMeta meta;
    meta.tokenizer_hash = "abc";
    meta.strategy = "segment_batch";
    meta.max_len = 0;
    meta.segment_size = 256;
    meta.extra_json = R"({"seed":7})";
    const auto path = temp_path("roundtrip.ckpt");
    save_checkpoint(path.string(), m, meta);
    const Checkpoint back = load_checkpoint(path.string());
    CHECK(back.model.config() == m.config());
    CHECK(back.model.lora_rank() == 2);
    CHECK(back.model.lora_targets() == m.lora_targets());
    CHECK(back.model.weights().layers[1].value_lora_a == m.weights().layers[1].value_lora_a);
    CHECK(back.model.weights().label_query == m.weights().label_query);
    CHECK(back.meta.tokenizer_hash == "abc");
    CHECK(back.meta.segment_size == 256);
    CHECK(json::parse(back.meta.extra_json)["seed"] == 7);
    CHECK(back.model.count_parameters().trainable == m.count_parameters().trainable);

    // Saving the reloaded model reproduces the file byte for byte.
    const auto again = temp_path("roundtrip2.ckpt");
    save_checkpoint(again.string(), back.model, back.meta);
    CHECK(sha256_file(again.string()) == sha256_file(path.string()));
    std::filesystem::remove(again);

    // Truncated and foreign files are rejected.
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size / 2);
    CHECK_THROWS_AS(load_checkpoint(path.string()), FormatError);
    {
      std::ofstream f(path, std::ios::binary | std::ios::trunc);
      f << "NOTACHECKPOINT";
    }
    CHECK_THROWS_AS(load_checkpoint(path.string()), FormatError);
    std::filesystem::remove(path);
  }

  TEST_CASE("model config JSON rejects invalid settings") {
    ModelConfig c = support::tiny_config(HeadKind::PooledMlp);
    CHECK(model_config_from_json(model_config_to_json(c)) == c);
    c.heads = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(model_config_from_json("{\"hidden\": 10, \"heads\": 4}"), ConfigError);
  }
}
