#include <algorithm>
#include <fstream>
#include <map>
#include <memory>
#include <random>

#include <httplib.h>

#include "api_flow.hpp"
#include "doctest.h"
#include "personaforge/service/demo.hpp"
#include "personaforge/service/platform.hpp"
#include "personaforge/service/schema.hpp"
#include "personaforge/service/server.hpp"
#include "test_support.hpp"

using namespace personaforge::service;
using nlohmann::json;
using personaforge::testing::ApiFlow;
using personaforge::testing::contains_key;
using personaforge::testing::FlowResult;
using personaforge::testing::TempDir;
namespace fs = std::filesystem;

namespace {

Schema schema_of(const std::string& text) { return Schema(json::parse(text)); }

std::vector<std::string> paths(const std::vector<Violation>& v) {
  std::vector<std::string> out;
  for (const auto& x : v) out.push_back(x.path);
  return out;
}

std::vector<std::size_t> oracle_shuffle(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> tail;
  while (pool.size() > 1) {
    const std::uint64_t m = pool.size();
    const std::uint64_t reject_below = (~std::uint64_t{0} - m + 1) % m;
    std::uint64_t draw;
    do {
      draw = rng();
    } while (draw < reject_below);
    std::swap(pool[draw % m], pool.back());
    tail.push_back(pool.back());
    pool.pop_back();
  }
  std::vector<std::size_t> order(pool);
  order.insert(order.end(), tail.rbegin(), tail.rend());
  return order;
}

struct Deployment {
  TempDir dir{"service"};
  DemoLayout layout;
  std::unique_ptr<Platform> platform;

  explicit Deployment(json overrides = personaforge::testing::quick_config_overrides(),
                      DemoOptions options = {}) {
    options.users = 40;
    options.industries = {"fashion", "fast_food"};
    layout = write_demo_data(dir.path() / "corpus", options, overrides);
    platform = std::make_unique<Platform>(dir.path() / "data", PlatformConfig::load(layout.config));
  }

  Response call(const std::string& method, const std::string& path, const json& body = nullptr,
                const std::string& key = {}) {
    return platform->handle({method, std::string(kApiPrefix) + path, body.is_null() ? "" : body.dump(), key});
  }
};

struct Trained {
  Deployment deployment;
  FlowResult flow;
};

Trained& trained() {
  static const auto t = [] {
    auto out = std::make_unique<Trained>();
    auto& d = out->deployment;
    out->flow = personaforge::testing::run_api_flow([&](const Request& r) { return d.platform->handle(r); },
                                                    d.layout, "fashion");
    return out;
  }();
  return *t;
}

void check_error(const Response& r, int status, const std::string& code) {
  CHECK(r.status == status);
  CHECK(r.schema == "error");
  CHECK(SchemaCatalog::builtin().validate("error", r.body).empty());
  CHECK(r.body["error"]["code"] == code);
}

}  // namespace

TEST_CASE("schema validator enforces the supported keywords with JSON pointer paths") {
  const auto s = schema_of(R"({
    "type": "object",
    "properties": {
      "n": {"type": "integer", "minimum": 1, "maximum": 3},
      "s": {"type": "string", "minLength": 2, "maxLength": 3, "pattern": "^[a-z]+$"},
      "e": {"enum": ["a", "b"]},
      "xs": {"type": "array", "minItems": 1, "maxItems": 2, "items": {"$ref": "#/definitions/item"}}
    },
    "required": ["n"],
    "additionalProperties": false,
    "definitions": {"item": {"type": "object", "properties": {"v": {"type": "number"}}, "required": ["v"]}}
  })");
  CHECK(s.accepts({{"n", 2}}));
  CHECK(s.accepts({{"n", 2.0}}));
  CHECK(s.accepts({{"n", 1}, {"s", "ab"}, {"e", "b"}, {"xs", {{{"v", 1.5}}}}}));
  CHECK(paths(s.validate(json::object())) == std::vector<std::string>{"/"});
  CHECK(paths(s.validate({{"n", 2.5}})) == std::vector<std::string>{"/n"});
  CHECK(paths(s.validate({{"n", 0}})) == std::vector<std::string>{"/n"});
  CHECK(paths(s.validate({{"n", 4}})) == std::vector<std::string>{"/n"});
  CHECK(paths(s.validate({{"n", 1}, {"s", "a"}})) == std::vector<std::string>{"/s"});
  CHECK(paths(s.validate({{"n", 1}, {"s", "abcd"}})) == std::vector<std::string>{"/s"});
  CHECK(paths(s.validate({{"n", 1}, {"s", "AB"}})) == std::vector<std::string>{"/s"});
  CHECK(paths(s.validate({{"n", 1}, {"e", "c"}})) == std::vector<std::string>{"/e"});
  CHECK(paths(s.validate({{"n", 1}, {"zz", 1}})) == std::vector<std::string>{"/zz"});
  CHECK(paths(s.validate({{"n", 1}, {"xs", json::array()}})) == std::vector<std::string>{"/xs"});
  CHECK(paths(s.validate({{"n", 1}, {"xs", {{{"v", 1}}, {{"v", 2}}, {{"v", 3}}}}})) ==
        std::vector<std::string>{"/xs"});
  CHECK(paths(s.validate({{"n", 1}, {"xs", {{{"w", 1}}}}})) == std::vector<std::string>{"/xs/0"});
  CHECK(paths(s.validate({{"n", 1}, {"xs", {{{"v", "x"}}}}})) == std::vector<std::string>{"/xs/0/v"});
  CHECK(paths(s.validate(json::array())) == std::vector<std::string>{"/"});
}

TEST_CASE("schema validator handles anyOf and boolean schemas") {
  const auto s = schema_of(R"({"type": "object", "anyOf": [{"required": ["a"]}, {"required": ["b", "c"]}]})");
  CHECK(s.accepts({{"a", 1}}));
  CHECK(s.accepts({{"b", 1}, {"c", 2}}));
  CHECK_FALSE(s.accepts({{"b", 1}}));
  const auto one = schema_of(R"({"oneOf": [{"type": "integer"}, {"type": "number"}]})");
  CHECK(one.accepts(1.5));
  CHECK_FALSE(one.accepts(1));
  const auto closed = schema_of(R"({"type": "object", "properties": {"x": false}})");
  CHECK(closed.accepts(json::object()));
  CHECK_FALSE(closed.accepts({{"x", 1}}));
}

TEST_CASE("schema validator rejects unsupported keywords and dangling references at load time") {
  CHECK_THROWS_AS(schema_of(R"({"type": "string", "format": "email"})"), SchemaError);
  CHECK_THROWS_AS(schema_of(R"({"properties": {"a": {"multipleOf": 2}}})"), SchemaError);
  CHECK_THROWS_AS(schema_of(R"({"$ref": "#/definitions/missing"})"), SchemaError);
  CHECK_THROWS_AS(schema_of(R"({"$ref": "other.json"})"), SchemaError);
  CHECK_THROWS_AS(schema_of("[]"), SchemaError);
}

TEST_CASE("every shipped schema is embedded and loads") {
  const auto names = SchemaCatalog::builtin().names();
  CHECK(names.size() == 16);
  for (const auto* name : {"error", "health", "industries", "ingest_request", "ingest_response", "infer_request",
                           "infer_response", "generate_request", "round", "feedback_request", "feedback_response",
                           "close_response", "retrain_request", "job", "tick_request", "tick_response"}) {
    CHECK_NOTHROW(SchemaCatalog::builtin().at(name));
  }
  CHECK_THROWS_AS(SchemaCatalog::builtin().at("nope"), std::out_of_range);
  const auto& infer = SchemaCatalog::builtin().at("infer_request");
  CHECK(infer.accepts({{"user_id", "u1"}}));
  CHECK(infer.accepts({{"handle", "h"}, {"platform", "twitter"}}));
  CHECK_FALSE(infer.accepts({{"handle", "h"}}));
  CHECK_FALSE(infer.accepts({{"handle", "h"}, {"platform", "myspace"}}));
}

TEST_CASE("seeded card shuffle matches an independent Fisher-Yates and is uniform") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    for (std::size_t n : {0, 1, 2, 6, 10}) {
      const auto order = shuffle_positions(n, seed);
      CHECK(order == oracle_shuffle(n, seed));
      auto sorted = order;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t i = 0; i < n; ++i) CHECK(sorted[i] == i);
    }
  }
  std::map<std::vector<std::size_t>, int> counts;
  const int trials = 24000;
  for (int s = 0; s < trials; ++s) ++counts[shuffle_positions(3, static_cast<std::uint64_t>(s) * 7919 + 1)];
  CHECK(counts.size() == 6);
  for (const auto& [perm, c] : counts) CHECK(std::abs(c / double(trials) - 1.0 / 6.0) < 0.015);
  CHECK(originals_for(1) == 1);
  CHECK(originals_for(5) == 1);
  CHECK(originals_for(6) == 2);
  CHECK(originals_for(8) == 2);
}

TEST_CASE("config parsing rejects unknown keys and bad values") {
  CHECK_THROWS(PlatformConfig::from_json({{"bogus", 1}}));
  CHECK_THROWS(PlatformConfig::from_json({{"generator", {{"stepz", 1}}}}));
  CHECK_THROWS(PlatformConfig::from_json({{"lambda", 1.5}}));
  CHECK_THROWS(PlatformConfig::from_json({{"schedule", {{"profiler_hours", 12}}}}));
  CHECK_THROWS(PlatformConfig::from_json({{"sources", {{{"kind", "ftp"}, {"path", "x"}}}}}));
  const auto c = PlatformConfig::from_json({{"industries", {"Fast Food"}}, {"sources", {{{"kind", "brand"}, {"path", "b"}}}}},
                                           "/base");
  CHECK(c.industries == std::vector<std::string>{"fast_food"});
  CHECK(c.sources.at(0).path == fs::path("/base/b"));
}

TEST_CASE("scripted flow: ingest, train, infer, generate, feedback, close, retrain") {
  auto& t = trained();
  for (const auto& f : t.flow.failures) MESSAGE(f);
  CHECK(t.flow.ok());
  CHECK(t.flow.responses_checked > 20);
  CHECK(t.flow.gens.size() == 5);
  CHECK(t.flow.generator_job["result"]["training_source"] == "manifest");
  CHECK(t.flow.generator_job["result"]["warm_start"] == true);
}

TEST_CASE("stored round keeps originality server-side and replays its card order from the stored seed") {
  auto& t = trained();
  const std::string round_id = t.flow.round["round_id"];
  const json doc = t.deployment.platform->stored_round(round_id);
  const auto sources = doc["sources"].get<std::vector<std::string>>();
  const std::size_t k = doc["num_variants"];
  struct Item {
    std::string source;
    bool original;
  };
  std::vector<Item> items;
  for (std::size_t j = 0; j < k; ++j) items.push_back({sources[j % sources.size()], false});
  for (std::size_t i = 0; i < originals_for(k); ++i) items.push_back({sources[i % sources.size()], true});
  const auto order = oracle_shuffle(items.size(), doc["position_seed"].get<std::uint64_t>());
  REQUIRE(doc["cards"].size() == items.size());
  std::size_t originals = 0;
  for (std::size_t pos = 0; pos < items.size(); ++pos) {
    const auto& card = doc["cards"][pos];
    CHECK(card["source_asset_id"] == items[order[pos]].source);
    CHECK(card["is_original"] == items[order[pos]].original);
    CHECK(card["card_id"] == "c" + std::to_string(pos + 1));
    originals += card["is_original"].get<bool>();
  }
  CHECK(originals == 1);
  CHECK(contains_key(doc, "is_original"));
  CHECK_FALSE(contains_key(t.deployment.platform->round(round_id), "is_original"));
}

TEST_CASE("redaction and interleave arithmetic hold for every variant count") {
  auto& d = trained().deployment;
  for (int k = 1; k <= 8; ++k) {
    const auto r = d.call("POST", "/generate", {{"user_id", "demo"}, {"industry", "fashion"}, {"num_variants", k}});
    REQUIRE(r.status == 201);
    CHECK(SchemaCatalog::builtin().validate("round", r.body).empty());
    CHECK_FALSE(contains_key(r.body, "is_original"));
    CHECK(r.body["cards"].size() == static_cast<std::size_t>(k) + originals_for(k));
    const auto stored = d.platform->stored_round(r.body["round_id"]);
    std::size_t originals = 0;
    for (const auto& c : stored["cards"]) originals += c["is_original"].get<bool>();
    CHECK(originals == originals_for(k));
  }
  CHECK(d.call("POST", "/generate", {{"user_id", "demo"}, {"industry", "fashion"}, {"num_variants", 9}}).status == 422);
  CHECK(d.call("POST", "/generate", {{"user_id", "demo"}, {"industry", "fashion"}, {"num_variants", 0}}).status == 422);
}

TEST_CASE("same seed reproduces the generated cards and inference is deterministic") {
  auto& d = trained().deployment;
  const json req = {{"user_id", "demo"}, {"industry", "fashion"}, {"num_variants", 3}, {"seed", 5}};
  const auto a = d.call("POST", "/generate", req);
  const auto b = d.call("POST", "/generate", req);
  REQUIRE(a.status == 201);
  REQUIRE(b.status == 201);
  CHECK(a.body["round_id"] != b.body["round_id"]);
  const auto sa = d.platform->stored_round(a.body["round_id"]);
  const auto sb = d.platform->stored_round(b.body["round_id"]);
  std::multiset<std::string> va, vb;
  for (const auto& c : sa["cards"]) va.insert(c.value("variant_id", "original"));
  for (const auto& c : sb["cards"]) vb.insert(c.value("variant_id", "original"));
  CHECK(va == vb);
  const auto i1 = d.call("POST", "/profiles/infer", {{"user_id", "demo"}});
  const auto i2 = d.call("POST", "/profiles/infer", {{"user_id", "demo"}});
  CHECK(i1.status == 200);
  CHECK(i1.body == i2.body);
}

TEST_CASE("idempotency keys replay state-changing requests") {
  auto& d = trained().deployment;
  const json req = {{"user_id", "demo"}, {"industry", "fashion"}, {"num_variants", 2}};
  const auto a = d.call("POST", "/generate", req, "key-1");
  const auto b = d.call("POST", "/generate", req, "key-1");
  REQUIRE(a.status == 201);
  CHECK(b.status == 201);
  CHECK(a.body == b.body);
  const std::string round_id = a.body["round_id"];
  const json fb = personaforge::testing::rating(round_id, "c1", true);
  CHECK(d.call("POST", "/feedback", fb, "key-2").body["feedback_count"] == 1);
  CHECK(d.call("POST", "/feedback", fb, "key-2").body["feedback_count"] == 1);
  CHECK(d.call("POST", "/feedback", fb).body["feedback_count"] == 2);
  const auto c1 = d.call("POST", "/rounds/" + round_id + "/close", nullptr, "key-3");
  const auto c2 = d.call("POST", "/rounds/" + round_id + "/close", nullptr, "key-3");
  const auto c3 = d.call("POST", "/rounds/" + round_id + "/close");
  CHECK(c1.status == 200);
  CHECK(c1.body == c2.body);
  CHECK(c1.body == c3.body);
  check_error(d.call("POST", "/generate", {{"user_id", "demo"}, {"industry", "fashion"}, {"num_variants", 3}}, "key-1"),
              422, "idempotency_key_reused");
}

TEST_CASE("error paths return machine-readable codes") {
  auto& d = trained().deployment;
  check_error(d.call("POST", "/profiles/infer", {{"user_id", "ghost"}}), 404, "unknown_user");
  check_error(d.call("POST", "/profiles/infer", {{"handle", "ghost"}, {"platform", "twitter"}}), 404, "unknown_user");
  check_error(d.call("POST", "/generate", {{"user_id", "ghost"}, {"industry", "fashion"}, {"num_variants", 1}}), 404,
              "unknown_user");
  check_error(d.call("POST", "/generate", {{"user_id", "demo"}, {"industry", "toys"}, {"num_variants", 1}}), 404,
              "unknown_industry");
  check_error(d.call("POST", "/generate", {{"user_id", "demo"}, {"industry", "fast_food"}, {"num_variants", 1}}), 503,
              "model_not_ready");
  check_error(d.call("GET", "/rounds/none"), 404, "unknown_round");
  check_error(d.call("GET", "/rounds/none/cards/c1.png"), 404, "unknown_round");
  check_error(d.call("GET", "/jobs/none"), 404, "unknown_job");
  check_error(d.call("POST", "/feedback", personaforge::testing::rating("none", "c1", true)), 404, "unknown_round");
  const std::string round_id = trained().flow.round["round_id"];
  check_error(d.call("POST", "/feedback", personaforge::testing::rating(round_id, "c99", true)), 404, "unknown_card");
  check_error(d.call("GET", "/rounds/" + round_id + "/cards/c99.png"), 404, "unknown_card");

  json bad = personaforge::testing::rating(round_id, "c1", true);
  bad["attractiveness"] = 101;
  const auto r = d.call("POST", "/feedback", bad);
  check_error(r, 422, "validation_failed");
  CHECK(r.body["error"]["details"][0]["path"] == "/attractiveness");
  bad["attractiveness"] = 50;
  bad["preference"] = 0;
  CHECK(d.call("POST", "/feedback", bad).body["error"]["details"][0]["path"] == "/preference");

  check_error(d.platform->handle({"POST", "/api/v1/generate", "{not json", ""}), 400, "invalid_json");
  check_error(d.call("GET", "/nowhere"), 404, "not_found");
  check_error(d.platform->handle({"GET", "/elsewhere", "", ""}), 404, "not_found");
  check_error(d.call("GET", "/generate"), 405, "method_not_allowed");
  check_error(d.call("POST", "/health"), 405, "method_not_allowed");
  check_error(d.call("POST", "/rounds/" + round_id + "/cards/c1/repost"), 501, "not_implemented");
  check_error(d.call("POST", "/admin/retrain", {{"target", "generator"}}), 422, "validation_failed");
  check_error(d.call("POST", "/admin/retrain", {{"target", "generator"}, {"industry", "toys"}}), 404,
              "unknown_industry");
  check_error(d.call("POST", "/admin/ingest", {{"kind", "timeline"}, {"path", "/no/such/file.json"}}), 404,
              "not_found");
}

TEST_CASE("insufficient data and missing checkpoints") {
  Deployment fresh;
  auto& d = trained().deployment;
  const auto empty = fresh.dir.path() / "empty.json";
  std::ofstream(empty) << R"({"id": "empty", "handle": "empty", "posts": []})";
  CHECK(fresh.call("POST", "/admin/ingest", {{"kind", "timeline"}, {"path", empty.string()}}).status == 200);
  check_error(fresh.call("POST", "/profiles/infer", {{"user_id", "empty"}}), 503, "profiler_not_ready");
  check_error(fresh.call("POST", "/generate", {{"user_id", "empty"}, {"industry", "fashion"}, {"num_variants", 1}}), 409,
              "no_inferred_type");
  CHECK(d.call("POST", "/admin/ingest", {{"kind", "timeline"}, {"path", empty.string()}}).status == 200);
  check_error(d.call("POST", "/profiles/infer", {{"user_id", "empty"}}), 409, "insufficient_data");
}

TEST_CASE("retrain requests are exclusive per target") {
  Deployment d;
  CHECK(d.call("POST", "/admin/ingest", {{"kind", "users"}, {"path", d.layout.users.string()}}).status == 200);
  const auto first = d.call("POST", "/admin/retrain", {{"target", "profiler"}});
  const auto second = d.call("POST", "/admin/retrain", {{"target", "profiler"}});
  CHECK(first.status == 202);
  check_error(second, 409, "retrain_in_progress");
  d.platform->wait_idle();
  const auto done = d.call("GET", "/jobs/" + first.body["job_id"].get<std::string>());
  CHECK(done.body["status"] == "succeeded");
  CHECK(SchemaCatalog::builtin().validate("job", done.body).empty());
  CHECK(done.body["result"]["training_set"].size() == 40);
  CHECK(d.call("POST", "/admin/retrain", {{"target", "profiler"}}).status == 202);
  d.platform->wait_idle();
}

TEST_CASE("generator retrain refuses undersized training sets") {
  Deployment d(personaforge::testing::quick_config_overrides(), DemoOptions{.assets_per_industry = 10});
  CHECK(d.call("POST", "/admin/ingest", {{"kind", "brand"}, {"path", d.layout.brands.string()}}).status == 200);
  const auto job = d.call("POST", "/admin/retrain", {{"target", "generator"}, {"industry", "fashion"}});
  REQUIRE(job.status == 202);
  d.platform->wait_idle();
  const auto done = d.call("GET", "/jobs/" + job.body["job_id"].get<std::string>());
  CHECK(done.body["status"] == "failed");
  CHECK(done.body["error"].get<std::string>().find("at least 32") != std::string::npos);
}

TEST_CASE("tick advances the logical clock and runs due tasks") {
  json overrides = personaforge::testing::quick_config_overrides();
  overrides.erase("sources");
  Deployment d(overrides);
  const auto check_tick = [&](int hours) {
    const auto r = d.call("POST", "/admin/tick", {{"hours", hours}});
    REQUIRE(r.status == 200);
    CHECK(SchemaCatalog::builtin().validate("tick_response", r.body).empty());
    return r.body;
  };
  const std::int64_t start = d.platform->now();
  CHECK(check_tick(0)["executed"].empty());
  const auto twelve = check_tick(12);
  REQUIRE(twelve["executed"].size() == 1);
  CHECK(twelve["executed"][0]["task"] == "ingestion");
  CHECK(twelve["executed"][0]["status"] == "executed");
  CHECK(twelve["now"] == start + 12);
  CHECK(d.call("GET", "/industries").body["industries"][0]["asset_count"].get<int>() == 40);
  const auto day = check_tick(12);
  std::map<std::string, int> tasks;
  for (const auto& e : day["executed"]) ++tasks[e["task"].get<std::string>()];
  CHECK(tasks["ingestion"] == 1);
  CHECK(tasks["generator_retrain"] == 2);
  for (const auto& e : day["executed"]) {
    if (e["task"] == "generator_retrain") CHECK(e["status"] == "queued");
  }
  d.platform->wait_idle();
  const auto week = check_tick(144);
  std::map<std::string, int> weekly;
  for (const auto& e : week["executed"]) ++weekly[e["task"].get<std::string>()];
  CHECK(weekly["ingestion"] == 12);
  CHECK(weekly["profiler_retrain"] == 1);
  CHECK(weekly["generator_retrain"] == 12);
  d.platform->wait_idle();
  CHECK(d.call("GET", "/health").body["now"] == start + 168);

  Deployment locked(json{{"admin", false}, {"sources", json::array()}});
  check_error(locked.call("POST", "/admin/tick", {{"hours", 1}}), 403, "admin_disabled");
  check_error(locked.call("POST", "/admin/retrain", {{"target", "profiler"}}), 403, "admin_disabled");
}

TEST_CASE("platform state survives a restart") {
  TempDir dir("restart");
  const auto layout = write_demo_data(dir.path() / "corpus", {.users = 20, .industries = {"fashion"}},
                                      personaforge::testing::quick_config_overrides());
  const auto config = PlatformConfig::load(layout.config);
  {
    Platform p(dir.path() / "data", config);
    CHECK(p.handle({"POST", "/api/v1/admin/ingest", json{{"kind", "brand"}, {"path", layout.brands.string()}}.dump(), ""})
              .status == 200);
    CHECK(p.handle({"POST", "/api/v1/admin/tick", R"({"hours": 5})", ""}).status == 200);
  }
  Platform p(dir.path() / "data", config);
  CHECK(p.now() == config.clock_start + 5);
  CHECK(p.store().snapshot()->assets.size() == 40);
}

TEST_CASE("HTTP adapter serves the API with headers and status codes") {
  Deployment d;
  HttpServer server(*d.platform, {.host = "127.0.0.1", .port = 0});
  const int port = server.start();
  httplib::Client client("127.0.0.1", port);
  const auto health = client.Get("/api/v1/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(SchemaCatalog::builtin().validate("health", json::parse(health->body)).empty());
  const auto bad = client.Post("/api/v1/generate", "{oops", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  const httplib::Headers headers = {{"Idempotency-Key", "tick-1"}};
  const auto t1 = client.Post("/api/v1/admin/tick", headers, R"({"hours": 3})", "application/json");
  const auto t2 = client.Post("/api/v1/admin/tick", headers, R"({"hours": 3})", "application/json");
  REQUIRE(t1);
  REQUIRE(t2);
  CHECK(t1->body == t2->body);
  CHECK(json::parse(client.Get("/api/v1/health")->body)["now"] == d.platform->config().clock_start + 3);
  const auto put = client.Put("/api/v1/health", "", "application/json");
  REQUIRE(put);
  CHECK(put->status == 405);
  server.stop();
}
