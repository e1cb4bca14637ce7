#include "personaforge/service/platform.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "personaforge/feedback/augment.hpp"
#include "personaforge/feedback/feedback.hpp"
#include "personaforge/service/schema.hpp"
#include "personaforge/store/image_io.hpp"

namespace personaforge::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw std::invalid_argument(where + ": unknown key '" + key + "'");
  }
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '/')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

json violations_json(const std::vector<Violation>& violations) {
  json out = json::array();
  for (const auto& v : violations) out.push_back({{"path", v.path}, {"message", v.message}});
  return out;
}

json parse_body(const Request& request, const std::string& schema) {
  const json body = json::parse(request.body.empty() ? std::string("{}") : request.body);
  const auto violations = SchemaCatalog::builtin().validate(schema, body);
  if (!violations.empty()) {
    throw ApiError(422, "validation_failed", "request does not match " + schema + ": " +
                                                 violations.front().path + " " + violations.front().message,
                   violations_json(violations));
  }
  return body;
}

json context_json(const fusion::MbtiType& type, const recommend::Cohort& cohort, bool cold_start) {
  json ctx = type.to_json();
  ctx["cohort_size"] = cohort.members.size();
  ctx["cohort_radius"] = cohort.radius;
  ctx["cold_start"] = cold_start;
  return ctx;
}

json client_view(const json& doc) {
  json cards = json::array();
  for (const auto& card : doc.at("cards")) {
    cards.push_back({{"card_id", card.at("card_id")},
                     {"image_url", card.at("image_url")},
                     {"source_asset_id", card.at("source_asset_id")},
                     {"context", doc.at("context")}});
  }
  return {{"round_id", doc.at("round_id")}, {"user_id", doc.at("user_id")},
          {"industry", doc.at("industry")}, {"status", doc.at("status")},
          {"created_at", doc.at("created_at")}, {"num_variants", doc.at("num_variants")},
          {"cards", cards}};
}

const json* find_card(const json& doc, const std::string& card_id) {
  for (const auto& card : doc.at("cards")) {
    if (card.at("card_id") == card_id) return &card;
  }
  return nullptr;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string file_version(const fs::path& path) {
  std::error_code ec;
  const auto stamp = fs::last_write_time(path, ec);
  if (ec) return {};
  return std::to_string(stamp.time_since_epoch().count()) + ":" + std::to_string(fs::file_size(path, ec));
}

std::vector<store::UserProfile> users_except(const store::StoreState& state, const std::string& id) {
  std::vector<store::UserProfile> out;
  for (const auto& [uid, user] : state.users) {
    if (uid != id) out.push_back(user);
  }
  return out;
}

std::optional<feedback::RetrainManifest> latest_manifest(const fs::path& ledger, const std::string& industry) {
  if (!fs::exists(ledger)) return std::nullopt;
  std::optional<feedback::RetrainManifest> found;
  for (auto& m : feedback::LedgerLog(ledger).manifests()) {
    if (m.industry == industry) found = std::move(m);
  }
  return found;
}

}  // namespace

json ApiError::body() const {
  return {{"error", {{"code", code_}, {"message", what()}, {"details", details_}}}};
}

PlatformConfig PlatformConfig::from_json(const json& j, const fs::path& base) {
  check_keys(j, {"profiler", "generator", "ranking", "min_cohort", "lambda", "schedule", "clock_start",
                 "industries", "admin", "manifest_seed", "sources"},
             "config");
  PlatformConfig c;
  if (j.contains("profiler")) {
    const auto& p = j["profiler"];
    check_keys(p, {"mode", "epochs", "batch_size", "learning_rate", "patience", "seed", "max_vocab"},
               "config.profiler");
    if (p.contains("mode")) c.profiler_mode = fusion::parse_view_mode(p["mode"].get<std::string>());
    c.profiler.max_epochs = p.value("epochs", c.profiler.max_epochs);
    c.profiler.batch_size = p.value("batch_size", c.profiler.batch_size);
    c.profiler.learning_rate = p.value("learning_rate", c.profiler.learning_rate);
    c.profiler.patience = p.value("patience", c.profiler.patience);
    c.profiler.seed = p.value("seed", c.profiler.seed);
    c.profiler.max_vocab = p.value("max_vocab", c.profiler.max_vocab);
  }
  if (j.contains("generator")) {
    const auto& g = j["generator"];
    check_keys(g, {"steps", "batch_size", "learning_rate", "beta1", "beta2", "r1_gamma", "r1_interval",
                   "seed", "style_samples"},
               "config.generator");
    c.generator.steps = g.value("steps", c.generator.steps);
    c.generator.batch_size = g.value("batch_size", c.generator.batch_size);
    c.generator.learning_rate = g.value("learning_rate", c.generator.learning_rate);
    c.generator.beta1 = g.value("beta1", c.generator.beta1);
    c.generator.beta2 = g.value("beta2", c.generator.beta2);
    c.generator.r1_gamma = g.value("r1_gamma", c.generator.r1_gamma);
    c.generator.r1_interval = g.value("r1_interval", c.generator.r1_interval);
    c.generator.seed = g.value("seed", c.generator.seed);
    c.generator.style_samples = g.value("style_samples", c.generator.style_samples);
  }
  if (j.contains("ranking")) {
    const auto& r = j["ranking"];
    check_keys(r, {"clicks", "likes", "engagements", "window_hours"}, "config.ranking");
    c.ranking.weights.clicks = r.value("clicks", c.ranking.weights.clicks);
    c.ranking.weights.likes = r.value("likes", c.ranking.weights.likes);
    c.ranking.weights.engagements = r.value("engagements", c.ranking.weights.engagements);
    c.ranking.window_hours = r.value("window_hours", c.ranking.window_hours);
  }
  if (j.contains("schedule")) {
    const auto& s = j["schedule"];
    check_keys(s, {"ingestion_hours", "profiler_hours", "generator_hours"}, "config.schedule");
    c.schedule.ingestion_hours = s.value("ingestion_hours", c.schedule.ingestion_hours);
    c.schedule.profiler_hours = s.value("profiler_hours", c.schedule.profiler_hours);
    c.schedule.generator_hours = s.value("generator_hours", c.schedule.generator_hours);
  }
  c.min_cohort = j.value("min_cohort", c.min_cohort);
  c.mix = j.value("lambda", c.mix);
  c.clock_start = j.value("clock_start", c.clock_start);
  c.admin = j.value("admin", c.admin);
  c.manifest_seed = j.value("manifest_seed", c.manifest_seed);
  if (j.contains("industries")) {
    c.industries.clear();
    for (const auto& name : j["industries"]) c.industries.push_back(store::normalize_industry(name.get<std::string>()));
  }
  if (j.contains("sources")) {
    for (const auto& s : j["sources"]) {
      check_keys(s, {"kind", "path", "industries", "keywords"}, "config.sources[]");
      SourceConfig src;
      src.kind = s.at("kind").get<std::string>();
      src.path = s.at("path").get<std::string>();
      if (src.path.is_relative() && !base.empty()) src.path = base / src.path;
      for (const auto& i : s.value("industries", std::vector<std::string>{})) {
        src.filter.industries.insert(store::normalize_industry(i));
      }
      for (const auto& k : s.value("keywords", std::vector<std::string>{})) src.filter.keywords.insert(k);
      c.sources.push_back(std::move(src));
    }
  }
  c.validate();
  return c;
}

PlatformConfig PlatformConfig::load(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(file.string() + ": " + e.what());
  }
  try {
    return from_json(j, file.parent_path());
  } catch (const std::exception& e) {
    throw std::runtime_error(file.string() + ": " + e.what());
  }
}

void PlatformConfig::validate() const {
  profiler.validate();
  generator.validate();
  schedule.validate();
  if (!(mix >= 0.0 && mix <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
  if (min_cohort == 0) throw std::invalid_argument("min_cohort must be positive");
  if (ranking.window_hours <= 0) throw std::invalid_argument("ranking window must be positive");
  if (industries.empty()) throw std::invalid_argument("at least one industry is required");
  for (const auto& s : sources) {
    if (s.kind != "brand" && s.kind != "users") {
      throw std::invalid_argument("source kind must be brand or users, got " + s.kind);
    }
  }
}

std::vector<std::size_t> shuffle_positions(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t threshold = (0 - bound) % bound;
    std::uint64_t r = rng();
    while (r < threshold) r = rng();
    std::swap(order[i - 1], order[r % bound]);
  }
  return order;
}

std::size_t originals_for(std::size_t k) { return (k + 4) / 5; }

fusion::ProfileInputs profile_inputs(const store::UserProfile& user, const store::Store& store,
                                     const encoders::Vocabulary& vocab) {
  std::vector<std::string> texts;
  std::map<std::string, std::int64_t> stamps;
  for (const auto& post : user.posts) {
    if (!post.text.empty()) texts.push_back(post.text);
    for (const auto& ref : post.image_refs) stamps.emplace(ref, post.timestamp);
  }
  std::vector<encoders::TimedImage> images;
  for (const auto& ref : user.flagged_images) {
    images.push_back({store::load_square_image(store.resolve(ref), store::kAssetImageSize), stamps[ref]});
  }
  return fusion::make_inputs(texts, std::move(images), vocab);
}

std::vector<training::LabeledExample> labeled_examples(const store::StoreState& state,
                                                       const store::Store& store) {
  std::vector<training::LabeledExample> out;
  for (const auto& [id, user] : state.users) {
    if (!user.mbti) continue;
    training::LabeledExample ex;
    ex.user_id = id;
    ex.truth = *user.mbti;
    std::map<std::string, std::int64_t> stamps;
    for (const auto& post : user.posts) {
      if (!post.text.empty()) ex.texts.push_back(post.text);
      for (const auto& ref : post.image_refs) stamps.emplace(ref, post.timestamp);
    }
    for (const auto& ref : user.flagged_images) {
      ex.images.push_back({store::load_square_image(store.resolve(ref), store::kAssetImageSize), stamps[ref]});
    }
    out.push_back(std::move(ex));
  }
  return out;
}

Platform::Platform(fs::path root, PlatformConfig config)
    : root_(std::move(root)), config_(std::move(config)) {
  config_.validate();
  fs::create_directories(root_ / "models");
  store_ = store::Store::open(root_);
  store_->set_industries(config_.industries);
  registry_ = gan::ModelRegistry::load(registry_path());
  for (const auto& industry : config_.industries) {
    if (!registry_.has_industry(industry)) registry_.add_industry(industry);
  }
  registry_.save();
  store_->update([&](store::StoreState& state) {
    auto& system = state.documents["system"];
    if (!system.count("scheduler")) {
      system["scheduler"] = feedback::Scheduler(config_.schedule, config_.clock_start).to_json();
    }
    for (auto& [id, job] : state.documents["jobs"]) {
      const auto status = job.at("status").get<std::string>();
      if (status == "queued" || status == "running") {
        job["status"] = "failed";
        job["error"] = "interrupted by a restart";
      }
    }
  });
  persist();
  worker_ = std::thread([this] { worker_loop(); });
}

Platform::~Platform() {
  {
    std::lock_guard lock(queue_mutex_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

std::int64_t Platform::now() const {
  const auto snap = store_->snapshot();
  const json* doc = snap->document("system", "scheduler");
  return doc ? feedback::Scheduler::from_json(*doc).now() : config_.clock_start;
}

void Platform::persist() {
  std::lock_guard lock(persist_mutex_);
  store_->persist();
}

void Platform::require_admin() const {
  if (!config_.admin) throw ApiError(403, "admin_disabled", "admin endpoints are disabled");
}

std::string Platform::next_id(const std::string& counter, const std::string& prefix) {
  std::int64_t value = 0;
  store_->update([&](store::StoreState& state) {
    auto& counters = state.documents["system"]["counters"];
    if (!counters.is_object()) counters = json::object();
    value = counters.value(counter, std::int64_t{0}) + 1;
    counters[counter] = value;
  });
  return prefix + std::to_string(value);
}

Response Platform::handle(const Request& request) {
  try {
    if (request.method != "POST" || request.idempotency_key.empty()) return dispatch(request);
    std::lock_guard lock(request_mutex_);
    const std::string fingerprint =
        request.method + " " + request.path + " " +
        std::to_string(fnv1a(request.body.empty() ? std::string("{}") : json::parse(request.body).dump()));
    const auto snap = store_->snapshot();
    if (const json* cached = snap->document("idempotency", request.idempotency_key)) {
      if (cached->at("fingerprint") != fingerprint) {
        throw ApiError(422, "idempotency_key_reused",
                       "idempotency key was already used for a different request");
      }
      Response r;
      r.status = cached->at("status").get<int>();
      r.body = cached->at("body");
      r.schema = cached->at("schema").get<std::string>();
      return r;
    }
    Response r = dispatch(request);
    if (r.status < 500 && r.binary.empty()) {
      store_->put_document("idempotency", request.idempotency_key,
                           {{"fingerprint", fingerprint}, {"status", r.status}, {"body", r.body},
                            {"schema", r.schema}});
      persist();
    }
    return r;
  } catch (const ApiError& e) {
    return {e.status(), e.body(), {}, "application/json", "error"};
  } catch (const json::parse_error& e) {
    const ApiError err(400, "invalid_json", std::string("request body is not valid JSON: ") + e.what());
    return {400, err.body(), {}, "application/json", "error"};
  } catch (const std::exception& e) {
    const ApiError err(500, "internal_error", e.what());
    return {500, err.body(), {}, "application/json", "error"};
  }
}

Response Platform::dispatch(const Request& request) {
  const std::string prefix = kApiPrefix;
  if (request.path.rfind(prefix, 0) != 0) throw ApiError(404, "not_found", "no route for " + request.path);
  const auto parts = split_path(request.path.substr(prefix.size()));
  const bool get = request.method == "GET";
  const bool post = request.method == "POST";
  auto method_error = [&]() {
    return ApiError(405, "method_not_allowed", request.method + " is not allowed on " + request.path);
  };
  auto locked = [&](auto&& fn) {
    if (!request.idempotency_key.empty()) return fn();
    std::lock_guard lock(request_mutex_);
    return fn();
  };
  auto ok = [](int status, json body, std::string schema) {
    Response r;
    r.status = status;
    r.body = std::move(body);
    r.schema = std::move(schema);
    return r;
  };

  if (parts.size() == 1 && parts[0] == "health") {
    if (!get) throw method_error();
    return ok(200, health(), "health");
  }
  if (parts.size() == 1 && parts[0] == "industries") {
    if (!get) throw method_error();
    return ok(200, industries(), "industries");
  }
  if (parts.size() == 2 && parts[0] == "admin") {
    if (!post) throw method_error();
    require_admin();
    if (parts[1] == "ingest") {
      const json body = parse_body(request, "ingest_request");
      return locked([&] { return ok(200, ingest(body), "ingest_response"); });
    }
    if (parts[1] == "retrain") {
      const json body = parse_body(request, "retrain_request");
      return locked([&] { return ok(202, retrain(body), "job"); });
    }
    if (parts[1] == "tick") {
      const json body = parse_body(request, "tick_request");
      return locked([&] { return ok(200, tick(body), "tick_response"); });
    }
  }
  if (parts.size() == 2 && parts[0] == "profiles" && parts[1] == "infer") {
    if (!post) throw method_error();
    const json body = parse_body(request, "infer_request");
    return locked([&] { return ok(200, infer(body), "infer_response"); });
  }
  if (parts.size() == 1 && parts[0] == "generate") {
    if (!post) throw method_error();
    const json body = parse_body(request, "generate_request");
    return locked([&] { return ok(201, generate(body), "round"); });
  }
  if (parts.size() == 1 && parts[0] == "feedback") {
    if (!post) throw method_error();
    const json body = parse_body(request, "feedback_request");
    return locked([&] { return ok(201, submit_feedback(body), "feedback_response"); });
  }
  if (parts.size() == 2 && parts[0] == "jobs") {
    if (!get) throw method_error();
    return ok(200, job(parts[1]), "job");
  }
  if (parts.size() >= 2 && parts[0] == "rounds") {
    const std::string& round_id = parts[1];
    if (parts.size() == 2) {
      if (!get) throw method_error();
      return ok(200, round(round_id), "round");
    }
    if (parts.size() == 3 && parts[2] == "close") {
      if (!post) throw method_error();
      return locked([&] { return ok(200, close_round(round_id), "close_response"); });
    }
    if (parts.size() == 4 && parts[2] == "cards") {
      const std::string suffix = ".png";
      const std::string& file = parts[3];
      if (file.size() <= suffix.size() || file.compare(file.size() - suffix.size(), suffix.size(), suffix) != 0) {
        throw ApiError(404, "not_found", "no route for " + request.path);
      }
      if (!get) throw method_error();
      Response r;
      r.binary = card_png(round_id, file.substr(0, file.size() - suffix.size()));
      r.content_type = "image/png";
      return r;
    }
    if (parts.size() == 5 && parts[2] == "cards" && parts[4] == "repost") {
      if (!post) throw method_error();
      throw ApiError(501, "not_implemented", "reposting to social timelines is not available in this build");
    }
  }
  throw ApiError(404, "not_found", "no route for " + request.path);
}

json Platform::health() const { return {{"status", "ok"}, {"version", kVersion}, {"now", now()}}; }

json Platform::industries() const {
  const auto snap = store_->snapshot();
  json list = json::array();
  std::lock_guard lock(registry_mutex_);
  for (const auto& name : snap->industries) {
    bool published = false;
    if (registry_.has_industry(name)) published = registry_.checkpoint(name).has_value();
    list.push_back({{"name", name}, {"model_published", published},
                    {"asset_count", snap->assets_of(name).size()}});
  }
  return {{"industries", list}};
}

json Platform::ingest(const json& request) {
  const std::string kind = request.at("kind").get<std::string>();
  const fs::path path = request.at("path").get<std::string>();
  json response = {{"kind", kind}, {"admitted", 0}, {"diagnostics", json::array()}};
  try {
    if (kind == "brand") {
      store::BrandFilter filter;
      for (const auto& i : request.value("industries", std::vector<std::string>{})) {
        filter.industries.insert(store::normalize_industry(i));
      }
      for (const auto& k : request.value("keywords", std::vector<std::string>{})) filter.keywords.insert(k);
      const auto report = store_->ingest_brand_corpus(path, filter);
      response["admitted"] = report.admitted;
      response["engagements"] = report.engagements;
      response["diagnostics"] = report.diagnostics;
    } else if (kind == "users") {
      const auto report = store_->ingest_user_corpus(path);
      response["admitted"] = report.admitted;
      response["diagnostics"] = report.diagnostics;
    } else {
      const auto user = store_->ingest_user_timeline(path);
      response["admitted"] = 1;
      response["user_id"] = user.id;
    }
  } catch (const store::NotFoundError& e) {
    throw ApiError(404, "not_found", e.what());
  } catch (const store::StoreError& e) {
    throw ApiError(422, "ingest_failed", e.what());
  } catch (const std::runtime_error& e) {
    throw ApiError(422, "ingest_failed", e.what());
  }
  persist();
  return response;
}

std::shared_ptr<const fusion::ProfilerModel> Platform::profiler() const {
  std::lock_guard lock(profiler_mutex_);
  const std::string version = file_version(profiler_path());
  if (version.empty()) return nullptr;
  if (!profiler_ || version != profiler_version_) {
    profiler_ = std::make_shared<const fusion::ProfilerModel>(fusion::ProfilerModel::load(profiler_path()));
    profiler_version_ = version;
  }
  return profiler_;
}

json Platform::infer(const json& request) {
  const auto snap = store_->snapshot();
  const store::UserProfile* user = nullptr;
  std::string label;
  if (request.contains("user_id")) {
    label = request["user_id"].get<std::string>();
    user = snap->find_user(label);
  } else {
    label = request["handle"].get<std::string>() + "@" + request["platform"].get<std::string>();
    user = snap->find_handle(request["handle"].get<std::string>(), request["platform"].get<std::string>());
  }
  if (!user) throw ApiError(404, "unknown_user", "no ingested profile for " + label);
  const auto model = profiler();
  if (!model) throw ApiError(503, "profiler_not_ready", "no profiler checkpoint has been published");
  fusion::MbtiType type;
  try {
    const auto probs = fusion::forward_probabilities(profile_inputs(*user, *store_, model->vocab), *model);
    for (std::size_t a = 0; a < fusion::kAxisCount; ++a) type.probabilities[a] = probs[a];
  } catch (const fusion::InsufficientDataError& e) {
    throw ApiError(409, "insufficient_data", e.what());
  }
  const std::string user_id = user->id;
  store_->update([&](store::StoreState& state) { state.users.at(user_id).inferred = type; });
  persist();
  json out = type.to_json();
  out["user_id"] = user_id;
  return out;
}

json Platform::generate(const json& request) {
  const std::string user_id = request.at("user_id").get<std::string>();
  const std::string industry = store::normalize_industry(request.at("industry").get<std::string>());
  const auto k = request.at("num_variants").get<std::size_t>();
  const double mix = request.value("lambda", config_.mix);
  const auto snap = store_->snapshot();
  const store::UserProfile* user = snap->find_user(user_id);
  if (!user) throw ApiError(404, "unknown_user", "no ingested profile for " + user_id);
  if (!snap->has_industry(industry)) throw ApiError(404, "unknown_industry", "industry " + industry + " is not configured");
  if (!user->inferred) {
    throw ApiError(409, "no_inferred_type", "infer the personality type of " + user_id + " before generating");
  }
  std::shared_ptr<const gan::GanModel> model;
  try {
    std::lock_guard lock(registry_mutex_);
    model = registry_.model(industry);
  } catch (const gan::ModelNotTrainedError& e) {
    throw ApiError(503, "model_not_ready", e.what());
  } catch (const std::out_of_range& e) {
    throw ApiError(404, "unknown_industry", e.what());
  }

  const auto others = users_except(*snap, user_id);
  const auto cohort = recommend::build_cohort(*user->inferred, others, config_.min_cohort);
  auto rank_config = config_.ranking;
  rank_config.top_k = k;
  const auto industry_assets = snap->assets_of(industry);
  const std::int64_t clock = now();
  const auto ranking =
      recommend::rank_assets(cohort, industry, industry_assets, snap->engagements, clock, rank_config);
  if (ranking.assets.empty()) {
    throw ApiError(503, "no_source_assets",
                   "no " + industry + " assets fall inside the ranking window for this cohort");
  }

  const std::string round_id = next_id("round", "round-");
  const std::uint64_t seed = request.contains("seed") ? request["seed"].get<std::uint64_t>()
                                                      : splitmix64(fnv1a(round_id)) >> 1;
  const std::uint64_t position_seed = splitmix64(seed ^ fnv1a(round_id));
  const auto sources = ranking.ids();
  const std::size_t n = sources.size();

  struct Item {
    std::string source;
    bool original = false;
    std::string variant_id;
    std::uint64_t latent_index = 0;
    tensor::Tensor image;
  };
  std::vector<tensor::Tensor> source_images;
  std::vector<gan::VariantBatch> batches;
  for (std::size_t s = 0; s < n; ++s) {
    const store::ContentAsset* asset = snap->find_asset(sources[s]);
    source_images.push_back(store::load_square_image(store_->resolve(asset->image_ref), store::kAssetImageSize));
    const std::size_t count = k / n + (s < k % n ? 1 : 0);
    if (count == 0) {
      batches.emplace_back();
      continue;
    }
    try {
      batches.push_back(gan::generate_variants(*asset, source_images.back(), *model, count, mix,
                                               splitmix64(seed + s)));
    } catch (const std::invalid_argument& e) {
      throw ApiError(422, "validation_failed", e.what());
    }
  }
  std::vector<Item> items;
  for (std::size_t j = 0; j < k; ++j) {
    const auto& v = batches[j % n].variants.at(j / n);
    items.push_back({sources[j % n], false, v.id, v.latent_index, v.image});
  }
  for (std::size_t i = 0; i < originals_for(k); ++i) {
    items.push_back({sources[i % n], true, {}, 0, store::downsample2x(source_images[i % n])});
  }

  const auto order = shuffle_positions(items.size(), position_seed);
  const fs::path dir = root_ / "rounds" / round_id;
  fs::create_directories(dir);
  json cards = json::array();
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const Item& item = items[order[pos]];
    const std::string card_id = "c" + std::to_string(pos + 1);
    store::write_png(dir / (card_id + ".png"), item.image);
    json card = {{"card_id", card_id},
                 {"image_url", std::string(kApiPrefix) + "/rounds/" + round_id + "/cards/" + card_id + ".png"},
                 {"source_asset_id", item.source},
                 {"is_original", item.original}};
    if (!item.original) {
      card["variant_id"] = item.variant_id;
      card["latent_index"] = item.latent_index;
    }
    cards.push_back(std::move(card));
  }
  const json doc = {{"round_id", round_id},
                    {"user_id", user_id},
                    {"industry", industry},
                    {"status", "open"},
                    {"created_at", clock},
                    {"num_variants", k},
                    {"seed", seed},
                    {"position_seed", position_seed},
                    {"lambda", mix},
                    {"sources", sources},
                    {"context", context_json(*user->inferred, cohort, ranking.cold_start)},
                    {"cards", cards},
                    {"feedback", json::array()}};
  store_->put_document("rounds", round_id, doc);
  persist();
  return client_view(doc);
}

json Platform::stored_round(const std::string& round_id) const {
  const auto snap = store_->snapshot();
  const json* doc = snap->document("rounds", round_id);
  if (!doc) throw ApiError(404, "unknown_round", "no round " + round_id);
  return *doc;
}

json Platform::round(const std::string& round_id) const { return client_view(stored_round(round_id)); }

std::string Platform::card_png(const std::string& round_id, const std::string& card_id) const {
  const json doc = stored_round(round_id);
  if (!find_card(doc, card_id)) throw ApiError(404, "unknown_card", "round " + round_id + " has no card " + card_id);
  return read_file(root_ / "rounds" / round_id / (card_id + ".png"));
}

json Platform::submit_feedback(const json& request) {
  const std::string round_id = request.at("round_id").get<std::string>();
  const std::string card_id = request.at("card_id").get<std::string>();
  const json doc = stored_round(round_id);
  if (!find_card(doc, card_id)) throw ApiError(404, "unknown_card", "round " + round_id + " has no card " + card_id);
  if (doc.at("status") == "closed") throw ApiError(409, "round_closed", "round " + round_id + " is closed");
  feedback::FeedbackRecord record;
  record.round_id = round_id;
  record.card_id = card_id;
  record.attractiveness = request.at("attractiveness").get<int>();
  record.preference = request.at("preference").get<int>();
  record.compliance = feedback::parse_compliance(request.at("compliance").get<std::string>());
  record.would_click = request.at("would_click") == "yes";
  record.timestamp = now();
  try {
    record.validate();
  } catch (const feedback::FeedbackError& e) {
    throw ApiError(422, "validation_failed", e.what(),
                   json::array({{{"path", "/" + e.field()}, {"message", e.what()}}}));
  }
  std::size_t count = 0;
  store_->update([&](store::StoreState& state) {
    auto& stored = state.documents["rounds"][round_id];
    stored["feedback"].push_back(record);
    for (const auto& f : stored["feedback"]) count += f.at("card_id") == card_id;
  });
  persist();
  return {{"round_id", round_id}, {"card_id", card_id}, {"feedback_count", count}};
}

json Platform::close_round(const std::string& round_id) {
  json doc = stored_round(round_id);
  if (doc.at("status") == "closed") return doc.at("settlement");
  std::vector<feedback::RoundVariant> variants;
  for (const auto& card : doc.at("cards")) {
    if (!card.at("is_original").get<bool>()) {
      variants.push_back({card.at("card_id").get<std::string>(), card.at("source_asset_id").get<std::string>()});
    }
  }
  const auto records = doc.at("feedback").get<std::vector<feedback::FeedbackRecord>>();
  const std::string industry = doc.at("industry").get<std::string>();
  const auto settlement = feedback::settle_round(round_id, variants, records);

  feedback::LedgerLog log(ledger_path());
  auto ledger = log.load();
  std::optional<feedback::RetrainManifest> manifest;
  if (ledger.settled(round_id)) {
    for (auto& m : log.manifests()) {
      if (m.round_id == round_id) manifest = std::move(m);
    }
  } else {
    log.append_settlement(ledger.apply(settlement));
  }
  const auto& settled = *ledger.settlement(round_id);
  if (!manifest) {
    const auto snap = store_->snapshot();
    manifest = ledger.manifest(round_id, industry, snap->assets_of(industry),
                               config_.manifest_seed ^ fnv1a(round_id));
    log.append_manifest(*manifest);
  }

  json sources = json::array();
  for (const auto& s : settled.sources) {
    sources.push_back({{"source_id", s.source_id}, {"successes", s.successes}, {"failures", s.failures},
                       {"penalized", s.penalized}, {"multiplicity", s.multiplicity}});
  }
  const json response = {{"round_id", round_id},    {"status", "closed"},
                         {"penalized", settled.penalized()}, {"prioritized", settled.prioritized()},
                         {"sources", sources},      {"manifest", manifest->to_json()}};
  store_->update([&](store::StoreState& state) {
    auto& stored = state.documents["rounds"][round_id];
    stored["status"] = "closed";
    stored["closed_at"] = now();
    stored["settlement"] = response;
  });
  persist();
  return response;
}

bool Platform::job_pending(const std::string& target, const std::optional<std::string>& industry) const {
  const auto snap = store_->snapshot();
  const auto it = snap->documents.find("jobs");
  if (it == snap->documents.end()) return false;
  for (const auto& [id, job] : it->second) {
    const auto status = job.at("status").get<std::string>();
    if (status != "queued" && status != "running") continue;
    if (job.at("target") != target) continue;
    const std::optional<std::string> other =
        job.contains("industry") ? std::optional(job["industry"].get<std::string>()) : std::nullopt;
    if (other == industry) return true;
  }
  return false;
}

json Platform::enqueue(const std::string& target, const std::optional<std::string>& industry) {
  const std::string job_id = next_id("job", "job-");
  json doc = {{"job_id", job_id}, {"target", target}, {"status", "queued"}, {"submitted_at", now()}};
  if (industry) doc["industry"] = *industry;
  store_->put_document("jobs", job_id, doc);
  persist();
  {
    std::lock_guard lock(queue_mutex_);
    queue_.push_back(job_id);
  }
  queue_cv_.notify_one();
  return doc;
}

json Platform::retrain(const json& request) {
  const std::string target = request.at("target").get<std::string>();
  std::optional<std::string> industry;
  if (target == "generator") {
    if (!request.contains("industry")) {
      throw ApiError(422, "validation_failed", "generator retraining needs an industry",
                     json::array({{{"path", "/industry"}, {"message", "required for target generator"}}}));
    }
    industry = store::normalize_industry(request["industry"].get<std::string>());
    if (!store_->snapshot()->has_industry(*industry)) {
      throw ApiError(404, "unknown_industry", "industry " + *industry + " is not configured");
    }
  }
  if (job_pending(target, industry)) {
    throw ApiError(409, "retrain_in_progress", target + " retraining is already queued or running");
  }
  return enqueue(target, industry);
}

json Platform::job(const std::string& job_id) const {
  const auto snap = store_->snapshot();
  const json* doc = snap->document("jobs", job_id);
  if (!doc) throw ApiError(404, "unknown_job", "no job " + job_id);
  return *doc;
}

void Platform::set_job(const std::string& job_id, const json& patch) {
  store_->update([&](store::StoreState& state) { state.documents["jobs"][job_id].update(patch); });
  persist();
}

void Platform::wait_idle() {
  std::unique_lock lock(queue_mutex_);
  idle_cv_.wait(lock, [&] { return queue_.empty() && !busy_; });
}

void Platform::worker_loop() {
  for (;;) {
    std::string job_id;
    {
      std::unique_lock lock(queue_mutex_);
      queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      job_id = queue_.front();
      queue_.pop_front();
      busy_ = true;
    }
    set_job(job_id, {{"status", "running"}});
    try {
      const json result = run_job(job(job_id));
      set_job(job_id, {{"status", "succeeded"}, {"result", result}});
    } catch (const std::exception& e) {
      set_job(job_id, {{"status", "failed"}, {"error", e.what()}});
    }
    {
      std::lock_guard lock(queue_mutex_);
      busy_ = false;
    }
    idle_cv_.notify_all();
  }
}

json Platform::run_job(const json& job) {
  if (job.at("target") == "profiler") return train_profiler_job();
  return train_generator_job(job.at("industry").get<std::string>());
}

json Platform::train_profiler_job() {
  const auto snap = store_->snapshot();
  const auto examples = labeled_examples(*snap, *store_);
  if (examples.empty()) throw std::runtime_error("no labeled users in the store");
  const auto result = training::train(examples, config_.profiler_mode, config_.profiler);
  result.model.save(profiler_path(), {{"examples", examples.size()}});
  json users = json::array();
  for (const auto& ex : examples) users.push_back(ex.user_id);
  json f1 = json::object();
  for (std::size_t a = 0; a < fusion::kAxisCount; ++a) {
    f1[std::string(fusion::axis_name(a))] = result.test_macro_f1[a];
  }
  return {{"training_set", users},       {"examples", examples.size()},
          {"best_epoch", result.best_epoch}, {"best_val_macro_f1", result.best_val_macro_f1},
          {"test_macro_f1", f1},         {"view_mode", std::string(fusion::view_mode_name(config_.profiler_mode))}};
}

json Platform::train_generator_job(const std::string& industry) {
  const auto snap = store_->snapshot();
  const auto manifest = latest_manifest(ledger_path(), industry);
  std::vector<tensor::Tensor> images;
  json training_set = json::array();
  auto load32 = [&](const std::string& asset_id) {
    const store::ContentAsset* asset = snap->find_asset(asset_id);
    if (!asset) throw std::runtime_error("manifest references unknown asset " + asset_id);
    return store::downsample2x(store::load_square_image(store_->resolve(asset->image_ref), store::kAssetImageSize));
  };
  if (manifest) {
    for (const auto& entry : manifest->entries) {
      const auto base = load32(entry.asset_id);
      images.push_back(base);
      for (const auto& recipe : entry.recipes) images.push_back(feedback::augment(base, recipe));
      training_set.push_back(entry.asset_id);
    }
  } else {
    for (const auto& asset : snap->assets_of(industry)) {
      images.push_back(load32(asset.id));
      training_set.push_back(asset.id);
    }
  }
  if (images.size() < gan::kMinTrainingImages) {
    throw std::runtime_error("generator training for " + industry + " needs at least " +
                             std::to_string(gan::kMinTrainingImages) + " images, found " +
                             std::to_string(images.size()));
  }
  std::shared_ptr<const gan::GanModel> warm;
  {
    std::lock_guard lock(registry_mutex_);
    try {
      warm = registry_.model(industry);
    } catch (const gan::ModelNotTrainedError&) {
    }
  }
  const auto result = warm ? gan::train_gan(images, config_.generator, warm->clone())
                           : gan::train_gan(images, config_.generator);
  const fs::path path = root_ / "models" / (industry + ".ckpt");
  result.model.save(path, {{"industry", industry}});
  {
    std::lock_guard lock(registry_mutex_);
    registry_.publish(industry, fs::absolute(path));
    registry_.save();
  }
  json out = {{"industry", industry},
              {"training_source", manifest ? "manifest" : "all_assets"},
              {"training_set", training_set},
              {"images", images.size()},
              {"steps", config_.generator.steps},
              {"warm_start", static_cast<bool>(warm)}};
  if (manifest) out["manifest_round_id"] = manifest->round_id;
  if (!result.history.empty()) {
    out["final_d_loss"] = result.history.back().d_loss;
    out["final_g_loss"] = result.history.back().g_loss;
  }
  return out;
}

json Platform::tick(const json& request) {
  const auto hours = request.at("hours").get<std::int64_t>();
  auto scheduler = feedback::Scheduler::from_json(*store_->snapshot()->document("system", "scheduler"));
  const auto due = scheduler.advance(hours);
  store_->update([&](store::StoreState& state) { state.documents["system"]["scheduler"] = scheduler.to_json(); });
  json executed = json::array();
  for (const auto& task : due) {
    json base = {{"task", std::string(feedback::task_name(task.kind))}, {"due_at", task.due_at}};
    if (task.kind == feedback::TaskKind::kIngestion) {
      std::size_t admitted = 0;
      std::size_t diagnostics = 0;
      for (const auto& source : config_.sources) {
        try {
          const auto report = source.kind == "brand" ? store_->ingest_brand_corpus(source.path, source.filter)
                                                     : store_->ingest_user_corpus(source.path);
          admitted += report.admitted;
          diagnostics += report.diagnostics.size();
        } catch (const std::exception&) {
          ++diagnostics;
        }
      }
      base["status"] = "executed";
      base["detail"] = "admitted " + std::to_string(admitted) + " records from " +
                       std::to_string(config_.sources.size()) + " sources with " +
                       std::to_string(diagnostics) + " diagnostics";
      executed.push_back(base);
    } else if (task.kind == feedback::TaskKind::kProfilerRetrain) {
      const auto snap = store_->snapshot();
      const bool labeled = std::any_of(snap->users.begin(), snap->users.end(),
                                       [](const auto& u) { return u.second.mbti.has_value(); });
      if (job_pending("profiler", std::nullopt)) {
        base["status"] = "skipped";
        base["detail"] = "profiler retraining already pending";
      } else if (!labeled) {
        base["status"] = "skipped";
        base["detail"] = "no labeled users";
      } else {
        base["status"] = "queued";
        base["job_id"] = enqueue("profiler", std::nullopt)["job_id"];
      }
      executed.push_back(base);
    } else {
      const auto snap = store_->snapshot();
      for (const auto& industry : snap->industries) {
        json entry = base;
        entry["industry"] = industry;
        const auto manifest = latest_manifest(ledger_path(), industry);
        const std::size_t available = manifest ? manifest->image_count() : snap->assets_of(industry).size();
        if (job_pending("generator", industry)) {
          entry["status"] = "skipped";
          entry["detail"] = "generator retraining already pending";
        } else if (available < gan::kMinTrainingImages) {
          entry["status"] = "skipped";
          entry["detail"] = "only " + std::to_string(available) + " training images";
        } else {
          entry["status"] = "queued";
          entry["job_id"] = enqueue("generator", industry)["job_id"];
        }
        executed.push_back(entry);
      }
    }
  }
  persist();
  return {{"now", scheduler.now()}, {"executed", executed}};
}

}  // namespace personaforge::service
