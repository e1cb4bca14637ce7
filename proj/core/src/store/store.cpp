#include "personaforge/store/store.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>

#include "personaforge/store/image_io.hpp"

namespace personaforge::store {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

template <typename Fn>
void load_lines(const fs::path& file, Fn&& fn) {
  std::ifstream in(file);
  if (!in) return;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const std::exception& e) {
      throw StoreError(file.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void write_atomic(const fs::path& file, const std::string& contents) {
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << contents;
    if (!out) throw StoreError("cannot write " + tmp.string());
  }
  fs::rename(tmp, file);
}

std::string safe_name(const std::string& id) {
  std::string out;
  for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

}  // namespace

bool StoreState::has_industry(const std::string& industry) const {
  const std::string key = normalize_industry(industry);
  return std::find(industries.begin(), industries.end(), key) != industries.end();
}

const UserProfile* StoreState::find_user(const std::string& id) const {
  const auto it = users.find(id);
  return it == users.end() ? nullptr : &it->second;
}

const UserProfile* StoreState::find_handle(const std::string& handle,
                                           const std::string& platform) const {
  for (const auto& [_, u] : users) {
    if (u.handle == handle && (platform.empty() || u.platform == platform)) return &u;
  }
  return nullptr;
}

const ContentAsset* StoreState::find_asset(const std::string& id) const {
  const auto it = assets.find(id);
  return it == assets.end() ? nullptr : &it->second;
}

const json* StoreState::document(const std::string& collection, const std::string& id) const {
  const auto c = documents.find(collection);
  if (c == documents.end()) return nullptr;
  const auto d = c->second.find(id);
  return d == c->second.end() ? nullptr : &d->second;
}

std::vector<ContentAsset> StoreState::assets_of(const std::string& industry) const {
  const std::string key = normalize_industry(industry);
  std::vector<ContentAsset> out;
  for (const auto& [_, a] : assets)
    if (normalize_industry(a.industry) == key) out.push_back(a);
  return out;
}

bool matches(const ContentAsset& asset, const BrandFilter& filter) {
  const std::string industry = normalize_industry(asset.industry);
  if (!filter.industries.empty()) {
    bool hit = false;
    for (const auto& wanted : filter.industries) hit = hit || normalize_industry(wanted) == industry;
    if (!hit) return false;
  }
  if (filter.keywords.empty()) return true;
  const std::string caption = lower(asset.caption);
  for (const auto& raw : filter.keywords) {
    const std::string k = lower(raw);
    if (k.empty()) continue;
    if (caption.find(k) != std::string::npos) return true;
    for (const auto& tag : asset.tags)
      if (lower(tag).find(k) != std::string::npos) return true;
  }
  return false;
}

Store::Store(fs::path root) : root_(std::move(root)), state_(std::make_shared<StoreState>()) {}

std::unique_ptr<Store> Store::open(const fs::path& root) {
  auto store = std::make_unique<Store>(root);
  store->state_ = std::make_shared<const StoreState>(load_state(root));
  return store;
}

Snapshot Store::snapshot() const {
  std::lock_guard lock(publish_);
  return state_;
}

void Store::update(const std::function<void(StoreState&)>& change) {
  std::lock_guard writer(writer_);
  auto next = std::make_shared<StoreState>(*snapshot());
  change(*next);
  std::lock_guard lock(publish_);
  state_ = std::move(next);
}

void Store::upsert_asset(const ContentAsset& asset) {
  update([&](StoreState& s) { s.assets[asset.id] = asset; });
}

void Store::upsert_user(UserProfile user) {
  normalize(user);
  update([&](StoreState& s) { s.users[user.id] = user; });
}

void Store::add_engagement(const EngagementRecord& record) {
  update([&](StoreState& s) { s.engagements.push_back(record); });
}

void Store::put_document(const std::string& collection, const std::string& id, json doc) {
  update([&](StoreState& s) { s.documents[collection][id] = std::move(doc); });
}

void Store::set_industries(std::vector<std::string> industries) {
  for (auto& i : industries) i = normalize_industry(i);
  std::sort(industries.begin(), industries.end());
  industries.erase(std::unique(industries.begin(), industries.end()), industries.end());
  update([&](StoreState& s) { s.industries = industries; });
}

std::string Store::import_image(const fs::path& source, const std::string& ref) const {
  const tensor::Tensor image = load_square_image(source, kAssetImageSize);
  fs::create_directories((root_ / ref).parent_path());
  write_png(root_ / ref, image);
  return ref;
}

IngestReport Store::ingest_brand_corpus(const fs::path& dir, const BrandFilter& filter) {
  const fs::path file = dir / "assets.jsonl";
  if (!fs::exists(file)) throw NotFoundError("brand corpus not found: " + file.string());
  IngestReport report;
  std::vector<ContentAsset> admitted;
  const Snapshot current = snapshot();
  std::set<std::string> seen;
  std::ifstream in(file);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = file.string() + ":" + std::to_string(number) + ": ";
    ContentAsset asset;
    try {
      asset = json::parse(line).get<ContentAsset>();
    } catch (const std::exception& e) {
      report.diagnostics.push_back(where + e.what());
      continue;
    }
    asset.industry = normalize_industry(asset.industry);
    if (!current->has_industry(asset.industry)) {
      report.diagnostics.push_back(where + "industry '" + asset.industry + "' is not configured");
      continue;
    }
    if (!matches(asset, filter)) continue;
    if (!seen.insert(asset.id).second) {
      report.diagnostics.push_back(where + "duplicate asset id '" + asset.id + "'");
      continue;
    }
    try {
      asset.image_ref = import_image(dir / asset.image_ref, "images/assets/" + safe_name(asset.id) + ".png");
    } catch (const std::exception& e) {
      report.diagnostics.push_back(where + "unreadable image: " + e.what());
      continue;
    }
    admitted.push_back(std::move(asset));
  }
  std::vector<EngagementRecord> engagements;
  const fs::path log = dir / "engagements.jsonl";
  if (fs::exists(log)) {
    std::ifstream elog(log);
    number = 0;
    while (std::getline(elog, line)) {
      ++number;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        engagements.push_back(json::parse(line).get<EngagementRecord>());
      } catch (const std::exception& e) {
        report.diagnostics.push_back(log.string() + ":" + std::to_string(number) + ": " + e.what());
      }
    }
  }
  update([&](StoreState& s) {
    for (const auto& a : admitted) s.assets[a.id] = a;
    for (const auto& e : engagements) {
      if (!s.assets.count(e.asset_id)) continue;
      if (std::find(s.engagements.begin(), s.engagements.end(), e) != s.engagements.end()) continue;
      s.engagements.push_back(e);
      ++report.engagements;
    }
  });
  report.admitted = admitted.size();
  return report;
}

UserProfile Store::import_user(UserProfile incoming, const fs::path& base,
                               const StoreState& current) const {
  const std::string folder = "images/users/" + safe_name(incoming.id) + "/";
  for (std::size_t i = 0; i < incoming.posts.size(); ++i) {
    SocialPost& post = incoming.posts[i];
    if (post.id.empty()) post.id = "t" + std::to_string(post.timestamp) + "-" + std::to_string(i);
    for (std::size_t k = 0; k < post.image_refs.size(); ++k) {
      const std::string ref = folder + safe_name(post.id) + "-" + std::to_string(k) + ".png";
      post.image_refs[k] = import_image(base / post.image_refs[k], ref);
    }
  }
  const UserProfile* existing = current.find_user(incoming.id);
  if (existing) {
    std::map<std::string, SocialPost> merged;
    for (const auto& p : existing->posts) merged[p.id] = p;
    for (const auto& p : incoming.posts) merged[p.id] = p;
    incoming.posts.clear();
    for (auto& [_, p] : merged) incoming.posts.push_back(std::move(p));
    if (!incoming.mbti) incoming.mbti = existing->mbti;
    if (!incoming.inferred) incoming.inferred = existing->inferred;
  }
  normalize(incoming);
  return incoming;
}

UserProfile Store::ingest_user_timeline(const fs::path& file) {
  if (!fs::exists(file)) throw NotFoundError("timeline not found: " + file.string());
  std::ifstream in(file);
  UserProfile incoming;
  try {
    incoming = json::parse(in).get<UserProfile>();
  } catch (const std::exception& e) {
    throw StoreError(file.string() + ": " + e.what());
  }
  UserProfile stored;
  {
    std::lock_guard writer(writer_);
    const Snapshot current = snapshot();
    stored = import_user(std::move(incoming), file.parent_path(), *current);
    auto next = std::make_shared<StoreState>(*current);
    next->users[stored.id] = stored;
    std::lock_guard lock(publish_);
    state_ = std::move(next);
  }
  return stored;
}

IngestReport Store::ingest_user_corpus(const fs::path& dir) {
  const fs::path file = dir / "users.jsonl";
  if (!fs::exists(file)) throw NotFoundError("user corpus not found: " + file.string());
  IngestReport report;
  std::lock_guard writer(writer_);
  auto next = std::make_shared<StoreState>(*snapshot());
  std::ifstream in(file);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      UserProfile user = import_user(json::parse(line).get<UserProfile>(), dir, *next);
      next->users[user.id] = std::move(user);
      ++report.admitted;
    } catch (const std::exception& e) {
      report.diagnostics.push_back(file.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  std::lock_guard lock(publish_);
  state_ = std::move(next);
  return report;
}

void Store::persist() const {
  const Snapshot s = snapshot();
  fs::create_directories(root_);
  std::string assets, users, engagements, documents;
  for (const auto& [_, a] : s->assets) assets += json(a).dump() + "\n";
  for (const auto& [_, u] : s->users) users += json(u).dump() + "\n";
  for (const auto& e : s->engagements) engagements += json(e).dump() + "\n";
  for (const auto& [collection, docs] : s->documents)
    for (const auto& [id, doc] : docs)
      documents += json{{"collection", collection}, {"id", id}, {"doc", doc}}.dump() + "\n";
  write_atomic(root_ / "assets.jsonl", assets);
  write_atomic(root_ / "users.jsonl", users);
  write_atomic(root_ / "engagements.jsonl", engagements);
  write_atomic(root_ / "documents.jsonl", documents);
  write_atomic(root_ / "store.json",
               json{{"format", "personaforge-store"},
                    {"version", kStoreFormatVersion},
                    {"industries", s->industries}}
                       .dump(2) + "\n");
}

StoreState load_state(const fs::path& root) {
  StoreState s;
  const fs::path header = root / "store.json";
  if (!fs::exists(header)) return s;
  json h;
  try {
    std::ifstream in(header);
    h = json::parse(in);
  } catch (const std::exception& e) {
    throw StoreError(header.string() + ": " + e.what());
  }
  if (h.value("format", "") != "personaforge-store") {
    throw StoreError(header.string() + ": not a personaforge store");
  }
  const int version = h.value("version", -1);
  if (version != kStoreFormatVersion) {
    throw StoreError(header.string() + ": unsupported store version " + std::to_string(version));
  }
  s.industries = h.value("industries", s.industries);
  load_lines(root / "assets.jsonl", [&](const json& j) {
    ContentAsset a = j.get<ContentAsset>();
    if (!s.assets.emplace(a.id, a).second) throw StoreError("duplicate asset id '" + a.id + "'");
  });
  load_lines(root / "users.jsonl", [&](const json& j) {
    UserProfile u = j.get<UserProfile>();
    if (!s.users.emplace(u.id, u).second) throw StoreError("duplicate user id '" + u.id + "'");
  });
  load_lines(root / "engagements.jsonl",
             [&](const json& j) { s.engagements.push_back(j.get<EngagementRecord>()); });
  load_lines(root / "documents.jsonl", [&](const json& j) {
    s.documents[j.at("collection").get<std::string>()][j.at("id").get<std::string>()] = j.at("doc");
  });
  return s;
}

fs::path data_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("PERSONAFORGE_DATA"); env && *env) return env;
  return "personaforge-data";
}

}  // namespace personaforge::store
