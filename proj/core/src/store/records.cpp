#include "personaforge/store/records.hpp"

#include <algorithm>
#include <cctype>

namespace personaforge::store {

using nlohmann::json;

namespace {

std::string required_string(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw RecordError(std::string("missing string field '") + key + "'");
  }
  std::string value = j.at(key).get<std::string>();
  if (value.empty()) throw RecordError(std::string("empty field '") + key + "'");
  return value;
}

std::int64_t count_field(const json& j, const char* key) {
  const std::int64_t v = j.value(key, std::int64_t{0});
  if (v < 0) throw RecordError(std::string("negative count '") + key + "'");
  return v;
}

}  // namespace

void normalize(UserProfile& user) {
  std::stable_sort(user.posts.begin(), user.posts.end(),
                   [](const SocialPost& a, const SocialPost& b) { return a.timestamp > b.timestamp; });
  user.flagged_images.clear();
  for (const SocialPost& p : user.posts) {
    for (const std::string& ref : p.image_refs) {
      if (user.flagged_images.size() == kFlaggedImageCount) return;
      user.flagged_images.push_back(ref);
    }
  }
}

std::string normalize_industry(std::string_view name) {
  std::string out;
  out.reserve(name.size());
  for (char c : name) {
    if (c == ' ' || c == '-') {
      out.push_back('_');
    } else {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

void to_json(json& j, const SocialPost& p) {
  j = {{"id", p.id}, {"text", p.text}, {"images", p.image_refs}, {"timestamp", p.timestamp}};
}

void from_json(const json& j, SocialPost& p) {
  p.id = required_string(j, "id");
  p.text = j.value("text", std::string());
  p.image_refs = j.value("images", std::vector<std::string>{});
  p.timestamp = j.value("timestamp", std::int64_t{0});
  if (p.text.empty() && p.image_refs.empty()) {
    throw RecordError("post '" + p.id + "' has neither text nor images");
  }
}

void to_json(json& j, const UserProfile& u) {
  j = {{"id", u.id}, {"handle", u.handle}, {"platform", u.platform}, {"posts", u.posts}};
  if (u.mbti) j["mbti"] = u.mbti->letters();
  if (u.inferred) j["inferred"] = u.inferred->to_json();
}

void from_json(const json& j, UserProfile& u) {
  u.id = required_string(j, "id");
  u.handle = j.value("handle", u.id);
  u.platform = j.value("platform", std::string("twitter"));
  if (u.platform != "twitter" && u.platform != "instagram") {
    throw RecordError("user '" + u.id + "': unknown platform '" + u.platform + "'");
  }
  u.posts = j.value("posts", std::vector<SocialPost>{});
  u.mbti.reset();
  u.inferred.reset();
  try {
    if (j.contains("mbti") && !j.at("mbti").is_null()) {
      u.mbti = fusion::MbtiType::from_letters(j.at("mbti").get<std::string>());
    }
    if (j.contains("inferred") && !j.at("inferred").is_null()) {
      u.inferred = fusion::MbtiType::from_json(j.at("inferred"));
    }
  } catch (const fusion::MbtiParseError& e) {
    throw RecordError("user '" + u.id + "': " + e.what());
  }
  normalize(u);
}

void to_json(json& j, const ContentAsset& a) {
  j = {{"id", a.id},           {"brand_id", a.brand_id},
       {"industry", a.industry}, {"image", a.image_ref},
       {"caption", a.caption},   {"created_at", a.created_at},
       {"tags", a.tags}};
}

void from_json(const json& j, ContentAsset& a) {
  a.id = required_string(j, "id");
  a.brand_id = j.value("brand_id", std::string());
  a.industry = normalize_industry(required_string(j, "industry"));
  a.image_ref = required_string(j, "image");
  a.caption = j.value("caption", std::string());
  a.created_at = j.value("created_at", std::int64_t{0});
  a.tags = j.value("tags", std::vector<std::string>{});
}

void to_json(json& j, const EngagementRecord& e) {
  j = {{"user_id", e.user_id},         {"asset_id", e.asset_id}, {"clicks", e.clicks},
       {"likes", e.likes}, {"engagements", e.engagements}, {"timestamp", e.timestamp}};
}

void from_json(const json& j, EngagementRecord& e) {
  e.user_id = required_string(j, "user_id");
  e.asset_id = required_string(j, "asset_id");
  e.clicks = count_field(j, "clicks");
  e.likes = count_field(j, "likes");
  e.engagements = count_field(j, "engagements");
  e.timestamp = j.value("timestamp", std::int64_t{0});
}

}  // namespace personaforge::store
