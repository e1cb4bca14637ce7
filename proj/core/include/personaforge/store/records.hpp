#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "personaforge/fusion/mbti.hpp"

namespace personaforge::store {

class RecordError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kFlaggedImageCount = 10;

struct SocialPost {
  std::string id;
  std::string text;
  std::vector<std::string> image_refs;  // relative to the corpus/store root
  std::int64_t timestamp = 0;

  bool operator==(const SocialPost&) const = default;
};

struct UserProfile {
  std::string id;
  std::string handle;
  std::string platform = "twitter";  // twitter | instagram
  std::vector<SocialPost> posts;     // newest first
  std::optional<fusion::MbtiType> mbti;      // known label shipped with the corpus
  std::optional<fusion::MbtiType> inferred;  // last profiler output
  std::vector<std::string> flagged_images;   // newest kFlaggedImageCount image refs

  /// Inferred type when present, otherwise the corpus label.
  std::optional<fusion::MbtiType> stored_type() const { return inferred ? inferred : mbti; }

  bool operator==(const UserProfile&) const = default;
};

struct ContentAsset {
  std::string id;
  std::string brand_id;
  std::string industry;
  std::string image_ref;
  std::string caption;
  std::int64_t created_at = 0;
  std::vector<std::string> tags;

  bool operator==(const ContentAsset&) const = default;
};

struct EngagementRecord {
  std::string user_id;
  std::string asset_id;
  std::int64_t clicks = 0;
  std::int64_t likes = 0;
  std::int64_t engagements = 0;
  std::int64_t timestamp = 0;

  bool operator==(const EngagementRecord&) const = default;
};

/// Sorts posts newest first (stable on ties) and recomputes flagged_images.
void normalize(UserProfile& user);

/// Lowercases and replaces spaces/hyphens with underscores ("Fast Food" -> "fast_food").
std::string normalize_industry(std::string_view name);

void to_json(nlohmann::json& j, const SocialPost& p);
void from_json(const nlohmann::json& j, SocialPost& p);
void to_json(nlohmann::json& j, const UserProfile& u);
void from_json(const nlohmann::json& j, UserProfile& u);
void to_json(nlohmann::json& j, const ContentAsset& a);
void from_json(const nlohmann::json& j, ContentAsset& a);
void to_json(nlohmann::json& j, const EngagementRecord& e);
void from_json(const nlohmann::json& j, EngagementRecord& e);

}  // namespace personaforge::store
