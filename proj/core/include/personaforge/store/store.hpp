#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "personaforge/store/records.hpp"

namespace personaforge::store {

inline constexpr int kStoreFormatVersion = 1;
inline constexpr std::size_t kAssetImageSize = 64;

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Complete platform state at one point in time.
struct StoreState {
  std::vector<std::string> industries = {"automobile", "fast_food", "fashion"};
  std::map<std::string, ContentAsset> assets;
  std::map<std::string, UserProfile> users;
  std::vector<EngagementRecord> engagements;
  /// Free-form JSON documents keyed by collection then id (rounds, feedback,
  /// scheduler state, job records).
  std::map<std::string, std::map<std::string, nlohmann::json>> documents;

  bool has_industry(const std::string& industry) const;
  const UserProfile* find_user(const std::string& id) const;
  /// Looks a user up by handle and platform.
  const UserProfile* find_handle(const std::string& handle, const std::string& platform) const;
  const ContentAsset* find_asset(const std::string& id) const;
  const nlohmann::json* document(const std::string& collection, const std::string& id) const;
  std::vector<ContentAsset> assets_of(const std::string& industry) const;

  bool operator==(const StoreState&) const = default;
};

using Snapshot = std::shared_ptr<const StoreState>;

struct IngestReport {
  std::size_t admitted = 0;
  std::size_t engagements = 0;
  std::vector<std::string> diagnostics;  // "file:line: reason" per skipped record
};

struct BrandFilter {
  std::set<std::string> industries;  // empty: every configured industry
  std::set<std::string> keywords;    // empty: no keyword constraint
};

/// True iff the asset's industry passes the filter and, when keywords are
/// given, some keyword occurs case-insensitively in the caption or a tag.
bool matches(const ContentAsset& asset, const BrandFilter& filter);

/// Single-writer, multi-reader platform store rooted at a data directory.
/// Readers take immutable snapshots; every write replaces the state pointer
/// (copy on write) under the writer mutex.
///
/// Layout: store.json {"format","version","industries"}, assets.jsonl,
/// users.jsonl, engagements.jsonl, documents.jsonl and images/.
class Store {
 public:
  explicit Store(std::filesystem::path root);

  /// Loads the persisted state under root, or starts empty when none exists.
  /// Throws StoreError naming file:line on malformed content and for
  /// unknown format versions.
  static std::unique_ptr<Store> open(const std::filesystem::path& root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path resolve(const std::string& ref) const { return root_ / ref; }

  Snapshot snapshot() const;
  /// Applies `change` to a private copy and publishes it atomically.
  void update(const std::function<void(StoreState&)>& change);

  void upsert_asset(const ContentAsset& asset);
  void upsert_user(UserProfile user);
  void add_engagement(const EngagementRecord& record);
  void put_document(const std::string& collection, const std::string& id, nlohmann::json doc);
  void set_industries(std::vector<std::string> industries);

  /// Reads <dir>/assets.jsonl (+ images/, optional engagements.jsonl) and
  /// upserts matching assets with their images normalized to 64x64 PNGs.
  IngestReport ingest_brand_corpus(const std::filesystem::path& dir, const BrandFilter& filter);
  /// Reads one user timeline JSON file; re-ingestion merges posts by id.
  /// Throws NotFoundError for a missing file.
  UserProfile ingest_user_timeline(const std::filesystem::path& file);
  /// Reads <dir>/users.jsonl with images under <dir>.
  IngestReport ingest_user_corpus(const std::filesystem::path& dir);

  /// Writes the current state atomically (temp files then rename).
  void persist() const;

 private:
  std::string import_image(const std::filesystem::path& source, const std::string& ref) const;
  UserProfile import_user(UserProfile incoming, const std::filesystem::path& base,
                          const StoreState& current) const;

  std::filesystem::path root_;
  mutable std::mutex writer_;
  mutable std::mutex publish_;
  Snapshot state_;
};

/// Reads the persisted state of a store root without opening a Store.
StoreState load_state(const std::filesystem::path& root);

/// Resolves the data directory from an explicit flag, then the
/// PERSONAFORGE_DATA environment variable, then "./personaforge-data".
std::filesystem::path data_dir(const std::string& flag_value = {});

}  // namespace personaforge::store
