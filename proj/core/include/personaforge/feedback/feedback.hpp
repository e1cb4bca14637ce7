#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "personaforge/feedback/augment.hpp"
#include "personaforge/store/records.hpp"

namespace personaforge::feedback {

class FeedbackError : public std::invalid_argument {
 public:
  FeedbackError(std::string field, const std::string& message)
      : std::invalid_argument(message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class LedgerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Compliance { kYes, kNo, kDontKnow };

std::string_view compliance_name(Compliance c);
Compliance parse_compliance(std::string_view text);

struct FeedbackRecord {
  std::string round_id;
  std::string card_id;
  int attractiveness = 0;  // 0..100
  int preference = 1;      // 1..5
  Compliance compliance = Compliance::kDontKnow;
  bool would_click = false;
  std::int64_t timestamp = 0;

  /// Throws FeedbackError naming the first out-of-range field.
  void validate() const;
  bool operator==(const FeedbackRecord&) const = default;
};

void to_json(nlohmann::json& j, const FeedbackRecord& f);
void from_json(const nlohmann::json& j, FeedbackRecord& f);

/// Success iff preference >= 4 or would_click.
bool judge_variant(const FeedbackRecord& f);

inline constexpr int kMaxMultiplicity = 4;

/// A generated card of a round and the asset whose style it came from.
struct RoundVariant {
  std::string card_id;
  std::string source_id;
};

struct SourceOutcome {
  std::string source_id;
  int successes = 0;
  int failures = 0;
  bool penalized = false;
  int multiplicity = 0;

  bool operator==(const SourceOutcome&) const = default;
};

struct RoundSettlement {
  std::string round_id;
  std::vector<SourceOutcome> sources;  // ascending source id

  std::vector<std::string> penalized() const;
  std::vector<std::string> prioritized() const;
  nlohmann::json to_json() const;
  static RoundSettlement from_json(const nlohmann::json& j);
  bool operator==(const RoundSettlement&) const = default;
};

/// A source is penalized iff none of its variants has a successful record;
/// unrated variants count as failures. Feedback for cards outside the
/// variant list is ignored.
RoundSettlement settle_round(const std::string& round_id, std::span<const RoundVariant> variants,
                             std::span<const FeedbackRecord> feedback);

struct SourceEntry {
  int successes = 0;
  int failures = 0;
  bool penalized = false;
  int multiplicity = 0;

  bool operator==(const SourceEntry&) const = default;
};

struct ManifestEntry {
  std::string asset_id;
  std::vector<Recipe> recipes;  // augmentations in addition to the original

  bool operator==(const ManifestEntry&) const = default;
};

struct RetrainManifest {
  std::string round_id;
  std::string industry;
  std::vector<ManifestEntry> entries;  // ascending asset id

  bool contains(const std::string& asset_id) const;
  std::size_t image_count() const;
  nlohmann::json to_json() const;
  static RetrainManifest from_json(const nlohmann::json& j);
  bool operator==(const RetrainManifest&) const = default;
};

/// Per-source success history. Settling a round id twice is a no-op that
/// returns the first settlement. Penalization is per cycle: a later
/// settlement with a success clears the flag.
class SourceLedger {
 public:
  const RoundSettlement& apply(const RoundSettlement& settlement);
  bool settled(const std::string& round_id) const;
  const RoundSettlement* settlement(const std::string& round_id) const;

  const SourceEntry* find(const std::string& asset_id) const;
  bool is_penalized(const std::string& asset_id) const;
  const std::map<std::string, SourceEntry>& entries() const { return entries_; }

  /// Non-penalized candidates of the industry: prioritized ones carry
  /// `multiplicity` augmentation recipes, the rest none.
  RetrainManifest manifest(const std::string& round_id, const std::string& industry,
                           std::span<const store::ContentAsset> candidates,
                           std::uint64_t seed) const;

  nlohmann::json to_json() const;
  static SourceLedger from_json(const nlohmann::json& j);
  bool operator==(const SourceLedger& other) const {
    return entries_ == other.entries_ && rounds_ == other.rounds_;
  }

 private:
  std::map<std::string, SourceEntry> entries_;
  std::map<std::string, RoundSettlement> rounds_;
};

/// Append-only JSONL persistence: one line per settlement or manifest, and a
/// snapshot line written by compact().
class LedgerLog {
 public:
  explicit LedgerLog(std::filesystem::path file);

  /// Replays the log. Throws LedgerError naming file:line for bad lines.
  SourceLedger load() const;
  void append_settlement(const RoundSettlement& settlement) const;
  void append_manifest(const RetrainManifest& manifest) const;
  std::vector<RetrainManifest> manifests() const;
  /// Rewrites the file as one snapshot line plus the manifest lines.
  void compact() const;
  const std::filesystem::path& file() const { return file_; }

 private:
  void append(const nlohmann::json& line) const;
  std::vector<nlohmann::json> lines() const;
  std::filesystem::path file_;
};

}  // namespace personaforge::feedback
