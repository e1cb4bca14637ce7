#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "personaforge/fusion/mbti.hpp"
#include "personaforge/store/records.hpp"

namespace personaforge::recommend {

inline constexpr std::size_t kDefaultMinCohort = 5;
inline constexpr std::int64_t kDefaultWindowHours = 720;

struct Cohort {
  fusion::MbtiType anchor;
  std::vector<std::string> members;  // ascending user id
  int radius = 0;
  bool cold_start = false;  // no typed user within radius 1

  nlohmann::json to_json() const;
};

/// Users whose stored type equals the anchor's letters; if fewer than
/// min_size, every user within Hamming distance 1. Untyped users are ignored.
Cohort build_cohort(const fusion::MbtiType& anchor, std::span<const store::UserProfile> users,
                    std::size_t min_size = kDefaultMinCohort);

struct EngagementWeights {
  double clicks = 3.0;
  double likes = 1.0;
  double engagements = 2.0;

  double score(const store::EngagementRecord& r) const;
};

struct RankConfig {
  EngagementWeights weights;
  std::int64_t window_hours = kDefaultWindowHours;
  std::size_t top_k = 5;
};

struct ScoredAsset {
  std::string asset_id;
  double score = 0.0;

  bool operator==(const ScoredAsset&) const = default;
};

struct Ranking {
  std::vector<ScoredAsset> assets;
  bool cold_start = false;

  std::vector<std::string> ids() const;
};

/// Ranks the industry's assets created within [now - window, now] by the
/// summed weighted engagement of cohort members (all users when the cohort is
/// cold), descending, ties by ascending asset id; returns the first top_k.
Ranking rank_assets(const Cohort& cohort, const std::string& industry,
                    std::span<const store::ContentAsset> assets,
                    std::span<const store::EngagementRecord> log, std::int64_t now,
                    const RankConfig& config = {});

}  // namespace personaforge::recommend
