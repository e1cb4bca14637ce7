#include "personaforge/recommend/cohort.hpp"

#include <algorithm>
#include <map>
#include <unordered_set>

namespace personaforge::recommend {

nlohmann::json Cohort::to_json() const {
  return {{"anchor", anchor.letters()},
          {"size", members.size()},
          {"radius", radius},
          {"cold_start", cold_start}};
}

Cohort build_cohort(const fusion::MbtiType& anchor, std::span<const store::UserProfile> users,
                    std::size_t min_size) {
  Cohort cohort{anchor, {}, 0, false};
  std::vector<std::string> near;
  for (const auto& user : users) {
    const auto type = user.stored_type();
    if (!type) continue;
    const int d = fusion::mbti_distance(anchor, *type);
    if (d == 0) cohort.members.push_back(user.id);
    if (d <= 1) near.push_back(user.id);
  }
  if (cohort.members.size() < min_size) {
    cohort.members = std::move(near);
    cohort.radius = 1;
  }
  std::sort(cohort.members.begin(), cohort.members.end());
  cohort.members.erase(std::unique(cohort.members.begin(), cohort.members.end()),
                       cohort.members.end());
  cohort.cold_start = cohort.members.empty();
  return cohort;
}

double EngagementWeights::score(const store::EngagementRecord& r) const {
  return clicks * static_cast<double>(r.clicks) + likes * static_cast<double>(r.likes) +
         engagements * static_cast<double>(r.engagements);
}

std::vector<std::string> Ranking::ids() const {
  std::vector<std::string> out;
  for (const auto& a : assets) out.push_back(a.asset_id);
  return out;
}

Ranking rank_assets(const Cohort& cohort, const std::string& industry,
                    std::span<const store::ContentAsset> assets,
                    std::span<const store::EngagementRecord> log, std::int64_t now,
                    const RankConfig& config) {
  const std::string wanted = store::normalize_industry(industry);
  std::map<std::string, double> scores;
  for (const auto& asset : assets) {
    if (store::normalize_industry(asset.industry) != wanted) continue;
    if (asset.created_at > now || asset.created_at < now - config.window_hours) continue;
    scores.emplace(asset.id, 0.0);
  }
  Ranking ranking;
  ranking.cold_start = cohort.cold_start || scores.empty();
  if (scores.empty()) return ranking;

  const std::unordered_set<std::string> members(cohort.members.begin(), cohort.members.end());
  for (const auto& record : log) {
    if (!cohort.cold_start && !members.count(record.user_id)) continue;
    const auto it = scores.find(record.asset_id);
    if (it != scores.end()) it->second += config.weights.score(record);
  }
  for (const auto& [id, score] : scores) ranking.assets.push_back({id, score});
  std::stable_sort(ranking.assets.begin(), ranking.assets.end(),
                   [](const ScoredAsset& a, const ScoredAsset& b) { return a.score > b.score; });
  if (ranking.assets.size() > config.top_k) ranking.assets.resize(config.top_k);
  return ranking;
}

}  // namespace personaforge::recommend
