#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "personaforge/fusion/mbti.hpp"
#include "personaforge/recommend/cohort.hpp"
#include "personaforge/store/records.hpp"

namespace personaforge::testing::oracles {

using fusion::MbtiType;
using recommend::RankConfig;
using recommend::ScoredAsset;
using store::ContentAsset;
using store::EngagementRecord;
using store::UserProfile;

inline const char* kTypes[] = {"ESTJ", "ESTP", "ESFJ", "ESFP", "ENTJ", "ENTP", "ENFJ", "ENFP",
                        "ISTJ", "ISTP", "ISFJ", "ISFP", "INTJ", "INTP", "INFJ", "INFP"};

inline UserProfile user(const std::string& id, const char* type) {
  UserProfile u;
  u.id = id;
  u.handle = id;
  u.platform = "twitter";
  if (type) u.mbti = MbtiType::from_letters(type);
  return u;
}

inline ContentAsset asset(const std::string& id, const std::string& industry, std::int64_t created) {
  ContentAsset a;
  a.id = id;
  a.brand_id = "b";
  a.industry = industry;
  a.image_ref = id + ".png";
  a.created_at = created;
  return a;
}

inline int letter_distance(const std::string& a, const std::string& b) {
  int d = 0;
  for (std::size_t i = 0; i < 4; ++i) d += a[i] != b[i];
  return d;
}

struct CohortOracle {
  std::vector<std::string> members;
  int radius;
};

inline CohortOracle brute_cohort(const std::string& anchor, const std::vector<UserProfile>& users,
                          std::size_t min_size) {
  for (int radius = 0; radius <= 1; ++radius) {
    std::vector<std::string> members;
    for (const auto& u : users) {
      if (u.mbti && letter_distance(anchor, u.mbti->letters()) <= radius) members.push_back(u.id);
    }
    std::sort(members.begin(), members.end());
    if (radius == 1 || members.size() >= min_size) return {members, radius};
  }
  return {};
}

inline std::vector<ScoredAsset> brute_rank(const std::vector<std::string>& members, bool everyone,
                                    const std::string& industry,
                                    const std::vector<ContentAsset>& assets,
                                    const std::vector<EngagementRecord>& log, std::int64_t now,
                                    const RankConfig& config) {
  std::vector<ScoredAsset> pool;
  for (const auto& a : assets) {
    if (a.industry != industry || a.created_at > now || now - a.created_at > config.window_hours)
      continue;
    double score = 0.0;
    for (const auto& r : log) {
      if (r.asset_id != a.id) continue;
      if (!everyone && std::find(members.begin(), members.end(), r.user_id) == members.end())
        continue;
      score += config.weights.clicks * r.clicks + config.weights.likes * r.likes +
               config.weights.engagements * r.engagements;
    }
    pool.push_back({a.id, score});
  }
  std::vector<ScoredAsset> out;
  while (!pool.empty() && out.size() < config.top_k) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pool.size(); ++i) {
      if (pool[i].score > pool[best].score ||
          (pool[i].score == pool[best].score && pool[i].asset_id < pool[best].asset_id))
        best = i;
    }
    out.push_back(pool[best]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return out;
}

struct Instance {
  std::vector<UserProfile> users;
  std::vector<ContentAsset> assets;
  std::vector<EngagementRecord> log;
};

inline Instance random_instance(std::mt19937_64& rng, std::size_t n_users, std::size_t n_assets) {
  const char* industries[] = {"fashion", "fast_food", "automobile"};
  std::uniform_int_distribution<int> type(0, 15), ind(0, 2), count(0, 3), created(0, 1000);
  std::bernoulli_distribution untyped(0.1);
  Instance inst;
  for (std::size_t u = 0; u < n_users; ++u) {
    inst.users.push_back(user("u" + std::to_string(u), untyped(rng) ? nullptr : kTypes[type(rng)]));
  }
  for (std::size_t a = 0; a < n_assets; ++a) {
    inst.assets.push_back(asset("a" + std::to_string(a), industries[ind(rng)], created(rng)));
  }
  std::uniform_int_distribution<std::size_t> pick_u(0, n_users - 1), pick_a(0, n_assets - 1);
  const std::size_t records = 3 * n_assets;
  for (std::size_t r = 0; r < records; ++r) {
    inst.log.push_back({"u" + std::to_string(pick_u(rng)), "a" + std::to_string(pick_a(rng)),
                        count(rng), count(rng), count(rng), 500});
  }
  return inst;
}

// Exact rational arithmetic for the confusion oracle.
struct Q {
  long long n, d;
};
inline Q reduce(Q q) {
  const long long g = std::gcd(q.n, q.d);
  return g ? Q{q.n / g, q.d / g} : q;
}
inline Q add(Q a, Q b) { return reduce({a.n * b.d + b.n * a.d, a.d * b.d}); }
inline Q mul(Q a, Q b) { return reduce({a.n * b.n, a.d * b.d}); }
inline Q divide(Q a, Q b) { return reduce({a.n * b.d, a.d * b.n}); }

inline double oracle_macro_f1(const std::vector<bool>& p, const std::vector<bool>& t) {
  // 2x2 confusion matrix by explicit counting, then F1 = 2PR / (P + R).
  long long m[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < p.size(); ++i) ++m[t[i] ? 1 : 0][p[i] ? 1 : 0];
  Q total{0, 1};
  for (int cls = 0; cls < 2; ++cls) {
    const long long tp = m[cls][cls], fp = m[1 - cls][cls], fn = m[cls][1 - cls];
    if (tp == 0) continue;
    const Q precision = reduce({tp, tp + fp}), recall = reduce({tp, tp + fn});
    total = add(total, divide(mul({2, 1}, mul(precision, recall)), add(precision, recall)));
  }
  total = mul(total, {1, 2});
  return static_cast<double>(total.n) / static_cast<double>(total.d);
}

}  // namespace personaforge::testing::oracles
