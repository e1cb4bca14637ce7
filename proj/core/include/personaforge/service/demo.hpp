#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace personaforge::service {

struct DemoOptions {
  std::size_t users = 60;
  std::size_t assets_per_industry = 40;
  std::vector<std::string> industries = {"automobile", "fast_food", "fashion"};
  std::uint64_t seed = 7;
  std::int64_t clock_start = 720;
};

struct DemoLayout {
  std::filesystem::path brands;    // assets.jsonl, engagements.jsonl, images/
  std::filesystem::path users;     // users.jsonl, images/ (labeled)
  std::filesystem::path timeline;  // one unlabeled demo user
  std::filesystem::path config;    // platform config wired to the corpora
  std::string demo_user;
};

/// Deterministic demo corpora: shape images per industry, labeled synthetic
/// users, engagement logs whose clicks favor assets matching the user's
/// type, an unlabeled timeline, and a config.json pointing at them.
DemoLayout write_demo_data(const std::filesystem::path& dir, const DemoOptions& options,
                           const nlohmann::json& config_overrides = nlohmann::json::object());

}  // namespace personaforge::service
