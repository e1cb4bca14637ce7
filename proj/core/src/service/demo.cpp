#include "personaforge/service/demo.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "personaforge/gan/training.hpp"
#include "personaforge/store/image_io.hpp"
#include "personaforge/store/records.hpp"
#include "personaforge/training/corpus.hpp"

namespace personaforge::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

const char* kCaptionWords[] = {"new", "season", "drop", "classic", "bold", "fresh", "limited", "signature"};

}  // namespace

DemoLayout write_demo_data(const fs::path& dir, const DemoOptions& options, const json& config_overrides) {
  if (options.users < 2) throw std::invalid_argument("demo data needs at least two users");
  DemoLayout layout;
  layout.brands = dir / "brands";
  layout.users = dir / "users";
  layout.timeline = dir / "timelines" / "demo.json";
  layout.config = dir / "config.json";
  layout.demo_user = "demo";
  fs::create_directories(layout.brands / "images");
  fs::create_directories(layout.timeline.parent_path() / "images");

  auto corpus = training::synthesize_corpus(options.users + 1, {}, options.seed);
  auto demo = std::move(corpus.back());
  corpus.pop_back();
  training::write_labeled_corpus(layout.users, corpus);

  store::UserProfile timeline;
  timeline.id = layout.demo_user;
  timeline.handle = "demo_handle";
  timeline.platform = "instagram";
  for (std::size_t p = 0; p < std::max(demo.texts.size(), demo.images.size()); ++p) {
    store::SocialPost post;
    post.id = "demo-p" + std::to_string(p + 1);
    post.text = p < demo.texts.size() ? demo.texts[p] : std::string();
    post.timestamp = static_cast<std::int64_t>(100 - p);
    if (p < demo.images.size()) {
      const std::string ref = "images/" + post.id + ".png";
      store::write_png(layout.timeline.parent_path() / ref, demo.images[p].image);
      post.image_refs.push_back(ref);
    }
    timeline.posts.push_back(std::move(post));
  }
  store::normalize(timeline);
  write_text(layout.timeline, json(timeline).dump(2) + "\n");

  std::mt19937_64 rng(options.seed ^ 0x5EEDULL);
  std::string assets_jsonl;
  std::string engagements_jsonl;
  for (std::size_t i = 0; i < options.industries.size(); ++i) {
    const std::string industry = store::normalize_industry(options.industries[i]);
    const auto images = gan::shapes_corpus(options.assets_per_industry, options.seed * 31 + i);
    std::vector<store::ContentAsset> assets;
    std::vector<fusion::MbtiType> targets;
    for (std::size_t a = 0; a < images.size(); ++a) {
      store::ContentAsset asset;
      asset.id = industry + "-" + std::to_string(a + 1);
      asset.brand_id = industry + "-brand-" + std::to_string(a % 3 + 1);
      asset.industry = industry;
      asset.image_ref = "images/" + asset.id + ".png";
      asset.caption = std::string(kCaptionWords[a % 8]) + " " + industry + " " + kCaptionWords[(a / 8) % 8];
      asset.tags = {industry, kCaptionWords[(a * 3) % 8]};
      asset.created_at = options.clock_start - static_cast<std::int64_t>(rng() % 700);
      store::write_png(layout.brands / asset.image_ref, store::resize_bilinear(images[a], 64, 64));
      assets_jsonl += json(asset).dump() + "\n";
      std::array<bool, fusion::kAxisCount> poles{};
      for (std::size_t axis = 0; axis < fusion::kAxisCount; ++axis) poles[axis] = (rng() & 1U) != 0;
      targets.push_back(fusion::MbtiType::from_labels(poles));
      assets.push_back(std::move(asset));
    }
    for (const auto& user : corpus) {
      for (std::size_t a = 0; a < assets.size(); ++a) {
        const int distance = fusion::mbti_distance(user.truth, targets[a]);
        const double p = 0.6 * std::exp(-1.2 * distance);
        if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) >= p) continue;
        store::EngagementRecord e;
        e.user_id = user.user_id;
        e.asset_id = assets[a].id;
        e.clicks = 1 + static_cast<std::int64_t>(rng() % 3) + (distance == 0 ? 2 : 0);
        e.likes = static_cast<std::int64_t>(rng() % 4);
        e.engagements = static_cast<std::int64_t>(rng() % 2);
        e.timestamp = assets[a].created_at + static_cast<std::int64_t>(rng() % 12);
        engagements_jsonl += json(e).dump() + "\n";
      }
    }
  }
  write_text(layout.brands / "assets.jsonl", assets_jsonl);
  write_text(layout.brands / "engagements.jsonl", engagements_jsonl);

  json config = {{"clock_start", options.clock_start},
                 {"industries", options.industries},
                 {"sources", json::array({{{"kind", "brand"}, {"path", "brands"}},
                                          {{"kind", "users"}, {"path", "users"}}})},
                 {"profiler", {{"epochs", 12}, {"patience", 4}}},
                 {"generator", {{"steps", 400}}}};
  config.merge_patch(config_overrides);
  write_text(layout.config, config.dump(2) + "\n");
  return layout;
}

}  // namespace personaforge::service
