#include "personaforge/training/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "personaforge/store/image_io.hpp"
#include "personaforge/store/records.hpp"

namespace personaforge::training {

namespace {

using encoders::kImageSize;
using tensor::Tensor;

const std::array<std::array<std::vector<std::string>, 2>, fusion::kAxisCount> kLexicons = {{
    {{{"party", "crowd", "festival", "concert", "team", "dance", "cheer", "karaoke"},
      {"quiet", "alone", "journal", "solitude", "library", "tea", "reading", "calm"}}},
    {{{"practical", "facts", "routine", "detail", "concrete", "handmade", "recipe", "repair"},
      {"imagine", "theory", "future", "abstract", "vision", "dream", "cosmos", "symbol"}}},
    {{{"logic", "analysis", "metrics", "debate", "proof", "system", "benchmark", "audit"},
      {"empathy", "kindness", "feelings", "harmony", "caring", "warmth", "hug", "gratitude"}}},
    {{{"schedule", "plan", "deadline", "organized", "checklist", "agenda", "calendar", "tidy"},
      {"spontaneous", "improvise", "flexible", "wander", "whim", "maybe", "detour", "lastminute"}}},
}};

const std::vector<std::string> kFiller = {
    "today", "the",   "and",    "with",  "new",     "just",   "really", "time",
    "day",   "photo", "love",   "great", "morning", "weekend", "city",  "home",
    "work",  "food",  "coffee", "music", "movie",   "game",   "sun",    "rain",
    "walk",  "trip",  "car",    "shop",  "look",    "best",   "week",   "night",
    "pizza", "park",  "beach",  "book",  "street",  "sky",    "train",  "shoes"};

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

double& px(std::vector<double>& img, std::size_t c, std::size_t y, std::size_t x) {
  return img[(c * kImageSize + y) * kImageSize + x];
}

// Motif slots follow axis order: stripes orientation, colour tint, fine
// texture, centred shape.
void draw_motif(std::vector<double>& img, std::size_t slot, bool first, std::mt19937_64& rng) {
  switch (slot) {
    case 0: {
      const std::size_t phase = pick(rng, 8);
      for (std::size_t y = 0; y < kImageSize; ++y)
        for (std::size_t x = 0; x < kImageSize; ++x) {
          const std::size_t k = first ? y : x;
          const double s = ((k + phase) / 4) % 2 == 0 ? 0.25 : -0.25;
          for (std::size_t c = 0; c < 3; ++c) px(img, c, y, x) += s;
        }
      break;
    }
    case 1: {
      const double warm = first ? 0.45 : -0.3, cool = first ? -0.3 : 0.45;
      for (std::size_t y = 0; y < kImageSize; ++y)
        for (std::size_t x = 0; x < kImageSize; ++x) {
          px(img, 0, y, x) += warm;
          px(img, 2, y, x) += cool;
        }
      break;
    }
    case 2: {
      if (!first) break;
      for (std::size_t y = 0; y < kImageSize; ++y)
        for (std::size_t x = 0; x < kImageSize; ++x) {
          const double s = (x + y) % 2 == 0 ? 0.35 : -0.35;
          for (std::size_t c = 0; c < 3; ++c) px(img, c, y, x) += s;
        }
      break;
    }
    default: {
      const double cy = 24.0 + static_cast<double>(pick(rng, 17));
      const double cx = 24.0 + static_cast<double>(pick(rng, 17));
      const double r = 10.0;
      for (std::size_t y = 0; y < kImageSize; ++y)
        for (std::size_t x = 0; x < kImageSize; ++x) {
          const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
          const bool inside = first ? (dy * dy + dx * dx <= r * r)
                                    : (std::abs(dy) <= r * 0.9 && std::abs(dx) <= r * 0.9);
          if (inside) {
            px(img, 1, y, x) += 0.5;
          }
        }
      break;
    }
  }
}

std::vector<bool> balanced_labels(std::size_t n, std::mt19937_64& rng) {
  std::vector<bool> labels(n, false);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n / 2), true);
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

}  // namespace

std::span<const std::string> pole_lexicon(std::size_t axis, bool first_pole) {
  return kLexicons.at(axis)[first_pole ? 0 : 1];
}

std::span<const std::string> filler_words() { return kFiller; }

std::vector<LabeledExample> synthesize_corpus(std::size_t n_users, const SyntheticConfig& config,
                                              std::uint64_t seed) {
  if (n_users == 0) throw std::invalid_argument("synthesize_corpus: n_users must be positive");
  if (config.min_posts == 0 || config.min_posts > config.max_posts ||
      config.min_filler_words > config.max_filler_words || config.images_per_user == 0) {
    throw std::invalid_argument("synthesize_corpus: inconsistent config");
  }
  std::mt19937_64 rng(seed);
  std::array<std::vector<bool>, fusion::kAxisCount> labels;
  for (auto& l : labels) l = balanced_labels(n_users, rng);

  std::vector<LabeledExample> corpus(n_users);
  std::bernoulli_distribution coin(0.5), leak(config.noise_leak_rate);
  std::normal_distribution<double> noise(0.0, config.pixel_noise);
  std::uniform_real_distribution<double> level(-0.3, 0.3);

  for (std::size_t u = 0; u < n_users; ++u) {
    LabeledExample& ex = corpus[u];
    ex.user_id = "u" + std::to_string(u + 1);
    std::array<bool, fusion::kAxisCount> truth{};
    for (std::size_t a = 0; a < fusion::kAxisCount; ++a) truth[a] = labels[a][u];
    ex.truth = fusion::MbtiType::from_labels(truth);

    // Per axis: the bit each view carries, or nothing.
    std::array<int, fusion::kAxisCount> text_bit{}, image_bit{};
    for (std::size_t a = 0; a < fusion::kAxisCount; ++a) {
      text_bit[a] = image_bit[a] = -1;
      switch (config.signals[a]) {
        case Signal::kText:
          text_bit[a] = truth[a];
          break;
        case Signal::kImage:
          image_bit[a] = truth[a];
          break;
        case Signal::kConjunction: {
          const bool hidden = coin(rng);
          text_bit[a] = hidden;
          image_bit[a] = hidden != truth[a];
          break;
        }
        case Signal::kNoise:
          if (leak(rng)) text_bit[a] = truth[a] ? 2 : 3;  // single-post leak
          break;
      }
    }

    const std::size_t n_posts =
        config.min_posts + pick(rng, config.max_posts - config.min_posts + 1);
    const std::size_t leak_post = pick(rng, n_posts);
    for (std::size_t p = 0; p < n_posts; ++p) {
      const std::size_t n_words =
          config.min_filler_words + pick(rng, config.max_filler_words - config.min_filler_words + 1);
      std::vector<std::string> words;
      for (std::size_t w = 0; w < n_words; ++w) words.push_back(kFiller[pick(rng, kFiller.size())]);
      for (std::size_t a = 0; a < fusion::kAxisCount; ++a) {
        int bit = text_bit[a];
        if (bit >= 2) {
          if (p != leak_post) continue;
          bit = bit == 2 ? 1 : 0;
        }
        if (bit < 0) continue;
        const auto& lex = kLexicons[a][bit ? 0 : 1];
        const std::size_t at = pick(rng, words.size() + 1);
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), lex[pick(rng, lex.size())]);
      }
      std::string text;
      for (const auto& w : words) {
        if (!text.empty()) text.push_back(' ');
        text += w;
      }
      ex.texts.push_back(std::move(text));
    }

    for (std::size_t i = 0; i < config.images_per_user; ++i) {
      std::vector<double> img(3 * kImageSize * kImageSize);
      const double base = level(rng);
      for (double& v : img) v = base + noise(rng);
      for (std::size_t a = 0; a < fusion::kAxisCount; ++a) {
        const bool bit = image_bit[a] >= 0 ? image_bit[a] == 1 : coin(rng);
        draw_motif(img, a, bit, rng);
      }
      for (double& v : img) v = std::clamp(v, -1.0, 1.0);
      ex.images.push_back({Tensor({3, kImageSize, kImageSize}, std::move(img)),
                           static_cast<std::int64_t>(1000 - i)});
    }
  }
  return corpus;
}

void write_labeled_corpus(const std::filesystem::path& dir, std::span<const LabeledExample> corpus) {
  std::filesystem::create_directories(dir / "images");
  std::ofstream out(dir / "users.jsonl", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + (dir / "users.jsonl").string());
  for (const LabeledExample& ex : corpus) {
    store::UserProfile user;
    user.id = ex.user_id;
    user.handle = ex.user_id;
    user.mbti = fusion::MbtiType::from_labels(ex.truth.labels());
    const std::size_t n = std::max(ex.texts.size(), ex.images.size());
    for (std::size_t p = 0; p < n; ++p) {
      store::SocialPost post;
      post.id = ex.user_id + "-p" + std::to_string(p + 1);
      post.text = p < ex.texts.size() ? ex.texts[p] : std::string();
      post.timestamp = p < ex.images.size() ? ex.images[p].timestamp
                                            : static_cast<std::int64_t>(n - p);
      if (p < ex.images.size()) {
        const std::string ref = "images/" + post.id + ".png";
        store::write_png(dir / ref, ex.images[p].image);
        post.image_refs.push_back(ref);
      }
      user.posts.push_back(std::move(post));
    }
    store::normalize(user);
    out << nlohmann::json(user).dump() << '\n';
  }
}

std::vector<LabeledExample> load_labeled_corpus(const std::filesystem::path& dir) {
  const auto path = dir / "users.jsonl";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<LabeledExample> corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    store::UserProfile user;
    try {
      user = nlohmann::json::parse(line).get<store::UserProfile>();
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!user.mbti) continue;
    LabeledExample ex;
    ex.user_id = user.id;
    ex.truth = *user.mbti;
    for (const auto& post : user.posts) {
      if (!post.text.empty()) ex.texts.push_back(post.text);
      for (const auto& ref : post.image_refs) {
        ex.images.push_back({store::load_square_image(dir / ref, kImageSize), post.timestamp});
      }
    }
    corpus.push_back(std::move(ex));
  }
  return corpus;
}

}  // namespace personaforge::training
