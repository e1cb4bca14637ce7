#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "personaforge/encoders/image_encoder.hpp"
#include "personaforge/fusion/mbti.hpp"

namespace personaforge::training {

struct LabeledExample {
  std::string user_id;
  std::vector<std::string> texts;
  std::vector<encoders::TimedImage> images;  // [3,64,64] each
  fusion::MbtiType truth;
};

/// Where an axis' label is planted.
///  kText: a pole lexicon word in every post.
///  kImage: a pole image motif.
///  kConjunction: a hidden bit in the text lexicon, label XOR hidden bit as
///    the image motif, so neither view alone carries information.
///  kNoise: a pole lexicon word in one post of a small fraction of users.
enum class Signal { kText, kImage, kConjunction, kNoise };

struct SyntheticConfig {
  std::array<Signal, fusion::kAxisCount> signals = {Signal::kText, Signal::kImage,
                                                    Signal::kConjunction, Signal::kNoise};
  std::size_t min_posts = 3;
  std::size_t max_posts = 5;
  std::size_t min_filler_words = 5;
  std::size_t max_filler_words = 9;
  std::size_t images_per_user = 1;
  /// Fraction of users whose noise-axis label leaks into one post.
  double noise_leak_rate = 0.25;
  double pixel_noise = 0.08;
};

/// Deterministic for (n_users, config, seed). Per-axis labels are exactly
/// balanced (floor(n/2) first-pole users) and independently shuffled.
std::vector<LabeledExample> synthesize_corpus(std::size_t n_users, const SyntheticConfig& config,
                                              std::uint64_t seed);

/// Word lists used by the generator, exposed for probes and docs.
std::span<const std::string> pole_lexicon(std::size_t axis, bool first_pole);
std::span<const std::string> filler_words();

/// Writes `users.jsonl` and `images/*.png` under `dir`.
void write_labeled_corpus(const std::filesystem::path& dir, std::span<const LabeledExample> corpus);

/// Reads a corpus directory in the user-corpus layout. Users without an
/// `mbti` label are skipped. Images are resized to 64x64 when needed.
std::vector<LabeledExample> load_labeled_corpus(const std::filesystem::path& dir);

}  // namespace personaforge::training
