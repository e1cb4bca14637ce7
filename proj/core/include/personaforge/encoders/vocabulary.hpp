#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace personaforge::encoders {

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kUnkId = 1;
inline constexpr std::size_t kMaxPostTokens = 64;

/// Lowercases ASCII letters and splits on anything that is not a letter or
/// digit. Non-ASCII bytes are kept as part of words.
std::vector<std::string> split_words(std::string_view text);

/// Token -> id mapping with {0: PAD, 1: UNK} reserved.
class Vocabulary {
 public:
  Vocabulary();

  /// Orders tokens by descending frequency, then by first occurrence.
  /// max_size counts the two reserved entries; 0 means unbounded.
  static Vocabulary build(std::span<const std::string> documents, std::size_t max_size = 0);

  std::size_t size() const { return tokens_.size(); }
  std::size_t id_of(const std::string& token) const;
  bool contains(const std::string& token) const { return ids_.contains(token); }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }

  /// Appends a token if absent; returns its id.
  std::size_t add(const std::string& token);

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& mapping);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

struct TokenizedPost {
  std::vector<std::size_t> ids;  // unpadded, at most kMaxPostTokens
  std::string text;

  /// ids right-padded with PAD to kMaxPostTokens.
  std::vector<std::size_t> padded() const;
};

TokenizedPost tokenize(std::string_view text, const Vocabulary& vocab);

}  // namespace personaforge::encoders
