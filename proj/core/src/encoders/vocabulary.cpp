#include "personaforge/encoders/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

namespace personaforge::encoders {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto byte = static_cast<unsigned char>(ch);
    const bool word_char = byte >= 0x80 || std::isalnum(byte);
    if (word_char) {
      current.push_back(static_cast<char>(byte < 0x80 ? std::tolower(byte) : byte));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

Vocabulary Vocabulary::build(std::span<const std::string> documents, std::size_t max_size) {
  struct Stat {
    std::size_t count = 0;
    std::size_t first_seen = 0;
  };
  std::unordered_map<std::string, Stat> stats;
  std::size_t position = 0;
  for (const auto& doc : documents) {
    for (auto& word : split_words(doc)) {
      auto [it, inserted] = stats.try_emplace(std::move(word), Stat{0, position});
      ++it->second.count;
      ++position;
    }
  }
  std::vector<std::pair<std::string, Stat>> ordered(stats.begin(), stats.end());
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    return a.second.first_seen < b.second.first_seen;
  });
  Vocabulary vocab;
  for (const auto& [word, stat] : ordered) {
    if (max_size != 0 && vocab.size() >= max_size) break;
    if (word == "<pad>" || word == "<unk>") continue;
    vocab.add(word);
  }
  return vocab;
}

std::size_t Vocabulary::id_of(const std::string& token) const {
  const auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

std::size_t Vocabulary::add(const std::string& token) {
  const auto [it, inserted] = ids_.try_emplace(token, tokens_.size());
  if (inserted) tokens_.push_back(token);
  return it->second;
}

nlohmann::json Vocabulary::to_json() const {
  nlohmann::json mapping = nlohmann::json::object();
  for (std::size_t id = 0; id < tokens_.size(); ++id) mapping[tokens_[id]] = id;
  return mapping;
}

Vocabulary Vocabulary::from_json(const nlohmann::json& mapping) {
  if (!mapping.is_object()) throw std::invalid_argument("vocabulary: expected a JSON object");
  std::map<std::size_t, std::string> by_id;
  for (const auto& [token, id] : mapping.items()) {
    const auto value = id.get<std::size_t>();
    if (!by_id.emplace(value, token).second) {
      throw std::invalid_argument("vocabulary: duplicate id " + std::to_string(value));
    }
  }
  if (by_id.size() < 2 || by_id.at(kPadId) != "<pad>" || by_id.at(kUnkId) != "<unk>") {
    throw std::invalid_argument("vocabulary: ids 0 and 1 must be <pad> and <unk>");
  }
  Vocabulary vocab;
  std::size_t expected = 0;
  for (const auto& [id, token] : by_id) {
    if (id != expected++) throw std::invalid_argument("vocabulary: ids must be contiguous");
    vocab.add(token);
  }
  return vocab;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("vocabulary: cannot write " + path.string());
  out << to_json().dump(1) << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("vocabulary: cannot open " + path.string());
  return from_json(nlohmann::json::parse(in));
}

std::vector<std::size_t> TokenizedPost::padded() const {
  std::vector<std::size_t> out = ids;
  out.resize(kMaxPostTokens, kPadId);
  return out;
}

TokenizedPost tokenize(std::string_view text, const Vocabulary& vocab) {
  TokenizedPost post;
  post.text = std::string(text);
  for (const auto& word : split_words(text)) {
    if (post.ids.size() == kMaxPostTokens) break;
    post.ids.push_back(vocab.id_of(word));
  }
  return post;
}

}  // namespace personaforge::encoders
