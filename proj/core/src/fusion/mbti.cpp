#include "personaforge/fusion/mbti.hpp"

#include <cctype>

namespace personaforge::fusion {

namespace {

constexpr std::array<std::string_view, kAxisCount> kAxisNames = {"EI", "SN", "TF", "JP"};

}  // namespace

std::string_view axis_name(std::size_t axis) { return kAxisNames.at(axis); }

char pole_letter(std::size_t axis, bool first_pole) {
  return kAxisNames.at(axis)[first_pole ? 0 : 1];
}

std::string MbtiType::letters() const {
  std::string out(kAxisCount, ' ');
  for (std::size_t a = 0; a < kAxisCount; ++a) out[a] = pole_letter(a, first_pole(a));
  return out;
}

std::array<bool, kAxisCount> MbtiType::labels() const {
  std::array<bool, kAxisCount> out{};
  for (std::size_t a = 0; a < kAxisCount; ++a) out[a] = first_pole(a);
  return out;
}

MbtiType MbtiType::from_labels(const std::array<bool, kAxisCount>& first_poles) {
  MbtiType t;
  for (std::size_t a = 0; a < kAxisCount; ++a) t.probabilities[a] = first_poles[a] ? 1.0 : 0.0;
  return t;
}

MbtiType MbtiType::from_letters(std::string_view letters) {
  if (letters.size() != kAxisCount) {
    throw MbtiParseError("mbti: expected 4 letters, got '" + std::string(letters) + "'");
  }
  std::array<bool, kAxisCount> poles{};
  for (std::size_t a = 0; a < kAxisCount; ++a) {
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(letters[a])));
    if (c == kAxisNames[a][0]) {
      poles[a] = true;
    } else if (c == kAxisNames[a][1]) {
      poles[a] = false;
    } else {
      throw MbtiParseError("mbti: '" + std::string(letters) + "' has no valid " +
                           std::string(kAxisNames[a]) + " letter at position " +
                           std::to_string(a));
    }
  }
  return from_labels(poles);
}

nlohmann::json MbtiType::to_json() const {
  nlohmann::json probs = nlohmann::json::object();
  for (std::size_t a = 0; a < kAxisCount; ++a) probs[std::string(kAxisNames[a])] = probabilities[a];
  return {{"mbti", letters()}, {"probabilities", probs}};
}

MbtiType MbtiType::from_json(const nlohmann::json& j) {
  if (j.contains("probabilities")) {
    MbtiType t;
    for (std::size_t a = 0; a < kAxisCount; ++a) {
      const double p = j.at("probabilities").at(std::string(kAxisNames[a])).get<double>();
      if (!(p >= 0.0 && p <= 1.0)) throw MbtiParseError("mbti: probability out of [0,1]");
      t.probabilities[a] = p;
    }
    return t;
  }
  return from_letters(j.at("mbti").get<std::string>());
}

int mbti_distance(const MbtiType& a, const MbtiType& b) {
  int d = 0;
  for (std::size_t i = 0; i < kAxisCount; ++i) d += a.first_pole(i) != b.first_pole(i);
  return d;
}

}  // namespace personaforge::fusion
