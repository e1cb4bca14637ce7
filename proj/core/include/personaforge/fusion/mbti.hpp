#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace personaforge::fusion {

inline constexpr std::size_t kAxisCount = 4;

enum class Axis : std::size_t { kEI = 0, kSN = 1, kTF = 2, kJP = 3 };

/// "EI", "SN", "TF", "JP".
std::string_view axis_name(std::size_t axis);
/// First-listed pole letter (E, S, T, J) or second (I, N, F, P).
char pole_letter(std::size_t axis, bool first_pole);

class MbtiParseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Four binary axes. probabilities[a] is P(first-listed pole of axis a).
struct MbtiType {
  std::array<double, kAxisCount> probabilities{0.5, 0.5, 0.5, 0.5};

  /// Label is the first pole iff its probability is at least 0.5.
  bool first_pole(std::size_t axis) const { return probabilities.at(axis) >= 0.5; }
  std::string letters() const;

  /// Hard labels as probabilities 0/1. Accepts upper or lower case.
  static MbtiType from_letters(std::string_view letters);
  static MbtiType from_labels(const std::array<bool, kAxisCount>& first_poles);

  std::array<bool, kAxisCount> labels() const;

  /// {"mbti": "ENTJ", "probabilities": {"EI": .., "SN": .., "TF": .., "JP": ..}}
  nlohmann::json to_json() const;
  static MbtiType from_json(const nlohmann::json& j);

  bool operator==(const MbtiType&) const = default;
};

/// Number of axes whose labels differ.
int mbti_distance(const MbtiType& a, const MbtiType& b);

}  // namespace personaforge::fusion
