#pragma once

#include <array>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "personaforge/fusion/classifier.hpp"

namespace personaforge::training {

/// Unweighted mean of the F1 scores of the two classes of one binary axis.
/// A class with no predicted and no true members scores 0. Throws
/// std::invalid_argument on empty or mismatched input.
double macro_f1(std::span<const bool> predictions, std::span<const bool> truths);

inline constexpr std::array<fusion::ViewMode, 3> kReportModes = {
    fusion::ViewMode::kText, fusion::ViewMode::kImage, fusion::ViewMode::kFused};

/// Macro-F1 per view mode (rows: text, image, fused) and axis (EI, SN, TF, JP).
struct EvalReport {
  std::array<std::array<double, fusion::kAxisCount>, 3> macro_f1{};

  std::array<double, fusion::kAxisCount>& row(fusion::ViewMode mode);
  const std::array<double, fusion::kAxisCount>& row(fusion::ViewMode mode) const;

  /// Mean over the given axes of one row.
  double mean(fusion::ViewMode mode, std::span<const std::size_t> axes) const;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  /// Aligned text table with a header row of axes and one row per mode.
  std::string table() const;
};

}  // namespace personaforge::training
