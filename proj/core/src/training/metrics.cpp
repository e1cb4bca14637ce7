#include "personaforge/training/metrics.hpp"

#include <cstdint>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace personaforge::training {

namespace {

struct Fraction {
  std::uint64_t num = 0;
  std::uint64_t den = 1;
};

// F1 of one class as 2tp / (2tp + fp + fn); zero when tp is zero.
Fraction class_f1(std::span<const bool> predictions, std::span<const bool> truths, bool cls) {
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool p = predictions[i] == cls, t = truths[i] == cls;
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
  }
  if (tp == 0) return {};
  return {2 * tp, 2 * tp + fp + fn};
}

std::size_t row_index(fusion::ViewMode mode) {
  for (std::size_t i = 0; i < kReportModes.size(); ++i) {
    if (kReportModes[i] == mode) return i;
  }
  throw std::invalid_argument("unknown view mode");
}

}  // namespace

double macro_f1(std::span<const bool> predictions, std::span<const bool> truths) {
  if (predictions.empty()) throw std::invalid_argument("macro_f1: empty input");
  if (predictions.size() != truths.size()) {
    throw std::invalid_argument("macro_f1: " + std::to_string(predictions.size()) +
                                " predictions for " + std::to_string(truths.size()) +
                                " truths");
  }
  // One rounding: (a/b + c/d) / 2 = (ad + cb) / 2bd.
  const Fraction x = class_f1(predictions, truths, true);
  const Fraction y = class_f1(predictions, truths, false);
  return static_cast<double>(x.num * y.den + y.num * x.den) /
         static_cast<double>(2 * x.den * y.den);
}

std::array<double, fusion::kAxisCount>& EvalReport::row(fusion::ViewMode mode) {
  return macro_f1[row_index(mode)];
}

const std::array<double, fusion::kAxisCount>& EvalReport::row(fusion::ViewMode mode) const {
  return macro_f1[row_index(mode)];
}

double EvalReport::mean(fusion::ViewMode mode, std::span<const std::size_t> axes) const {
  if (axes.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t a : axes) s += row(mode).at(a);
  return s / static_cast<double>(axes.size());
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json modes = nlohmann::json::array(), axes = nlohmann::json::array();
  for (auto m : kReportModes) modes.push_back(std::string(fusion::view_mode_name(m)));
  for (std::size_t a = 0; a < fusion::kAxisCount; ++a) {
    axes.push_back(std::string(fusion::axis_name(a)));
  }
  nlohmann::json matrix = nlohmann::json::array();
  for (const auto& r : macro_f1) matrix.push_back(r);
  return {{"modes", modes}, {"axes", axes}, {"macro_f1", matrix}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  const auto& matrix = j.at("macro_f1");
  if (matrix.size() != 3) throw std::invalid_argument("eval report: expected 3 rows");
  for (std::size_t m = 0; m < 3; ++m) {
    if (matrix[m].size() != fusion::kAxisCount) {
      throw std::invalid_argument("eval report: expected 4 columns");
    }
    for (std::size_t a = 0; a < fusion::kAxisCount; ++a) r.macro_f1[m][a] = matrix[m][a].get<double>();
  }
  return r;
}

std::string EvalReport::table() const {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-12s", "Macro F1");
  out << buf;
  for (std::size_t a = 0; a < fusion::kAxisCount; ++a) {
    std::snprintf(buf, sizeof buf, "%8s", std::string(fusion::axis_name(a)).c_str());
    out << buf;
  }
  out << '\n';
  constexpr const char* kLabels[] = {"Text", "Image", "Text+Image"};
  for (std::size_t m = 0; m < 3; ++m) {
    std::snprintf(buf, sizeof buf, "%-12s", kLabels[m]);
    out << buf;
    for (double v : macro_f1[m]) {
      std::snprintf(buf, sizeof buf, "%8.3f", v);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace personaforge::training
