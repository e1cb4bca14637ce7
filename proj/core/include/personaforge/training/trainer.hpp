#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "personaforge/fusion/classifier.hpp"
#include "personaforge/training/corpus.hpp"
#include "personaforge/training/metrics.hpp"

namespace personaforge::training {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean per-example loss over the epoch
  double val_macro_f1 = 0.0;  // mean over the four axes
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 30;
  std::size_t patience = 5;
  std::uint64_t seed = 7;
  /// Only 64 is supported.
  int precision_bits = 64;
  std::size_t max_vocab = 4000;
  std::function<void(fusion::ViewMode, const EpochStats&)> on_epoch;

  void validate() const;
};

struct DataSplit {
  std::vector<std::size_t> train, val, test;
};

/// Seeded shuffle, then 10% test, 10% validation (rounded down) and the
/// rest for training.
DataSplit split_corpus(std::size_t n, std::uint64_t seed);

struct TrainResult {
  fusion::ProfilerModel model;  // best-validation snapshot
  std::array<double, fusion::kAxisCount> test_macro_f1{};
  double best_val_macro_f1 = 0.0;
  std::size_t best_epoch = 0;
  std::vector<EpochStats> history;
};

/// Trains one view mode with summed BCE and Adam, early stopping on mean
/// validation macro-F1. With an empty validation (or test) split the
/// training examples stand in for it.
TrainResult train(std::span<const LabeledExample> corpus, fusion::ViewMode mode,
                  const TrainConfig& config);

/// Per-axis macro-F1 of `model` on the selected examples.
std::array<double, fusion::kAxisCount> evaluate(std::span<const LabeledExample> corpus,
                                                std::span<const std::size_t> indices,
                                                const fusion::ProfilerModel& model);

/// Trains text, image and fused models and assembles the 3x4 report.
EvalReport evaluate_matrix(std::span<const LabeledExample> corpus, const TrainConfig& config);

}  // namespace personaforge::training
