#include "personaforge/training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>

#include "personaforge/tensor/optim.hpp"

namespace personaforge::training {

namespace {

using fusion::ProfileInputs;
using fusion::ProfilerModel;
using fusion::ViewMode;

std::vector<ProfileInputs> prepare(std::span<const LabeledExample> corpus,
                                   const encoders::Vocabulary& vocab) {
  std::vector<ProfileInputs> out;
  out.reserve(corpus.size());
  for (const auto& ex : corpus) out.push_back(fusion::make_inputs(ex.texts, ex.images, vocab));
  return out;
}

double mean_of(const std::array<double, fusion::kAxisCount>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::array<double, fusion::kAxisCount> score(std::span<const LabeledExample> corpus,
                                             std::span<const ProfileInputs> inputs,
                                             std::span<const std::size_t> indices,
                                             const ProfilerModel& model) {
  // vector<bool> is not contiguous, so labels live in plain arrays.
  const std::size_t n = indices.size();
  std::array<std::unique_ptr<bool[]>, fusion::kAxisCount> pred, truth;
  for (std::size_t a = 0; a < fusion::kAxisCount; ++a) {
    pred[a] = std::make_unique<bool[]>(n);
    truth[a] = std::make_unique<bool[]>(n);
  }
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = indices[k];
    const fusion::MbtiType t = fusion::predict(inputs[i], model);
    for (std::size_t a = 0; a < fusion::kAxisCount; ++a) {
      pred[a][k] = t.first_pole(a);
      truth[a][k] = corpus[i].truth.first_pole(a);
    }
  }
  std::array<double, fusion::kAxisCount> f1{};
  for (std::size_t a = 0; a < fusion::kAxisCount; ++a) {
    f1[a] = macro_f1(std::span<const bool>(pred[a].get(), n),
                     std::span<const bool>(truth[a].get(), n));
  }
  return f1;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0) || !(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) ||
      !(epsilon > 0) || batch_size == 0 || max_epochs == 0) {
    throw std::invalid_argument("train config: hyperparameters must be positive");
  }
  if (precision_bits != 64) {
    throw std::invalid_argument("train config: only 64-bit precision is supported");
  }
}

DataSplit split_corpus(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_test = n / 10, n_val = n / 10;
  DataSplit s;
  s.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test),
               order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), order.end());
  return s;
}

std::array<double, fusion::kAxisCount> evaluate(std::span<const LabeledExample> corpus,
                                                std::span<const std::size_t> indices,
                                                const ProfilerModel& model) {
  const auto inputs = prepare(corpus, model.vocab);
  return score(corpus, inputs, indices, model);
}

TrainResult train(std::span<const LabeledExample> corpus, ViewMode mode,
                  const TrainConfig& config) {
  config.validate();
  if (corpus.empty()) throw TrainingError("train: empty corpus");
  const DataSplit split = split_corpus(corpus.size(), config.seed);
  const auto& val_idx = split.val.empty() ? split.train : split.val;
  const auto& test_idx = split.test.empty() ? split.train : split.test;

  std::vector<std::string> docs;
  for (std::size_t i : split.train) {
    docs.insert(docs.end(), corpus[i].texts.begin(), corpus[i].texts.end());
  }
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  ProfilerModel model =
      ProfilerModel::init(mode, encoders::Vocabulary::build(docs, config.max_vocab), rng);
  const auto inputs = prepare(corpus, model.vocab);

  std::vector<tensor::Tensor> params;
  for (auto& p : model.parameters()) params.push_back(p.tensor);
  tensor::Adam adam(params, {config.learning_rate, config.beta1, config.beta2, config.epsilon});

  TrainResult result;
  result.model = model.clone();
  result.best_val_macro_f1 = -1.0;
  std::vector<std::size_t> order = split.train;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        tensor::Tape tape;
        const tensor::Tensor loss =
            fusion::bce_loss(fusion::forward_probabilities(inputs[i], model),
                             corpus[i].truth.labels());
        const double value = loss.item();
        if (!std::isfinite(value)) {
          std::ostringstream msg;
          msg << "training diverged: loss " << value << " at epoch " << epoch << ", example "
              << corpus[i].user_id << " (" << fusion::view_mode_name(mode) << " mode, lr "
              << config.learning_rate << ")";
          throw TrainingError(msg.str());
        }
        loss_sum += value;
        tape.backward(loss);
      }
      adam.step(1.0 / static_cast<double>(end - start));
      for (const auto& p : params) {
        if (!p.all_finite()) {
          throw TrainingError("training diverged: non-finite parameters after epoch " +
                              std::to_string(epoch) + " step " +
                              std::to_string(adam.steps_taken()));
        }
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    stats.val_macro_f1 = mean_of(score(corpus, inputs, val_idx, model));
    result.history.push_back(stats);
    if (config.on_epoch) config.on_epoch(mode, stats);

    if (stats.val_macro_f1 > result.best_val_macro_f1) {
      result.best_val_macro_f1 = stats.val_macro_f1;
      result.best_epoch = epoch;
      result.model = model.clone();
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  result.test_macro_f1 = score(corpus, inputs, test_idx, result.model);
  return result;
}

EvalReport evaluate_matrix(std::span<const LabeledExample> corpus, const TrainConfig& config) {
  EvalReport report;
  for (ViewMode mode : kReportModes) {
    report.row(mode) = train(corpus, mode, config).test_macro_f1;
  }
  return report;
}

}  // namespace personaforge::training
