#pragma once

#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "personaforge/encoders/image_encoder.hpp"
#include "personaforge/encoders/text_encoder.hpp"
#include "personaforge/encoders/vocabulary.hpp"
#include "personaforge/fusion/mbti.hpp"
#include "personaforge/tensor/checkpoint.hpp"
#include "personaforge/tensor/tensor.hpp"

namespace personaforge::fusion {

inline constexpr std::size_t kFusedDim = encoders::kViewDim * encoders::kViewDim;
inline constexpr std::size_t kHiddenDim = 128;
inline constexpr double kProbabilityEpsilon = 1e-7;

enum class ViewMode { kText, kImage, kFused };

std::string_view view_mode_name(ViewMode mode);
ViewMode parse_view_mode(std::string_view name);

class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flattened outer product: element i*|v| + j is t[i] * v[j].
tensor::Tensor direct_product(const tensor::Tensor& t, const tensor::Tensor& v);

/// fc [in -> 128] + relu, then out [128 -> 4] + sigmoid. `in` is 1024 for the
/// fused head and 32 for a single-view head.
struct FusionParams {
  tensor::Tensor fc_weight;
  tensor::Tensor fc_bias;
  tensor::Tensor out_weight;
  tensor::Tensor out_bias;

  static FusionParams zeros(std::size_t input_dim);
  /// Xavier-uniform weights, zero biases.
  static FusionParams init(std::size_t input_dim, std::mt19937_64& rng);

  std::size_t input_dim() const { return fc_weight.dim(0); }
  tensor::ParameterList parameters(const std::string& prefix = "fusion") const;
  FusionParams clone() const;
};

std::size_t head_input_dim(ViewMode mode);

/// Head forward on an already fused/selected vector -> probabilities [4].
tensor::Tensor head_probabilities(const tensor::Tensor& features, const FusionParams& params);

/// Encoder inputs for one user. Either view may be empty.
struct ProfileInputs {
  std::vector<encoders::TokenizedPost> posts;
  std::vector<encoders::TimedImage> images;
};

/// Everything needed to profile a user: vocabulary, both branches and head.
struct ProfilerModel {
  ViewMode mode = ViewMode::kFused;
  encoders::Vocabulary vocab;
  encoders::TextEncoderParams text;
  encoders::ImageEncoderParams image;
  FusionParams head;

  static ProfilerModel init(ViewMode mode, encoders::Vocabulary vocab, std::mt19937_64& rng);

  /// Only the parameters the mode actually uses.
  tensor::ParameterList parameters() const;
  ProfilerModel clone() const;

  void save(const std::filesystem::path& path, nlohmann::json meta = nlohmann::json::object()) const;
  static ProfilerModel load(const std::filesystem::path& path);
};

/// Tokenizes raw post texts with the model vocabulary.
ProfileInputs make_inputs(std::span<const std::string> texts,
                          std::vector<encoders::TimedImage> images,
                          const encoders::Vocabulary& vocab);

/// Full forward pass -> probabilities [4]. A missing view contributes a zero
/// vector. Throws InsufficientDataError when the views the mode reads are
/// all empty.
tensor::Tensor forward_probabilities(const ProfileInputs& inputs, const ProfilerModel& model);

MbtiType predict(const ProfileInputs& inputs, const ProfilerModel& model);

/// Sum over axes of binary cross-entropy, probabilities clamped to
/// [eps, 1 - eps]. labels[a] is 1 for the first pole.
tensor::Tensor bce_loss(const tensor::Tensor& probabilities, const std::array<bool, kAxisCount>& labels);

}  // namespace personaforge::fusion
