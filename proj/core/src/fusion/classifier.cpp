#include "personaforge/fusion/classifier.hpp"

#include <cmath>

#include "personaforge/tensor/ops.hpp"

namespace personaforge::fusion {

namespace ts = tensor;
using tensor::Tensor;

std::string_view view_mode_name(ViewMode mode) {
  switch (mode) {
    case ViewMode::kText:
      return "text";
    case ViewMode::kImage:
      return "image";
    case ViewMode::kFused:
      return "fused";
  }
  return "fused";
}

ViewMode parse_view_mode(std::string_view name) {
  if (name == "text") return ViewMode::kText;
  if (name == "image") return ViewMode::kImage;
  if (name == "fused" || name == "text+image") return ViewMode::kFused;
  throw std::invalid_argument("unknown view mode '" + std::string(name) + "'");
}

Tensor direct_product(const Tensor& t, const Tensor& v) {
  if (t.rank() != 1 || v.rank() != 1 || t.numel() != v.numel()) {
    throw ts::DimensionError("direct_product: expected two equal-length vectors, got " +
                             ts::shape_string(t.shape()) + " and " +
                             ts::shape_string(v.shape()));
  }
  const std::size_t n = t.numel();
  return ts::reshape(ts::matmul(ts::reshape(t, {n, 1}), ts::reshape(v, {1, n})), {n * n});
}

FusionParams FusionParams::zeros(std::size_t input_dim) {
  return {Tensor::zeros({input_dim, kHiddenDim}, true), Tensor::zeros({kHiddenDim}, true),
          Tensor::zeros({kHiddenDim, kAxisCount}, true), Tensor::zeros({kAxisCount}, true)};
}

FusionParams FusionParams::init(std::size_t input_dim, std::mt19937_64& rng) {
  FusionParams p = zeros(input_dim);
  const double fc_bound = std::sqrt(6.0 / static_cast<double>(input_dim + kHiddenDim));
  const double out_bound = std::sqrt(6.0 / static_cast<double>(kHiddenDim + kAxisCount));
  p.fc_weight = Tensor::uniform({input_dim, kHiddenDim}, -fc_bound, fc_bound, rng, true);
  p.out_weight = Tensor::uniform({kHiddenDim, kAxisCount}, -out_bound, out_bound, rng, true);
  return p;
}

tensor::ParameterList FusionParams::parameters(const std::string& prefix) const {
  return {{prefix + ".fc_weight", fc_weight},
          {prefix + ".fc_bias", fc_bias},
          {prefix + ".out_weight", out_weight},
          {prefix + ".out_bias", out_bias}};
}

FusionParams FusionParams::clone() const {
  return {fc_weight.clone(), fc_bias.clone(), out_weight.clone(), out_bias.clone()};
}

std::size_t head_input_dim(ViewMode mode) {
  return mode == ViewMode::kFused ? kFusedDim : encoders::kViewDim;
}

Tensor head_probabilities(const Tensor& features, const FusionParams& params) {
  const Tensor hidden = ts::relu(ts::linear(features, params.fc_weight, params.fc_bias));
  return ts::sigmoid(ts::linear(hidden, params.out_weight, params.out_bias));
}

ProfilerModel ProfilerModel::init(ViewMode mode, encoders::Vocabulary vocab,
                                  std::mt19937_64& rng) {
  ProfilerModel m;
  m.mode = mode;
  m.text = encoders::TextEncoderParams::init(vocab.size(), rng);
  m.image = encoders::ImageEncoderParams::init(rng);
  m.head = FusionParams::init(head_input_dim(mode), rng);
  m.vocab = std::move(vocab);
  return m;
}

tensor::ParameterList ProfilerModel::parameters() const {
  tensor::ParameterList out;
  if (mode != ViewMode::kImage) {
    for (auto& p : text.parameters()) out.push_back(std::move(p));
  }
  if (mode != ViewMode::kText) {
    for (auto& p : image.parameters()) out.push_back(std::move(p));
  }
  for (auto& p : head.parameters()) out.push_back(std::move(p));
  return out;
}

ProfilerModel ProfilerModel::clone() const {
  ProfilerModel m;
  m.mode = mode;
  m.vocab = vocab;
  m.text = text.clone();
  m.image = image.clone();
  m.head = head.clone();
  return m;
}

void ProfilerModel::save(const std::filesystem::path& path, nlohmann::json meta) const {
  meta["kind"] = "profiler";
  meta["view_mode"] = std::string(view_mode_name(mode));
  meta["vocab"] = vocab.to_json();
  tensor::save_checkpoint(path, parameters(), meta);
}

ProfilerModel ProfilerModel::load(const std::filesystem::path& path) {
  const tensor::Checkpoint ckpt = tensor::load_checkpoint(path);
  if (ckpt.meta.value("kind", "") != "profiler") {
    throw tensor::CheckpointError(path.string() + ": not a profiler checkpoint");
  }
  ProfilerModel m;
  m.mode = parse_view_mode(ckpt.meta.at("view_mode").get<std::string>());
  m.vocab = encoders::Vocabulary::from_json(ckpt.meta.at("vocab"));
  m.text = encoders::TextEncoderParams::zeros(m.vocab.size());
  m.image = encoders::ImageEncoderParams::zeros();
  m.head = FusionParams::zeros(head_input_dim(m.mode));
  tensor::restore_parameters(ckpt, m.parameters());
  return m;
}

ProfileInputs make_inputs(std::span<const std::string> texts,
                          std::vector<encoders::TimedImage> images,
                          const encoders::Vocabulary& vocab) {
  ProfileInputs in;
  in.posts.reserve(texts.size());
  for (const std::string& t : texts) in.posts.push_back(encoders::tokenize(t, vocab));
  in.images = std::move(images);
  return in;
}

Tensor forward_probabilities(const ProfileInputs& inputs, const ProfilerModel& model) {
  const bool reads_text = model.mode != ViewMode::kImage;
  const bool reads_image = model.mode != ViewMode::kText;
  const bool has_text = reads_text && !inputs.posts.empty();
  const bool has_image = reads_image && !inputs.images.empty();
  if (!has_text && !has_image) {
    throw InsufficientDataError(std::string("profile has no ") +
                                (model.mode == ViewMode::kText    ? "text posts"
                                 : model.mode == ViewMode::kImage ? "images"
                                                                  : "text posts or images"));
  }
  Tensor text_vec = has_text ? encoders::encode_text(inputs.posts, model.text)
                             : Tensor::zeros({encoders::kViewDim});
  Tensor image_vec = has_image ? encoders::encode_images(inputs.images, model.image)
                               : Tensor::zeros({encoders::kViewDim});
  switch (model.mode) {
    case ViewMode::kText:
      return head_probabilities(text_vec, model.head);
    case ViewMode::kImage:
      return head_probabilities(image_vec, model.head);
    case ViewMode::kFused:
      break;
  }
  return head_probabilities(direct_product(text_vec, image_vec), model.head);
}

MbtiType predict(const ProfileInputs& inputs, const ProfilerModel& model) {
  tensor::NoGradGuard no_grad;
  const Tensor probs = forward_probabilities(inputs, model);
  MbtiType out;
  for (std::size_t a = 0; a < kAxisCount; ++a) out.probabilities[a] = probs[a];
  return out;
}

Tensor bce_loss(const Tensor& probabilities, const std::array<bool, kAxisCount>& labels) {
  if (probabilities.numel() != kAxisCount) {
    throw ts::DimensionError("bce_loss: expected 4 probabilities, got " +
                             ts::shape_string(probabilities.shape()));
  }
  const Tensor p = ts::clamp(probabilities, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  std::vector<double> y(kAxisCount);
  for (std::size_t a = 0; a < kAxisCount; ++a) y[a] = labels[a] ? 1.0 : 0.0;
  const Tensor target({kAxisCount}, y);
  const Tensor one_minus_target = ts::affine(target, -1.0, 1.0);
  const Tensor pos = ts::mul(target, ts::log(p));
  const Tensor neg = ts::mul(one_minus_target, ts::log(ts::affine(p, -1.0, 1.0)));
  return ts::scale(ts::sum(ts::add(pos, neg)), -1.0);
}

}  // namespace personaforge::fusion
