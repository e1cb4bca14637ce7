#include "personaforge/gan/generator.hpp"

#include <cmath>

#include "personaforge/tensor/ops.hpp"

namespace personaforge::gan {

namespace ts = tensor;
using tensor::Tensor;

namespace {

Tensor he_kernel(std::size_t c_out, std::size_t c_in, std::size_t k, std::mt19937_64& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(c_in * k * k));
  return Tensor::normal({c_out, c_in, k, k}, stddev, rng, true);
}

Tensor uniform_matrix(std::size_t in, std::size_t out, double gain, std::mt19937_64& rng) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(in + out));
  return Tensor::uniform({in, out}, -bound, bound, rng, true);
}

void append(ts::ParameterList& out, const std::string& name, const Tensor& t) {
  out.push_back({name, t});
}

std::vector<Tensor> clone_all(const std::vector<Tensor>& v) {
  std::vector<Tensor> out;
  out.reserve(v.size());
  for (const Tensor& t : v) out.push_back(t.clone());
  return out;
}

}  // namespace

GeneratorParams GeneratorParams::zeros() {
  GeneratorParams p;
  for (std::size_t i = 0; i < kMappingLayers; ++i) {
    p.mapping_weights.push_back(Tensor::zeros({kLatentDim, kLatentDim}, true));
    p.mapping_biases.push_back(Tensor::zeros({kLatentDim}, true));
  }
  p.constant = Tensor::zeros({kConstChannels, kConstSize, kConstSize}, true);
  std::size_t c_in = kConstChannels;
  for (std::size_t b = 0; b < kBlockChannels.size(); ++b) {
    const std::size_t c = kBlockChannels[b];
    SynthesisBlock block;
    block.upsample = b != 0;
    block.kernel = Tensor::zeros({c, c_in, 3, 3}, true);
    block.bias = Tensor::zeros({c}, true);
    block.noise_scale = Tensor::zeros({c}, true);
    block.style_scale_weight = Tensor::zeros({kLatentDim, c}, true);
    block.style_scale_bias = Tensor::zeros({c}, true);
    block.style_shift_weight = Tensor::zeros({kLatentDim, c}, true);
    block.style_shift_bias = Tensor::zeros({c}, true);
    p.blocks.push_back(std::move(block));
    c_in = c;
  }
  p.to_rgb_kernel = Tensor::zeros({3, c_in, 1, 1}, true);
  p.to_rgb_bias = Tensor::zeros({3}, true);
  return p;
}

GeneratorParams GeneratorParams::init(std::mt19937_64& rng) {
  GeneratorParams p = zeros();
  for (auto& w : p.mapping_weights) w = uniform_matrix(kLatentDim, kLatentDim, std::sqrt(2.0), rng);
  p.constant = Tensor::normal({kConstChannels, kConstSize, kConstSize}, 1.0, rng, true);
  std::size_t c_in = kConstChannels;
  for (auto& block : p.blocks) {
    const std::size_t c = block.bias.numel();
    block.kernel = he_kernel(c, c_in, 3, rng);
    block.noise_scale = Tensor::full({c}, 0.05, true);
    block.style_scale_weight = uniform_matrix(kLatentDim, c, 0.1, rng);
    block.style_shift_weight = uniform_matrix(kLatentDim, c, 0.1, rng);
    c_in = c;
  }
  p.to_rgb_kernel = he_kernel(3, c_in, 1, rng);
  return p;
}

ts::ParameterList GeneratorParams::parameters(const std::string& prefix) const {
  ts::ParameterList out;
  for (std::size_t i = 0; i < mapping_weights.size(); ++i) {
    append(out, prefix + ".mapping" + std::to_string(i) + ".weight", mapping_weights[i]);
    append(out, prefix + ".mapping" + std::to_string(i) + ".bias", mapping_biases[i]);
  }
  append(out, prefix + ".constant", constant);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string p = prefix + ".block" + std::to_string(b);
    append(out, p + ".kernel", blocks[b].kernel);
    append(out, p + ".bias", blocks[b].bias);
    append(out, p + ".noise_scale", blocks[b].noise_scale);
    append(out, p + ".style_scale_weight", blocks[b].style_scale_weight);
    append(out, p + ".style_scale_bias", blocks[b].style_scale_bias);
    append(out, p + ".style_shift_weight", blocks[b].style_shift_weight);
    append(out, p + ".style_shift_bias", blocks[b].style_shift_bias);
  }
  append(out, prefix + ".to_rgb_kernel", to_rgb_kernel);
  append(out, prefix + ".to_rgb_bias", to_rgb_bias);
  return out;
}

GeneratorParams GeneratorParams::clone() const {
  GeneratorParams p;
  p.mapping_weights = clone_all(mapping_weights);
  p.mapping_biases = clone_all(mapping_biases);
  p.constant = constant.clone();
  for (const auto& b : blocks) {
    p.blocks.push_back({b.upsample, b.kernel.clone(), b.bias.clone(), b.noise_scale.clone(),
                        b.style_scale_weight.clone(), b.style_scale_bias.clone(),
                        b.style_shift_weight.clone(), b.style_shift_bias.clone()});
  }
  p.to_rgb_kernel = to_rgb_kernel.clone();
  p.to_rgb_bias = to_rgb_bias.clone();
  return p;
}

Tensor map_latent(const Tensor& z, const GeneratorParams& params) {
  if (z.numel() != kLatentDim) {
    throw ts::DimensionError("map_latent: expected [64] latent, got " + ts::shape_string(z.shape()));
  }
  Tensor h = z;
  for (std::size_t i = 0; i < params.mapping_weights.size(); ++i) {
    h = ts::relu(ts::linear(h, params.mapping_weights[i], params.mapping_biases[i]));
  }
  return h;
}

SynthesisTrace synthesize_trace(const Tensor& w, const GeneratorParams& params,
                                std::uint64_t noise_seed) {
  if (w.numel() != kLatentDim) {
    throw ts::DimensionError("synthesize: expected [64] style, got " + ts::shape_string(w.shape()));
  }
  std::mt19937_64 rng(noise_seed);
  SynthesisTrace trace;
  Tensor x = params.constant;
  for (const SynthesisBlock& block : params.blocks) {
    if (block.upsample) x = ts::upsample2x(x);
    x = ts::conv2d(x, block.kernel, block.bias, 1, 1);
    const std::size_t c = x.dim(0), h = x.dim(1), wd = x.dim(2);
    // One noise plane per block, shared by all channels.
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> plane(h * wd);
    for (double& v : plane) v = normal(rng);
    std::vector<double> repeated(c * h * wd);
    for (std::size_t ch = 0; ch < c; ++ch) std::copy(plane.begin(), plane.end(), repeated.begin() + static_cast<std::ptrdiff_t>(ch * h * wd));
    const Tensor noise({c, h, wd}, std::move(repeated));
    x = ts::add(x, ts::channel_affine(noise, block.noise_scale, Tensor::zeros({c})));
    x = ts::leaky_relu(x, kLeakySlope);
    x = ts::instance_norm(x);
    const Tensor scale =
        ts::affine(ts::linear(w, block.style_scale_weight, block.style_scale_bias), 1.0, 1.0);
    const Tensor shift = ts::linear(w, block.style_shift_weight, block.style_shift_bias);
    x = ts::channel_affine(x, scale, shift);
    trace.block_outputs.push_back(x);
  }
  trace.image = ts::tanh(ts::conv2d(x, params.to_rgb_kernel, params.to_rgb_bias, 1, 0));
  return trace;
}

Tensor synthesize(const Tensor& w, const GeneratorParams& params, std::uint64_t noise_seed) {
  return synthesize_trace(w, params, noise_seed).image;
}

Tensor latent_for(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  return Tensor::normal({kLatentDim}, 1.0, rng);
}

DiscriminatorParams DiscriminatorParams::init(std::mt19937_64& rng) {
  DiscriminatorParams p;
  p.from_rgb_kernel = he_kernel(16, 3, 1, rng);
  p.from_rgb_bias = Tensor::zeros({16}, true);
  const std::size_t channels[] = {16, 32, 64, 64};
  for (std::size_t i = 0; i < 3; ++i) {
    p.kernels.push_back(he_kernel(channels[i + 1], channels[i], 3, rng));
    p.biases.push_back(Tensor::zeros({channels[i + 1]}, true));
  }
  p.out_weight = uniform_matrix(64 * 4 * 4, 1, 1.0, rng);
  p.out_bias = Tensor::zeros({1}, true);
  return p;
}

ts::ParameterList DiscriminatorParams::parameters(const std::string& prefix) const {
  ts::ParameterList out;
  append(out, prefix + ".from_rgb_kernel", from_rgb_kernel);
  append(out, prefix + ".from_rgb_bias", from_rgb_bias);
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    append(out, prefix + ".conv" + std::to_string(i) + ".kernel", kernels[i]);
    append(out, prefix + ".conv" + std::to_string(i) + ".bias", biases[i]);
  }
  append(out, prefix + ".out_weight", out_weight);
  append(out, prefix + ".out_bias", out_bias);
  return out;
}

DiscriminatorParams DiscriminatorParams::clone() const {
  return {from_rgb_kernel.clone(), from_rgb_bias.clone(), clone_all(kernels), clone_all(biases),
          out_weight.clone(), out_bias.clone()};
}

Tensor discriminate(const Tensor& image, const DiscriminatorParams& params) {
  if (image.shape() != ts::Shape{3, kOutputSize, kOutputSize}) {
    throw ts::DimensionError("discriminate: expected [3,32,32], got " +
                             ts::shape_string(image.shape()));
  }
  Tensor x = ts::leaky_relu(ts::conv2d(image, params.from_rgb_kernel, params.from_rgb_bias, 1, 0),
                            kLeakySlope);
  for (std::size_t i = 0; i < params.kernels.size(); ++i) {
    x = ts::leaky_relu(ts::conv2d(x, params.kernels[i], params.biases[i], 1, 1), kLeakySlope);
    x = ts::pool(x, ts::PoolMode::kAvg, 2, 2);
  }
  return ts::linear(ts::reshape(x, {x.numel()}), params.out_weight, params.out_bias);
}

StyleEncoder StyleEncoder::init(std::mt19937_64& rng) {
  StyleEncoder e;
  e.trunk = encoders::ImageEncoderParams::init(rng);
  e.weight = uniform_matrix(encoders::kImageFeatureDim, kLatentDim, 1.0, rng);
  e.bias = Tensor::zeros({kLatentDim}, true);
  return e;
}

ts::ParameterList StyleEncoder::parameters(const std::string& prefix) const {
  ts::ParameterList out = trunk.trunk_parameters(prefix + ".trunk");
  append(out, prefix + ".weight", weight);
  append(out, prefix + ".bias", bias);
  return out;
}

StyleEncoder StyleEncoder::clone() const { return {trunk.clone(), weight.clone(), bias.clone()}; }

Tensor style_features(const Tensor& image64, const StyleEncoder& encoder) {
  ts::NoGradGuard no_grad;
  return encoders::image_features(image64, encoder.trunk);
}

Tensor style_from_features(const Tensor& features, const StyleEncoder& encoder) {
  return ts::linear(features, encoder.weight, encoder.bias);
}

Tensor style_of(const Tensor& image64, const StyleEncoder& encoder) {
  return style_from_features(style_features(image64, encoder), encoder);
}

GanModel GanModel::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GanModel m;
  m.generator = GeneratorParams::init(rng);
  m.discriminator = DiscriminatorParams::init(rng);
  m.style = StyleEncoder::init(rng);
  return m;
}

ts::ParameterList GanModel::parameters() const {
  ts::ParameterList out = generator.parameters();
  for (auto& p : discriminator.parameters()) out.push_back(std::move(p));
  for (auto& p : style.parameters()) out.push_back(std::move(p));
  return out;
}

GanModel GanModel::clone() const {
  return {generator.clone(), discriminator.clone(), style.clone()};
}

void GanModel::save(const std::filesystem::path& path, nlohmann::json meta) const {
  meta["kind"] = "generator";
  ts::save_checkpoint(path, parameters(), meta);
}

GanModel GanModel::load(const std::filesystem::path& path, nlohmann::json* meta) {
  const ts::Checkpoint ckpt = ts::load_checkpoint(path);
  if (ckpt.meta.value("kind", "") != "generator") {
    throw ts::CheckpointError(path.string() + ": not a generator checkpoint");
  }
  GanModel m = GanModel::init(0);
  ts::restore_parameters(ckpt, m.parameters());
  if (meta) *meta = ckpt.meta;
  return m;
}

}  // namespace personaforge::gan
