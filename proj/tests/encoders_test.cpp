#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "personaforge/encoders/image_encoder.hpp"
#include "personaforge/encoders/text_encoder.hpp"
#include "personaforge/tensor/grad_check.hpp"
#include "personaforge/tensor/ops.hpp"
#include "test_support.hpp"

using namespace personaforge::encoders;
using personaforge::tensor::Shape;
using personaforge::tensor::Tensor;
using personaforge::testing::max_abs_diff;
using personaforge::testing::random_tensor;
namespace ts = personaforge::tensor;

namespace {

GruParams gru_from(std::span<const Tensor> t) {
  return {t[0], t[1], t[2], t[3], t[4], t[5], t[6], t[7], t[8]};
}

std::vector<Tensor> gru_tensors(const GruParams& p) {
  return {p.w_update, p.u_update, p.b_update, p.w_reset, p.u_reset,
          p.b_reset,  p.w_candidate, p.u_candidate, p.b_candidate};
}

Vocabulary small_vocab() {
  Vocabulary v;
  for (const char* w : {"hello", "world", "cats", "dogs", "run"}) v.add(w);
  return v;
}

}  // namespace

TEST_CASE("tokenize folds case and strips punctuation") {
  Vocabulary vocab;
  REQUIRE(vocab.add("hello") == 2);
  TokenizedPost post = tokenize("Hello, hello!", vocab);
  CHECK(post.ids == std::vector<std::size_t>{2, 2});
  CHECK(post.text == "Hello, hello!");
  const auto padded = post.padded();
  CHECK(padded.size() == kMaxPostTokens);
  CHECK(padded[2] == kPadId);

  TokenizedPost empty = tokenize("", vocab);
  CHECK(empty.ids.empty());
  CHECK(empty.padded() == std::vector<std::size_t>(kMaxPostTokens, kPadId));

  CHECK(tokenize("never seen", vocab).ids == std::vector<std::size_t>{kUnkId, kUnkId});

  std::string long_text;
  for (int i = 0; i < 100; ++i) long_text += "hello ";
  CHECK(tokenize(long_text, vocab).ids.size() == kMaxPostTokens);
}

TEST_CASE("vocabulary orders by frequency then first occurrence") {
  // Hand count: b=3 (first at 0), a=2 (at 1), c=1 (at 3), d=1 (at 6).
  const std::vector<std::string> docs{"b a b", "c a b", "d"};
  Vocabulary vocab = Vocabulary::build(docs);
  CHECK(vocab.size() == 6);
  CHECK(vocab.id_of("b") == 2);
  CHECK(vocab.id_of("a") == 3);
  CHECK(vocab.id_of("c") == 4);
  CHECK(vocab.id_of("d") == 5);
  CHECK(vocab.token(kPadId) == "<pad>");
  CHECK(vocab.token(kUnkId) == "<unk>");

  Vocabulary capped = Vocabulary::build(docs, 4);
  CHECK(capped.size() == 4);
  CHECK(capped.id_of("c") == kUnkId);

  Vocabulary again = Vocabulary::from_json(vocab.to_json());
  CHECK(again.id_of("d") == 5);
  CHECK_THROWS(Vocabulary::from_json(nlohmann::json{{"x", 0}, {"y", 1}}));
}

TEST_CASE("gru_step analytic cases") {
  std::mt19937_64 rng(4);
  GruParams zero = GruParams::zeros(kEmbeddingDim, kGruHidden);
  Tensor x = random_tensor({kEmbeddingDim}, rng);
  Tensor h = random_tensor({kGruHidden}, rng);
  Tensor next = gru_step(x, h, zero);
  for (std::size_t i = 0; i < kGruHidden; ++i) CHECK(next[i] == doctest::Approx(0.5 * h[i]));

  GruParams p = GruParams::init(kEmbeddingDim, kGruHidden, rng);
  for (double& v : p.b_update.data()) v = 50.0;
  Tensor h0 = Tensor::zeros({kGruHidden});
  Tensor candidate = ts::tanh(ts::linear(x, p.w_candidate, p.b_candidate));
  Tensor saturated = gru_step(x, h0, p);
  CHECK(max_abs_diff(saturated, candidate) < 1e-12);
}

TEST_CASE("gru_step gradient check") {
  std::mt19937_64 rng(8);
  const std::size_t in = 6, hid = 5;
  GruParams p = GruParams::init(in, hid, rng);
  std::vector<Tensor> point = gru_tensors(p);
  point.push_back(random_tensor({in}, rng));
  point.push_back(random_tensor({hid}, rng));
  Tensor weights = random_tensor({hid}, rng);
  const double err = ts::grad_check(
      [&](std::span<const Tensor> t) {
        return ts::sum(ts::mul(gru_step(t[9], t[10], gru_from(t)), weights));
      },
      point);
  CHECK(err < 1e-4);
}

TEST_CASE("composite GRU-step loss passes finite differences at full width") {
  std::mt19937_64 rng(12);
  GruParams p = GruParams::init(kEmbeddingDim, kGruHidden, rng);
  std::vector<Tensor> point = gru_tensors(p);
  point.push_back(random_tensor({kEmbeddingDim}, rng));
  point.push_back(random_tensor({kGruHidden}, rng));
  const double err = ts::grad_check(
      [](std::span<const Tensor> t) {
        Tensor h1 = gru_step(t[9], t[10], gru_from(t));
        Tensor h2 = gru_step(t[9], h1, gru_from(t));
        return ts::sum(ts::mul(h2, h2));
      },
      point);
  CHECK(err < 1e-4);
}

TEST_CASE("encode_text with zero dynamics returns relu of projection bias") {
  TextEncoderParams p = TextEncoderParams::zeros(7);
  for (std::size_t i = 0; i < kViewDim; ++i) p.proj_bias[i] = (i % 2 == 0) ? 0.25 * i : -1.0;
  TokenizedPost pad_only;
  pad_only.ids = std::vector<std::size_t>(kMaxPostTokens, kPadId);
  const TokenizedPost posts[] = {pad_only};
  Tensor out = encode_text(posts, p);
  REQUIRE(out.shape() == Shape{kViewDim});
  for (std::size_t i = 0; i < kViewDim; ++i) CHECK(out[i] == std::max(0.0, p.proj_bias[i]));
}

TEST_CASE("forward state of s equals backward state of reverse(s) with mirrored params") {
  std::mt19937_64 rng(21);
  TextEncoderParams p = TextEncoderParams::init(6, rng);
  p.backward = p.forward.clone();
  const std::vector<std::size_t> seq{2, 5, 3, 3, 4};
  const std::vector<std::size_t> rev(seq.rbegin(), seq.rend());
  const BiGruStates a = bigru_states(seq, p);
  const BiGruStates b = bigru_states(rev, p);
  CHECK(max_abs_diff(a.forward_final, b.backward_final) == 0.0);
  CHECK(max_abs_diff(a.backward_final, b.forward_final) == 0.0);
  CHECK(max_abs_diff(a.forward_final, a.backward_final) > 1e-6);
}

TEST_CASE("encode_text is invariant to post order but not token order") {
  std::mt19937_64 rng(33);
  const Vocabulary vocab = small_vocab();
  TextEncoderParams p = TextEncoderParams::init(vocab.size(), rng);
  const std::vector<TokenizedPost> posts{tokenize("hello world cats", vocab),
                                         tokenize("dogs run", vocab),
                                         tokenize("cats cats hello", vocab)};
  const std::vector<TokenizedPost> shuffled{posts[2], posts[0], posts[1]};
  Tensor a = encode_text(posts, p);
  Tensor b = encode_text(shuffled, p);
  CHECK(a.shape() == Shape{kViewDim});
  CHECK(a.all_finite());
  CHECK(max_abs_diff(a, b) < 1e-12);

  const std::vector<TokenizedPost> one{tokenize("hello world cats", vocab)};
  const std::vector<TokenizedPost> flipped{tokenize("cats world hello", vocab)};
  // Compare pre-activation BiGRU states; relu may zero both outputs.
  const BiGruStates s1 = bigru_states(one[0].ids, p);
  const BiGruStates s2 = bigru_states(flipped[0].ids, p);
  CHECK(max_abs_diff(s1.forward_final, s2.forward_final) > 1e-6);
}

TEST_CASE("encode_text gradient on a miniature encoder") {
  std::mt19937_64 rng(44);
  const Vocabulary vocab = small_vocab();
  TextEncoderParams base;
  base.embedding = Tensor::normal({vocab.size(), 4}, 0.5, rng, true);
  base.forward = GruParams::init(4, 3, rng);
  base.backward = GruParams::init(4, 3, rng);
  base.proj_weight = Tensor::uniform({6, 2}, -1.0, 1.0, rng, true);
  // Keep the projection in its linear regime so the check sees every unit.
  base.proj_bias = Tensor::full({2}, 5.0, true);
  const std::vector<TokenizedPost> posts{tokenize("hello cats run", vocab),
                                         tokenize("dogs world", vocab)};
  std::vector<Tensor> point = gru_tensors(base.forward);
  for (const Tensor& t : gru_tensors(base.backward)) point.push_back(t);
  point.push_back(base.embedding);
  point.push_back(base.proj_weight);
  point.push_back(base.proj_bias);
  const auto report = ts::grad_check_report(
      [&](std::span<const Tensor> t) {
        TextEncoderParams p;
        p.forward = gru_from(t.subspan(0, 9));
        p.backward = gru_from(t.subspan(9, 9));
        p.embedding = t[18];
        p.proj_weight = t[19];
        p.proj_bias = t[20];
        return ts::mean(encode_text(posts, p));
      },
      point);
  INFO("worst input ", report.worst_input, " index ", report.worst_index);
  CHECK(report.max_relative_error < 1e-4);
}

TEST_CASE("encode_images zero propagation and mean idempotence") {
  ImageEncoderParams zero = ImageEncoderParams::zeros();
  for (std::size_t i = 0; i < kViewDim; ++i) zero.proj_bias[i] = 0.1 * static_cast<double>(i) - 1.0;
  const TimedImage blank{Tensor::zeros({3, kImageSize, kImageSize}), 0};
  const TimedImage one[] = {blank};
  Tensor out = encode_images(one, zero);
  for (std::size_t i = 0; i < kViewDim; ++i) CHECK(out[i] == std::max(0.0, zero.proj_bias[i]));

  std::mt19937_64 rng(55);
  ImageEncoderParams p = ImageEncoderParams::init(rng);
  const TimedImage img{random_tensor({3, kImageSize, kImageSize}, rng), 5};
  const std::vector<TimedImage> once{img};
  const std::vector<TimedImage> ten(10, img);
  CHECK(max_abs_diff(encode_images(once, p), encode_images(ten, p)) <= 1e-12);
}

TEST_CASE("encode_images averages per-image features") {
  std::mt19937_64 rng(66);
  ImageEncoderParams p = ImageEncoderParams::init(rng);
  for (double& v : p.proj_bias.data()) v = 2.0;  // linear regime for the comparison
  std::vector<TimedImage> images;
  for (int i = 0; i < 3; ++i) images.push_back({random_tensor({3, 64, 64}, rng), i});

  std::vector<double> manual(kImageFeatureDim, 0.0);
  for (const auto& im : images) {
    Tensor f = image_features(im.image, p);
    for (std::size_t j = 0; j < kImageFeatureDim; ++j) manual[j] += f[j] / 3.0;
  }
  Tensor expected = ts::relu(ts::linear(Tensor({kImageFeatureDim}, manual), p.proj_weight, p.proj_bias));
  CHECK(max_abs_diff(encode_images(images, p), expected) <= 1e-12);

  std::vector<TimedImage> permuted{images[2], images[0], images[1]};
  CHECK(max_abs_diff(encode_images(images, p), encode_images(permuted, p)) <= 1e-12);
}

TEST_CASE("encode_images keeps only the ten most recent") {
  std::mt19937_64 rng(77);
  ImageEncoderParams p = ImageEncoderParams::init(rng);
  std::vector<TimedImage> images;
  for (int i = 0; i < 12; ++i) images.push_back({random_tensor({3, 64, 64}, rng), i});
  const auto recent = most_recent(images);
  REQUIRE(recent.size() == 10);
  CHECK(recent.front() == 11);
  CHECK(recent.back() == 2);

  std::vector<TimedImage> newest(images.begin() + 2, images.end());
  CHECK(max_abs_diff(encode_images(images, p), encode_images(newest, p)) <= 1e-12);

  const TimedImage bad_channels{Tensor::zeros({1, 64, 64}), 0};
  const TimedImage bad_size{Tensor::zeros({3, 32, 32}), 0};
  CHECK_THROWS_AS(encode_images(std::vector<TimedImage>{bad_channels}, p), ts::DimensionError);
  CHECK_THROWS_AS(encode_images(std::vector<TimedImage>{bad_size}, p), ts::DimensionError);
}

TEST_CASE("image branch gradients at full width") {
  std::mt19937_64 rng(88);
  ImageEncoderParams base = ImageEncoderParams::init(rng);
  for (double& v : base.proj_bias.data()) v = 3.0;
  const std::vector<TimedImage> images{{random_tensor({3, 64, 64}, rng), 0},
                                       {random_tensor({3, 64, 64}, rng), 1}};
  const std::vector<Tensor> point{base.kernels[0], base.biases[7]};
  // Small step: relu and max-pool kinks sit within 1e-5 of some activations.
  const auto report = ts::grad_check_report(
      [&](std::span<const Tensor> t) {
        ImageEncoderParams p = base;
        p.kernels[0] = t[0];
        p.biases[7] = t[1];
        return ts::mean(encode_images(images, p));
      },
      point, 1e-6);
  INFO("worst input ", report.worst_input, " index ", report.worst_index);
  CHECK(report.max_relative_error < 1e-4);
}
