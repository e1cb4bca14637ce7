#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "personaforge/encoders/vocabulary.hpp"
#include "personaforge/training/corpus.hpp"
#include "personaforge/training/metrics.hpp"
#include "personaforge/training/trainer.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace personaforge::training;
using personaforge::fusion::kAxisCount;
using personaforge::fusion::ViewMode;
using personaforge::testing::oracles::oracle_macro_f1;

namespace {

std::vector<bool> parse_bits(const std::string& poles, char first) {
  std::vector<bool> out;
  for (char c : poles) out.push_back(c == first);
  return out;
}

double f1_of(const std::vector<bool>& p, const std::vector<bool>& t) {
  const std::unique_ptr<bool[]> pb(new bool[p.size()]), tb(new bool[t.size()]);
  std::copy(p.begin(), p.end(), pb.get());
  std::copy(t.begin(), t.end(), tb.get());
  return macro_f1(std::span<const bool>(pb.get(), p.size()), std::span<const bool>(tb.get(), t.size()));
}

std::string corpus_bytes(const std::vector<LabeledExample>& corpus) {
  personaforge::testing::TempDir dir("corpus");
  write_labeled_corpus(dir.path(), corpus);
  std::ostringstream all;
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir.path())) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    all << std::filesystem::relative(f, dir.path()).string() << '\n' << in.rdbuf();
  }
  return all.str();
}

TrainConfig quick_config() {
  TrainConfig c;
  c.max_epochs = 4;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("macro_f1 reference values") {
  const auto e = parse_bits("EEII", 'E');
  CHECK(f1_of(e, e) == 1.0);
  CHECK(f1_of(parse_bits("EEEE", 'E'), e) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(f1_of({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(f1_of({true}, {true, false}), std::invalid_argument);
}

TEST_CASE("macro_f1 equals the exhaustive confusion oracle exactly") {
  for (std::size_t n = 1; n <= 8; ++n) {
    const std::size_t combos = std::size_t{1} << n;
    for (std::size_t pm = 0; pm < combos; ++pm)
      for (std::size_t tm = 0; tm < combos; ++tm) {
        std::vector<bool> p(n), t(n);
        for (std::size_t i = 0; i < n; ++i) {
          p[i] = (pm >> i) & 1U;
          t[i] = (tm >> i) & 1U;
        }
        const double got = f1_of(p, t);
        const double want = oracle_macro_f1(p, t);
        if (got != want) {
          FAIL("n=" << n << " pred=" << pm << " truth=" << tm << " got " << got << " want " << want);
        }
        // Symmetric under relabeling both arguments.
        std::vector<bool> pf(n), tf(n);
        for (std::size_t i = 0; i < n; ++i) {
          pf[i] = !p[i];
          tf[i] = !t[i];
        }
        if (f1_of(pf, tf) != got) FAIL("relabeling changed macro_f1 at n=" << n);
      }
  }
}

TEST_CASE("eval report shape, json roundtrip and table") {
  EvalReport r;
  r.row(ViewMode::kFused) = {0.9, 0.8, 0.7, 0.6};
  r.row(ViewMode::kText) = {0.5, 0.5, 0.5, 0.5};
  const auto j = r.to_json();
  CHECK(j["macro_f1"].size() == 3);
  for (const auto& row : j["macro_f1"]) CHECK(row.size() == 4);
  CHECK(j["modes"][2] == "fused");
  CHECK(EvalReport::from_json(j).macro_f1 == r.macro_f1);
  const std::string table = r.table();
  CHECK(table.find("Text+Image") != std::string::npos);
  CHECK(table.find("0.600") != std::string::npos);
  const std::size_t planted[] = {0, 1, 2};
  CHECK(r.mean(ViewMode::kFused, planted) == doctest::Approx(0.8));
}

TEST_CASE("synthetic corpus is deterministic and balanced") {
  const auto a = synthesize_corpus(24, {}, 11);
  const auto b = synthesize_corpus(24, {}, 11);
  CHECK(corpus_bytes(a) == corpus_bytes(b));
  CHECK(corpus_bytes(a) != corpus_bytes(synthesize_corpus(24, {}, 12)));

  const auto big = synthesize_corpus(101, {}, 5);
  for (std::size_t axis = 0; axis < kAxisCount; ++axis) {
    const auto first = std::count_if(big.begin(), big.end(),
                                     [&](const LabeledExample& e) { return e.truth.first_pole(axis); });
    CHECK(std::abs(static_cast<double>(first) / 101.0 - 0.5) <= 0.05);
  }
  for (const auto& ex : big) {
    CHECK(ex.texts.size() >= 3);
    CHECK(ex.texts.size() <= 5);
    REQUIRE(ex.images.size() == 1);
    CHECK(ex.images[0].image.shape() == personaforge::tensor::Shape{3, 64, 64});
    for (double v : ex.images[0].image.data()) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
  CHECK_THROWS_AS(synthesize_corpus(0, {}, 1), std::invalid_argument);
}

TEST_CASE("conjunction axis is at chance for single-view probes") {
  // Probe 1 (text): majority vote of the TF lexicon words found in the posts.
  // Probe 2 (image): threshold on high-frequency energy, which is where the
  // texture motif lives. Both predict the per-view bit perfectly, so they are
  // the strongest single-view linear readouts, and both must sit at chance.
  const auto corpus = synthesize_corpus(400, {}, 21);
  std::vector<bool> truth, text_pred, image_pred, image_bit_pred;
  for (const auto& ex : corpus) {
    truth.push_back(ex.truth.first_pole(2));
    int votes = 0;
    for (const auto& post : ex.texts) {
      for (const auto& w : personaforge::encoders::split_words(post)) {
        for (const auto& t : pole_lexicon(2, true)) votes += w == t;
        for (const auto& f : pole_lexicon(2, false)) votes -= w == f;
      }
    }
    text_pred.push_back(votes > 0);
    const auto& img = ex.images[0].image;
    double energy = 0.0;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < 64; ++y)
        for (std::size_t x = 0; x + 1 < 64; ++x) {
          const double d = img[(c * 64 + y) * 64 + x] - img[(c * 64 + y) * 64 + x + 1];
          energy += d * d;
        }
    image_pred.push_back(energy > 3.0 * 64 * 63 * 0.1);
  }
  CHECK(f1_of(text_pred, truth) <= 0.6);
  CHECK(f1_of(image_pred, truth) <= 0.6);

  // The conjunction of both readouts recovers the label.
  std::vector<bool> both;
  for (std::size_t i = 0; i < truth.size(); ++i) both.push_back(text_pred[i] != image_pred[i]);
  const double conj = f1_of(both, truth);
  CHECK(std::max(conj, 1.0 - conj) >= 0.95);
}

TEST_CASE("planted text and image signals are readable from their own view") {
  const auto corpus = synthesize_corpus(200, {}, 22);
  std::vector<bool> ei_truth, ei_pred, sn_truth, sn_pred;
  for (const auto& ex : corpus) {
    ei_truth.push_back(ex.truth.first_pole(0));
    int votes = 0;
    for (const auto& post : ex.texts)
      for (const auto& w : personaforge::encoders::split_words(post)) {
        for (const auto& t : pole_lexicon(0, true)) votes += w == t;
        for (const auto& f : pole_lexicon(0, false)) votes -= w == f;
      }
    ei_pred.push_back(votes > 0);
    sn_truth.push_back(ex.truth.first_pole(1));
    const auto& img = ex.images[0].image;
    double red = 0.0, blue = 0.0;
    for (std::size_t i = 0; i < 64 * 64; ++i) {
      red += img[i];
      blue += img[2 * 64 * 64 + i];
    }
    sn_pred.push_back(red > blue);
  }
  CHECK(f1_of(ei_pred, ei_truth) == 1.0);
  CHECK(f1_of(sn_pred, sn_truth) == 1.0);
}

TEST_CASE("split is 80/10/10, disjoint and seeded") {
  const DataSplit s = split_corpus(500, 7);
  CHECK(s.train.size() == 400);
  CHECK(s.val.size() == 50);
  CHECK(s.test.size() == 50);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 500);
  CHECK(split_corpus(500, 7).test == s.test);
  CHECK(split_corpus(500, 8).test != s.test);
  CHECK(split_corpus(1, 7).train.size() == 1);
}

TEST_CASE("one-example corpus is memorized with non-increasing loss") {
  auto corpus = synthesize_corpus(1, {}, 4);
  TrainConfig c;
  c.max_epochs = 60;
  c.patience = 1000;
  c.learning_rate = 1e-3;
  for (ViewMode mode : {ViewMode::kText, ViewMode::kFused}) {
    const TrainResult r = train(corpus, mode, c);
    REQUIRE(r.history.size() == 60);
    for (std::size_t e = 1; e < r.history.size(); ++e) {
      CHECK(r.history[e].train_loss <= r.history[e - 1].train_loss + 1e-12);
    }
    CHECK(r.history.back().train_loss < 0.01);
  }
}

TEST_CASE("early stopping keeps the best validation snapshot") {
  const auto corpus = synthesize_corpus(60, {}, 9);
  TrainConfig c = quick_config();
  c.max_epochs = 12;
  c.patience = 2;
  const TrainResult r = train(corpus, ViewMode::kText, c);
  double best = -1.0;
  for (const auto& h : r.history) best = std::max(best, h.val_macro_f1);
  CHECK(r.best_val_macro_f1 == best);
  CHECK(r.history[r.best_epoch - 1].val_macro_f1 == best);
  const DataSplit split = split_corpus(corpus.size(), c.seed);
  const auto val = evaluate(corpus, split.val, r.model);
  CHECK(std::accumulate(val.begin(), val.end(), 0.0) / 4.0 == doctest::Approx(best).epsilon(1e-12));
  CHECK(r.history.size() <= 12);
  if (r.history.size() < 12) CHECK(r.history.size() - r.best_epoch == c.patience);
}

TEST_CASE("seeded training is reproducible") {
  const auto corpus = synthesize_corpus(30, {}, 10);
  const TrainConfig c = quick_config();
  const TrainResult a = train(corpus, ViewMode::kFused, c);
  const TrainResult b = train(corpus, ViewMode::kFused, c);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].val_macro_f1 == b.history[i].val_macro_f1);
  }
  CHECK(a.test_macro_f1 == b.test_macro_f1);
}

TEST_CASE("divergence surfaces as a training error with diagnostics") {
  auto corpus = synthesize_corpus(3, {}, 12);
  corpus[0].images[0].image[5] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig c = quick_config();
  try {
    train(corpus, ViewMode::kImage, c);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("diverged") != std::string::npos);
  }
  c.precision_bits = 32;
  CHECK_THROWS_AS(train(corpus, ViewMode::kText, c), std::invalid_argument);
  CHECK_THROWS_AS(train({}, ViewMode::kText, quick_config()), TrainingError);
}

TEST_CASE("evaluate_matrix always yields three modes by four axes in [0,1]") {
  const auto corpus = synthesize_corpus(20, {}, 13);
  TrainConfig c = quick_config();
  c.max_epochs = 1;
  const EvalReport r = evaluate_matrix(corpus, c);
  for (const auto& row : r.macro_f1)
    for (double v : row) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
}

TEST_CASE("labeled corpus roundtrips through the on-disk layout") {
  const auto corpus = synthesize_corpus(6, {}, 14);
  personaforge::testing::TempDir dir("labeled");
  write_labeled_corpus(dir.path(), corpus);
  const auto loaded = load_labeled_corpus(dir.path());
  REQUIRE(loaded.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(loaded[i].user_id == corpus[i].user_id);
    CHECK(loaded[i].truth.letters() == corpus[i].truth.letters());
    CHECK(loaded[i].texts.size() == corpus[i].texts.size());
    REQUIRE(loaded[i].images.size() == corpus[i].images.size());
    // 8-bit quantization of [-1,1] is within half a step.
    CHECK(personaforge::testing::max_abs_diff(loaded[i].images[0].image, corpus[i].images[0].image) <=
          1.0 / 127.5 * 0.5 + 1e-12);
  }

  std::ofstream(dir.path() / "users.jsonl", std::ios::app) << "{not json\n";
  try {
    load_labeled_corpus(dir.path());
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("users.jsonl:7") != std::string::npos);
  }
}
