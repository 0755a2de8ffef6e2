#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "navmr/checkpoint.hpp"
#include "navmr/error.hpp"
#include "navmr/io.hpp"
#include "navmr/model.hpp"
#include "navmr/sampling.hpp"
#include "navmr/synth.hpp"
#include "support/fixtures.hpp"

using namespace navmr;
using namespace navmr::ad;
using navmr::testing::random_tensor;

namespace fs = std::filesystem;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.d_feat = 6;
  c.d_hidden = 5;
  return c;
}

ModelParams perturbed(const ModelConfig& c, std::uint64_t seed, double spread) {
  ModelParams p = ModelParams::init(c, seed);
  Rng rng(seed + 1000);
  for (auto& t : p.tensors)
    for (double& x : t.data) x += rng.uniform(-spread, spread);
  return p;
}

ScoreBundle bundle_of(std::vector<double> f, std::vector<double> s) {
  ScoreBundle b;
  b.qid = "q";
  b.indicator = std::move(f);
  b.saliency = std::move(s);
  b.clip_spans.assign(b.indicator.size(), ClipOffsets{1.0, 1.0});
  return b;
}

// Mann-Whitney AUC by exhaustive pair counting.
double auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos)
    for (double n : neg) wins += p > n ? 1.0 : p == n ? 0.5 : 0.0;
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "navmr_test_model";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("zero parameters give neutral scores") {
  const auto c = small_config();
  const auto p = ModelParams::zeros(c);
  Rng rng(1);
  std::size_t guarded = 0;
  const auto b = run_base(p, c, random_tensor(rng, 7, 6), random_tensor(rng, 1, 6), 2.0, &guarded);
  CHECK(b.indicator.size() == 7);
  CHECK(b.saliency.size() == 7);
  CHECK(b.clip_spans.size() == 7);
  for (double f : b.indicator) CHECK(f == 0.5);
  for (double s : b.saliency) CHECK(s == 0.0);
  CHECK(guarded == 7);
  CHECK(run_na_head(b, p, c) == 0.5);
}

TEST_CASE("zero dynamics expose the output bias") {
  const auto c = small_config();
  auto p = perturbed(c, 3, 0.2);
  p[kRnnBias] = Tensor(1, c.d_hidden);
  p[kMlpB] = Tensor(1, c.d_hidden);
  p[kOutB] = Tensor::scalar(0.8);
  const auto b = bundle_of({0, 0, 0}, {0, 0, 0});
  CHECK(run_na_head(b, p, c) == doctest::Approx(1.0 / (1.0 + std::exp(-0.8))));
}

TEST_CASE("base outputs stay in range over 1000 draws") {
  const auto c = small_config();
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const auto p = perturbed(c, static_cast<std::uint64_t>(i), 1.0);
    const auto b = run_base(p, c, random_tensor(rng, 4, 6, -3, 3), random_tensor(rng, 1, 6, -3, 3), 2.0);
    for (double f : b.indicator) CHECK((f > 0.0 && f < 1.0));
    for (double s : b.saliency) CHECK((s >= -1.0 && s <= 1.0));
    for (const auto& o : b.clip_spans) CHECK((o.left >= 0.0 && o.right >= 0.0));
  }
}

TEST_CASE("feature dimension mismatch is a shape error") {
  const auto c = small_config();
  Rng rng(1);
  CHECK_THROWS_AS(run_base(ModelParams::zeros(c), c, random_tensor(rng, 3, 5), random_tensor(rng, 1, 5), 2.0),
                  ShapeError);
}

TEST_CASE("head is order sensitive") {
  const auto c = small_config();
  Rng rng(11);
  int differ = 0;
  for (int i = 0; i < 100; ++i) {
    const auto p = perturbed(c, static_cast<std::uint64_t>(i), 0.5);
    std::vector<double> f(6), s(6);
    for (auto& x : f) x = rng.uniform();
    for (auto& x : s) x = rng.uniform(-1, 1);
    auto fr = f, sr = s;
    std::reverse(fr.begin(), fr.end());
    std::reverse(sr.begin(), sr.end());
    differ += run_na_head(bundle_of(f, s), p, c) != run_na_head(bundle_of(fr, sr), p, c);
  }
  CHECK(differ >= 99);
}

TEST_CASE("concatenation feeds saliency then indicator") {
  Tape t;
  const Tensor g = head_input(t.constant(Tensor::column({1, 2})), t.constant(Tensor::column({3, 4})),
                              Combine::kConcatenation).value();
  CHECK(g == Tensor::column({3, 4, 1, 2}));
  CHECK(head_input(t.constant(Tensor::column({1, 2})), t.constant(Tensor::column({3, 4})), Combine::kSummation)
            .value() == Tensor::column({4, 6}));
}

TEST_CASE("prediction spans") {
  const VideoMeta v{"v", 6.0, 3, 2.0};
  const ModelConfig c;
  auto b = bundle_of({0.1, 0.9, 0.3}, {0, 0, 0});
  const auto acc = predict(b, 0.8, v, c);
  CHECK(acc.decision == Decision::kAccept);
  REQUIRE(acc.span);
  CHECK(*acc.span == MomentSpan{2.0, 4.0});

  const auto rej = predict(b, 0.2, v, c);
  CHECK(rej.decision == Decision::kReject);
  CHECK(!rej.span);

  auto tie = bundle_of({0.9, 0.9}, {0, 0});
  tie.clip_spans = {{5.0, 0.5}, {0.5, 0.5}};
  const auto t = predict(tie, 0.9, VideoMeta{"v", 4.0, 2, 2.0}, c);
  CHECK(*t.span == MomentSpan{0.0, 1.5});
}

TEST_CASE("flatten round trip") {
  const auto c = small_config();
  const auto p = perturbed(c, 2, 0.3);
  CHECK(ModelParams::unflatten(p.flatten(), c) == p);
  CHECK_THROWS_AS(ModelParams::unflatten(Tensor::column({1.0}), c), ShapeError);
}

TEST_CASE("checkpoint round trip and failures") {
  ModelConfig c;
  const auto p = perturbed(c, 4, 0.1);
  const fs::path path = scratch("ck.bin");
  save_checkpoint(path, p, c, {7, 12});
  const auto back = load_checkpoint(path);
  CHECK(back.params == p);
  CHECK(back.model == c);
  CHECK(back.meta.seed == 7);
  CHECK(back.meta.epoch == 12);

  ModelConfig other = c;
  other.d_hidden = 60;
  try {
    load_checkpoint(path, other);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("video_proj") != std::string::npos);
  }

  std::string bytes = read_file(path);
  write_file_atomic(path, bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
  write_file_atomic(path, "garbage");
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
}

TEST_CASE("synthetic dataset sizing and determinism") {
  SyntheticSpec spec;
  const auto a = generate_synthetic_dataset(spec);
  CHECK(a.clip_embeddings.rows() == 320);
  CHECK(a.videos.size() == 20);
  CHECK(a.queries.size() == 20 * spec.queries_per_video());
  CHECK(a.ood_pool.size() == a.queries.size());
  const auto b = generate_synthetic_dataset(spec);
  CHECK(encode_embeddings(a.clip_embeddings) == encode_embeddings(b.clip_embeddings));
  CHECK(format_query_set(a.queries) == format_query_set(b.queries));
  for (const auto& q : a.queries) CHECK_NOTHROW(q.validate());

  SyntheticSpec tiny = spec;
  tiny.n_concepts = 4;
  CHECK_THROWS_AS(tiny.validate(), ConfigError);
}

TEST_CASE("zero separation makes positives and negatives indistinguishable") {
  // Score each sentence against its own video and against a foreign one by
  // the best clip cosine; at separation 0 the AUC must sit near chance.
  auto run = [](double separation) {
    SyntheticSpec spec;
    spec.n_videos = 64;
    spec.concept_separation = separation;
    const auto d = generate_synthetic_dataset(spec);
    const auto neg = sample_id_negatives(d.queries, d.text_embeddings, 3, false).negatives;
    auto score = [&](const QueryRecord& q) {
      const auto e = d.text_embeddings.row(*d.text_embeddings.find(q.embedding_key()));
      double best = -2.0;
      for (int c = 0; c < 16; ++c) {
        const auto r = d.clip_embeddings.row(d.clip_embeddings.index_of(clip_id(q.vid, c)));
        double ab = 0, aa = 0, bb = 0;
        for (std::size_t k = 0; k < e.size(); ++k) {
          ab += double(e[k]) * r[k];
          aa += double(e[k]) * e[k];
          bb += double(r[k]) * r[k];
        }
        best = std::max(best, ab / std::sqrt(aa * bb));
      }
      return best;
    };
    std::vector<double> ps, ns;
    for (const auto& q : d.queries) ps.push_back(score(q));
    for (const auto& q : neg) ns.push_back(score(q));
    REQUIRE(ps.size() >= 2000);
    return auc(ps, ns);
  };
  CHECK(std::abs(run(0.0) - 0.5) <= 0.05);
  // Unfiltered foreign videos share the concept about a quarter of the time.
  CHECK(run(4.0) > 0.8);
}
