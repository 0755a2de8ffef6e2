// Serial vs OpenMP timings for the parallel kernels.
//   navmr_bench [n_sentences] [repeats]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "navmr/kernels.hpp"
#include "navmr/model.hpp"
#include "navmr/rng.hpp"
#include "navmr/sampling.hpp"
#include "navmr/synth.hpp"
#include "navmr/train.hpp"

using namespace navmr;

namespace {

template <class F>
double best_ms(int repeats, F&& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void row(const char* name, double serial, double parallel, bool same) {
  std::printf("%-22s %10.2f %10.2f %8.2fx  %s\n", name, serial, parallel, serial / parallel,
              same ? "match" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 2000;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 3;

  SyntheticSpec spec;
  spec.n_videos = n / spec.queries_per_video();
  const SyntheticData data = generate_synthetic_dataset(spec);

  std::printf("threads=%d sentences=%zu\n", omp_get_max_threads(), data.text_embeddings.rows());
  std::printf("%-22s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

  SimilarityMatrix a, b;
  const double cs = best_ms(repeats, [&] { a = pairwise_cosine_serial(data.text_embeddings); });
  const double cp = best_ms(repeats, [&] { b = pairwise_cosine(data.text_embeddings); });
  row("pairwise_cosine", cs, cp, a.values == b.values);

  std::vector<std::vector<std::size_t>> groups(data.videos.size());
  for (std::size_t i = 0; i < data.queries.size(); ++i) groups[i / spec.queries_per_video()].push_back(i);
  std::vector<double> ga, gb;
  const double gs = best_ms(repeats, [&] { ga = group_max_similarity_serial(a, groups); });
  const double gp = best_ms(repeats, [&] { gb = group_max_similarity(a, groups); });
  row("group_max_similarity", gs, gp, ga == gb);

  Dataset ds;
  ds.videos = data.videos;
  ds.positives = data.queries;
  ds.text_embeddings = std::make_shared<const EmbeddingTable>(data.text_embeddings);
  ds.clip_embeddings = std::make_shared<const EmbeddingTable>(data.clip_embeddings);
  const std::vector<QueryRecord> sample(ds.positives.begin(),
                                        ds.positives.begin() + std::min<std::ptrdiff_t>(256, ds.positives.size()));
  ModelConfig model;
  const ModelParams params = ModelParams::init(model, 7);
  std::vector<ScoreBundle> sa, sb;
  const double is = best_ms(repeats, [&] { sa = infer_scores_serial(params, model, ds, sample); });
  const double ip = best_ms(repeats, [&] { sb = infer_scores(params, model, ds, sample); });
  bool same = sa.size() == sb.size();
  for (std::size_t i = 0; same && i < sa.size(); ++i) same = sa[i].class_score == sb[i].class_score;
  row("infer_scores (256 q)", is, ip, same);

  ds.id_negatives = sample_id_negatives(ds.positives, data.text_embeddings, 7).negatives;
  std::vector<std::string> vids;
  for (const auto& v : ds.videos) vids.push_back(v.vid);
  ds.ood_negatives = sample_ood_assignments(data.ood_pool, vids, ds.positives.size(), 7);
  TrainConfig config;
  const auto batches = make_batches(ds, config, 1);
  BatchGradient ba, bb;
  const double bs = best_ms(repeats, [&] { ba = batch_gradient_serial(params, model, ds, batches[0], config); });
  const double bp = best_ms(repeats, [&] { bb = batch_gradient(params, model, ds, batches[0], config); });
  row("batch_gradient (96 q)", bs, bp, ba.grad == bb.grad);
  return 0;
}
