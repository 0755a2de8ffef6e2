// End-to-end acceptance run. Prints one PASS/FAIL line per criterion.
//
// usage: navmr_acceptance <work dir> [--expect-fail N]...
// Criteria named with --expect-fail are still run and reported; their
// failure alone does not fail the process.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "commands.hpp"
#include "navmr/io.hpp"
#include "navmr/losses.hpp"
#include "navmr/metrics.hpp"
#include "navmr/rng.hpp"
#include "navmr/sampling.hpp"
#include "navmr/synth.hpp"
#include "support/fixtures.hpp"

using namespace navmr;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------- gradients

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  using namespace ad;
  using navmr::testing::random_tensor;
  std::map<std::string, std::size_t> failures;
  std::map<std::string, std::size_t> runs;
  auto check = [&](const std::string& name, const ScalarGraph& f, const Tensor& x) {
    ++runs[name];
    if (!grad_check(f, x, 1e-4, 1e-4).passed) ++failures[name];
  };
  Rng rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    Tensor y(9, 1);
    for (double& v : y.data) v = rng.below(2) ? 1.0 : 0.0;
    check("classification", [](Tape&, Var x) { return classification_loss(sigmoid(x), 1, 1.0); },
          random_tensor(rng, 1, 1, -3, 3));
    check("classification", [](Tape&, Var x) { return classification_loss(sigmoid(x), 0, 1.0); },
          random_tensor(rng, 1, 1, -3, 3));
    check("foreground", [&](Tape&, Var x) { return foreground_loss(sigmoid(x), y, 1.0); },
          random_tensor(rng, 9, 1, -3, 3));
    BoundaryTargets tg{random_tensor(rng, 9, 2, 0, 5), Tensor(9, 2), 0};
    for (std::size_t c = 0; c < 9; ++c) {
      if (y.data[c] == 0.0) continue;
      tg.mask(c, 0) = tg.mask(c, 1) = 1.0;
      ++tg.n_clips;
    }
    check("boundary", [&](Tape&, Var x) { return boundary_loss(scale(softplus(x), 2.0), tg, 1.0); },
          random_tensor(rng, 9, 2, -2, 2));
    check("saliency+", [&](Tape&, Var x) { return saliency_loss_positive(tanh(x), y, 1.0); },
          random_tensor(rng, 9, 1));
    const Tensor q = random_tensor(rng, 1, 6);
    check("saliency-cos", [&](Tape& t, Var x) { return saliency_loss_negative_cosine(x, t.constant(q), 1.0); },
          random_tensor(rng, 9, 6));
    check("saliency-log", [](Tape&, Var x) { return saliency_loss_negative_log(tanh(x), 1.0); },
          random_tensor(rng, 9, 1));
    const auto inst = navmr::testing::random_loss_instance(500 + static_cast<std::uint64_t>(trial));
    check("total", [&](Tape& t, Var flat) { return navmr::testing::instance_total_loss(t, flat, inst); },
          inst.params.flatten());
  }
  const double secs = seconds_since(t0);
  std::size_t failed = 0;
  std::size_t min_runs = 1u << 30;
  for (const auto& [name, n] : runs) min_runs = std::min(min_runs, n);
  for (const auto& [name, n] : failures) failed += n;
  std::ostringstream d;
  d << runs.size() << " losses x >=" << min_runs << " instances, " << failed << " failed checks, "
    << fmt("%.1fs", secs);
  return {failed == 0 && min_runs >= 20 && secs < 60.0, d.str()};
}

// ------------------------------------------------------------------ metrics

// Spans on a half-second grid; IoU by counting covered cells.
MomentSpan grid_span(Rng& rng) {
  const int a = static_cast<int>(rng.below(40));
  const int len = 1 + static_cast<int>(rng.below(20));
  return {0.5 * a, 0.5 * (a + len)};
}

double cell_iou(const MomentSpan& x, const MomentSpan& y) {
  long inter = 0;
  long uni = 0;
  for (int c = 0; c < 200; ++c) {
    const double lo = 0.5 * c;
    const bool in_x = lo >= x.start && lo + 0.5 <= x.end;
    const bool in_y = lo >= y.start && lo + 0.5 <= y.end;
    inter += in_x && in_y;
    uni += in_x || in_y;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// k-th smallest by counting, without sorting.
double kth_smallest(const std::vector<double>& v, std::size_t k) {
  for (double x : v) {
    std::size_t less = 0, equal = 0;
    for (double y : v) {
      less += y < x;
      equal += y == x;
    }
    if (less <= k && k < less + equal) return x;
  }
  return std::nan("");
}

Outcome metric_oracles() {
  const auto t0 = Clock::now();
  Rng rng(77);
  std::size_t mismatches = 0;
  const int n_instances = 1000;
  for (int inst = 0; inst < n_instances; ++inst) {
    const MomentSpan a = grid_span(rng), b = grid_span(rng);
    if (std::abs(temporal_iou(a, b) - cell_iou(a, b)) > 1e-9) ++mismatches;

    std::vector<QueryRecord> qs;
    std::vector<PredictionRecord> ps;
    const std::size_t n = 1 + rng.below(12);
    for (std::size_t i = 0; i < n; ++i) {
      QueryRecord q;
      q.qid = "q" + std::to_string(i);
      q.vid = "v";
      const auto kind = rng.below(3);
      if (kind == 0) {
        q.spans = {grid_span(rng)};
        if (rng.below(3) == 0) q.spans.push_back(grid_span(rng));
      } else {
        q.label = Label::kNegative;
        q.domain = kind == 1 ? Domain::kInDomain : Domain::kOutOfDomain;
      }
      qs.push_back(q);
      PredictionRecord p;
      p.qid = q.qid;
      if (rng.below(2)) {
        p.decision = Decision::kAccept;
        p.span = grid_span(rng);
      }
      ps.push_back(p);
    }
    std::reverse(ps.begin(), ps.end());  // lookup must go by qid, not position

    for (double theta : {0.3, 0.5, 0.7}) {
      std::size_t hits = 0, positives = 0;
      for (const auto& q : qs) {
        if (!q.is_positive()) continue;
        ++positives;
        for (const auto& p : ps) {
          if (p.qid != q.qid || p.decision != Decision::kAccept) continue;
          double best = 0.0;
          for (const auto& g : q.spans) best = std::max(best, cell_iou(*p.span, g));
          hits += best >= theta;
        }
      }
      if (positives == 0) continue;
      const double r = recall_at_1(ps, qs, theta);
      const auto counted = static_cast<std::size_t>(std::llround(r * static_cast<double>(positives) / 100.0));
      if (counted != hits || std::abs(r - 100.0 * static_cast<double>(hits) / static_cast<double>(positives)) > 1e-9)
        ++mismatches;
    }
    for (Domain d : {Domain::kInDomain, Domain::kOutOfDomain}) {
      std::size_t rejected = 0, total = 0;
      for (const auto& q : qs) {
        if (q.is_positive() || q.domain != d) continue;
        ++total;
        for (const auto& p : ps) rejected += p.qid == q.qid && p.decision == Decision::kReject;
      }
      if (total == 0) continue;
      const double ra = rejection_accuracy(ps, qs, d);
      const auto counted = static_cast<std::size_t>(std::llround(ra * static_cast<double>(total) / 100.0));
      if (counted != rejected) ++mismatches;
    }

    std::vector<double> values(1 + rng.below(15));
    for (double& v : values) v = rng.below(4) == 0 ? std::floor(rng.uniform(0, 5)) : rng.uniform(-10, 10);
    const double pct = rng.below(5) == 0 ? static_cast<double>(rng.below(2) * 100) : rng.uniform(0, 100);
    const double rank = pct / 100.0 * static_cast<double>(values.size() - 1);
    const double lo = kth_smallest(values, static_cast<std::size_t>(std::floor(rank)));
    const double hi = kth_smallest(values, static_cast<std::size_t>(std::ceil(rank)));
    const double expect = lo + (rank - std::floor(rank)) * (hi - lo);
    if (std::abs(percentile(values, pct) - expect) > 1e-9) ++mismatches;
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << n_instances << " instances, " << mismatches << " mismatches, " << fmt("%.1fs", secs);
  return {mismatches == 0 && secs < 60.0, d.str()};
}

// ------------------------------------------------------------------ sampler

Outcome sampler_soundness() {
  const auto t0 = Clock::now();
  SyntheticSpec spec;
  spec.n_videos = 50;
  const SyntheticData data = generate_synthetic_dataset(spec);
  const auto& qs = data.queries;
  const EmbeddingTable& emb = data.text_embeddings;

  // Independent pseudo-similarities and medians in long double.
  std::vector<std::string> vids;
  for (const auto& v : data.videos) vids.push_back(v.vid);
  const std::size_t nq = qs.size(), nv = vids.size();
  std::map<std::string, std::size_t> vid_index;
  for (std::size_t v = 0; v < nv; ++v) vid_index[vids[v]] = v;
  std::vector<std::vector<long double>> unit(nq);
  for (std::size_t i = 0; i < nq; ++i) {
    const auto r = emb.row(*emb.find(qs[i].qid));
    long double norm = 0;
    for (float x : r) norm += (long double)x * x;
    norm = std::sqrt(norm);
    for (float x : r) unit[i].push_back(x / norm);
  }
  std::vector<double> pseudo(nq * nv, -2.0);
  for (std::size_t i = 0; i < nq; ++i)
    for (std::size_t j = 0; j < nq; ++j) {
      long double s = 0;
      for (std::size_t k = 0; k < unit[i].size(); ++k) s += unit[i][k] * unit[j][k];
      double& slot = pseudo[i * nv + vid_index[qs[j].vid]];
      slot = std::max(slot, static_cast<double>(s));
    }
  std::map<std::string, std::size_t> qrow;
  std::vector<double> median(nq);
  for (std::size_t i = 0; i < nq; ++i) {
    qrow[qs[i].qid] = i;
    std::vector<double> others;
    for (std::size_t v = 0; v < nv; ++v)
      if (vids[v] != qs[i].vid) others.push_back(pseudo[i * nv + v]);
    std::sort(others.begin(), others.end());
    const std::size_t m = others.size();
    median[i] = m % 2 ? others[m / 2] : 0.5 * (others[m / 2 - 1] + others[m / 2]);
  }

  std::size_t self = 0, above = 0, size_mismatch = 0, checked = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto s = sample_id_negatives(qs, emb, seed);
    size_mismatch += s.negatives.size() != nq;
    for (const auto& e : s.plan.entries) {
      const auto& src = qs[qrow.at(e.qid.substr(0, e.qid.size() - 6))];  // strip "_idneg"
      ++checked;
      self += e.assigned_vid == src.vid;
      const std::size_t i = qrow.at(src.qid);
      above += pseudo[i * nv + vid_index.at(e.assigned_vid)] > median[i] + 1e-9;
    }
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "100 seeds x " << nq << " positives on " << nv << " videos: " << self << " self-assignments, " << above
    << " above median, " << size_mismatch << " size mismatches (" << checked << " checked), " << fmt("%.1fs", secs);
  return {self == 0 && above == 0 && size_mismatch == 0 && checked == 100 * nq && secs < 60.0, d.str()};
}

// ------------------------------------------------------------- pipeline

struct Cli {
  int operator()(const std::vector<std::string>& args) const {
    std::ostringstream out, err;
    const int code = cli::run_cli(args, out, err);
    if (code != 0) std::cerr << "  command failed (" << code << "): " << args[0] << "\n" << err.str();
    return code;
  }
};

json read_json(const fs::path& p) { return json::parse(read_file(p)); }

// synth -> sample-negatives -> train-head -> eval (val, plus a train dump).
bool pipeline(const fs::path& dir, const fs::path& config) {
  const Cli run;
  const fs::path data = dir / "data";
  return run({"synth", "--out", data.string(), "--seed", "7", "--force"}) == 0 &&
         run({"sample-negatives", "--queries", (data / "queries.jsonl").string(), "--embeddings",
              (data / "text_embeddings.bin").string(), "--ood-pool", (data / "ood_pool.txt").string(), "--seed", "7",
              "--out", data.string()}) == 0 &&
         run({"train-head", "--data", data.string(), "--config", config.string(), "--seed", "7", "--out",
              (dir / "run").string()}) == 0 &&
         run({"eval", "--checkpoint", (dir / "run" / "checkpoint.bin").string(), "--data", data.string(), "--out",
              (dir / "eval_val.json").string(), "--dump-scores", (dir / "dump_val").string()}) == 0 &&
         run({"eval", "--checkpoint", (dir / "run" / "checkpoint.bin").string(), "--data", data.string(), "--out",
              (dir / "eval_train.json").string(), "--split", "train", "--dump-scores", (dir / "dump_train").string()}) ==
             0;
}

double ra(const json& report, const char* domain) { return report["rejection_accuracy"][domain].get<double>(); }
double r1(const json& report, const char* key) { return report[key]["0.5"].get<double>(); }

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: navmr_acceptance <work dir> [--expect-fail N]...\n";
    return 2;
  }
  const fs::path work = argv[1];
  std::set<int> expected_failures;
  for (int i = 2; i + 1 < argc; i += 2) {
    if (std::string(argv[i]) == "--expect-fail") expected_failures.insert(std::stoi(argv[i + 1]));
  }
  fs::remove_all(work);
  fs::create_directories(work);

  std::map<int, Outcome> results;
  results[1] = gradient_suite();
  results[2] = metric_oracles();
  results[3] = sampler_soundness();

  // Default synthetic spec and training defaults, with the learning rate
  // and epoch budget below.
  const fs::path config = work / "config.json";
  write_file_atomic(config, R"({"train": {"epochs": 50, "learning_rate": 0.003}})" "\n");
  const auto t0 = Clock::now();
  const bool first = pipeline(work / "a", config);
  const double secs = seconds_since(t0);

  if (!first) {
    for (int c = 4; c <= 7; ++c) results[c] = {false, "pipeline did not complete"};
  } else {
    const fs::path a = work / "a";
    const json val = read_json(a / "eval_val.json");
    {
      const double gap = r1(val, "r1_no_rejection") - r1(val, "r1");
      std::ostringstream d;
      d << "validation RA-ID " << fmt("%.2f", ra(val, "in_domain")) << ", RA-OOD " << fmt("%.2f", ra(val, "out_of_domain"))
        << ", R1@0.5 " << fmt("%.2f", r1(val, "r1")) << " vs " << fmt("%.2f", r1(val, "r1_no_rejection"))
        << " without rejection (gap " << fmt("%.2f", gap) << "), " << fmt("%.1fs", secs);
      results[4] = {ra(val, "out_of_domain") == 100.0 && ra(val, "in_domain") >= 95.0 && gap <= 5.0 && secs < 300.0,
                    d.str()};
    }
    {
      const Cli run;
      const bool ok =
          run({"baseline", "--mode", "threshold-f", "--train", (a / "dump_train").string(), "--test",
               (a / "dump_val").string(), "--out", (a / "baseline_f.json").string()}) == 0 &&
          run({"baseline", "--mode", "svm", "--train", (a / "dump_train").string(), "--test",
               (a / "dump_train").string(), "--out", (a / "baseline_svm_train.json").string()}) == 0;
      if (!ok) {
        results[5] = {false, "baseline command failed"};
      } else {
        const json thr = read_json(a / "baseline_f.json");
        const json svm = read_json(a / "baseline_svm_train.json");
        const bool svm_perfect = ra(svm, "in_domain") == 100.0 && ra(svm, "out_of_domain") == 100.0 &&
                                 svm["counts"]["false_negatives"].get<int>() == 0;
        const bool thr_low = ra(thr, "in_domain") <= 5.0 && ra(thr, "out_of_domain") <= 5.0;
        const bool head_high = ra(val, "in_domain") >= 95.0 && ra(val, "out_of_domain") >= 95.0;
        std::ostringstream d;
        d << "threshold-f RA-ID " << fmt("%.2f", ra(thr, "in_domain")) << " / RA-OOD "
          << fmt("%.2f", ra(thr, "out_of_domain")) << " (needs <= 5), head " << fmt("%.2f", ra(val, "in_domain"))
          << " / " << fmt("%.2f", ra(val, "out_of_domain")) << ", svm training accuracy "
          << (svm_perfect ? "100%" : "below 100%");
        results[5] = {thr_low && head_high && svm_perfect, d.str()};
      }
    }
    {
      const bool second = pipeline(work / "b", config);
      const fs::path b = work / "b";
      bool same = second;
      std::string differs;
      for (const char* f : {"run/checkpoint.bin", "run/metrics.csv", "eval_val.json", "eval_train.json",
                            "dump_val/scores.jsonl"}) {
        if (!second) break;
        if (read_file(a / f) != read_file(b / f)) {
          same = false;
          differs += std::string(" ") + f;
        }
      }
      results[6] = {same, !second ? "second run failed" : same ? "checkpoints, logs and reports byte-identical"
                                                                 : "differ:" + differs};
    }
    {
      const Cli run;
      const bool ok = run({"report-hist", "--scores", (a / "dump_train" / "scores.jsonl").string(), "--out",
                           (a / "hist_train.csv").string()}) == 0;
      if (!ok) {
        results[7] = {false, "report-hist failed"};
      } else {
        const json s = read_json(a / "hist_train.csv.summary.json");
        std::ostringstream d;
        d << "training min positive " << fmt("%.4f", s["pos_min"].get<double>()) << " vs max negative "
          << fmt("%.4f", s["neg_max"].get<double>());
        results[7] = {s["separable"].get<bool>(), d.str()};
      }
    }
  }

  const char* names[] = {"", "gradient suite", "metric oracles", "sampler soundness", "end-to-end separable run",
                         "baseline contrast", "determinism", "separability histogram"};
  bool ok = true;
  for (const auto& [c, r] : results) {
    std::cout << (r.pass ? "PASS" : "FAIL") << " " << c << " " << names[c] << ": " << r.detail;
    if (!r.pass && expected_failures.contains(c)) std::cout << " [known shortfall]";
    std::cout << "\n";
    ok = ok && (r.pass || expected_failures.contains(c));
  }
  return ok ? 0 : 1;
}
