#include "commands.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "navmr/baselines.hpp"
#include "navmr/checkpoint.hpp"
#include "navmr/config.hpp"
#include "navmr/error.hpp"
#include "navmr/io.hpp"
#include "navmr/metrics.hpp"
#include "navmr/sampling.hpp"
#include "navmr/synth.hpp"
#include "navmr/train.hpp"

namespace navmr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_file(const std::string& path) {
  const std::string bytes = read_file(path);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed for " + path);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Run record written next to every output. Input digests are taken when
// the manifest is created, before anything is read for processing.
class Manifest {
 public:
  Manifest(std::string command, std::optional<std::string> config) : command_(std::move(command)) {
    j_["command"] = command_;
    j_["config"] = config ? json(*config) : json(nullptr);
    j_["inputs"] = json::array();
    j_["outputs"] = json::array();
    j_["version"] = kVersion;
    j_["timestamp"] = utc_timestamp();
    if (config) add_input(*config);
  }

  void add_input(const fs::path& path) {
    if (fs::is_directory(path)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(path)) {
        if (e.is_regular_file() && e.path().filename().string().rfind("manifest", 0) != 0) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) add_input(f);
      return;
    }
    if (!fs::exists(path)) throw DataError("input '" + path.string() + "' does not exist");
    j_["inputs"].push_back({{"path", path.string()}, {"sha256", sha256_file(path.string())}});
  }

  void add_output(const fs::path& path) {
    j_["outputs"].push_back({{"path", path.filename().string()}, {"sha256", sha256_file(path.string())}});
  }

  void set(const std::string& key, json value) { j_[key] = std::move(value); }

  void write(const fs::path& path) const { write_file_atomic(path, j_.dump(2) + "\n"); }

  // Directory outputs get manifest_<command>.json inside; file outputs
  // <file>.manifest.json beside them.
  void write_for_dir(const fs::path& dir) const { write(dir / ("manifest_" + command_ + ".json")); }
  void write_for_file(const fs::path& file) const {
    fs::path p = file;
    p += ".manifest.json";
    write(p);
  }

 private:
  std::string command_;
  json j_;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir.string() + "': " + ec.message());
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) ensure_dir(file.parent_path());
}

std::vector<double> parse_thetas(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    std::string item = text.substr(start, comma - start);
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size())
      throw ConfigError("--thetas: cannot parse '" + item + "' as a number");
    if (!(value > 0.0 && value <= 1.0)) throw ConfigError("--thetas: " + item + " is outside (0, 1]");
    out.push_back(value);
    start = comma + 1;
  }
  return out;
}

std::string report_text(const EvalReport& report) { return to_json(report).dump(2) + "\n"; }

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string spec;
  std::string out;
  bool force = false;
  std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const fs::path dir = a.out;
  if (fs::exists(dir) && !fs::is_empty(dir) && !a.force)
    throw ConfigError("output directory '" + a.out + "' is not empty (use --force to overwrite)");
  Manifest manifest("synth", a.spec.empty() ? std::nullopt : std::optional<std::string>(a.spec));

  SyntheticSpec spec = a.spec.empty() ? SyntheticSpec{} : load_synthetic_spec(a.spec);
  spec.seed = resolve_seed(a.seed, spec.seed);
  spec.validate();
  const SyntheticData data = generate_synthetic_dataset(spec);

  ensure_dir(dir);
  save_videos(dir / data_files::kVideos, data.videos);
  save_query_set(dir / data_files::kQueries, data.queries);
  save_embeddings(dir / data_files::kTextEmbeddings, data.text_embeddings);
  save_embeddings(dir / data_files::kClipEmbeddings, data.clip_embeddings);
  save_sentence_pool(dir / data_files::kOodPool, data.ood_pool);
  write_file_atomic(dir / "spec.json", to_json(spec).dump(2) + "\n");
  for (const char* f : {data_files::kVideos, data_files::kQueries, data_files::kTextEmbeddings,
                        data_files::kClipEmbeddings, data_files::kOodPool, "spec.json"})
    manifest.add_output(dir / f);
  manifest.set("seed", spec.seed);
  manifest.write_for_dir(dir);
  out << "synth: " << data.videos.size() << " videos, " << data.queries.size() << " queries, "
      << data.clip_embeddings.rows() << " clip embeddings, " << data.ood_pool.size() << " pool sentences -> "
      << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct SampleArgs {
  std::string queries;
  std::string embeddings;
  std::string ood_pool;
  std::optional<std::uint64_t> seed;
  bool no_filter = false;
  std::optional<std::size_t> ood_count;
  std::string out;
};

int cmd_sample_negatives(const SampleArgs& a, std::ostream& out) {
  Manifest manifest("sample-negatives", std::nullopt);
  manifest.add_input(a.queries);
  manifest.add_input(a.embeddings);
  manifest.add_input(a.ood_pool);
  const std::uint64_t seed = resolve_seed(a.seed, 7);

  std::vector<QueryRecord> positives;
  for (auto& q : load_query_set(a.queries)) {
    if (q.is_positive()) positives.push_back(std::move(q));
  }
  if (positives.empty()) throw DataError(a.queries + ": no positive queries");
  const EmbeddingTable embeddings = load_embeddings(a.embeddings);
  const auto pool = load_sentence_pool(a.ood_pool);

  IdNegativeSample id = sample_id_negatives(positives, embeddings, seed, !a.no_filter);

  std::set<std::string> vid_set;
  for (const auto& q : positives) vid_set.insert(q.vid);
  const std::vector<std::string> vids(vid_set.begin(), vid_set.end());
  const std::size_t ood_target = a.ood_count.value_or(positives.size());
  const auto ood = sample_ood_assignments(pool, vids, ood_target, seed);
  for (const auto& q : ood) embeddings.index_of(q.embedding_key());  // every pool row must be embedded

  const fs::path dir = a.out;
  ensure_dir(dir);
  save_query_set(dir / data_files::kIdNegatives, id.negatives);
  save_query_set(dir / data_files::kOodNegatives, ood);
  write_file_atomic(dir / "id_assignment_plan.jsonl", format_assignment_plan(id.plan));
  for (const char* f : {data_files::kIdNegatives, data_files::kOodNegatives, "id_assignment_plan.jsonl"})
    manifest.add_output(dir / f);
  manifest.set("seed", seed);
  manifest.set("filter_applied", !a.no_filter);
  manifest.write_for_dir(dir);
  out << "sample-negatives: " << id.negatives.size() << " in-domain, " << ood.size() << " out-of-domain -> "
      << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  double val_fraction = 0.2;
};

int cmd_train_head(const TrainArgs& a, std::ostream& out) {
  Manifest manifest("train-head", a.config.empty() ? std::nullopt : std::optional<std::string>(a.config));
  manifest.add_input(a.data);
  RunConfig config = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  config.train.seed = resolve_seed(a.seed, config.train.seed);

  const Dataset data = load_dataset(a.data);
  const DatasetSplit split = split_dataset(data, config.train.seed, a.val_fraction);
  const ModelParams init = ModelParams::init(config.model, config.train.seed);

  const fs::path dir = a.out;
  ensure_dir(dir);
  TrainResult result;
  try {
    result = train_loop(init, config.model, split.train, &split.validation, config.train);
  } catch (const NonFiniteLoss& e) {
    const fs::path dump = dir / "failed_batch.json";
    write_file_atomic(dump, json{{"error", e.what()}, {"epoch", e.epoch()}, {"step", e.step()}, {"qids", e.qids()}}
                                    .dump(2) +
                                "\n");
    throw NumericError(std::string(e.what()) + " (batch dump: " + dump.string() + ")");
  }

  save_checkpoint(dir / "checkpoint.bin", result.params, config.model,
                  {config.train.seed, config.train.epochs});
  write_file_atomic(dir / "metrics.csv", format_epoch_log(result.epochs));
  write_file_atomic(dir / "steps.csv", format_step_log(result.steps));
  write_file_atomic(dir / "config.json", to_json(config).dump(2) + "\n");
  for (const char* f : {"checkpoint.bin", "metrics.csv", "steps.csv", "config.json"}) manifest.add_output(dir / f);
  manifest.set("seed", config.train.seed);
  manifest.set("train_videos", split.train.videos.size());
  manifest.set("validation_videos", split.validation.videos.size());
  manifest.write_for_dir(dir);

  const EpochLog& last = result.epochs.empty() ? EpochLog{} : result.epochs.back();
  out << "train-head: " << result.epochs.size() << " epochs, final l_tot " << last.l_tot << " -> " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string thetas = "0.5,0.7";
  std::string out;
  std::string split = "val";
  std::string dump_scores;
  std::string predictions;
  double val_fraction = 0.2;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto thetas = parse_thetas(a.thetas);
  Manifest manifest("eval", std::nullopt);
  manifest.add_input(a.checkpoint);
  manifest.add_input(a.data);

  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const Dataset all = load_dataset(a.data);
  if (all.text_embeddings->dim() != ck.model.d_feat)
    throw ShapeError("checkpoint expects d_feat " + std::to_string(ck.model.d_feat) + ", data has " +
                     std::to_string(all.text_embeddings->dim()));
  Dataset data;
  if (a.split == "all") {
    data = all;
  } else {
    DatasetSplit split = split_dataset(all, ck.meta.seed, a.val_fraction);
    data = a.split == "train" ? std::move(split.train) : std::move(split.validation);
  }

  const auto queries = data.all_queries();
  const auto bundles = infer_scores(ck.params, ck.model, data, queries);
  const auto preds = predictions_from_scores(bundles, data, queries, ck.model);
  const auto accept_all = predictions_from_scores(bundles, data, queries, ck.model, true);
  const EvalReport report = evaluate(preds, queries, thetas, accept_all);

  ensure_parent(a.out);
  write_file_atomic(a.out, report_text(report));
  manifest.add_output(a.out);
  if (!a.predictions.empty()) {
    ensure_parent(a.predictions);
    save_predictions(a.predictions, preds);
    manifest.add_output(a.predictions);
  }
  if (!a.dump_scores.empty()) {
    const fs::path dir = a.dump_scores;
    ensure_dir(dir);
    save_score_bundles(dir / "scores.jsonl", bundles);
    save_query_set(dir / "queries.jsonl", queries);
    save_videos(dir / "videos.jsonl", data.videos);
    for (const char* f : {"scores.jsonl", "queries.jsonl", "videos.jsonl"}) manifest.add_output(dir / f);
  }
  manifest.set("seed", ck.meta.seed);
  manifest.set("split", a.split);
  manifest.write_for_file(a.out);
  out << "eval (" << a.split << "): " << summarize(report) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ScoreDump {
  std::vector<ScoreBundle> bundles;
  std::vector<QueryRecord> queries;
  std::vector<VideoMeta> videos;
};

ScoreDump load_score_dump(const fs::path& dir) {
  for (const char* f : {"scores.jsonl", "queries.jsonl", "videos.jsonl"}) {
    if (!fs::exists(dir / f))
      throw DataError("score dump '" + dir.string() + "' lacks " + f + " (produce it with eval --dump-scores)");
  }
  return {load_score_bundles(dir / "scores.jsonl"), load_query_set(dir / "queries.jsonl"),
          load_videos(dir / "videos.jsonl")};
}

const ScoreBundle& bundle_for(const std::map<std::string, const ScoreBundle*>& index, const std::string& qid) {
  auto it = index.find(qid);
  if (it == index.end()) throw DataError("no score bundle for query " + qid);
  return *it->second;
}

struct BaselineArgs {
  std::string mode;
  std::string train;
  std::string test;
  std::string out;
  std::string model_out;
  std::string thetas = "0.5,0.7";
  double percentile = 0.5;
  double svm_lambda = 1e-3;
  std::size_t svm_epochs = 200;
  std::optional<std::uint64_t> seed;
};

int cmd_baseline(const BaselineArgs& a, std::ostream& out) {
  if (a.mode != "threshold-f" && a.mode != "threshold-s" && a.mode != "svm")
    throw ConfigError("--mode must be threshold-f, threshold-s or svm");
  const auto thetas = parse_thetas(a.thetas);
  Manifest manifest("baseline", std::nullopt);
  manifest.add_input(a.train);
  manifest.add_input(a.test);
  const std::uint64_t seed = resolve_seed(a.seed, 7);

  const ScoreDump train = load_score_dump(a.train);
  const ScoreDump test = load_score_dump(a.test);
  std::map<std::string, const ScoreBundle*> train_index;
  for (const auto& b : train.bundles) train_index[b.qid] = &b;

  json model_json;
  std::vector<PredictionRecord> preds;
  if (a.mode == "svm") {
    std::vector<double> x;
    std::vector<int> y;
    for (const auto& q : train.queries) {
      x.push_back(svm_feature(bundle_for(train_index, q.qid).saliency));
      y.push_back(q.is_positive() ? 1 : -1);
    }
    const LinearSvm svm = train_svm(x, y, a.svm_lambda, a.svm_epochs, seed);
    model_json = to_json(svm);
    preds = baseline_predictions(
        test.bundles, test.queries, test.videos, [](const ScoreBundle& b) { return svm_feature(b.saliency); },
        [&svm](double s) { return svm.accepts(s); });
  } else {
    const ScoreSource source = a.mode == "threshold-f" ? ScoreSource::kIndicator : ScoreSource::kSaliency;
    std::vector<double> scores;
    for (const auto& q : train.queries) {
      if (q.is_positive()) scores.push_back(query_score(bundle_for(train_index, q.qid), source));
    }
    const ThresholdModel model = fit_threshold(scores, source, a.percentile);
    model_json = to_json(model);
    preds = baseline_predictions(
        test.bundles, test.queries, test.videos, [source](const ScoreBundle& b) { return query_score(b, source); },
        [model](double s) { return model.accepts(s); });
  }

  const EvalReport report = evaluate(preds, test.queries, thetas);
  json j = to_json(report);
  j["baseline"] = model_json;
  ensure_parent(a.out);
  write_file_atomic(a.out, j.dump(2) + "\n");
  manifest.add_output(a.out);
  if (!a.model_out.empty()) {
    ensure_parent(a.model_out);
    write_file_atomic(a.model_out, model_json.dump(2) + "\n");
    manifest.add_output(a.model_out);
  }
  manifest.set("seed", seed);
  manifest.set("mode", a.mode);
  manifest.write_for_file(a.out);
  out << "baseline " << a.mode << ": " << summarize(report) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct HistArgs {
  std::string scores;
  std::string queries;
  std::size_t bins = 20;
  std::string out;
  std::string score = "class";
  std::optional<double> low;
  std::optional<double> high;
};

int cmd_report_hist(const HistArgs& a, std::ostream& out) {
  if (a.bins < 1) throw ConfigError("--bins must be >= 1");
  if (a.score != "class" && a.score != "indicator" && a.score != "saliency")
    throw ConfigError("--score must be class, indicator or saliency");
  const fs::path queries_path = a.queries.empty() ? fs::path(a.scores).parent_path() / "queries.jsonl"
                                                  : fs::path(a.queries);
  Manifest manifest("report-hist", std::nullopt);
  manifest.add_input(a.scores);
  manifest.add_input(queries_path);

  const auto bundles = load_score_bundles(a.scores);
  std::map<std::string, bool> positive;
  for (const auto& q : load_query_set(queries_path)) positive[q.qid] = q.is_positive();

  std::vector<double> pos;
  std::vector<double> neg;
  for (const auto& b : bundles) {
    auto it = positive.find(b.qid);
    if (it == positive.end()) throw DataError("score for unknown query " + b.qid);
    const double s = a.score == "class"       ? b.class_score
                     : a.score == "indicator" ? query_score(b, ScoreSource::kIndicator)
                                              : query_score(b, ScoreSource::kSaliency);
    (it->second ? pos : neg).push_back(s);
  }
  const double low = a.low.value_or(a.score == "saliency" ? -1.0 : 0.0);
  const double high = a.high.value_or(1.0);
  if (!(high > low)) throw ConfigError("--high must exceed --low");
  const auto bins = histogram_export(pos, neg, a.bins, low, high);

  ensure_parent(a.out);
  write_file_atomic(a.out, histogram_csv(bins));
  json summary = {{"score", a.score}, {"bins", a.bins}, {"positives", pos.size()}, {"negatives", neg.size()}};
  auto extremes = [&](const char* name, const std::vector<double>& v) {
    if (v.empty()) return;
    summary[std::string(name) + "_min"] = *std::min_element(v.begin(), v.end());
    summary[std::string(name) + "_max"] = *std::max_element(v.begin(), v.end());
  };
  extremes("pos", pos);
  extremes("neg", neg);
  if (!pos.empty() && !neg.empty())
    summary["separable"] = *std::min_element(pos.begin(), pos.end()) > *std::max_element(neg.begin(), neg.end());
  fs::path summary_path = a.out;
  summary_path += ".summary.json";
  write_file_atomic(summary_path, summary.dump(2) + "\n");
  manifest.add_output(a.out);
  manifest.add_output(summary_path);
  manifest.write_for_file(a.out);
  out << "report-hist: " << pos.size() << " positive, " << neg.size() << " negative " << a.score << " scores";
  if (summary.contains("separable")) out << (summary["separable"].get<bool>() ? ", separable" : ", overlapping");
  out << " -> " << a.out << "\n";
  return 0;
}

template <class F>
int guarded(F&& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    err << "data error: " << e.what() << "\n";
    return 3;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Negative-aware moment retrieval toolkit", "navmr"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic dataset");
  s->add_option("--spec", synth.spec, "Synthetic spec (JSON)")->check(CLI::ExistingFile);
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_flag("--force", synth.force, "Overwrite a non-empty output directory");
  s->add_option("--seed", synth.seed, "Seed (overrides NAVMR_SEED and the spec)");

  SampleArgs sample;
  auto* n = app.add_subcommand("sample-negatives", "Build in-domain and out-of-domain negative queries");
  n->add_option("--queries", sample.queries, "Positive query set (JSONL)")->required()->check(CLI::ExistingFile);
  n->add_option("--embeddings", sample.embeddings, "Sentence embeddings")->required()->check(CLI::ExistingFile);
  n->add_option("--ood-pool", sample.ood_pool, "Out-of-domain sentence pool")->required()->check(CLI::ExistingFile);
  n->add_option("--seed", sample.seed, "Seed");
  n->add_flag("--no-filter", sample.no_filter, "Disable the median pseudo-similarity filter");
  n->add_option("--ood-count", sample.ood_count, "Number of out-of-domain negatives (default: #positives)");
  n->add_option("--out", sample.out, "Output directory")->required();

  TrainArgs train;
  auto* t = app.add_subcommand("train-head", "Train the model with negative queries");
  t->add_option("--data", train.data, "Data directory")->required()->check(CLI::ExistingDirectory);
  t->add_option("--config", train.config, "Run config (JSON)")->check(CLI::ExistingFile);
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--seed", train.seed, "Seed");
  t->add_option("--val-fraction", train.val_fraction, "Fraction of videos held out for validation");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  e->add_option("--data", ev.data, "Data directory")->required()->check(CLI::ExistingDirectory);
  e->add_option("--thetas", ev.thetas, "Comma-separated IoU thresholds");
  e->add_option("--out", ev.out, "Report file (JSON)")->required();
  e->add_option("--split", ev.split, "Videos to evaluate")->check(CLI::IsMember({"val", "train", "all"}));
  e->add_option("--dump-scores", ev.dump_scores, "Directory for score bundles of the split");
  e->add_option("--predictions", ev.predictions, "Prediction file (JSONL)");
  e->add_option("--val-fraction", ev.val_fraction, "Validation fraction used at training time");

  BaselineArgs base;
  auto* b = app.add_subcommand("baseline", "Run a rejection baseline on dumped scores");
  b->add_option("--mode", base.mode, "threshold-f, threshold-s or svm")->required();
  b->add_option("--train", base.train, "Score dump used for fitting")->required();
  b->add_option("--test", base.test, "Score dump used for evaluation")->required();
  b->add_option("--out", base.out, "Report file (JSON)")->required();
  b->add_option("--model-out", base.model_out, "Fitted baseline model (JSON)");
  b->add_option("--thetas", base.thetas, "Comma-separated IoU thresholds");
  b->add_option("--percentile", base.percentile, "Threshold percentile of training positives");
  b->add_option("--svm-lambda", base.svm_lambda, "SVM regularisation");
  b->add_option("--svm-epochs", base.svm_epochs, "SVM passes over the data");
  b->add_option("--seed", base.seed, "Seed");

  HistArgs hist;
  auto* h = app.add_subcommand("report-hist", "Histogram of positive and negative scores");
  h->add_option("--scores", hist.scores, "Score bundles (JSONL)")->required()->check(CLI::ExistingFile);
  h->add_option("--queries", hist.queries, "Query set giving labels (default: queries.jsonl beside --scores)");
  h->add_option("--bins", hist.bins, "Number of bins");
  h->add_option("--out", hist.out, "Histogram table (CSV)")->required();
  h->add_option("--score", hist.score, "class, indicator or saliency");
  h->add_option("--low", hist.low, "Lower edge of the first bin");
  h->add_option("--high", hist.high, "Upper edge of the last bin");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? 0 : 2;
  }

  if (*s) return guarded([&] { return cmd_synth(synth, out); }, err);
  if (*n) return guarded([&] { return cmd_sample_negatives(sample, out); }, err);
  if (*t) return guarded([&] { return cmd_train_head(train, out); }, err);
  if (*e) return guarded([&] { return cmd_eval(ev, out); }, err);
  if (*b) return guarded([&] { return cmd_baseline(base, out); }, err);
  if (*h) return guarded([&] { return cmd_report_hist(hist, out); }, err);
  return 2;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"navmr"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace navmr::cli
