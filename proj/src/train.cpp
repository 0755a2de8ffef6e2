#include "navmr/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "navmr/io.hpp"
#include "navmr/metrics.hpp"
#include "navmr/rng.hpp"

namespace navmr {

namespace fs = std::filesystem;
using ad::Tape;
using ad::Tensor;
using ad::Var;

const VideoMeta& Dataset::video(const std::string& vid) const {
  for (const auto& v : videos) {
    if (v.vid == vid) return v;
  }
  throw DataError("unknown video '" + vid + "'");
}

std::vector<QueryRecord> Dataset::all_queries() const {
  std::vector<QueryRecord> all = positives;
  all.insert(all.end(), id_negatives.begin(), id_negatives.end());
  all.insert(all.end(), ood_negatives.begin(), ood_negatives.end());
  return all;
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("data directory '" + dir.string() + "' does not exist");
  Dataset d;
  d.videos = load_videos(dir / data_files::kVideos);
  d.positives = load_query_set(dir / data_files::kQueries);
  if (fs::exists(dir / data_files::kIdNegatives)) d.id_negatives = load_query_set(dir / data_files::kIdNegatives);
  if (fs::exists(dir / data_files::kOodNegatives))
    d.ood_negatives = load_query_set(dir / data_files::kOodNegatives);
  d.text_embeddings = std::make_shared<const EmbeddingTable>(load_embeddings(dir / data_files::kTextEmbeddings));
  d.clip_embeddings = std::make_shared<const EmbeddingTable>(load_embeddings(dir / data_files::kClipEmbeddings));

  for (const auto& q : d.positives) {
    if (!q.is_positive()) throw DataError(std::string(data_files::kQueries) + ": " + q.qid + " is not positive");
  }
  const auto all = d.all_queries();
  const DatasetReport report = validate_dataset(all, d.videos, *d.text_embeddings, d.clip_embeddings.get());
  if (!report.consistent()) {
    const auto& first = report.issues.front();
    throw ValidationError("data directory '" + dir.string() + "' is inconsistent (" +
                          std::to_string(report.issues.size()) + " issues; first: " +
                          std::string(to_string(first.kind)) + " " + first.subject + ": " + first.message + ")");
  }
  return d;
}

namespace {

std::uint64_t fnv1a(std::uint64_t seed, const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](unsigned char b) {
    h ^= b;
    h *= 1099511628211ull;
  };
  for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(seed >> (8 * i)));
  for (unsigned char c : text) mix(c);
  return h;
}

std::vector<QueryRecord> filter_by_video(const std::vector<QueryRecord>& qs, const std::set<std::string>& vids) {
  std::vector<QueryRecord> out;
  for (const auto& q : qs) {
    if (vids.count(q.vid)) out.push_back(q);
  }
  return out;
}

Dataset subset(const Dataset& data, const std::set<std::string>& vids) {
  Dataset d;
  for (const auto& v : data.videos) {
    if (vids.count(v.vid)) d.videos.push_back(v);
  }
  d.positives = filter_by_video(data.positives, vids);
  d.id_negatives = filter_by_video(data.id_negatives, vids);
  d.ood_negatives = filter_by_video(data.ood_negatives, vids);
  d.text_embeddings = data.text_embeddings;
  d.clip_embeddings = data.clip_embeddings;
  return d;
}

}  // namespace

DatasetSplit split_dataset(const Dataset& data, std::uint64_t seed, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("validation fraction must lie in [0, 1)");
  std::vector<std::pair<std::uint64_t, std::string>> ranked;
  for (const auto& v : data.videos) ranked.emplace_back(fnv1a(seed, v.vid), v.vid);
  std::sort(ranked.begin(), ranked.end());
  const auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ranked.size())));
  std::set<std::string> val;
  std::set<std::string> train;
  for (std::size_t i = 0; i < ranked.size(); ++i) (i < n_val ? val : train).insert(ranked[i].second);
  return {subset(data, train), subset(data, val)};
}

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::kSgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "sgd") return OptimizerKind::kSgd;
  if (text == "adam") return OptimizerKind::kAdam;
  throw ConfigError("train.optimizer must be 'sgd' or 'adam', got '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (batch_pos < 1) throw ConfigError("train.batch_pos must be >= 1");
  if (batch_id < 1) throw ConfigError("train.batch_id must be >= 1");
  if (batch_ood < 1) throw ConfigError("train.batch_ood must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("train.learning_rate must be a finite number >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("train.adam_beta1 must lie in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("train.adam_beta2 must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps must be > 0");
  weights.validate();
}

namespace {

// `count` items drawn from a pool reshuffled every time it runs out.
std::vector<QueryRecord> cycle(const std::vector<QueryRecord>& pool, std::size_t count, Rng& rng) {
  std::vector<QueryRecord> out;
  out.reserve(count);
  std::vector<std::size_t> order(pool.size());
  while (out.size() < count) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    for (std::size_t i = 0; i < order.size() && out.size() < count; ++i) out.push_back(pool[order[i]]);
  }
  return out;
}

std::vector<QueryRecord> ood_with_reuse(const Dataset& data, std::size_t count, Rng& rng) {
  std::vector<QueryRecord> base = data.ood_negatives;
  std::vector<std::size_t> order(base.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);

  std::vector<QueryRecord> out;
  out.reserve(count);
  std::set<std::pair<std::string, std::string>> used;
  for (std::size_t i = 0; i < order.size() && out.size() < count; ++i) {
    out.push_back(base[order[i]]);
    used.emplace(base[order[i]].embedding_key(), base[order[i]].vid);
  }

  std::size_t reuse = 0;
  std::size_t cursor = 0;
  std::size_t misses = 0;
  while (out.size() < count) {
    const QueryRecord& src = base[order[cursor % order.size()]];
    ++cursor;
    std::vector<const VideoMeta*> free;
    for (const auto& v : data.videos) {
      if (!used.count({src.embedding_key(), v.vid})) free.push_back(&v);
    }
    if (free.empty()) {
      if (++misses > order.size())
        throw DataError("out-of-domain supply exhausted: every (sentence, video) pair is already used");
      continue;
    }
    misses = 0;
    const VideoMeta& video = *free[rng.below(free.size())];
    QueryRecord q = src;
    q.qid = src.qid + "#r" + std::to_string(reuse++);
    q.vid = video.vid;
    q.emb_key = src.embedding_key();
    used.emplace(q.emb_key, q.vid);
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace

std::vector<TripleBatch> make_batches(const Dataset& data, const TrainConfig& config, std::uint64_t epoch_seed) {
  config.validate();
  if (data.positives.empty()) throw DataError("no positive queries to train on");
  if (data.id_negatives.empty()) throw DataError("no in-domain negatives to train on");
  if (data.ood_negatives.empty()) throw DataError("no out-of-domain negatives to train on");

  Rng rng(epoch_seed);
  std::vector<QueryRecord> pos = data.positives;
  rng.shuffle(pos);
  const std::size_t n_batches = pos.size() / config.batch_pos;
  const auto id = cycle(data.id_negatives, n_batches * config.batch_id, rng);
  auto ood = ood_with_reuse(data, n_batches * config.batch_ood, rng);
  rng.shuffle(ood);

  std::vector<TripleBatch> batches(n_batches);
  for (std::size_t b = 0; b < n_batches; ++b) {
    auto take = [b](const std::vector<QueryRecord>& src, std::size_t n) {
      const auto first = src.begin() + static_cast<std::ptrdiff_t>(b * n);
      return std::vector<QueryRecord>(first, first + static_cast<std::ptrdiff_t>(n));
    };
    batches[b].pos = take(pos, config.batch_pos);
    batches[b].id = take(id, config.batch_id);
    batches[b].ood = take(ood, config.batch_ood);
  }
  return batches;
}

void Optimizer::step(ModelParams& params, const Tensor& grad) {
  if (grad.size() != params.count()) throw ShapeError("gradient length differs from parameter count");
  const double lr = config_.learning_rate;
  std::size_t k = 0;
  if (config_.optimizer == OptimizerKind::kSgd) {
    for (auto& t : params.tensors) {
      for (double& x : t.data) x -= lr * grad.data[k++];
    }
    return;
  }
  if (m_.empty()) {
    m_.assign(grad.size(), 0.0);
    v_.assign(grad.size(), 0.0);
  }
  ++t_;
  const double b1 = config_.adam_beta1;
  const double b2 = config_.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (auto& t : params.tensors) {
    for (double& x : t.data) {
      const double g = grad.data[k];
      m_[k] = b1 * m_[k] + (1.0 - b1) * g;
      v_[k] = b2 * v_[k] + (1.0 - b2) * g * g;
      x -= lr * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + config_.adam_eps);
      ++k;
    }
  }
}

namespace {

struct QueryGradient {
  std::vector<double> grad;
  QueryLossValues loss;
};

struct QueryInputs {
  const VideoMeta* video;
  Tensor clips;
  Tensor query;
};

QueryInputs inputs_for(const Dataset& data, const QueryRecord& q) {
  const VideoMeta& video = data.video(q.vid);
  return {&video, clip_matrix(*data.clip_embeddings, video),
          row_tensor(*data.text_embeddings, data.text_embeddings->index_of(q.embedding_key()))};
}

QueryGradient query_gradient(const ModelParams& params, const ModelConfig& model, const Dataset& data,
                             const QueryRecord& q, double weight, const TrainConfig& config) {
  const QueryInputs in = inputs_for(data, q);
  Tape tape;
  const ParamVars p = bind_params(tape, params);
  const BaseGraph base = forward_base(tape, p, in.clips, in.query, in.video->clip_len);
  const Var y = forward_na_head(tape, p, head_input(base.indicator, base.saliency, model.combine));
  const QueryLoss loss = query_loss(tape, base, y, q, *in.video, config.weights, config.saliency_neg_mode);
  const Var total = ad::scale(ad::add(ad::add(loss.l_p, loss.l_f), ad::add(loss.l_b, loss.l_s)), weight);
  tape.backward(total);

  QueryGradient out;
  out.loss = loss_values(loss);
  out.grad.reserve(params.count());
  for (const Var& v : p) {
    const auto& g = v.grad().data;
    out.grad.insert(out.grad.end(), g.begin(), g.end());
  }
  return out;
}

struct WorkItem {
  const QueryRecord* query;
  double weight;
};

// Queries in qid order with their loss weights.
std::vector<WorkItem> work_items(const TripleBatch& batch, const LossWeights& weights) {
  std::vector<WorkItem> items;
  auto add = [&](const std::vector<QueryRecord>& qs, Domain domain) {
    for (const auto& q : qs) items.push_back({&q, query_weight(weights, domain, qs.size())});
  };
  add(batch.pos, Domain::kNone);
  add(batch.id, Domain::kInDomain);
  add(batch.ood, Domain::kOutOfDomain);
  std::stable_sort(items.begin(), items.end(),
                   [](const WorkItem& a, const WorkItem& b) { return a.query->qid < b.query->qid; });
  return items;
}

BatchGradient reduce(const std::vector<QueryGradient>& parts, std::size_t n_params, const LossWeights& weights) {
  BatchGradient out;
  out.grad = Tensor(n_params, 1);
  std::vector<QueryLossValues> values;
  values.reserve(parts.size());
  for (const auto& part : parts) {
    for (std::size_t k = 0; k < n_params; ++k) out.grad.data[k] += part.grad[k];
    values.push_back(part.loss);
  }
  out.breakdown = combine_breakdown(values, weights);
  return out;
}

}  // namespace

BatchGradient batch_gradient(const ModelParams& params, const ModelConfig& model, const Dataset& data,
                             const TripleBatch& batch, const TrainConfig& config) {
  const auto items = work_items(batch, config.weights);
  std::vector<QueryGradient> parts(items.size());
  std::vector<std::string> errors(items.size());
  const auto n = static_cast<std::ptrdiff_t>(items.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      parts[i] = query_gradient(params, model, data, *items[i].query, items[i].weight, config);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) throw NumericError("query " + items[i].query->qid + ": " + errors[i]);
  }
  return reduce(parts, params.count(), config.weights);
}

BatchGradient batch_gradient_serial(const ModelParams& params, const ModelConfig& model, const Dataset& data,
                                    const TripleBatch& batch, const TrainConfig& config) {
  const auto items = work_items(batch, config.weights);
  std::vector<QueryGradient> parts;
  parts.reserve(items.size());
  for (const auto& item : items) {
    try {
      parts.push_back(query_gradient(params, model, data, *item.query, item.weight, config));
    } catch (const std::exception& e) {
      throw NumericError("query " + item.query->qid + ": " + e.what());
    }
  }
  return reduce(parts, params.count(), config.weights);
}

namespace {

std::vector<std::string> batch_qids(const TripleBatch& batch) {
  std::vector<std::string> qids;
  for (const auto* part : {&batch.pos, &batch.id, &batch.ood}) {
    for (const auto& q : *part) qids.push_back(q.qid);
  }
  return qids;
}

bool finite(const BatchGradient& g) {
  if (!std::isfinite(g.breakdown.total)) return false;
  return std::all_of(g.grad.data.begin(), g.grad.data.end(), [](double x) { return std::isfinite(x); });
}

void validation_metrics(const ModelParams& params, const ModelConfig& model, const Dataset& val, EpochLog& log) {
  const auto queries = val.all_queries();
  if (queries.empty()) return;
  const auto bundles = infer_scores(params, model, val, queries);
  const auto preds = predictions_from_scores(bundles, val, queries, model);
  if (!val.positives.empty()) log.r1_05 = recall_at_1(preds, queries, 0.5);
  if (!val.id_negatives.empty()) log.ra_id = rejection_accuracy(preds, queries, Domain::kInDomain);
  if (!val.ood_negatives.empty()) log.ra_ood = rejection_accuracy(preds, queries, Domain::kOutOfDomain);
}

}  // namespace

TrainResult train_loop(ModelParams params, const ModelConfig& model, const Dataset& train, const Dataset* validation,
                       const TrainConfig& config) {
  config.validate();
  model.validate();
  if (params.count() != ModelParams::zeros(model).count())
    throw ShapeError("parameters do not match the model configuration");
  if (train.text_embeddings->dim() != model.d_feat || train.clip_embeddings->dim() != model.d_feat)
    throw ShapeError("embedding dim " + std::to_string(train.text_embeddings->dim()) + " does not match d_feat " +
                     std::to_string(model.d_feat));

  TrainResult result;
  Optimizer optimizer(config);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto batches = make_batches(train, config, stream_seed(config.seed, 0xe0000 + epoch));
    if (batches.empty())
      throw ConfigError("batch_pos " + std::to_string(config.batch_pos) + " exceeds the " +
                        std::to_string(train.positives.size()) + " training positives");
    EpochLog log;
    log.epoch = epoch;
    for (std::size_t step = 0; step < batches.size(); ++step) {
      BatchGradient g;
      try {
        g = batch_gradient(params, model, train, batches[step], config);
      } catch (const NumericError& e) {
        throw NonFiniteLoss(e.what(), batch_qids(batches[step]), epoch, step);
      }
      if (!finite(g))
        throw NonFiniteLoss("non-finite loss or gradient", batch_qids(batches[step]), epoch, step);
      optimizer.step(params, g.grad);
      result.steps.push_back({epoch, step, g.breakdown});
      log.l_tot += g.breakdown.total;
      log.l_p += g.breakdown.l_p;
      log.l_f += g.breakdown.l_f;
      log.l_b += g.breakdown.l_b;
      log.l_s += g.breakdown.l_s;
    }
    const double inv = 1.0 / static_cast<double>(batches.size());
    log.l_tot *= inv;
    log.l_p *= inv;
    log.l_f *= inv;
    log.l_b *= inv;
    log.l_s *= inv;
    if (!params.all_finite())
      throw NonFiniteLoss("parameters became non-finite", batch_qids(batches.back()), epoch, batches.size() - 1);
    if (validation) validation_metrics(params, model, *validation, log);
    result.epochs.push_back(log);
  }
  result.params = std::move(params);
  return result;
}

namespace {

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::string opt(const std::optional<double>& x) { return x ? num(*x) : std::string(); }

}  // namespace

std::string format_epoch_log(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out << "epoch,l_tot,l_p,l_f,l_b,l_s,r1_05,ra_id,ra_ood\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << num(e.l_tot) << ',' << num(e.l_p) << ',' << num(e.l_f) << ',' << num(e.l_b) << ','
        << num(e.l_s) << ',' << opt(e.r1_05) << ',' << opt(e.ra_id) << ',' << opt(e.ra_ood) << '\n';
  }
  return out.str();
}

std::string format_step_log(const std::vector<StepLog>& log) {
  std::ostringstream out;
  out << "epoch,step,l_tot,l_p,l_f,l_b,l_s,pos_total,id_total,ood_total\n";
  for (const auto& s : log) {
    const auto& b = s.breakdown;
    out << s.epoch << ',' << s.step << ',' << num(b.total) << ',' << num(b.l_p) << ',' << num(b.l_f) << ','
        << num(b.l_b) << ',' << num(b.l_s) << ',' << num(b.positive.total) << ',' << num(b.in_domain.total)
        << ',' << num(b.out_of_domain.total) << '\n';
  }
  return out.str();
}

namespace {

ScoreBundle score_one(const ModelParams& params, const ModelConfig& model, const Dataset& data,
                      const QueryRecord& q) {
  const QueryInputs in = inputs_for(data, q);
  ScoreBundle b = run_base(params, model, in.clips, in.query, in.video->clip_len);
  b.qid = q.qid;
  b.class_score = run_na_head(b, params, model);
  return b;
}

}  // namespace

std::vector<ScoreBundle> infer_scores(const ModelParams& params, const ModelConfig& model, const Dataset& data,
                                      const std::vector<QueryRecord>& queries) {
  std::vector<ScoreBundle> out(queries.size());
  std::vector<std::string> errors(queries.size());
  const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = score_one(params, model, data, queries[i]);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) throw DataError("scoring " + queries[i].qid + ": " + errors[i]);
  }
  return out;
}

std::vector<ScoreBundle> infer_scores_serial(const ModelParams& params, const ModelConfig& model,
                                             const Dataset& data, const std::vector<QueryRecord>& queries) {
  std::vector<ScoreBundle> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    try {
      out.push_back(score_one(params, model, data, q));
    } catch (const std::exception& e) {
      throw DataError("scoring " + q.qid + ": " + e.what());
    }
  }
  return out;
}

std::vector<PredictionRecord> predictions_from_scores(const std::vector<ScoreBundle>& bundles, const Dataset& data,
                                                      const std::vector<QueryRecord>& queries,
                                                      const ModelConfig& model, bool accept_all) {
  if (bundles.size() != queries.size()) throw ShapeError("one score bundle per query expected");
  std::vector<PredictionRecord> out;
  out.reserve(bundles.size());
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const VideoMeta& video = data.video(queries[i].vid);
    out.push_back(predict(bundles[i], accept_all ? 1.0 : bundles[i].class_score, video, model));
    if (accept_all) out.back().class_score = bundles[i].class_score;
  }
  return out;
}

}  // namespace navmr
