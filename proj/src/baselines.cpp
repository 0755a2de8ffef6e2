#include "navmr/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "navmr/error.hpp"
#include "navmr/metrics.hpp"
#include "navmr/model.hpp"
#include "navmr/rng.hpp"

namespace navmr {

using nlohmann::json;

std::string_view to_string(ScoreSource source) {
  return source == ScoreSource::kIndicator ? "indicator" : "saliency";
}

ScoreSource parse_score_source(std::string_view text) {
  if (text == "indicator") return ScoreSource::kIndicator;
  if (text == "saliency") return ScoreSource::kSaliency;
  throw ConfigError("score source must be 'indicator' or 'saliency', got '" + std::string(text) + "'");
}

double query_score(const ScoreBundle& bundle, ScoreSource source) {
  const auto& v = source == ScoreSource::kIndicator ? bundle.indicator : bundle.saliency;
  if (v.empty()) throw DataError("score bundle " + bundle.qid + " has no " + std::string(to_string(source)) +
                                 " scores");
  return *std::max_element(v.begin(), v.end());
}

ThresholdModel fit_threshold(std::span<const double> positive_scores, ScoreSource source, double p) {
  if (positive_scores.empty()) throw DataError("cannot fit a threshold without training positives");
  if (!(p >= 0.0 && p <= 100.0)) throw ConfigError("percentile must lie in [0, 100]");
  ThresholdModel m;
  m.source = source;
  m.percentile_p = p;
  m.threshold = percentile(positive_scores, p);
  if (!std::isfinite(m.threshold)) throw NumericError("fitted threshold is not finite");
  return m;
}

double svm_feature(std::span<const double> saliency) {
  if (saliency.empty()) throw DataError("svm_feature needs at least one saliency value");
  std::vector<double> v(saliency.begin(), saliency.end());
  const std::size_t k = std::min<std::size_t>(3, v.size());
  std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(), std::greater<>());
  return std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), 0.0) / static_cast<double>(k);
}

LinearSvm train_svm(std::span<const double> features, std::span<const int> labels, double lambda,
                    std::size_t epochs, std::uint64_t seed) {
  if (features.size() != labels.size()) throw ShapeError("features and labels differ in length");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("svm lambda must be > 0");
  if (epochs < 1) throw ConfigError("svm epochs must be >= 1");
  bool has_pos = false;
  bool has_neg = false;
  for (int y : labels) {
    if (y != 1 && y != -1) throw DataError("svm labels must be +1 or -1");
    (y == 1 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw DataError("svm training needs both positive and negative examples");

  Rng rng(stream_seed(seed, 0x5f3));
  std::vector<std::size_t> order(features.size());
  double w = 0.0;
  double b = 0.0;
  double w_sum = 0.0;
  double b_sum = 0.0;
  std::size_t t = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t) + 1.0);
      const double x = features[i];
      const double y = labels[i];
      const bool violated = y * (w * x + b) < 1.0;
      w *= 1.0 - eta * lambda;
      if (violated) {
        w += eta * y * x;
        b += eta * y;
      }
      w_sum += w;
      b_sum += b;
    }
  }
  LinearSvm m;
  m.weight = w_sum / static_cast<double>(t);
  m.bias = b_sum / static_cast<double>(t);
  m.lambda = lambda;
  m.epochs = epochs;
  m.seed = seed;
  if (!std::isfinite(m.weight) || !std::isfinite(m.bias)) throw NumericError("svm training diverged");
  return m;
}

json to_json(const ThresholdModel& m) {
  return {{"kind", "threshold"},
          {"source", std::string(to_string(m.source))},
          {"percentile_p", m.percentile_p},
          {"threshold", m.threshold}};
}

ThresholdModel threshold_model_from_json(const json& j) {
  try {
    if (j.at("kind").get<std::string>() != "threshold") throw DataError("not a threshold model");
    ThresholdModel m;
    m.source = parse_score_source(j.at("source").get<std::string>());
    m.percentile_p = j.at("percentile_p").get<double>();
    m.threshold = j.at("threshold").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed threshold model: ") + e.what());
  }
}

json to_json(const LinearSvm& m) {
  return {{"kind", "svm"},       {"weight", m.weight}, {"bias", m.bias},
          {"lambda", m.lambda}, {"epochs", m.epochs}, {"seed", m.seed}};
}

LinearSvm linear_svm_from_json(const json& j) {
  try {
    if (j.at("kind").get<std::string>() != "svm") throw DataError("not an svm model");
    LinearSvm m;
    m.weight = j.at("weight").get<double>();
    m.bias = j.at("bias").get<double>();
    m.lambda = j.at("lambda").get<double>();
    m.epochs = j.at("epochs").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed svm model: ") + e.what());
  }
}

std::vector<PredictionRecord> baseline_predictions(std::span<const ScoreBundle> bundles,
                                                   std::span<const QueryRecord> queries,
                                                   std::span<const VideoMeta> videos,
                                                   const std::function<double(const ScoreBundle&)>& score,
                                                   const std::function<bool(double)>& accept) {
  std::map<std::string, const ScoreBundle*> by_qid;
  for (const auto& b : bundles) by_qid[b.qid] = &b;
  std::map<std::string, const VideoMeta*> by_vid;
  for (const auto& v : videos) by_vid[v.vid] = &v;

  const ModelConfig decide;  // accept iff class score >= 0.5
  std::vector<PredictionRecord> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    auto b = by_qid.find(q.qid);
    if (b == by_qid.end()) throw DataError("no score bundle for query " + q.qid);
    auto v = by_vid.find(q.vid);
    if (v == by_vid.end()) throw DataError("query " + q.qid + " references unknown video " + q.vid);
    const double s = score(*b->second);
    PredictionRecord rec = predict(*b->second, accept(s) ? 1.0 : 0.0, *v->second, decide);
    rec.class_score = s;
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace navmr
