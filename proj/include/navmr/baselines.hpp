#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "navmr/types.hpp"

namespace navmr {

enum class ScoreSource { kIndicator, kSaliency };
std::string_view to_string(ScoreSource source);
ScoreSource parse_score_source(std::string_view text);

// Max indicator (the score of the top-ranked clip) or max saliency.
double query_score(const ScoreBundle& bundle, ScoreSource source);

struct ThresholdModel {
  ScoreSource source = ScoreSource::kIndicator;
  double percentile_p = 0.5;  // in percent
  double threshold = 0.0;

  bool accepts(double score) const { return score >= threshold; }
};

// threshold = percentile(scores, p) over training positives.
ThresholdModel fit_threshold(std::span<const double> positive_scores, ScoreSource source, double p = 0.5);

// Mean of the three largest values; mean of all when there are fewer.
double svm_feature(std::span<const double> saliency);

struct LinearSvm {
  double weight = 0.0;
  double bias = 0.0;
  double lambda = 1e-3;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;

  double decision(double x) const { return weight * x + bias; }
  bool accepts(double x) const { return decision(x) >= 0.0; }
};

// Minimises lambda/2 w^2 + mean hinge loss by averaged stochastic
// subgradient steps of size 1 / (lambda t + 1); the bias is not
// regularised. Labels are +1 / -1.
LinearSvm train_svm(std::span<const double> features, std::span<const int> labels, double lambda,
                    std::size_t epochs, std::uint64_t seed);

nlohmann::json to_json(const ThresholdModel& model);
ThresholdModel threshold_model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LinearSvm& model);
LinearSvm linear_svm_from_json(const nlohmann::json& j);

// Accept/reject per bundle from `accept`, with the top-clip span of the
// bundle attached to accepted queries. class_score carries `score`.
std::vector<PredictionRecord> baseline_predictions(std::span<const ScoreBundle> bundles,
                                                   std::span<const QueryRecord> queries,
                                                   std::span<const VideoMeta> videos,
                                                   const std::function<double(const ScoreBundle&)>& score,
                                                   const std::function<bool(double)>& accept);

}  // namespace navmr
