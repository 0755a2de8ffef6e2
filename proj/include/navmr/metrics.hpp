#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "navmr/types.hpp"

namespace navmr {

// Intersection over union of two time intervals. A zero-length union is 0.
double temporal_iou(const MomentSpan& a, const MomentSpan& b);

// Best IoU of `pred` against any of the ground-truth spans.
double max_iou(const MomentSpan& pred, std::span<const MomentSpan> ground_truth);

// Negative-aware R1@theta over the positive queries in `queries`, as a
// percentage. Rejected positives count as misses.
double recall_at_1(std::span<const PredictionRecord> predictions, std::span<const QueryRecord> queries,
                   double theta);

// Percentage of the negatives of `domain` whose prediction is a rejection.
double rejection_accuracy(std::span<const PredictionRecord> predictions, std::span<const QueryRecord> queries,
                          Domain domain);

// Linear-interpolation percentile, p in [0, 100].
double percentile(std::span<const double> values, double p);

struct HistogramBin {
  double low = 0.0;
  double high = 0.0;
  std::size_t pos_count = 0;
  std::size_t neg_count = 0;
};

// Equal-width bins over [low, high); values outside clamp into the end bins.
std::vector<HistogramBin> histogram_export(std::span<const double> scores_pos, std::span<const double> scores_neg,
                                           std::size_t n_bins, double low, double high);
std::string histogram_csv(std::span<const HistogramBin> bins);

struct EvalCounts {
  std::size_t positives = 0;
  std::size_t id_negatives = 0;
  std::size_t ood_negatives = 0;
  std::size_t false_negatives = 0;  // positives that were rejected
};

struct EvalReport {
  std::map<double, double> r1_at;
  std::map<double, double> r1_at_no_rejection;
  std::optional<double> ra_id;
  std::optional<double> ra_ood;
  EvalCounts counts;
};

// Fills r1_at, the rejection accuracies (absent when a domain has no
// negatives) and counts. `accept_all` predictions, when given, fill
// r1_at_no_rejection.
EvalReport evaluate(std::span<const PredictionRecord> predictions, std::span<const QueryRecord> queries,
                    std::span<const double> thetas, std::span<const PredictionRecord> accept_all = {});

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);
// Short human summary with 2-decimal percentages.
std::string summarize(const EvalReport& report);

}  // namespace navmr
