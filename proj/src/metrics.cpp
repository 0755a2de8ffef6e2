#include "navmr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "navmr/error.hpp"

namespace navmr {

using nlohmann::json;

double temporal_iou(const MomentSpan& a, const MomentSpan& b) {
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
  if (!(uni > 0.0)) return 0.0;
  return inter / uni;
}

double max_iou(const MomentSpan& pred, std::span<const MomentSpan> ground_truth) {
  double best = 0.0;
  for (const auto& gt : ground_truth) best = std::max(best, temporal_iou(pred, gt));
  return best;
}

namespace {

std::unordered_map<std::string, const PredictionRecord*> index_predictions(
    std::span<const PredictionRecord> predictions) {
  std::unordered_map<std::string, const PredictionRecord*> by_qid;
  by_qid.reserve(predictions.size());
  for (const auto& p : predictions) by_qid[p.qid] = &p;
  return by_qid;
}

const PredictionRecord& lookup(const std::unordered_map<std::string, const PredictionRecord*>& by_qid,
                               const std::string& qid) {
  auto it = by_qid.find(qid);
  if (it == by_qid.end()) throw DataError("no prediction for query '" + qid + "'");
  return *it->second;
}

std::string theta_key(double theta) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", theta);
  return buf;
}

}  // namespace

double recall_at_1(std::span<const PredictionRecord> predictions, std::span<const QueryRecord> queries,
                   double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw ConfigError("IoU threshold must lie in (0, 1]");
  const auto by_qid = index_predictions(predictions);
  std::size_t hits = 0;
  std::size_t total = 0;
  for (const auto& q : queries) {
    if (!q.is_positive()) continue;
    ++total;
    const auto& p = lookup(by_qid, q.qid);
    if (p.decision == Decision::kAccept && p.span && max_iou(*p.span, q.spans) >= theta) ++hits;
  }
  if (total == 0) throw DataError("recall needs at least one positive query");
  return 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

double rejection_accuracy(std::span<const PredictionRecord> predictions, std::span<const QueryRecord> queries,
                          Domain domain) {
  const auto by_qid = index_predictions(predictions);
  std::size_t rejected = 0;
  std::size_t total = 0;
  for (const auto& q : queries) {
    if (q.is_positive() || q.domain != domain) continue;
    ++total;
    if (lookup(by_qid, q.qid).decision == Decision::kReject) ++rejected;
  }
  if (total == 0) throw DataError("no negatives of domain " + std::string(to_string(domain)));
  return 100.0 * static_cast<double>(rejected) / static_cast<double>(total);
}

double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw DataError("percentile of an empty list");
  if (!(p >= 0.0 && p <= 100.0)) throw ConfigError("percentile rank must lie in [0, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<HistogramBin> histogram_export(std::span<const double> scores_pos, std::span<const double> scores_neg,
                                           std::size_t n_bins, double low, double high) {
  if (n_bins < 1) throw ConfigError("histogram needs at least one bin");
  if (!(low < high)) throw ConfigError("histogram range must have low < high");
  std::vector<HistogramBin> bins(n_bins);
  const double width = (high - low) / static_cast<double>(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    bins[b].low = low + width * static_cast<double>(b);
    bins[b].high = b + 1 == n_bins ? high : low + width * static_cast<double>(b + 1);
  }
  auto bucket = [&](double v) {
    if (!(v >= low)) return std::size_t{0};  // also catches NaN
    const double idx = std::floor((v - low) / width);
    return std::min(n_bins - 1, static_cast<std::size_t>(idx));
  };
  for (double v : scores_pos) ++bins[bucket(v)].pos_count;
  for (double v : scores_neg) ++bins[bucket(v)].neg_count;
  return bins;
}

std::string histogram_csv(std::span<const HistogramBin> bins) {
  std::ostringstream out;
  out.precision(17);
  out << "bin_low,bin_high,pos_count,neg_count\n";
  for (const auto& b : bins) out << b.low << ',' << b.high << ',' << b.pos_count << ',' << b.neg_count << '\n';
  return out.str();
}

EvalReport evaluate(std::span<const PredictionRecord> predictions, std::span<const QueryRecord> queries,
                    std::span<const double> thetas, std::span<const PredictionRecord> accept_all) {
  EvalReport report;
  const auto by_qid = index_predictions(predictions);
  for (const auto& q : queries) {
    if (q.is_positive()) {
      ++report.counts.positives;
      if (lookup(by_qid, q.qid).decision == Decision::kReject) ++report.counts.false_negatives;
    } else if (q.domain == Domain::kInDomain) {
      ++report.counts.id_negatives;
    } else {
      ++report.counts.ood_negatives;
    }
  }
  if (report.counts.positives > 0) {
    for (double theta : thetas) {
      report.r1_at[theta] = recall_at_1(predictions, queries, theta);
      if (!accept_all.empty()) report.r1_at_no_rejection[theta] = recall_at_1(accept_all, queries, theta);
    }
  }
  if (report.counts.id_negatives > 0) report.ra_id = rejection_accuracy(predictions, queries, Domain::kInDomain);
  if (report.counts.ood_negatives > 0)
    report.ra_ood = rejection_accuracy(predictions, queries, Domain::kOutOfDomain);
  return report;
}

json to_json(const EvalReport& report) {
  json j;
  json r1 = json::object();
  for (const auto& [theta, value] : report.r1_at) r1[theta_key(theta)] = value;
  j["r1"] = std::move(r1);
  if (!report.r1_at_no_rejection.empty()) {
    json r1n = json::object();
    for (const auto& [theta, value] : report.r1_at_no_rejection) r1n[theta_key(theta)] = value;
    j["r1_no_rejection"] = std::move(r1n);
  }
  json ra = json::object();
  if (report.ra_id) ra["in_domain"] = *report.ra_id;
  if (report.ra_ood) ra["out_of_domain"] = *report.ra_ood;
  j["rejection_accuracy"] = std::move(ra);
  j["counts"] = {{"positives", report.counts.positives},
                 {"id_negatives", report.counts.id_negatives},
                 {"ood_negatives", report.counts.ood_negatives},
                 {"false_negatives", report.counts.false_negatives}};
  return j;
}

EvalReport eval_report_from_json(const json& j) {
  EvalReport report;
  for (const auto& [key, value] : j.at("r1").items()) report.r1_at[std::stod(key)] = value.get<double>();
  if (j.contains("r1_no_rejection")) {
    for (const auto& [key, value] : j.at("r1_no_rejection").items())
      report.r1_at_no_rejection[std::stod(key)] = value.get<double>();
  }
  const auto& ra = j.at("rejection_accuracy");
  if (ra.contains("in_domain")) report.ra_id = ra.at("in_domain").get<double>();
  if (ra.contains("out_of_domain")) report.ra_ood = ra.at("out_of_domain").get<double>();
  const auto& c = j.at("counts");
  report.counts.positives = c.at("positives").get<std::size_t>();
  report.counts.id_negatives = c.at("id_negatives").get<std::size_t>();
  report.counts.ood_negatives = c.at("ood_negatives").get<std::size_t>();
  report.counts.false_negatives = c.at("false_negatives").get<std::size_t>();
  return report;
}

std::string summarize(const EvalReport& report) {
  std::ostringstream out;
  char buf[64];
  for (const auto& [theta, value] : report.r1_at) {
    std::snprintf(buf, sizeof(buf), "R1@%g=%.2f ", theta, value);
    out << buf;
  }
  if (report.ra_id) {
    std::snprintf(buf, sizeof(buf), "RA-ID=%.2f ", *report.ra_id);
    out << buf;
  }
  if (report.ra_ood) {
    std::snprintf(buf, sizeof(buf), "RA-OOD=%.2f ", *report.ra_ood);
    out << buf;
  }
  out << "positives=" << report.counts.positives << " false_negatives=" << report.counts.false_negatives;
  return out.str();
}

}  // namespace navmr
