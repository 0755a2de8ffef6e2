#pragma once

#include <span>
#include <string_view>

#include "navmr/autodiff.hpp"
#include "navmr/model.hpp"
#include "navmr/types.hpp"

namespace navmr {

enum class SaliencyNegMode { kCosine, kLog };

std::string_view to_string(SaliencyNegMode mode);
SaliencyNegMode parse_saliency_neg_mode(std::string_view text);

// lambda_p * BCE(y_hat, y). log is taken of max(x, 1e-12).
ad::Var classification_loss(ad::Var y_hat, int y, double lambda_p);

// lambda_f * mean per-clip BCE against 0/1 labels (L x 1).
ad::Var foreground_loss(ad::Var indicator, const ad::Tensor& labels, double lambda_f);

struct BoundaryTargets {
  ad::Tensor offsets;  // L x 2 true (left, right) offsets in seconds
  ad::Tensor mask;     // L x 2, 1 on supervised clips
  std::size_t n_clips = 0;  // number of supervised clips; 0 for negatives
};

// lambda_b * mean over supervised clips of (|dl| + |dr|) / 2. Exactly 0 when
// no clip is supervised.
ad::Var boundary_loss(ad::Var offsets, const BoundaryTargets& targets, double lambda_b);

// lambda_s * mean squared error against saliency labels.
ad::Var saliency_loss_positive(ad::Var saliency, const ad::Tensor& labels, double lambda_s);

// lambda * mean over clips of cos(clip_c, query); clip_feats is L x h,
// query 1 x h.
ad::Var saliency_loss_negative_cosine(ad::Var clip_feats, ad::Var query, double lambda_s_neg);

// lambda * mean of -log(1 - s_i), with the log argument clamped at 1e-12.
ad::Var saliency_loss_negative_log(ad::Var saliency, double lambda_s_neg);

// Clips whose centre falls inside a ground-truth span; a span too short to
// contain any centre supervises the clip covering its midpoint.
std::vector<bool> clips_inside(const QueryRecord& query, const VideoMeta& video);
ad::Tensor foreground_labels(const QueryRecord& query, const VideoMeta& video);
// gt_saliency when present, else 1 inside the spans and 0 outside.
ad::Tensor saliency_labels(const QueryRecord& query, const VideoMeta& video);
BoundaryTargets boundary_targets(const QueryRecord& query, const VideoMeta& video);

struct QueryLoss {
  Domain domain = Domain::kNone;
  ad::Var l_p;
  ad::Var l_f;
  ad::Var l_b;
  ad::Var l_s;
};

// Builds every loss term of one query. Positives get L_f + L_b + L_s + L_p;
// negatives L_f (zero labels) + L_s (negative form) + L_p and a constant 0
// boundary term.
QueryLoss query_loss(ad::Tape& tape, const BaseGraph& base, ad::Var y_hat, const QueryRecord& query,
                     const VideoMeta& video, const LossWeights& weights, SaliencyNegMode mode);

struct DomainTerms {
  std::size_t count = 0;
  double l_p = 0.0;  // batch means, before the domain weight
  double l_f = 0.0;
  double l_b = 0.0;
  double l_s = 0.0;
  double total = 0.0;
};

struct LossBreakdown {
  // Domain-weighted sums: l_p = lambda+ * pos.l_p + lambda_ID * id.l_p + ...
  double l_p = 0.0;
  double l_f = 0.0;
  double l_b = 0.0;
  double l_s = 0.0;
  double total = 0.0;
  DomainTerms positive;
  DomainTerms in_domain;
  DomainTerms out_of_domain;
};

// Weight lambda_domain / n_domain that one query contributes to L_tot.
double query_weight(const LossWeights& weights, Domain domain, std::size_t n_in_domain);

struct TotalLoss {
  ad::Var total;
  LossBreakdown breakdown;
};

// L_tot = lambda+ L+ + lambda_ID L-_ID + lambda_OOD L-_OOD where each L is
// the mean over that domain's queries. Empty domains contribute exactly 0.
TotalLoss total_loss(ad::Tape& tape, std::span<const QueryLoss> terms, const LossWeights& weights);

// Plain values of one query's terms, usable after its tape is gone.
struct QueryLossValues {
  Domain domain = Domain::kNone;
  double l_p = 0.0;
  double l_f = 0.0;
  double l_b = 0.0;
  double l_s = 0.0;
};
QueryLossValues loss_values(const QueryLoss& loss);

// Accumulates per-query term values into a breakdown.
LossBreakdown combine_breakdown(std::span<const QueryLossValues> terms, const LossWeights& weights);

}  // namespace navmr
