#include "navmr/losses.hpp"

#include <algorithm>
#include <string>

#include "navmr/error.hpp"

namespace navmr {

using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

constexpr double kLogFloor = 1e-12;

Var clamped_log(Var x) { return ad::log(ad::clamp_min(x, kLogFloor)); }

Var one_minus(Var x) { return ad::add_scalar(ad::scale(x, -1.0), 1.0); }

void require_length(Var v, const Tensor& labels, const char* what) {
  if (v.value().size() != labels.size())
    throw ShapeError(std::string(what) + ": " + std::to_string(v.value().size()) + " scores vs " +
                     std::to_string(labels.size()) + " labels");
}

}  // namespace

std::string_view to_string(SaliencyNegMode mode) { return mode == SaliencyNegMode::kCosine ? "cosine" : "log"; }

SaliencyNegMode parse_saliency_neg_mode(std::string_view text) {
  if (text == "cosine") return SaliencyNegMode::kCosine;
  if (text == "log") return SaliencyNegMode::kLog;
  throw ConfigError("unknown saliency_neg_mode '" + std::string(text) + "'");
}

Var classification_loss(Var y_hat, int y, double lambda_p) {
  if (y_hat.value().size() != 1) throw ShapeError("classification_loss expects a scalar score");
  Var ll = y == 1 ? clamped_log(y_hat) : clamped_log(one_minus(y_hat));
  return ad::scale(ll, -lambda_p);
}

Var foreground_loss(Var indicator, const Tensor& labels, double lambda_f) {
  require_length(indicator, labels, "foreground_loss");
  Tape& tape = indicator.tape();
  Tensor flipped = labels;
  for (double& x : flipped.data) x = 1.0 - x;
  flipped.rows = indicator.rows();
  flipped.cols = indicator.cols();
  Tensor shaped = labels;
  shaped.rows = indicator.rows();
  shaped.cols = indicator.cols();
  Var pos = ad::mul(tape.constant(shaped), clamped_log(indicator));
  Var neg = ad::mul(tape.constant(flipped), clamped_log(one_minus(indicator)));
  return ad::scale(ad::mean(ad::add(pos, neg)), -lambda_f);
}

Var boundary_loss(Var offsets, const BoundaryTargets& targets, double lambda_b) {
  Tape& tape = offsets.tape();
  if (targets.n_clips == 0) return tape.constant(0.0);
  if (!offsets.value().same_shape(targets.offsets) || !offsets.value().same_shape(targets.mask))
    throw ShapeError("boundary_loss: offsets and targets differ in shape");
  Var diff = ad::mul(ad::sub(offsets, tape.constant(targets.offsets)), tape.constant(targets.mask));
  return ad::scale(ad::l1(diff), lambda_b / (2.0 * static_cast<double>(targets.n_clips)));
}

Var saliency_loss_positive(Var saliency, const Tensor& labels, double lambda_s) {
  require_length(saliency, labels, "saliency_loss_positive");
  Tensor shaped = labels;
  shaped.rows = saliency.rows();
  shaped.cols = saliency.cols();
  Var d = ad::sub(saliency, saliency.tape().constant(shaped));
  return ad::scale(ad::mean(ad::mul(d, d)), lambda_s);
}

Var saliency_loss_negative_cosine(Var clip_feats, Var query, double lambda_s_neg) {
  return ad::scale(ad::mean(ad::rowwise_cosine(clip_feats, query, ad::ZeroNorm::kThrow)), lambda_s_neg);
}

Var saliency_loss_negative_log(Var saliency, double lambda_s_neg) {
  return ad::scale(ad::mean(clamped_log(one_minus(saliency))), -lambda_s_neg);
}

std::vector<bool> clips_inside(const QueryRecord& query, const VideoMeta& video) {
  std::vector<bool> inside(static_cast<std::size_t>(video.n_clips), false);
  for (const auto& span : query.spans) {
    bool any = false;
    for (int c = 0; c < video.n_clips; ++c) {
      const double centre = video.clip_center(c);
      if (centre >= span.start && centre <= span.end) {
        inside[c] = true;
        any = true;
      }
    }
    if (!any) {
      const double mid = 0.5 * (span.start + span.end);
      int c = static_cast<int>(mid / video.clip_len);
      c = std::clamp(c, 0, video.n_clips - 1);
      inside[c] = true;
    }
  }
  return inside;
}

Tensor foreground_labels(const QueryRecord& query, const VideoMeta& video) {
  Tensor labels(static_cast<std::size_t>(video.n_clips), 1);
  if (!query.is_positive()) return labels;
  const auto inside = clips_inside(query, video);
  for (std::size_t c = 0; c < inside.size(); ++c) labels.data[c] = inside[c] ? 1.0 : 0.0;
  return labels;
}

Tensor saliency_labels(const QueryRecord& query, const VideoMeta& video) {
  if (query.gt_saliency) {
    if (query.gt_saliency->size() != static_cast<std::size_t>(video.n_clips))
      throw ValidationError("query " + query.qid + ": gt_saliency length differs from n_clips");
    return Tensor::column(*query.gt_saliency);  // already in [0, 1] by the record invariant
  }
  return foreground_labels(query, video);
}

BoundaryTargets boundary_targets(const QueryRecord& query, const VideoMeta& video) {
  const auto n = static_cast<std::size_t>(video.n_clips);
  BoundaryTargets t{Tensor(n, 2), Tensor(n, 2), 0};
  if (!query.is_positive()) return t;
  for (const auto& span : query.spans) {
    QueryRecord single = query;
    single.spans = {span};
    const auto inside = clips_inside(single, video);
    for (std::size_t c = 0; c < n; ++c) {
      if (!inside[c] || t.mask(c, 0) != 0.0) continue;
      const double centre = video.clip_center(static_cast<int>(c));
      t.offsets(c, 0) = centre - span.start;
      t.offsets(c, 1) = span.end - centre;
      t.mask(c, 0) = 1.0;
      t.mask(c, 1) = 1.0;
      ++t.n_clips;
    }
  }
  return t;
}

QueryLoss query_loss(Tape& tape, const BaseGraph& base, Var y_hat, const QueryRecord& query,
                     const VideoMeta& video, const LossWeights& weights, SaliencyNegMode mode) {
  QueryLoss out;
  out.domain = query.is_positive() ? Domain::kNone : query.domain;
  out.l_p = classification_loss(y_hat, query.is_positive() ? 1 : 0, weights.lambda_p);
  out.l_f = foreground_loss(base.indicator, foreground_labels(query, video), weights.lambda_f);
  if (query.is_positive()) {
    out.l_b = boundary_loss(base.offsets, boundary_targets(query, video), weights.lambda_b);
    out.l_s = saliency_loss_positive(base.saliency, saliency_labels(query, video), weights.lambda_s);
  } else {
    out.l_b = tape.constant(0.0);
    out.l_s = mode == SaliencyNegMode::kCosine
                  ? saliency_loss_negative_cosine(base.video_sal, base.query_sal, weights.lambda_s_neg)
                  : saliency_loss_negative_log(base.saliency, weights.lambda_s_neg);
  }
  return out;
}

double query_weight(const LossWeights& weights, Domain domain, std::size_t n_in_domain) {
  if (n_in_domain == 0) return 0.0;
  const double lambda = domain == Domain::kNone       ? weights.lambda_pos
                        : domain == Domain::kInDomain ? weights.lambda_id
                                                      : weights.lambda_ood;
  return lambda / static_cast<double>(n_in_domain);
}

namespace {

DomainTerms& slot(LossBreakdown& b, Domain d) {
  return d == Domain::kNone ? b.positive : d == Domain::kInDomain ? b.in_domain : b.out_of_domain;
}

}  // namespace

QueryLossValues loss_values(const QueryLoss& loss) {
  return {loss.domain, loss.l_p.scalar(), loss.l_f.scalar(), loss.l_b.scalar(), loss.l_s.scalar()};
}

LossBreakdown combine_breakdown(std::span<const QueryLossValues> terms, const LossWeights& weights) {
  weights.validate();
  LossBreakdown b;
  for (const auto& q : terms) {
    DomainTerms& d = slot(b, q.domain);
    ++d.count;
    d.l_p += q.l_p;
    d.l_f += q.l_f;
    d.l_b += q.l_b;
    d.l_s += q.l_s;
  }
  for (Domain dom : {Domain::kNone, Domain::kInDomain, Domain::kOutOfDomain}) {
    DomainTerms& d = slot(b, dom);
    if (d.count == 0) continue;
    const double inv = 1.0 / static_cast<double>(d.count);
    d.l_p *= inv;
    d.l_f *= inv;
    d.l_b *= inv;
    d.l_s *= inv;
    d.total = d.l_p + d.l_f + d.l_b + d.l_s;
    const double lambda = query_weight(weights, dom, 1);
    b.l_p += lambda * d.l_p;
    b.l_f += lambda * d.l_f;
    b.l_b += lambda * d.l_b;
    b.l_s += lambda * d.l_s;
  }
  b.total = b.l_p + b.l_f + b.l_b + b.l_s;
  return b;
}

TotalLoss total_loss(Tape& tape, std::span<const QueryLoss> terms, const LossWeights& weights) {
  TotalLoss out;
  std::vector<QueryLossValues> values;
  values.reserve(terms.size());
  for (const auto& q : terms) values.push_back(loss_values(q));
  out.breakdown = combine_breakdown(values, weights);
  const std::size_t counts[3] = {out.breakdown.positive.count, out.breakdown.in_domain.count,
                                 out.breakdown.out_of_domain.count};
  auto count_of = [&](Domain d) { return counts[static_cast<int>(d)]; };

  Var total = tape.constant(0.0);
  for (const auto& q : terms) {
    Var sum = ad::add(ad::add(q.l_p, q.l_f), ad::add(q.l_b, q.l_s));
    total = ad::add(total, ad::scale(sum, query_weight(weights, q.domain, count_of(q.domain))));
  }
  out.total = total;
  return out;
}

}  // namespace navmr
