#include "navmr/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "navmr/error.hpp"
#include "navmr/rng.hpp"

namespace navmr {

using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {
constexpr double kRnnInputGain = 4.0;
constexpr double kRnnBiasSpread = 2.0;
}  // namespace

std::string_view to_string(Combine combine) {
  return combine == Combine::kSummation ? "summation" : "concatenation";
}

Combine parse_combine(std::string_view text) {
  if (text == "summation") return Combine::kSummation;
  if (text == "concatenation") return Combine::kConcatenation;
  throw ConfigError("unknown combine mode '" + std::string(text) + "'");
}

void ModelConfig::validate() const {
  if (d_feat < 1) throw ConfigError("model.d_feat must be >= 1");
  if (d_hidden < 1) throw ConfigError("model.d_hidden must be >= 1");
  if (!(decision_threshold > 0.0 && decision_threshold < 1.0))
    throw ConfigError("model.decision_threshold must lie in (0, 1)");
}

std::array<ParamShape, kParamCount> param_shapes(const ModelConfig& c) {
  const std::size_t d = c.d_feat;
  const std::size_t h = c.d_hidden;
  return {{{d, h}, {d, h}, {h, 1}, {1, 1}, {h, 2}, {1, 2}, {d, h}, {d, h},
           {1, h}, {h, h}, {1, h}, {h, h}, {1, h}, {h, 1}, {1, 1}}};
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  const auto shapes = param_shapes(config);
  for (std::size_t i = 0; i < kParamCount; ++i) p.tensors[i] = Tensor(shapes[i].rows, shapes[i].cols);
  return p;
}

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = zeros(config);
  Rng rng(stream_seed(seed, 0x1417));
  auto xavier = [&](Tensor& t) {
    const double a = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
    for (double& x : t.data) x = rng.uniform(-a, a);
  };
  for (std::size_t id : {kVideoProj, kQueryProj, kIndicatorW, kBoundaryW, kSaliencyVideoProj, kRnnInput,
                         kMlpW, kOutW}) {
    xavier(p.tensors[id]);
  }
  // Wide input weights and spread biases keep individual hidden units
  // switching on at different score levels, so short peaks are not washed out.
  for (double& x : p.tensors[kRnnInput].data) x *= kRnnInputGain;
  for (double& x : p.tensors[kRnnBias].data) x = rng.uniform(-kRnnBiasSpread, kRnnBiasSpread);
  xavier(p.tensors[kRnnRecurrent]);
  p.tensors[kSaliencyQueryProj] = p.tensors[kSaliencyVideoProj];
  return p;
}

std::size_t ModelParams::count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

Tensor ModelParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(count());
  for (const auto& t : tensors) flat.insert(flat.end(), t.data.begin(), t.data.end());
  return Tensor::column(std::move(flat));
}

ModelParams ModelParams::unflatten(const Tensor& flat, const ModelConfig& config) {
  ModelParams p = zeros(config);
  if (flat.size() != p.count()) throw ShapeError("flat parameter vector has the wrong length");
  std::size_t offset = 0;
  for (auto& t : p.tensors) {
    std::copy_n(flat.data.begin() + static_cast<std::ptrdiff_t>(offset), t.size(), t.data.begin());
    offset += t.size();
  }
  return p;
}

bool ModelParams::all_finite() const {
  for (const auto& t : tensors) {
    for (double x : t.data) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

ParamVars bind_params(Tape& tape, const ModelParams& params) {
  ParamVars vars;
  for (std::size_t i = 0; i < kParamCount; ++i) vars[i] = tape.leaf(params.tensors[i]);
  return vars;
}

ParamVars bind_params(Tape& /*tape*/, Var flat, const ModelConfig& config) {
  const auto shapes = param_shapes(config);
  ParamVars vars;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < kParamCount; ++i) {
    vars[i] = ad::slice(flat, offset, shapes[i].rows, shapes[i].cols);
    offset += shapes[i].rows * shapes[i].cols;
  }
  if (offset != flat.value().size()) throw ShapeError("flat parameter vector has the wrong length");
  return vars;
}

BaseGraph forward_base(Tape& tape, const ParamVars& p, const Tensor& clip_feats, const Tensor& query,
                       double clip_len) {
  const std::size_t d = p[kVideoProj].rows();
  if (clip_feats.cols != d || query.cols != d || query.rows != 1)
    throw ShapeError("forward_base: feature dim " + std::to_string(clip_feats.cols) + "/" +
                     std::to_string(query.cols) + " does not match model d_feat " + std::to_string(d));
  if (clip_feats.rows == 0) throw ShapeError("forward_base: video without clips");

  Var v = tape.constant(clip_feats);
  Var q = tape.constant(query);

  Var fused = ad::tanh(ad::add_row(ad::matmul(v, p[kVideoProj]), ad::matmul(q, p[kQueryProj])));

  BaseGraph out;
  out.indicator = ad::sigmoid(ad::add_row(ad::matmul(fused, p[kIndicatorW]), p[kIndicatorB]));
  out.offsets =
      ad::scale(ad::softplus(ad::add_row(ad::matmul(fused, p[kBoundaryW]), p[kBoundaryB])), clip_len);
  out.video_sal = ad::matmul(v, p[kSaliencyVideoProj]);
  out.query_sal = ad::matmul(q, p[kSaliencyQueryProj]);
  out.saliency = ad::rowwise_cosine(out.video_sal, out.query_sal, ad::ZeroNorm::kZero);

  // Count guarded rows: a zero output with a zero-norm operand.
  const Tensor& qs = out.query_sal.value();
  const bool query_zero = std::all_of(qs.data.begin(), qs.data.end(), [](double x) { return x == 0.0; });
  const Tensor& vs = out.video_sal.value();
  for (std::size_t i = 0; i < vs.rows; ++i) {
    bool row_zero = true;
    for (std::size_t j = 0; j < vs.cols; ++j) row_zero = row_zero && vs(i, j) == 0.0;
    if (row_zero || query_zero) ++out.guarded_saliency;
  }
  return out;
}

Var head_input(Var indicator, Var saliency, Combine combine) {
  if (combine == Combine::kSummation) {
    if (indicator.value().size() != saliency.value().size())
      throw ShapeError("summation head needs indicator and saliency of equal length");
    return ad::add(indicator, saliency);
  }
  return ad::concat(saliency, indicator);
}

Var forward_na_head(Tape& /*tape*/, const ParamVars& p, Var g) {
  const std::size_t steps = g.value().size();
  if (steps == 0) throw ShapeError("classification head needs a non-empty score sequence");
  Var hidden;
  for (std::size_t t = 0; t < steps; ++t) {
    Var pre = ad::add_row(ad::matmul(ad::element(g, t), p[kRnnInput]), p[kRnnBias]);
    if (t > 0) pre = ad::add(pre, ad::matmul(hidden, p[kRnnRecurrent]));
    hidden = ad::tanh(pre);
  }
  Var mlp = ad::tanh(ad::add_row(ad::matmul(hidden, p[kMlpW]), p[kMlpB]));
  return ad::sigmoid(ad::add_row(ad::matmul(mlp, p[kOutW]), p[kOutB]));
}

namespace {

ParamVars bind_constants(Tape& tape, const ModelParams& params) {
  ParamVars vars;
  for (std::size_t i = 0; i < kParamCount; ++i) vars[i] = tape.constant(params.tensors[i]);
  return vars;
}

}  // namespace

ScoreBundle run_base(const ModelParams& params, const ModelConfig& config, const Tensor& clip_feats,
                     const Tensor& query, double clip_len, std::size_t* guarded_saliency) {
  if (clip_feats.cols != config.d_feat) throw ShapeError("clip features do not match model d_feat");
  Tape tape;
  const ParamVars p = bind_constants(tape, params);
  const BaseGraph g = forward_base(tape, p, clip_feats, query, clip_len);
  if (guarded_saliency) *guarded_saliency = g.guarded_saliency;
  ScoreBundle b;
  b.indicator = g.indicator.value().data;
  b.saliency = g.saliency.value().data;
  const Tensor& off = g.offsets.value();
  b.clip_spans.resize(off.rows);
  for (std::size_t i = 0; i < off.rows; ++i) b.clip_spans[i] = {off(i, 0), off(i, 1)};
  return b;
}

double run_na_head(const ScoreBundle& bundle, const ModelParams& params, const ModelConfig& config) {
  Tape tape;
  const ParamVars p = bind_constants(tape, params);
  Var f = tape.constant(Tensor::column(bundle.indicator));
  Var s = tape.constant(Tensor::column(bundle.saliency));
  return forward_na_head(tape, p, head_input(f, s, config.combine)).scalar();
}

PredictionRecord predict(const ScoreBundle& bundle, double class_score, const VideoMeta& video,
                         const ModelConfig& config) {
  PredictionRecord rec;
  rec.qid = bundle.qid;
  rec.class_score = class_score;
  rec.decision = class_score >= config.decision_threshold ? Decision::kAccept : Decision::kReject;
  if (rec.decision == Decision::kReject) return rec;
  if (bundle.indicator.empty() || bundle.clip_spans.size() < bundle.indicator.size())
    throw ShapeError("prediction needs per-clip indicator scores and offsets");

  std::size_t best = 0;
  for (std::size_t c = 1; c < bundle.indicator.size(); ++c) {
    if (bundle.indicator[c] > bundle.indicator[best]) best = c;
  }
  const double centre = video.clip_center(static_cast<int>(best));
  const ClipOffsets& o = bundle.clip_spans[best];
  rec.span = MomentSpan{std::clamp(centre - o.left, 0.0, video.duration),
                        std::clamp(centre + o.right, 0.0, video.duration)};
  return rec;
}

Tensor clip_matrix(const EmbeddingTable& clips, const VideoMeta& video) {
  Tensor m(static_cast<std::size_t>(video.n_clips), clips.dim());
  for (int c = 0; c < video.n_clips; ++c) {
    const auto row = clips.row(clips.index_of(clip_id(video.vid, c)));
    std::copy(row.begin(), row.end(), m.data.begin() + static_cast<std::ptrdiff_t>(c * clips.dim()));
  }
  return m;
}

Tensor row_tensor(const EmbeddingTable& table, std::size_t row) {
  const auto r = table.row(row);
  return Tensor(1, r.size(), std::vector<double>(r.begin(), r.end()));
}

}  // namespace navmr
