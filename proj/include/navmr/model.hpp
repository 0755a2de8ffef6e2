#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

#include "navmr/autodiff.hpp"
#include "navmr/types.hpp"

namespace navmr {

enum class Combine { kSummation, kConcatenation };

std::string_view to_string(Combine combine);
Combine parse_combine(std::string_view text);

struct ModelConfig {
  std::size_t d_feat = 32;
  std::size_t d_hidden = 50;
  Combine combine = Combine::kSummation;
  double decision_threshold = 0.5;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Parameter tensors, in checkpoint order.
enum ParamId : std::size_t {
  kVideoProj,          // d_feat x d_hidden, fusion branch
  kQueryProj,          // d_feat x d_hidden, fusion branch
  kIndicatorW,         // d_hidden x 1
  kIndicatorB,         // 1 x 1
  kBoundaryW,          // d_hidden x 2 (left, right)
  kBoundaryB,          // 1 x 2
  kSaliencyVideoProj,  // d_feat x d_hidden
  kSaliencyQueryProj,  // d_feat x d_hidden
  kRnnInput,           // 1 x d_hidden, scalar step input -> hidden
  kRnnRecurrent,       // d_hidden x d_hidden
  kRnnBias,            // 1 x d_hidden
  kMlpW,               // d_hidden x d_hidden
  kMlpB,               // 1 x d_hidden
  kOutW,               // d_hidden x 1
  kOutB,               // 1 x 1
  kParamCount
};

inline constexpr std::array<std::string_view, kParamCount> kParamNames{
    "video_proj", "query_proj", "indicator_w", "indicator_b", "boundary_w",
    "boundary_b", "saliency_video_proj", "saliency_query_proj", "rnn_input", "rnn_recurrent",
    "rnn_bias", "mlp_w", "mlp_b", "out_w", "out_b"};

// First index of the classification-head tensors.
inline constexpr std::size_t kFirstHeadParam = kRnnInput;

struct ParamShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  friend bool operator==(const ParamShape&, const ParamShape&) = default;
};

std::array<ParamShape, kParamCount> param_shapes(const ModelConfig& config);

struct ModelParams {
  std::array<ad::Tensor, kParamCount> tensors;

  ad::Tensor& operator[](std::size_t id) { return tensors[id]; }
  const ad::Tensor& operator[](std::size_t id) const { return tensors[id]; }

  static ModelParams zeros(const ModelConfig& config);
  // Xavier-uniform weights, zero biases except the RNN bias, RNN input
  // weights scaled by 4. Both saliency projections start
  // from the same matrix so initial saliency is the cosine of the inputs
  // seen through one shared random map.
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);

  std::size_t count() const;
  ad::Tensor flatten() const;
  static ModelParams unflatten(const ad::Tensor& flat, const ModelConfig& config);
  bool all_finite() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

using ParamVars = std::array<ad::Var, kParamCount>;

// Every tensor becomes its own leaf.
ParamVars bind_params(ad::Tape& tape, const ModelParams& params);
// Views into one flat leaf (for gradient checks over all parameters).
ParamVars bind_params(ad::Tape& tape, ad::Var flat, const ModelConfig& config);

struct BaseGraph {
  ad::Var indicator;    // L x 1, in (0, 1)
  ad::Var saliency;     // L x 1, in [-1, 1]
  ad::Var offsets;      // L x 2, seconds, >= 0
  ad::Var video_sal;    // L x h, projected clip features used by saliency
  ad::Var query_sal;    // 1 x h, projected query used by saliency
  std::size_t guarded_saliency = 0;  // clips whose saliency hit the zero-norm guard
};

// Per clip: h = tanh(Wv v + Wq q); f = sigmoid(w_f h + b_f);
// offsets = clip_len * softplus(W_b h + b_b); s = cos(Wsv v, Wsq q).
BaseGraph forward_base(ad::Tape& tape, const ParamVars& p, const ad::Tensor& clip_feats, const ad::Tensor& query,
                       double clip_len);

// Head input sequence: f + s (summation) or s followed by f (concatenation).
ad::Var head_input(ad::Var indicator, ad::Var saliency, Combine combine);

// sigmoid(MLP(final hidden state of a tanh RNN over g)), 1 x 1.
ad::Var forward_na_head(ad::Tape& tape, const ParamVars& p, ad::Var g);

// Value-level wrappers that build and discard a tape.
ScoreBundle run_base(const ModelParams& params, const ModelConfig& config, const ad::Tensor& clip_feats,
                     const ad::Tensor& query, double clip_len, std::size_t* guarded_saliency = nullptr);
double run_na_head(const ScoreBundle& bundle, const ModelParams& params, const ModelConfig& config);

// Top clip by indicator (lowest index on ties), span around its centre,
// clamped to the video; the span is attached only when accepted.
PredictionRecord predict(const ScoreBundle& bundle, double class_score, const VideoMeta& video,
                         const ModelConfig& config);

// Clip features of `video` as an L x d tensor, and one table row as 1 x d.
ad::Tensor clip_matrix(const EmbeddingTable& clips, const VideoMeta& video);
ad::Tensor row_tensor(const EmbeddingTable& table, std::size_t row);

}  // namespace navmr
