#pragma once

// Random instances shared by the loss tests and the acceptance run.

#include <string>
#include <vector>

#include "navmr/autodiff.hpp"
#include "navmr/losses.hpp"
#include "navmr/model.hpp"
#include "navmr/rng.hpp"

namespace navmr::testing {

inline ad::Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  ad::Tensor t(r, c);
  for (double& x : t.data) x = rng.uniform(lo, hi);
  return t;
}

struct LossInstance {
  ModelConfig model;
  VideoMeta video;
  ad::Tensor clips;  // L x d
  std::vector<ad::Tensor> query_embs;
  std::vector<QueryRecord> queries;  // mixed positive / ID / OOD
  ModelParams params;
  LossWeights weights;
  SaliencyNegMode mode = SaliencyNegMode::kCosine;
};

inline LossInstance random_loss_instance(std::uint64_t seed) {
  Rng rng(seed);
  LossInstance in;
  in.model.d_feat = 4;
  in.model.d_hidden = 3;
  in.model.combine = rng.below(2) ? Combine::kSummation : Combine::kConcatenation;
  const int n_clips = 3 + static_cast<int>(rng.below(4));
  in.video = {"v", 2.0 * n_clips, n_clips, 2.0};
  in.clips = random_tensor(rng, static_cast<std::size_t>(n_clips), in.model.d_feat);
  in.params = ModelParams::init(in.model, seed);
  for (auto& t : in.params.tensors)
    for (double& x : t.data) x += rng.uniform(-0.3, 0.3);
  in.weights.lambda_id = rng.uniform(0.05, 1.0);
  in.weights.lambda_ood = rng.uniform(0.05, 1.0);
  in.weights.lambda_b = rng.uniform(0.5, 2.0);
  in.mode = rng.below(2) ? SaliencyNegMode::kCosine : SaliencyNegMode::kLog;
  const std::size_t n = 3 + rng.below(3);
  for (std::size_t i = 0; i < n; ++i) {
    QueryRecord q;
    q.qid = "q" + std::to_string(i);
    q.vid = "v";
    const std::size_t kind = i < 2 ? i : rng.below(3);
    if (kind == 0) {
      const double a = rng.uniform(0.0, in.video.duration * 0.6);
      q.spans = {{a, std::min(in.video.duration, a + rng.uniform(0.5, in.video.duration * 0.5))}};
    } else {
      q.label = Label::kNegative;
      q.domain = kind == 1 ? Domain::kInDomain : Domain::kOutOfDomain;
    }
    in.queries.push_back(q);
    in.query_embs.push_back(random_tensor(rng, 1, in.model.d_feat));
  }
  return in;
}

// L_tot of the instance, with every parameter viewed through one flat leaf.
inline ad::Var instance_total_loss(ad::Tape& tape, ad::Var flat, const LossInstance& in) {
  const ParamVars p = bind_params(tape, flat, in.model);
  std::vector<QueryLoss> terms;
  for (std::size_t i = 0; i < in.queries.size(); ++i) {
    const BaseGraph g = forward_base(tape, p, in.clips, in.query_embs[i], in.video.clip_len);
    ad::Var y = forward_na_head(tape, p, head_input(g.indicator, g.saliency, in.model.combine));
    terms.push_back(query_loss(tape, g, y, in.queries[i], in.video, in.weights, in.mode));
  }
  return total_loss(tape, terms, in.weights).total;
}

}  // namespace navmr::testing
