#include "navmr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "navmr/error.hpp"
#include "navmr/rng.hpp"
#include "navmr/sampling.hpp"

namespace navmr {

void SyntheticSpec::validate() const {
  if (n_videos < 1) throw ConfigError("n_videos must be >= 1");
  if (clips_per_video < 1) throw ConfigError("clips_per_video must be >= 1");
  if (d_feat < 1) throw ConfigError("d_feat must be >= 1");
  if (n_concepts < 2) throw ConfigError("n_concepts must be >= 2");
  if (!(concept_separation >= 0.0) || !std::isfinite(concept_separation))
    throw ConfigError("concept_separation must be >= 0");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("noise_sigma must be >= 0");
  if (segments_per_video < 1) throw ConfigError("segments_per_video must be >= 1");
  if (segments_per_video > clips_per_video)
    throw ConfigError("segments_per_video must not exceed clips_per_video");
  if (queries_per_segment < 1) throw ConfigError("queries_per_segment must be >= 1");
  if (!(clip_len > 0.0)) throw ConfigError("clip_len must be > 0");
  // Each video uses segments_per_video distinct concepts; for in-domain
  // negatives to exist some concepts must be missing from every video.
  if (video_concepts() < 2 * segments_per_video)
    throw ConfigError("n_concepts too small: need at least " +
                      std::to_string(2 * segments_per_video) + " video concepts plus " +
                      std::to_string(ood_concepts()) + " out-of-domain concepts");
}

namespace {

std::vector<double> unit_gaussian(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  double norm = 0.0;
  while (norm == 0.0) {
    for (double& x : v) x = rng.normal();
    norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  }
  for (double& x : v) x /= norm;
  return v;
}

// Modified Gram-Schmidt; rows must be linearly independent.
void orthonormalize(std::vector<std::vector<double>>& rows) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double dot = std::inner_product(rows[i].begin(), rows[i].end(), rows[j].begin(), 0.0);
      for (std::size_t k = 0; k < rows[i].size(); ++k) rows[i][k] -= dot * rows[j][k];
    }
    const double norm = std::sqrt(std::inner_product(rows[i].begin(), rows[i].end(), rows[i].begin(), 0.0));
    for (double& x : rows[i]) x /= norm;
  }
}

// offset + prototype + noise, as float32 row.
void emit_row(Rng& rng, const std::vector<double>& offset, const std::vector<double>& prototype, double sigma,
              std::vector<float>& out) {
  for (std::size_t k = 0; k < offset.size(); ++k)
    out.push_back(static_cast<float>(offset[k] + prototype[k] + sigma * rng.normal()));
}

std::string padded(const char* prefix, std::size_t i, int width) {
  std::string digits = std::to_string(i);
  if (digits.size() < static_cast<std::size_t>(width)) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

}  // namespace

SyntheticData generate_synthetic_dataset(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(stream_seed(spec.seed, 0x5e));
  const std::size_t d = spec.d_feat;

  // Offset and prototype directions: mutually orthogonal when they fit in
  // d_feat, independent random unit vectors otherwise.
  std::vector<std::vector<double>> dirs(spec.n_concepts + 1);
  for (auto& v : dirs) v = unit_gaussian(rng, d);
  if (dirs.size() <= d) orthonormalize(dirs);
  const std::vector<double> offset = dirs[0];
  std::vector<std::vector<double>> prototypes(dirs.begin() + 1, dirs.end());
  for (auto& p : prototypes) {
    for (double& x : p) x *= spec.concept_separation;
  }
  const std::size_t n_video_concepts = spec.video_concepts();

  SyntheticData out;
  std::vector<std::string> clip_ids;
  std::vector<float> clip_values;
  std::vector<std::string> text_ids;
  std::vector<float> text_values;

  std::vector<std::size_t> concept_order(n_video_concepts);
  std::vector<std::size_t> cut_candidates(spec.clips_per_video - 1);
  for (std::size_t v = 0; v < spec.n_videos; ++v) {
    VideoMeta video;
    video.vid = padded("v", v, 3);
    video.n_clips = static_cast<int>(spec.clips_per_video);
    video.clip_len = spec.clip_len;
    video.duration = static_cast<double>(spec.clips_per_video) * spec.clip_len;

    // Segment boundaries: segments_per_video - 1 distinct cut points.
    std::iota(cut_candidates.begin(), cut_candidates.end(), std::size_t{1});
    rng.shuffle(cut_candidates);
    std::vector<std::size_t> bounds(cut_candidates.begin(),
                                    cut_candidates.begin() + static_cast<std::ptrdiff_t>(spec.segments_per_video - 1));
    bounds.push_back(0);
    bounds.push_back(spec.clips_per_video);
    std::sort(bounds.begin(), bounds.end());

    std::iota(concept_order.begin(), concept_order.end(), std::size_t{0});
    rng.shuffle(concept_order);

    for (std::size_t s = 0; s < spec.segments_per_video; ++s) {
      const std::size_t concept_id = concept_order[s];
      for (std::size_t c = bounds[s]; c < bounds[s + 1]; ++c) {
        clip_ids.push_back(clip_id(video.vid, static_cast<int>(c)));
        emit_row(rng, offset, prototypes[concept_id], spec.noise_sigma, clip_values);
      }
      for (std::size_t k = 0; k < spec.queries_per_segment; ++k) {
        QueryRecord q;
        q.qid = padded("q", out.queries.size(), 5);
        q.text = "event of concept " + std::to_string(concept_id) + " in " + video.vid + " take " + std::to_string(k);
        q.vid = video.vid;
        q.label = Label::kPositive;
        q.spans = {{static_cast<double>(bounds[s]) * spec.clip_len,
                    static_cast<double>(bounds[s + 1]) * spec.clip_len}};
        text_ids.push_back(q.qid);
        emit_row(rng, offset, prototypes[concept_id], spec.noise_sigma, text_values);
        out.queries.push_back(std::move(q));
      }
    }
    out.videos.push_back(std::move(video));
  }

  const std::size_t pool_size = spec.ood_pool_size > 0 ? spec.ood_pool_size : out.queries.size();
  for (std::size_t i = 0; i < pool_size; ++i) {
    const std::size_t concept_id = n_video_concepts + rng.below(spec.ood_concepts());
    out.ood_pool.push_back("unrelated scenario " + std::to_string(concept_id) + " sentence " + std::to_string(i));
    text_ids.push_back(pool_embedding_id(i));
    emit_row(rng, offset, prototypes[concept_id], spec.noise_sigma, text_values);
  }

  out.clip_embeddings = EmbeddingTable(std::move(clip_ids), d, std::move(clip_values));
  out.text_embeddings = EmbeddingTable(std::move(text_ids), d, std::move(text_values));
  return out;
}

}  // namespace navmr
