#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "navmr/types.hpp"

namespace navmr {

struct SyntheticSpec {
  std::size_t n_videos = 20;
  std::size_t clips_per_video = 16;
  std::size_t d_feat = 32;
  std::size_t n_concepts = 20;
  double concept_separation = 4.0;  // norm of each concept prototype
  double noise_sigma = 0.1;
  std::uint64_t seed = 7;
  std::size_t segments_per_video = 4;  // contiguous single-concept segments
  std::size_t queries_per_segment = 8;  // independent noisy sentences per segment
  double clip_len = 2.0;
  std::size_t ood_pool_size = 0;  // 0: one pool sentence per positive query

  std::size_t queries_per_video() const { return segments_per_video * queries_per_segment; }

  // Concepts reserved for the out-of-domain pool; the rest appear in videos.
  std::size_t ood_concepts() const { return n_concepts / 5 > 0 ? n_concepts / 5 : 1; }
  std::size_t video_concepts() const { return n_concepts - ood_concepts(); }
  void validate() const;
};

struct SyntheticData {
  std::vector<VideoMeta> videos;
  std::vector<QueryRecord> queries;  // positives only
  EmbeddingTable clip_embeddings;    // ids "<vid>:<clip>"
  EmbeddingTable text_embeddings;    // positive qids, then "pool:<i>"
  std::vector<std::string> ood_pool;
};

// Clips and sentences alike are a shared offset + a concept prototype +
// Gaussian noise. A clip takes its segment's concept, a positive query the
// concept of one segment of its video; pool sentences use concepts that
// never occur in any video. Prototypes are orthogonal (norm
// concept_separation) whenever n_concepts + 1 <= d_feat.
SyntheticData generate_synthetic_dataset(const SyntheticSpec& spec);

}  // namespace navmr
