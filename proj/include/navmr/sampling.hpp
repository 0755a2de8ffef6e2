#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "navmr/kernels.hpp"
#include "navmr/types.hpp"

namespace navmr {

struct Assignment {
  std::string qid;
  std::string source_vid;
  std::string assigned_vid;
  double pseudo_similarity = 0.0;
};

struct AssignmentPlan {
  std::vector<Assignment> entries;
  std::uint64_t seed = 0;
  bool filter_applied = true;
};

struct IdNegativeSample {
  std::vector<QueryRecord> negatives;
  AssignmentPlan plan;
};

// Sentence-to-video pseudo-similarity: the best cosine similarity between
// sentence `sentence_id` (a row id of `sim`) and any positive query of `vid`.
double video_pseudo_similarity(const std::string& sentence_id, const std::string& vid, const SimilarityMatrix& sim,
                               std::span<const QueryRecord> queries);

// One in-domain negative per positive query: the sentence is moved to another
// video chosen uniformly from the eligible set. With the filter on, eligible
// videos are those whose pseudo-similarity is at or below the median over all
// non-source videos for that sentence.
IdNegativeSample sample_id_negatives(std::span<const QueryRecord> queries, const EmbeddingTable& embeddings,
                                     std::uint64_t seed, bool apply_percentile_filter = true);

// Out-of-domain negatives drawn from a sentence pool. Pool sentence i is
// expected under embedding id pool_embedding_id(i). Sentences are used at
// most once while target_count <= |pool|; beyond that they are reused but
// every (sentence, video) pair stays unique.
std::vector<QueryRecord> sample_ood_assignments(std::span<const std::string> pool,
                                                std::span<const std::string> videos, std::size_t target_count,
                                                std::uint64_t seed);

std::string pool_embedding_id(std::size_t index);

// Line-delimited audit export of a plan.
std::string format_assignment_plan(const AssignmentPlan& plan);

}  // namespace navmr
