#pragma once

// Data-parallel kernels. Each OpenMP kernel has a *_serial twin that walks
// the same arithmetic in the same order; tests require bit-identical results
// and bench/ compares their runtimes.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "navmr/types.hpp"

namespace navmr {

// Row-major n x n cosine similarities between the rows of a table.
struct SimilarityMatrix {
  std::vector<std::string> ids;
  std::vector<double> values;

  std::size_t size() const { return ids.size(); }
  double operator()(std::size_t i, std::size_t j) const { return values[i * ids.size() + j]; }
};

SimilarityMatrix pairwise_cosine(const EmbeddingTable& table);
SimilarityMatrix pairwise_cosine_serial(const EmbeddingTable& table);

// Cosine similarity between selected rows only (same indexing as `rows`).
SimilarityMatrix pairwise_cosine(const EmbeddingTable& table, std::span<const std::size_t> rows);
SimilarityMatrix pairwise_cosine_serial(const EmbeddingTable& table, std::span<const std::size_t> rows);

// out[i * groups.size() + g] = max over j in groups[g] of sim(i, j).
// Empty groups yield -infinity.
std::vector<double> group_max_similarity(const SimilarityMatrix& sim,
                                         std::span<const std::vector<std::size_t>> groups);
std::vector<double> group_max_similarity_serial(const SimilarityMatrix& sim,
                                                std::span<const std::vector<std::size_t>> groups);

}  // namespace navmr
