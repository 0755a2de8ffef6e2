#include "navmr/kernels.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "navmr/error.hpp"

namespace navmr {

namespace {

double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += static_cast<double>(a[k]) * static_cast<double>(b[k]);
  return acc;
}

struct CosineInputs {
  std::vector<std::size_t> rows;
  std::vector<double> norms;
};

CosineInputs prepare(const EmbeddingTable& table, std::span<const std::size_t> rows, SimilarityMatrix& out) {
  CosineInputs in;
  in.rows.assign(rows.begin(), rows.end());
  in.norms.resize(rows.size());
  out.ids.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto r = table.row(rows[i]);
    in.norms[i] = std::sqrt(dot(r, r));
    out.ids[i] = table.ids()[rows[i]];
    if (!(in.norms[i] > 0.0)) throw ValidationError("zero-norm embedding row '" + out.ids[i] + "'");
  }
  out.values.assign(rows.size() * rows.size(), 0.0);
  return in;
}

inline double cosine_entry(const EmbeddingTable& table, const CosineInputs& in, std::size_t i, std::size_t j) {
  return dot(table.row(in.rows[i]), table.row(in.rows[j])) / (in.norms[i] * in.norms[j]);
}

std::vector<std::size_t> all_rows(const EmbeddingTable& table) {
  std::vector<std::size_t> rows(table.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

inline double group_max(const SimilarityMatrix& sim, std::size_t i, const std::vector<std::size_t>& group) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j : group) best = std::max(best, sim(i, j));
  return best;
}

}  // namespace

SimilarityMatrix pairwise_cosine(const EmbeddingTable& table, std::span<const std::size_t> rows) {
  SimilarityMatrix out;
  const CosineInputs in = prepare(table, rows, out);
  const auto n = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (std::ptrdiff_t j = 0; j < n; ++j) {
      out.values[i * n + j] = cosine_entry(table, in, i, j);
    }
  }
  return out;
}

SimilarityMatrix pairwise_cosine_serial(const EmbeddingTable& table, std::span<const std::size_t> rows) {
  SimilarityMatrix out;
  const CosineInputs in = prepare(table, rows, out);
  const std::size_t n = rows.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.values[i * n + j] = cosine_entry(table, in, i, j);
  }
  return out;
}

SimilarityMatrix pairwise_cosine(const EmbeddingTable& table) {
  const auto rows = all_rows(table);
  return pairwise_cosine(table, rows);
}

SimilarityMatrix pairwise_cosine_serial(const EmbeddingTable& table) {
  const auto rows = all_rows(table);
  return pairwise_cosine_serial(table, rows);
}

std::vector<double> group_max_similarity(const SimilarityMatrix& sim,
                                         std::span<const std::vector<std::size_t>> groups) {
  const auto n = static_cast<std::ptrdiff_t>(sim.size());
  const std::size_t g = groups.size();
  std::vector<double> out(sim.size() * g);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < g; ++k) out[i * g + k] = group_max(sim, i, groups[k]);
  }
  return out;
}

std::vector<double> group_max_similarity_serial(const SimilarityMatrix& sim,
                                                std::span<const std::vector<std::size_t>> groups) {
  const std::size_t g = groups.size();
  std::vector<double> out(sim.size() * g);
  for (std::size_t i = 0; i < sim.size(); ++i) {
    for (std::size_t k = 0; k < g; ++k) out[i * g + k] = group_max(sim, i, groups[k]);
  }
  return out;
}

}  // namespace navmr
