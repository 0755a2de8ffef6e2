#include <doctest.h>

#include <cmath>
#include <limits>

#include "navmr/kernels.hpp"
#include "navmr/rng.hpp"

using namespace navmr;

namespace {

EmbeddingTable random_table(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> ids;
  std::vector<float> v;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("s" + std::to_string(i));
    for (std::size_t k = 0; k < dim; ++k) v.push_back(static_cast<float>(rng.normal() + (k == 0 ? 0.1 : 0.0)));
  }
  return EmbeddingTable(ids, dim, v);
}

double naive_cosine(std::span<const float> a, std::span<const float> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += double(a[k]) * b[k];
    aa += double(a[k]) * a[k];
    bb += double(b[k]) * b[k];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_CASE("cosine of (1,1) and (1,0)") {
  const EmbeddingTable t({"a", "b"}, 2, {1, 1, 1, 0});
  const auto sim = pairwise_cosine(t);
  CHECK(sim(0, 1) == doctest::Approx(0.70710678).epsilon(1e-8));
  CHECK(sim(1, 0) == sim(0, 1));
  CHECK(sim(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("pairwise cosine matches a direct computation") {
  const auto t = random_table(40, 13, 5);
  const auto sim = pairwise_cosine(t);
  REQUIRE(sim.size() == 40);
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = 0; j < 40; ++j) CHECK(sim(i, j) == doctest::Approx(naive_cosine(t.row(i), t.row(j))).epsilon(1e-12));
}

TEST_CASE("serial and parallel twins agree bit for bit") {
  const auto t = random_table(120, 24, 9);
  const auto a = pairwise_cosine(t);
  const auto b = pairwise_cosine_serial(t);
  CHECK(a.ids == b.ids);
  CHECK(a.values == b.values);

  const std::vector<std::size_t> rows{3, 1, 77, 50, 2};
  CHECK(pairwise_cosine(t, rows).values == pairwise_cosine_serial(t, rows).values);

  std::vector<std::vector<std::size_t>> groups{{0, 1, 2}, {}, {5}, {10, 11, 12, 13, 119}};
  const auto g1 = group_max_similarity(a, groups);
  const auto g2 = group_max_similarity_serial(a, groups);
  CHECK(g1 == g2);
}

TEST_CASE("group max similarity") {
  const EmbeddingTable t({"a", "b", "c"}, 2, {1, 0, 0, 1, 1, 1});
  const auto sim = pairwise_cosine(t);
  const std::vector<std::vector<std::size_t>> groups{{1, 2}, {}};
  const auto out = group_max_similarity(sim, groups);
  REQUIRE(out.size() == 6);
  CHECK(out[0] == doctest::Approx(std::sqrt(0.5)));
  CHECK(out[1] == -std::numeric_limits<double>::infinity());
  CHECK(out[2 * 2 + 0] == doctest::Approx(1.0));
}
