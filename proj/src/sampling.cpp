#include "navmr/sampling.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "navmr/error.hpp"
#include "navmr/metrics.hpp"
#include "navmr/rng.hpp"

namespace navmr {

namespace {

constexpr std::uint64_t kIdStream = 0x1d;
constexpr std::uint64_t kOodStream = 0x00d;

std::size_t sim_index(const SimilarityMatrix& sim, const std::string& id) {
  auto it = std::find(sim.ids.begin(), sim.ids.end(), id);
  if (it == sim.ids.end()) throw DataError("sentence '" + id + "' is not in the similarity matrix");
  return static_cast<std::size_t>(it - sim.ids.begin());
}

}  // namespace

std::string pool_embedding_id(std::size_t index) { return "pool:" + std::to_string(index); }

double video_pseudo_similarity(const std::string& sentence_id, const std::string& vid, const SimilarityMatrix& sim,
                               std::span<const QueryRecord> queries) {
  const std::size_t i = sim_index(sim, sentence_id);
  bool any = false;
  double best = 0.0;
  for (const auto& q : queries) {
    if (!q.is_positive() || q.vid != vid) continue;
    if (q.embedding_key() == sentence_id)
      throw DataError("sentence '" + sentence_id + "' belongs to video '" + vid + "'");
    const double s = sim(i, sim_index(sim, q.embedding_key()));
    best = any ? std::max(best, s) : s;
    any = true;
  }
  if (!any) throw DataError("video '" + vid + "' has no positive queries");
  return best;
}

IdNegativeSample sample_id_negatives(std::span<const QueryRecord> queries, const EmbeddingTable& embeddings,
                                     std::uint64_t seed, bool apply_percentile_filter) {
  std::vector<const QueryRecord*> positives;
  std::vector<std::string> videos;
  std::unordered_map<std::string, std::size_t> video_index;
  std::vector<std::vector<std::size_t>> members;
  std::vector<std::size_t> rows;
  for (const auto& q : queries) {
    if (!q.is_positive()) continue;
    auto found = embeddings.find(q.embedding_key());
    if (!found) throw DataError("missing embedding for query '" + q.qid + "'");
    auto [it, inserted] = video_index.emplace(q.vid, videos.size());
    if (inserted) {
      videos.push_back(q.vid);
      members.emplace_back();
    }
    members[it->second].push_back(positives.size());
    positives.push_back(&q);
    rows.push_back(*found);
  }
  if (videos.size() < 2) {
    std::string names;
    for (const auto* q : positives) names += (names.empty() ? "" : ", ") + q->qid;
    throw DataError("cannot assign in-domain negatives with fewer than 2 videos; unassignable: " + names);
  }

  const SimilarityMatrix sim = pairwise_cosine(embeddings, rows);
  const std::vector<double> pseudo = group_max_similarity(sim, members);
  const std::size_t n_videos = videos.size();

  IdNegativeSample out;
  out.plan.seed = seed;
  out.plan.filter_applied = apply_percentile_filter;
  out.negatives.reserve(positives.size());
  out.plan.entries.reserve(positives.size());

  Rng rng(stream_seed(seed, kIdStream));
  std::vector<double> candidate_scores;
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const QueryRecord& src = *positives[i];
    const std::size_t source = video_index.at(src.vid);
    const double* row = pseudo.data() + i * n_videos;

    candidate_scores.clear();
    for (std::size_t v = 0; v < n_videos; ++v) {
      if (v != source) candidate_scores.push_back(row[v]);
    }
    const double cutoff = apply_percentile_filter ? percentile(candidate_scores, 50.0) : 0.0;

    eligible.clear();
    for (std::size_t v = 0; v < n_videos; ++v) {
      if (v == source) continue;
      if (!apply_percentile_filter || row[v] <= cutoff) eligible.push_back(v);
    }
    const std::size_t chosen = eligible[rng.below(eligible.size())];

    QueryRecord neg;
    neg.qid = src.qid + "_idneg";
    neg.text = src.text;
    neg.vid = videos[chosen];
    neg.label = Label::kNegative;
    neg.domain = Domain::kInDomain;
    neg.emb_key = src.embedding_key();
    out.plan.entries.push_back({neg.qid, src.vid, neg.vid, row[chosen]});
    out.negatives.push_back(std::move(neg));
  }
  return out;
}

std::vector<QueryRecord> sample_ood_assignments(std::span<const std::string> pool,
                                                std::span<const std::string> videos, std::size_t target_count,
                                                std::uint64_t seed) {
  if (pool.empty()) throw DataError("out-of-domain pool is empty");
  if (videos.empty()) throw DataError("no videos to assign out-of-domain negatives to");
  if (target_count < 1) throw ConfigError("out-of-domain target count must be >= 1");
  if (target_count > pool.size() * videos.size())
    throw DataError("cannot place " + std::to_string(target_count) + " out-of-domain negatives: only " +
                    std::to_string(pool.size() * videos.size()) + " distinct (sentence, video) pairs exist");

  Rng rng(stream_seed(seed, kOodStream));
  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  std::vector<std::unordered_set<std::size_t>> used(pool.size());
  std::vector<std::size_t> free_videos;
  std::vector<QueryRecord> out;
  out.reserve(target_count);
  for (std::size_t k = 0; k < target_count; ++k) {
    const std::size_t sentence = order[k % order.size()];
    free_videos.clear();
    for (std::size_t v = 0; v < videos.size(); ++v) {
      if (!used[sentence].contains(v)) free_videos.push_back(v);
    }
    const std::size_t v = free_videos[rng.below(free_videos.size())];
    used[sentence].insert(v);

    QueryRecord q;
    q.qid = "ood_" + std::to_string(k);
    q.text = pool[sentence];
    q.vid = videos[v];
    q.label = Label::kNegative;
    q.domain = Domain::kOutOfDomain;
    q.emb_key = pool_embedding_id(sentence);
    out.push_back(std::move(q));
  }
  return out;
}

std::string format_assignment_plan(const AssignmentPlan& plan) {
  std::string out;
  for (const auto& e : plan.entries) {
    nlohmann::json j{{"qid", e.qid},
                     {"source_vid", e.source_vid},
                     {"assigned_vid", e.assigned_vid},
                     {"pseudo_similarity", e.pseudo_similarity},
                     {"filter_applied", plan.filter_applied},
                     {"seed", plan.seed}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace navmr
