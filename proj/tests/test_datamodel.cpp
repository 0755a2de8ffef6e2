#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "navmr/error.hpp"
#include "navmr/io.hpp"
#include "navmr/types.hpp"

using namespace navmr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "navmr_test_datamodel";
  fs::create_directories(dir);
  return dir / name;
}

std::string le32(std::uint32_t v) {
  std::string s(4, '\0');
  for (int i = 0; i < 4; ++i) s[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  return s;
}

// Hand-built NAVEMB1 image, independent of encode_embeddings.
std::string embedding_image(const std::vector<std::string>& ids, std::uint32_t dim, const std::vector<float>& v) {
  std::string out("NAVEMB1\0", 8);
  out += le32(static_cast<std::uint32_t>(ids.size()));
  out += le32(dim);
  for (const auto& id : ids) {
    out.push_back(static_cast<char>(id.size() & 0xff));
    out.push_back(static_cast<char>(id.size() >> 8));
    out += id;
  }
  for (float f : v) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    out += le32(bits);
  }
  return out;
}

}  // namespace

TEST_CASE("positive query line maps directly onto a record") {
  const auto qs = parse_query_set(
      R"({"qid":"q1","text":"a person opens the oven","vid":"v1","label":"positive","spans":[[2.0,6.0]]})");
  REQUIRE(qs.size() == 1);
  CHECK(qs[0].qid == "q1");
  CHECK(qs[0].text == "a person opens the oven");
  CHECK(qs[0].label == Label::kPositive);
  CHECK(qs[0].domain == Domain::kNone);
  REQUIRE(qs[0].spans.size() == 1);
  CHECK(qs[0].spans[0] == MomentSpan{2.0, 6.0});
}

TEST_CASE("negative in-domain line") {
  const auto qs = parse_query_set(
      R"({"qid":"n1","text":"x","vid":"v1","label":"negative","domain":"in_domain","spans":[]})");
  REQUIRE(qs.size() == 1);
  CHECK(qs[0].label == Label::kNegative);
  CHECK(qs[0].domain == Domain::kInDomain);
  CHECK(qs[0].spans.empty());
}

TEST_CASE("positive without spans is a validation error") {
  CHECK_THROWS_AS(parse_query_set(R"({"qid":"q1","text":"x","vid":"v1","label":"positive","spans":[]})"),
                  ValidationError);
}

TEST_CASE("malformed line reports its line number") {
  const std::string text =
      "{\"qid\":\"q1\",\"text\":\"x\",\"vid\":\"v1\",\"label\":\"positive\",\"spans\":[[0,1]]}\n"
      "{\"qid\": broken\n";
  try {
    parse_query_set(text, "set.jsonl");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("query set round trip is exact") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::vector<QueryRecord> qs;
  for (int i = 0; i < 50; ++i) {
    QueryRecord q;
    q.qid = "q" + std::to_string(i);
    q.text = "sentence \"" + std::to_string(i) + "\" with ünïcode";
    q.vid = "v" + std::to_string(i % 7);
    if (i % 3 == 0) {
      q.label = Label::kNegative;
      q.domain = i % 2 ? Domain::kInDomain : Domain::kOutOfDomain;
      q.emb_key = "pool:" + std::to_string(i);
    } else {
      const double a = u(gen);
      q.spans = {{a, a + 0.1 + u(gen)}};
      if (i % 4 == 0) q.gt_saliency = std::vector<double>{0.0, 0.25, 1.0 / 3.0};
    }
    qs.push_back(q);
  }
  const fs::path p = scratch("round.jsonl");
  save_query_set(p, qs);
  const auto back = load_query_set(p);
  REQUIRE(back.size() == qs.size());
  for (std::size_t i = 0; i < qs.size(); ++i) {
    CHECK(back[i].qid == qs[i].qid);
    CHECK(back[i].text == qs[i].text);
    CHECK(back[i].domain == qs[i].domain);
    CHECK(back[i].spans == qs[i].spans);
    CHECK(back[i].gt_saliency == qs[i].gt_saliency);
    CHECK(back[i].embedding_key() == qs[i].embedding_key());
  }
}

TEST_CASE("binary embeddings: header echo") {
  const auto t = parse_embeddings(embedding_image({"a", "b"}, 3, {1, 2, 3, 4, 5, 6}));
  CHECK(t.rows() == 2);
  CHECK(t.dim() == 3);
  CHECK(t.row(1)[2] == 6.0f);
  CHECK(encode_embeddings(t) == embedding_image({"a", "b"}, 3, {1, 2, 3, 4, 5, 6}));
}

TEST_CASE("binary embeddings: rejected inputs") {
  CHECK_THROWS_AS(parse_embeddings(embedding_image({"q1", "q1"}, 2, {1, 2, 3, 4})), ValidationError);
  CHECK_THROWS_AS(parse_embeddings(embedding_image({"a", "b"}, 2, {1, 2, 0, 0})), ValidationError);
  std::string truncated = embedding_image({"a"}, 4, {1, 2, 3, 4});
  truncated.resize(truncated.size() - 3);
  CHECK_THROWS_AS(parse_embeddings(truncated), DataError);
  std::string bad_magic = embedding_image({"a"}, 1, {1});
  bad_magic[6] = '2';
  CHECK_THROWS_AS(parse_embeddings(bad_magic), DataError);
  CHECK_THROWS_AS(parse_embeddings(embedding_image({"a"}, 1, {1}) + "x"), DataError);
}

TEST_CASE("embedding round trip across dims 1..512") {
  std::mt19937_64 gen(11);
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (std::size_t dim : {1u, 2u, 3u, 17u, 64u, 255u, 512u}) {
    std::vector<std::string> ids;
    std::vector<float> v;
    for (int r = 0; r < 5; ++r) {
      ids.push_back("row" + std::to_string(r));
      for (std::size_t k = 0; k < dim; ++k) v.push_back(n(gen) + (k == 0 ? 10.0f : 0.0f));
    }
    const EmbeddingTable t(ids, dim, v);
    const fs::path p = scratch("emb.bin");
    save_embeddings(p, t);
    CHECK(load_embeddings(p) == t);
    const fs::path c = scratch("emb.csv");
    save_embeddings_csv(c, t);
    CHECK(load_embeddings(c) == t);
  }
}

TEST_CASE("predictions round trip and accept iff span") {
  std::vector<PredictionRecord> ps{{"a", 0.9, Decision::kAccept, MomentSpan{1.5, 3.25}},
                                   {"b", 0.1, Decision::kReject, std::nullopt}};
  const fs::path p = scratch("preds.jsonl");
  save_predictions(p, ps);
  const auto back = load_predictions(p);
  REQUIRE(back.size() == 2);
  CHECK(back[0].span == ps[0].span);
  CHECK(back[0].class_score == 0.9);
  CHECK(!back[1].span);
  write_file_atomic(p, R"({"qid":"c","class_score":0.7,"decision":"accept","span":null})" "\n");
  CHECK_THROWS_AS(load_predictions(p), DataError);
}

TEST_CASE("score bundles round trip") {
  ScoreBundle b{"q", {0.25, 0.5}, {-0.125, 1.0}, {{1.0, 2.0}, {0.5, 0.0}}, 0.75};
  const fs::path p = scratch("scores.jsonl");
  save_score_bundles(p, std::vector<ScoreBundle>{b});
  const auto back = load_score_bundles(p);
  REQUIRE(back.size() == 1);
  CHECK(back[0].indicator == b.indicator);
  CHECK(back[0].saliency == b.saliency);
  CHECK(back[0].clip_spans[0].right == 2.0);
  CHECK(back[0].class_score == 0.75);
}

TEST_CASE("video tiling invariant") {
  CHECK_NOTHROW((VideoMeta{"v", 150.0, 75, 2.0}).validate());
  CHECK_NOTHROW((VideoMeta{"v", 149.5, 75, 2.0}).validate());
  CHECK_THROWS_AS((VideoMeta{"v", 150.0, 74, 2.0}).validate(), ValidationError);
  CHECK_THROWS_AS((VideoMeta{"v", 148.0, 75, 2.0}).validate(), ValidationError);
}

TEST_CASE("validate_dataset reports instead of throwing") {
  const std::vector<VideoMeta> videos{{"v1", 10.0, 5, 2.0}};
  const EmbeddingTable text({"q1", "q2"}, 2, {1, 0, 0, 1});

  std::vector<QueryRecord> qs(1);
  qs[0].qid = "q1";
  qs[0].vid = "v1";
  qs[0].spans = {{2.0, 6.0}};
  CHECK(validate_dataset(qs, videos, text).consistent());

  auto dangling = qs;
  dangling[0].vid = "v9";
  const auto r1 = validate_dataset(dangling, videos, text);
  CHECK(r1.issues.size() == 1);
  CHECK(r1.count(IssueKind::kDanglingVideo) == 1);

  auto reversed = qs;
  reversed[0].spans = {{5.0, 3.0}};
  const auto r2 = validate_dataset(reversed, videos, text);
  CHECK(r2.issues.size() == 1);
  CHECK(r2.count(IssueKind::kSpanOrder) == 1);

  auto late = qs;
  late[0].spans = {{8.0, 12.0}};
  CHECK(validate_dataset(late, videos, text).count(IssueKind::kSpanOutOfRange) == 1);

  auto unembedded = qs;
  unembedded[0].qid = "q7";
  CHECK(validate_dataset(unembedded, videos, text).count(IssueKind::kMissingEmbedding) == 1);

  auto sal = qs;
  sal[0].gt_saliency = std::vector<double>{0.0, 1.0};
  CHECK(validate_dataset(sal, videos, text).count(IssueKind::kSaliencyLength) == 1);
}

TEST_CASE("loss weight presets") {
  const auto q = LossWeights::qvhighlights();
  CHECK(q.lambda_pos == 1.0);
  CHECK(q.lambda_id == 0.1);
  CHECK(q.lambda_ood == 0.1);
  const auto c = LossWeights::charades();
  CHECK(c.lambda_id == 0.5);
  CHECK(c.lambda_ood == 0.5);
  LossWeights bad;
  bad.lambda_f = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
