#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace navmr {

struct VideoMeta {
  std::string vid;
  double duration = 0.0;  // seconds
  int n_clips = 0;
  double clip_len = 0.0;  // seconds

  double clip_start(int c) const { return c * clip_len; }
  double clip_center(int c) const { return (c + 0.5) * clip_len; }
  // Throws ValidationError unless the clips tile the video.
  void validate() const;
};

struct MomentSpan {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  friend bool operator==(const MomentSpan&, const MomentSpan&) = default;
};

enum class Label { kPositive, kNegative };
enum class Domain { kNone, kInDomain, kOutOfDomain };
enum class Decision { kAccept, kReject };

std::string_view to_string(Label label);
std::string_view to_string(Domain domain);
std::string_view to_string(Decision decision);
Label parse_label(std::string_view text);
Domain parse_domain(std::string_view text);
Decision parse_decision(std::string_view text);

struct QueryRecord {
  std::string qid;
  std::string text;
  std::string vid;
  Label label = Label::kPositive;
  Domain domain = Domain::kNone;
  std::vector<MomentSpan> spans;
  std::optional<std::vector<double>> gt_saliency;
  // Row id of the sentence embedding; empty means "same as qid". Negatives
  // built from an existing sentence point at that sentence's row.
  std::string emb_key;

  const std::string& embedding_key() const { return emb_key.empty() ? qid : emb_key; }
  bool is_positive() const { return label == Label::kPositive; }
  // Label/domain/span consistency; throws ValidationError naming the qid.
  void validate() const;
};

// Dense float rows keyed by id. Immutable once constructed; the constructor
// rejects duplicate ids, ragged payloads and all-zero rows.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> ids, std::size_t dim, std::vector<float> values);

  std::size_t rows() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<float>& values() const { return values_; }
  std::span<const float> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  std::optional<std::size_t> find(const std::string& id) const;
  // Like find(), but throws DataError naming the id when it is absent.
  std::size_t index_of(const std::string& id) const;

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.values_ == b.values_;
  }

 private:
  std::vector<std::string> ids_;
  std::size_t dim_ = 0;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Clip feature rows of a video are stored under "<vid>:<clip index>".
std::string clip_id(std::string_view vid, int clip);

struct ClipOffsets {
  double left = 0.0;   // seconds before the clip centre
  double right = 0.0;  // seconds after the clip centre
};

struct ScoreBundle {
  std::string qid;
  std::vector<double> indicator;  // length M
  std::vector<double> saliency;   // length L_v
  std::vector<ClipOffsets> clip_spans;  // length L_v
  double class_score = 0.0;  // head output; 0 until a head has run
};

struct PredictionRecord {
  std::string qid;
  double class_score = 0.0;
  Decision decision = Decision::kReject;
  std::optional<MomentSpan> span;  // present iff accepted
};

struct LossWeights {
  double lambda_p = 1.0;
  double lambda_pos = 1.0;
  double lambda_id = 0.1;
  double lambda_ood = 0.1;
  double lambda_s_neg = 1.0;
  double lambda_f = 1.0;
  double lambda_b = 1.0;
  double lambda_s = 1.0;

  // QVHighlights-style weights (the defaults above).
  static LossWeights qvhighlights() { return {}; }
  // Charades-style weights: negative domains up-weighted to 0.5.
  static LossWeights charades() {
    LossWeights w;
    w.lambda_id = 0.5;
    w.lambda_ood = 0.5;
    return w;
  }
  void validate() const;
};

}  // namespace navmr
