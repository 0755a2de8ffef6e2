#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "navmr/autodiff.hpp"
#include "navmr/error.hpp"
#include "navmr/losses.hpp"
#include "navmr/model.hpp"
#include "navmr/types.hpp"

namespace navmr {

// Everything the trainer and evaluator read from a data directory.
struct Dataset {
  std::vector<VideoMeta> videos;
  std::vector<QueryRecord> positives;
  std::vector<QueryRecord> id_negatives;
  std::vector<QueryRecord> ood_negatives;
  std::shared_ptr<const EmbeddingTable> text_embeddings;
  std::shared_ptr<const EmbeddingTable> clip_embeddings;

  const VideoMeta& video(const std::string& vid) const;
  std::vector<QueryRecord> all_queries() const;  // positives, then ID, then OOD
};

// File names inside a data directory.
namespace data_files {
inline constexpr const char* kVideos = "videos.jsonl";
inline constexpr const char* kQueries = "queries.jsonl";
inline constexpr const char* kIdNegatives = "id_negatives.jsonl";
inline constexpr const char* kOodNegatives = "ood_negatives.jsonl";
inline constexpr const char* kTextEmbeddings = "text_embeddings.bin";
inline constexpr const char* kClipEmbeddings = "clip_embeddings.bin";
inline constexpr const char* kOodPool = "ood_pool.txt";
}  // namespace data_files

// Negative files are optional; the rest must exist.
Dataset load_dataset(const std::filesystem::path& dir);

struct DatasetSplit {
  Dataset train;
  Dataset validation;
};

// Holds out round(fraction * |videos|) videos, ranked by a seed-stable hash
// of the vid. Queries follow their video.
DatasetSplit split_dataset(const Dataset& data, std::uint64_t seed, double fraction = 0.2);

enum class OptimizerKind { kSgd, kAdam };
std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view text);

struct TrainConfig {
  std::size_t batch_pos = 32;
  std::size_t batch_id = 32;
  std::size_t batch_ood = 32;
  std::size_t epochs = 30;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 7;
  SaliencyNegMode saliency_neg_mode = SaliencyNegMode::kCosine;
  LossWeights weights;

  void validate() const;
};

struct TripleBatch {
  std::vector<QueryRecord> pos;
  std::vector<QueryRecord> id;
  std::vector<QueryRecord> ood;
};

// One epoch of batches. Positives are shuffled and the trailing partial
// batch dropped. Negatives are shuffled and cycled when short; OOD
// sentences drawn again get a fresh random video per occurrence, never
// repeating a (sentence, video) pair, and a "#r<k>" qid suffix.
std::vector<TripleBatch> make_batches(const Dataset& data, const TrainConfig& config, std::uint64_t epoch_seed);

class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& config) : config_(config) {}
  // params -= update(grad); grad has the layout of ModelParams::flatten.
  void step(ModelParams& params, const ad::Tensor& grad);

 private:
  TrainConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

struct BatchGradient {
  ad::Tensor grad;  // flat, as ModelParams::flatten
  LossBreakdown breakdown;
};

// Forward + backward of one triple batch. Each query is differentiated on
// its own tape with weight lambda_domain / n_domain; per-query gradients are
// summed in qid order. The serial twin is the test reference.
BatchGradient batch_gradient(const ModelParams& params, const ModelConfig& model, const Dataset& data,
                             const TripleBatch& batch, const TrainConfig& config);
BatchGradient batch_gradient_serial(const ModelParams& params, const ModelConfig& model, const Dataset& data,
                                    const TripleBatch& batch, const TrainConfig& config);

// Thrown when a batch produces a non-finite loss or gradient.
class NonFiniteLoss : public NumericError {
 public:
  NonFiniteLoss(std::string message, std::vector<std::string> qids, std::size_t epoch, std::size_t step)
      : NumericError(std::move(message)), qids_(std::move(qids)), epoch_(epoch), step_(step) {}
  const std::vector<std::string>& qids() const { return qids_; }
  std::size_t epoch() const { return epoch_; }
  std::size_t step() const { return step_; }

 private:
  std::vector<std::string> qids_;
  std::size_t epoch_;
  std::size_t step_;
};

struct EpochLog {
  std::size_t epoch = 0;
  double l_tot = 0.0;  // means over the epoch's steps
  double l_p = 0.0;
  double l_f = 0.0;
  double l_b = 0.0;
  double l_s = 0.0;
  std::optional<double> r1_05;  // validation metrics, when a split is given
  std::optional<double> ra_id;
  std::optional<double> ra_ood;
};

struct StepLog {
  std::size_t epoch = 0;
  std::size_t step = 0;
  LossBreakdown breakdown;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> epochs;
  std::vector<StepLog> steps;
};

TrainResult train_loop(ModelParams params, const ModelConfig& model, const Dataset& train,
                       const Dataset* validation, const TrainConfig& config);

std::string format_epoch_log(const std::vector<EpochLog>& log);
std::string format_step_log(const std::vector<StepLog>& log);

// Base + head scores for each query, in input order.
std::vector<ScoreBundle> infer_scores(const ModelParams& params, const ModelConfig& model, const Dataset& data,
                                      const std::vector<QueryRecord>& queries);
std::vector<ScoreBundle> infer_scores_serial(const ModelParams& params, const ModelConfig& model,
                                             const Dataset& data, const std::vector<QueryRecord>& queries);

// Decisions from the head score, or accept-everything when `accept_all`.
std::vector<PredictionRecord> predictions_from_scores(const std::vector<ScoreBundle>& bundles, const Dataset& data,
                                                      const std::vector<QueryRecord>& queries,
                                                      const ModelConfig& model, bool accept_all = false);

}  // namespace navmr
