#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "navmr/types.hpp"

namespace navmr {

namespace fs = std::filesystem;

// Line-delimited JSON query sets. One record per line, blank lines skipped.
std::vector<QueryRecord> load_query_set(const fs::path& path);
std::vector<QueryRecord> parse_query_set(std::string_view text, const std::string& source = "<memory>");
void save_query_set(const fs::path& path, std::span<const QueryRecord> records);
std::string format_query_set(std::span<const QueryRecord> records);

std::vector<VideoMeta> load_videos(const fs::path& path);
void save_videos(const fs::path& path, std::span<const VideoMeta> videos);

// Binary "NAVEMB1\0" format, or CSV (id, floats...) when the magic is absent.
EmbeddingTable load_embeddings(const fs::path& path);
EmbeddingTable parse_embeddings(std::string_view bytes, const std::string& source = "<memory>");
void save_embeddings(const fs::path& path, const EmbeddingTable& table);
std::string encode_embeddings(const EmbeddingTable& table);
void save_embeddings_csv(const fs::path& path, const EmbeddingTable& table);

std::vector<PredictionRecord> load_predictions(const fs::path& path);
void save_predictions(const fs::path& path, std::span<const PredictionRecord> predictions);

// Score dumps: one ScoreBundle per line.
std::vector<ScoreBundle> load_score_bundles(const fs::path& path);
void save_score_bundles(const fs::path& path, std::span<const ScoreBundle> bundles);

// Plain UTF-8, one sentence per line; empty lines are skipped.
std::vector<std::string> load_sentence_pool(const fs::path& path);
void save_sentence_pool(const fs::path& path, std::span<const std::string> sentences);

std::string read_file(const fs::path& path);
// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const fs::path& path, std::string_view contents);

enum class IssueKind {
  kDuplicateQid,
  kDuplicateVid,
  kDanglingVideo,
  kMissingEmbedding,
  kMissingClipEmbedding,
  kSpanOrder,
  kSpanOutOfRange,
  kLabelMismatch,
  kSaliencyLength,
  kVideoTiling,
};

std::string_view to_string(IssueKind kind);

struct DatasetIssue {
  IssueKind kind;
  std::string subject;  // qid or vid
  std::string message;
};

struct DatasetReport {
  std::vector<DatasetIssue> issues;
  bool consistent() const { return issues.empty(); }
  std::size_t count(IssueKind kind) const;
};

// Collects every consistency problem instead of throwing. `clip_embeddings`
// may be null when only sentence-side data is being checked.
DatasetReport validate_dataset(std::span<const QueryRecord> queries, std::span<const VideoMeta> videos,
                               const EmbeddingTable& text_embeddings,
                               const EmbeddingTable* clip_embeddings = nullptr);

}  // namespace navmr
