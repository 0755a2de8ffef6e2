#include "navmr/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "navmr/error.hpp"

namespace navmr {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Domain type helpers

std::string_view to_string(Label label) {
  return label == Label::kPositive ? "positive" : "negative";
}

std::string_view to_string(Domain domain) {
  switch (domain) {
    case Domain::kNone: return "none";
    case Domain::kInDomain: return "in_domain";
    case Domain::kOutOfDomain: return "out_of_domain";
  }
  return "none";
}

std::string_view to_string(Decision decision) {
  return decision == Decision::kAccept ? "accept" : "reject";
}

Label parse_label(std::string_view text) {
  if (text == "positive") return Label::kPositive;
  if (text == "negative") return Label::kNegative;
  throw ValidationError("unknown label '" + std::string(text) + "'");
}

Domain parse_domain(std::string_view text) {
  if (text == "none") return Domain::kNone;
  if (text == "in_domain") return Domain::kInDomain;
  if (text == "out_of_domain") return Domain::kOutOfDomain;
  throw ValidationError("unknown domain '" + std::string(text) + "'");
}

Decision parse_decision(std::string_view text) {
  if (text == "accept") return Decision::kAccept;
  if (text == "reject") return Decision::kReject;
  throw ValidationError("unknown decision '" + std::string(text) + "'");
}

void VideoMeta::validate() const {
  if (vid.empty()) throw ValidationError("video with empty vid");
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw ValidationError("video " + vid + ": duration must be > 0");
  if (n_clips < 1) throw ValidationError("video " + vid + ": n_clips must be >= 1");
  if (!(clip_len > 0.0) || !std::isfinite(clip_len))
    throw ValidationError("video " + vid + ": clip_len must be > 0");
  if (n_clips * clip_len < duration || (n_clips - 1) * clip_len >= duration)
    throw ValidationError("video " + vid + ": clips do not tile the duration");
}

void QueryRecord::validate() const {
  if (qid.empty()) throw ValidationError("query with empty qid");
  if (vid.empty()) throw ValidationError("query " + qid + ": empty vid");
  if (label == Label::kPositive) {
    if (domain != Domain::kNone)
      throw ValidationError("query " + qid + ": positive query must have domain none");
    if (spans.empty()) throw ValidationError("query " + qid + ": positive query without spans");
  } else {
    if (domain == Domain::kNone)
      throw ValidationError("query " + qid + ": negative query needs domain in_domain or out_of_domain");
    if (!spans.empty()) throw ValidationError("query " + qid + ": negative query with spans");
  }
  for (const auto& s : spans) {
    if (!std::isfinite(s.start) || !std::isfinite(s.end) || s.start < 0.0 || s.start >= s.end)
      throw ValidationError("query " + qid + ": invalid span");
  }
  if (gt_saliency) {
    for (double v : *gt_saliency) {
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("query " + qid + ": gt_saliency outside [0,1]");
    }
  }
}

EmbeddingTable::EmbeddingTable(std::vector<std::string> ids, std::size_t dim, std::vector<float> values)
    : ids_(std::move(ids)), dim_(dim), values_(std::move(values)) {
  if (dim_ == 0) throw ValidationError("embedding dim must be positive");
  if (values_.size() != ids_.size() * dim_) throw ValidationError("embedding payload size mismatch");
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) throw ValidationError("duplicate embedding id '" + ids_[i] + "'");
    const auto r = row(i);
    bool nonzero = false;
    for (float v : r) {
      if (!std::isfinite(v)) throw ValidationError("non-finite value in embedding '" + ids_[i] + "'");
      nonzero = nonzero || v != 0.0f;
    }
    if (!nonzero) throw ValidationError("all-zero embedding row '" + ids_[i] + "'");
  }
}

std::optional<std::size_t> EmbeddingTable::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t EmbeddingTable::index_of(const std::string& id) const {
  auto found = find(id);
  if (!found) throw DataError("missing embedding for '" + id + "'");
  return *found;
}

std::string clip_id(std::string_view vid, int clip) {
  return std::string(vid) + ":" + std::to_string(clip);
}

void LossWeights::validate() const {
  const std::array<std::pair<const char*, double>, 8> fields{{{"lambda_p", lambda_p},
                                                              {"lambda_pos", lambda_pos},
                                                              {"lambda_id", lambda_id},
                                                              {"lambda_ood", lambda_ood},
                                                              {"lambda_s_neg", lambda_s_neg},
                                                              {"lambda_f", lambda_f},
                                                              {"lambda_b", lambda_b},
                                                              {"lambda_s", lambda_s}}};
  for (const auto& [name, value] : fields) {
    if (!std::isfinite(value) || value < 0.0) throw ConfigError(std::string(name) + " must be finite and >= 0");
  }
}

// ---------------------------------------------------------------------------
// Files

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) fn(line, line_no);
    if (end == text.size()) break;
    pos = end + 1;
  }
}

json parse_json_line(std::string_view line, const std::string& source, std::size_t line_no) {
  try {
    json j = json::parse(line);
    if (!j.is_object()) throw ParseError(source, line_no, "record is not an object");
    return j;
  } catch (const json::exception& e) {
    throw ParseError(source, line_no, e.what());
  }
}

json span_to_json(const MomentSpan& s) { return json::array({s.start, s.end}); }

MomentSpan span_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw std::invalid_argument("span must be [start, end]");
  return {j[0].get<double>(), j[1].get<double>()};
}

QueryRecord query_from_json(const json& j) {
  QueryRecord q;
  q.qid = j.at("qid").get<std::string>();
  q.text = j.value("text", std::string{});
  q.vid = j.at("vid").get<std::string>();
  q.label = parse_label(j.at("label").get<std::string>());
  q.domain = parse_domain(j.value("domain", std::string("none")));
  if (j.contains("spans")) {
    for (const auto& s : j.at("spans")) q.spans.push_back(span_from_json(s));
  }
  if (j.contains("gt_saliency") && !j.at("gt_saliency").is_null())
    q.gt_saliency = j.at("gt_saliency").get<std::vector<double>>();
  q.emb_key = j.value("emb_key", std::string{});
  return q;
}

json query_to_json(const QueryRecord& q) {
  json j;
  j["qid"] = q.qid;
  j["text"] = q.text;
  j["vid"] = q.vid;
  j["label"] = to_string(q.label);
  j["domain"] = to_string(q.domain);
  json spans = json::array();
  for (const auto& s : q.spans) spans.push_back(span_to_json(s));
  j["spans"] = std::move(spans);
  if (q.gt_saliency) j["gt_saliency"] = *q.gt_saliency;
  if (!q.emb_key.empty()) j["emb_key"] = q.emb_key;
  return j;
}

template <class T, class ToJson>
std::string format_lines(std::span<const T> items, ToJson&& to_json) {
  std::string out;
  for (const auto& item : items) {
    out += to_json(item).dump();
    out += '\n';
  }
  return out;
}

// Little-endian primitives for the embedding format.
template <class T>
void put_le(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint32_t>;
  U bits;
  std::memcpy(&bits, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

template <class T>
T get_le(std::string_view bytes, std::size_t offset) {
  using U = std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint32_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bits |= static_cast<U>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  T value;
  std::memcpy(&value, &bits, sizeof(T));
  return value;
}

constexpr std::string_view kEmbeddingMagic{"NAVEMB1\0", 8};

EmbeddingTable parse_embeddings_csv(std::string_view text, const std::string& source) {
  std::vector<std::string> ids;
  std::vector<float> values;
  std::size_t dim = 0;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    std::size_t comma = line.find(',');
    if (comma == std::string_view::npos) throw ParseError(source, line_no, "expected id followed by values");
    ids.emplace_back(line.substr(0, comma));
    std::size_t count = 0;
    std::size_t pos = comma + 1;
    while (pos <= line.size()) {
      std::size_t next = line.find(',', pos);
      if (next == std::string_view::npos) next = line.size();
      std::string_view field = line.substr(pos, next - pos);
      while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
      float v = 0.0f;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc{} || ptr != field.data() + field.size())
        throw ParseError(source, line_no, "bad float '" + std::string(field) + "'");
      values.push_back(v);
      ++count;
      pos = next + 1;
    }
    if (dim == 0) dim = count;
    if (count != dim) throw ParseError(source, line_no, "row width differs from first row");
  });
  if (ids.empty()) throw DataError(source + ": empty embedding file");
  return EmbeddingTable(std::move(ids), dim, std::move(values));
}

}  // namespace

// ---------------------------------------------------------------------------
// Query sets

std::vector<QueryRecord> parse_query_set(std::string_view text, const std::string& source) {
  std::vector<QueryRecord> out;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    json j = parse_json_line(line, source, line_no);
    QueryRecord q;
    try {
      q = query_from_json(j);
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(source, line_no, e.what());
    }
    q.validate();
    out.push_back(std::move(q));
  });
  return out;
}

std::vector<QueryRecord> load_query_set(const fs::path& path) {
  return parse_query_set(read_file(path), path.string());
}

std::string format_query_set(std::span<const QueryRecord> records) {
  return format_lines(records, query_to_json);
}

void save_query_set(const fs::path& path, std::span<const QueryRecord> records) {
  write_file_atomic(path, format_query_set(records));
}

// ---------------------------------------------------------------------------
// Videos

std::vector<VideoMeta> load_videos(const fs::path& path) {
  const std::string source = path.string();
  std::vector<VideoMeta> out;
  for_each_line(read_file(path), [&](std::string_view line, std::size_t line_no) {
    json j = parse_json_line(line, source, line_no);
    VideoMeta v;
    try {
      v.vid = j.at("vid").get<std::string>();
      v.duration = j.at("duration").get<double>();
      v.n_clips = j.at("n_clips").get<int>();
      v.clip_len = j.at("clip_len").get<double>();
    } catch (const std::exception& e) {
      throw ParseError(source, line_no, e.what());
    }
    v.validate();
    out.push_back(std::move(v));
  });
  return out;
}

void save_videos(const fs::path& path, std::span<const VideoMeta> videos) {
  write_file_atomic(path, format_lines(videos, [](const VideoMeta& v) {
                      return json{{"vid", v.vid}, {"duration", v.duration}, {"n_clips", v.n_clips},
                                  {"clip_len", v.clip_len}};
                    }));
}

// ---------------------------------------------------------------------------
// Embeddings

EmbeddingTable parse_embeddings(std::string_view bytes, const std::string& source) {
  if (bytes.substr(0, kEmbeddingMagic.size()) != kEmbeddingMagic) {
    // Not the binary format: either CSV or garbage. A NAVEMB prefix with a
    // wrong version byte is a magic mismatch, not CSV.
    if (bytes.substr(0, 6) == "NAVEMB") throw DataError(source + ": embedding magic mismatch");
    if (bytes.find('\0') != std::string_view::npos) throw DataError(source + ": embedding magic mismatch");
    return parse_embeddings_csv(bytes, source);
  }
  std::size_t pos = kEmbeddingMagic.size();
  auto need = [&](std::size_t n) {
    if (bytes.size() < pos + n) throw DataError(source + ": truncated embedding payload");
  };
  need(8);
  const auto count = get_le<std::uint32_t>(bytes, pos);
  const auto dim = get_le<std::uint32_t>(bytes, pos + 4);
  pos += 8;
  std::vector<std::string> ids;
  ids.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    need(2);
    const auto len = get_le<std::uint16_t>(bytes, pos);
    pos += 2;
    need(len);
    ids.emplace_back(bytes.substr(pos, len));
    pos += len;
  }
  const std::size_t n_values = static_cast<std::size_t>(count) * dim;
  need(n_values * 4);
  if (bytes.size() != pos + n_values * 4) throw DataError(source + ": trailing bytes after embedding payload");
  std::vector<float> values(n_values);
  for (std::size_t i = 0; i < n_values; ++i) values[i] = get_le<float>(bytes, pos + 4 * i);
  return EmbeddingTable(std::move(ids), dim, std::move(values));
}

EmbeddingTable load_embeddings(const fs::path& path) { return parse_embeddings(read_file(path), path.string()); }

std::string encode_embeddings(const EmbeddingTable& table) {
  std::string out(kEmbeddingMagic);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(table.rows()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(table.dim()));
  for (const auto& id : table.ids()) {
    if (id.size() > 0xffff) throw DataError("embedding id longer than 65535 bytes");
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
    out += id;
  }
  out.reserve(out.size() + table.values().size() * 4);
  for (float v : table.values()) put_le<float>(out, v);
  return out;
}

void save_embeddings(const fs::path& path, const EmbeddingTable& table) {
  write_file_atomic(path, encode_embeddings(table));
}

void save_embeddings_csv(const fs::path& path, const EmbeddingTable& table) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < table.rows(); ++i) {
    out += table.ids()[i];
    for (float v : table.row(i)) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out += ',';
      out.append(buf, ptr);
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Predictions and score dumps

std::vector<PredictionRecord> load_predictions(const fs::path& path) {
  const std::string source = path.string();
  std::vector<PredictionRecord> out;
  for_each_line(read_file(path), [&](std::string_view line, std::size_t line_no) {
    json j = parse_json_line(line, source, line_no);
    PredictionRecord p;
    try {
      p.qid = j.at("qid").get<std::string>();
      p.class_score = j.at("class_score").get<double>();
      p.decision = parse_decision(j.at("decision").get<std::string>());
      if (j.contains("span") && !j.at("span").is_null()) p.span = span_from_json(j.at("span"));
    } catch (const std::exception& e) {
      throw ParseError(source, line_no, e.what());
    }
    if ((p.decision == Decision::kAccept) != p.span.has_value())
      throw ValidationError("prediction " + p.qid + ": span must be present iff accepted");
    out.push_back(std::move(p));
  });
  return out;
}

void save_predictions(const fs::path& path, std::span<const PredictionRecord> predictions) {
  write_file_atomic(path, format_lines(predictions, [](const PredictionRecord& p) {
                      json j{{"qid", p.qid}, {"class_score", p.class_score}, {"decision", to_string(p.decision)}};
                      j["span"] = p.span ? span_to_json(*p.span) : json(nullptr);
                      return j;
                    }));
}

std::vector<ScoreBundle> load_score_bundles(const fs::path& path) {
  const std::string source = path.string();
  std::vector<ScoreBundle> out;
  for_each_line(read_file(path), [&](std::string_view line, std::size_t line_no) {
    json j = parse_json_line(line, source, line_no);
    ScoreBundle b;
    try {
      b.qid = j.at("qid").get<std::string>();
      b.indicator = j.at("indicator").get<std::vector<double>>();
      b.saliency = j.at("saliency").get<std::vector<double>>();
      for (const auto& o : j.at("clip_spans")) b.clip_spans.push_back({o.at(0).get<double>(), o.at(1).get<double>()});
      b.class_score = j.value("class_score", 0.0);
    } catch (const std::exception& e) {
      throw ParseError(source, line_no, e.what());
    }
    if (b.clip_spans.size() != b.saliency.size())
      throw ValidationError("score bundle " + b.qid + ": clip_spans length differs from saliency");
    out.push_back(std::move(b));
  });
  return out;
}

void save_score_bundles(const fs::path& path, std::span<const ScoreBundle> bundles) {
  write_file_atomic(path, format_lines(bundles, [](const ScoreBundle& b) {
                      json spans = json::array();
                      for (const auto& o : b.clip_spans) spans.push_back(json::array({o.left, o.right}));
                      return json{{"qid", b.qid},
                                  {"indicator", b.indicator},
                                  {"saliency", b.saliency},
                                  {"clip_spans", std::move(spans)},
                                  {"class_score", b.class_score}};
                    }));
}

// ---------------------------------------------------------------------------
// Sentence pools

std::vector<std::string> load_sentence_pool(const fs::path& path) {
  std::vector<std::string> out;
  for_each_line(read_file(path), [&](std::string_view line, std::size_t) { out.emplace_back(line); });
  return out;
}

void save_sentence_pool(const fs::path& path, std::span<const std::string> sentences) {
  std::string out;
  for (const auto& s : sentences) {
    if (s.find('\n') != std::string::npos) throw DataError("pool sentence contains a newline");
    out += s;
    out += '\n';
  }
  write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Dataset validation

std::string_view to_string(IssueKind kind) {
  switch (kind) {
    case IssueKind::kDuplicateQid: return "duplicate_qid";
    case IssueKind::kDuplicateVid: return "duplicate_vid";
    case IssueKind::kDanglingVideo: return "dangling_video";
    case IssueKind::kMissingEmbedding: return "missing_embedding";
    case IssueKind::kMissingClipEmbedding: return "missing_clip_embedding";
    case IssueKind::kSpanOrder: return "span_order";
    case IssueKind::kSpanOutOfRange: return "span_out_of_range";
    case IssueKind::kLabelMismatch: return "label_mismatch";
    case IssueKind::kSaliencyLength: return "saliency_length";
    case IssueKind::kVideoTiling: return "video_tiling";
  }
  return "unknown";
}

std::size_t DatasetReport::count(IssueKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(issues.begin(), issues.end(), [&](const DatasetIssue& i) { return i.kind == kind; }));
}

DatasetReport validate_dataset(std::span<const QueryRecord> queries, std::span<const VideoMeta> videos,
                               const EmbeddingTable& text_embeddings, const EmbeddingTable* clip_embeddings) {
  DatasetReport report;
  auto add = [&](IssueKind kind, const std::string& subject, std::string message) {
    report.issues.push_back({kind, subject, std::move(message)});
  };

  std::unordered_map<std::string, const VideoMeta*> by_vid;
  for (const auto& v : videos) {
    if (!by_vid.emplace(v.vid, &v).second) add(IssueKind::kDuplicateVid, v.vid, "vid appears more than once");
    try {
      v.validate();
    } catch (const ValidationError& e) {
      add(IssueKind::kVideoTiling, v.vid, e.what());
    }
    if (clip_embeddings) {
      for (int c = 0; c < v.n_clips; ++c) {
        if (!clip_embeddings->find(clip_id(v.vid, c))) {
          add(IssueKind::kMissingClipEmbedding, v.vid, "no feature row for clip " + std::to_string(c));
          break;
        }
      }
    }
  }

  std::unordered_set<std::string> seen_qids;
  for (const auto& q : queries) {
    if (!seen_qids.insert(q.qid).second) add(IssueKind::kDuplicateQid, q.qid, "qid appears more than once");
    const bool positive = q.label == Label::kPositive;
    if (positive != (q.domain == Domain::kNone) || positive == q.spans.empty())
      add(IssueKind::kLabelMismatch, q.qid, "label, domain and spans disagree");
    if (!text_embeddings.find(q.embedding_key()))
      add(IssueKind::kMissingEmbedding, q.qid, "no sentence embedding under '" + q.embedding_key() + "'");

    auto it = by_vid.find(q.vid);
    const VideoMeta* video = it == by_vid.end() ? nullptr : it->second;
    if (!video) add(IssueKind::kDanglingVideo, q.qid, "references unknown video '" + q.vid + "'");

    for (const auto& s : q.spans) {
      if (!(s.start < s.end)) {
        add(IssueKind::kSpanOrder, q.qid, "span start is not before end");
      } else if (s.start < 0.0 || (video && s.end > video->duration)) {
        add(IssueKind::kSpanOutOfRange, q.qid, "span lies outside the video");
      }
    }
    if (q.gt_saliency && video && q.gt_saliency->size() != static_cast<std::size_t>(video->n_clips))
      add(IssueKind::kSaliencyLength, q.qid, "gt_saliency length differs from n_clips");
  }
  return report;
}

}  // namespace navmr
