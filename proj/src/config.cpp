#include "navmr/config.hpp"

#include <charconv>
#include <cstdlib>
#include <set>
#include <string>

#include "navmr/error.hpp"
#include "navmr/io.hpp"

namespace navmr {

using nlohmann::json;

namespace {

// Reads typed fields from one JSON object and rejects unknown keys.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + " must be an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_unsigned_v<T>) {
        if (!it->is_number_unsigned()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      }
      out = it->get<T>();
    } catch (const std::exception&) {
      throw ConfigError(field(key) + " has the wrong type");
    }
  }

  // Reads a string field and maps it through `parse`.
  template <class T, class Parse>
  void read_enum(const char* key, T& out, Parse parse) {
    std::string text;
    read(key, text);
    if (text.empty()) return;
    try {
      out = parse(text);
    } catch (const ConfigError& e) {
      throw ConfigError(field(key) + ": " + e.what());
    }
  }

  std::string field(const char* key) const { return name_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown field " + name_ + "." + it.key());
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

template <class F>
void with_field_name(const char* section, F&& validate) {
  try {
    validate();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    throw ConfigError(msg.rfind(section, 0) == 0 ? msg : std::string(section) + ": " + msg);
  }
}

json parse_json_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace

json to_json(const ModelConfig& c) {
  return {{"d_feat", c.d_feat},
          {"d_hidden", c.d_hidden},
          {"combine", std::string(to_string(c.combine))},
          {"decision_threshold", c.decision_threshold}};
}

ModelConfig parse_model_config(const json& j) {
  ModelConfig c;
  Section s(j, "model");
  s.read("d_feat", c.d_feat);
  s.read("d_hidden", c.d_hidden);
  s.read_enum("combine", c.combine, parse_combine);
  s.read("decision_threshold", c.decision_threshold);
  s.finish();
  c.validate();
  return c;
}

json to_json(const LossWeights& w) {
  return {{"lambda_p", w.lambda_p},     {"lambda_pos", w.lambda_pos}, {"lambda_id", w.lambda_id},
          {"lambda_ood", w.lambda_ood}, {"lambda_s_neg", w.lambda_s_neg}, {"lambda_f", w.lambda_f},
          {"lambda_b", w.lambda_b},     {"lambda_s", w.lambda_s}};
}

LossWeights parse_loss_weights(const json& j) {
  LossWeights w;
  Section s(j, "weights");
  std::string preset;
  s.read("preset", preset);
  if (preset == "charades") {
    w = LossWeights::charades();
  } else if (!preset.empty() && preset != "qvhighlights") {
    throw ConfigError("weights.preset must be 'qvhighlights' or 'charades'");
  }
  s.read("lambda_p", w.lambda_p);
  s.read("lambda_pos", w.lambda_pos);
  s.read("lambda_id", w.lambda_id);
  s.read("lambda_ood", w.lambda_ood);
  s.read("lambda_s_neg", w.lambda_s_neg);
  s.read("lambda_f", w.lambda_f);
  s.read("lambda_b", w.lambda_b);
  s.read("lambda_s", w.lambda_s);
  s.finish();
  with_field_name("weights", [&] { w.validate(); });
  return w;
}

json to_json(const TrainConfig& c) {
  return {{"batch_pos", c.batch_pos},
          {"batch_id", c.batch_id},
          {"batch_ood", c.batch_ood},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"optimizer", std::string(to_string(c.optimizer))},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"seed", c.seed},
          {"saliency_neg_mode", std::string(to_string(c.saliency_neg_mode))}};
}

RunConfig parse_run_config(const json& j) {
  RunConfig c;
  Section top(j, "config");
  json train = json::object();
  json weights = json::object();
  json model = json::object();
  top.read("train", train);
  top.read("weights", weights);
  top.read("model", model);
  top.finish();

  Section s(train, "train");
  s.read("batch_pos", c.train.batch_pos);
  s.read("batch_id", c.train.batch_id);
  s.read("batch_ood", c.train.batch_ood);
  s.read("epochs", c.train.epochs);
  s.read("learning_rate", c.train.learning_rate);
  s.read_enum("optimizer", c.train.optimizer, parse_optimizer);
  s.read("adam_beta1", c.train.adam_beta1);
  s.read("adam_beta2", c.train.adam_beta2);
  s.read("adam_eps", c.train.adam_eps);
  s.read("seed", c.train.seed);
  s.read_enum("saliency_neg_mode", c.train.saliency_neg_mode, parse_saliency_neg_mode);
  s.finish();

  c.train.weights = parse_loss_weights(weights);
  c.model = parse_model_config(model);
  with_field_name("train", [&] { c.train.validate(); });
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(parse_json_file(path)); }

json to_json(const RunConfig& c) {
  return {{"train", to_json(c.train)}, {"weights", to_json(c.train.weights)}, {"model", to_json(c.model)}};
}

SyntheticSpec parse_synthetic_spec(const json& j) {
  SyntheticSpec spec;
  Section s(j, "spec");
  s.read("n_videos", spec.n_videos);
  s.read("clips_per_video", spec.clips_per_video);
  s.read("d_feat", spec.d_feat);
  s.read("n_concepts", spec.n_concepts);
  s.read("concept_separation", spec.concept_separation);
  s.read("noise_sigma", spec.noise_sigma);
  s.read("seed", spec.seed);
  s.read("segments_per_video", spec.segments_per_video);
  s.read("queries_per_segment", spec.queries_per_segment);
  s.read("clip_len", spec.clip_len);
  s.read("ood_pool_size", spec.ood_pool_size);
  s.finish();
  with_field_name("spec", [&] { spec.validate(); });
  return spec;
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
  return parse_synthetic_spec(parse_json_file(path));
}

json to_json(const SyntheticSpec& s) {
  return {{"n_videos", s.n_videos},
          {"clips_per_video", s.clips_per_video},
          {"d_feat", s.d_feat},
          {"n_concepts", s.n_concepts},
          {"concept_separation", s.concept_separation},
          {"noise_sigma", s.noise_sigma},
          {"seed", s.seed},
          {"segments_per_video", s.segments_per_video},
          {"queries_per_segment", s.queries_per_segment},
          {"clip_len", s.clip_len},
          {"ood_pool_size", s.ood_pool_size}};
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t config_seed) {
  if (flag) return *flag;
  if (const char* env = std::getenv("NAVMR_SEED"); env && *env) {
    std::uint64_t value = 0;
    const char* end = env + std::char_traits<char>::length(env);
    auto [ptr, ec] = std::from_chars(env, end, value);
    if (ec != std::errc() || ptr != end) throw ConfigError("NAVMR_SEED must be an unsigned integer, got '" +
                                                           std::string(env) + "'");
    return value;
  }
  return config_seed;
}

}  // namespace navmr
