#include "navmr/checkpoint.hpp"

#include <bit>
#include <cstring>

#include <json.hpp>

#include "navmr/config.hpp"
#include "navmr/error.hpp"
#include "navmr/io.hpp"

namespace navmr {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "navmr-checkpoint-1";

void put_f64(std::string& out, double x) {
  auto bits = std::bit_cast<std::uint64_t>(x);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_f64(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::string encode_checkpoint(const ModelParams& params, const ModelConfig& model, const CheckpointMeta& meta) {
  const auto shapes = param_shapes(model);
  json tensors = json::array();
  for (std::size_t i = 0; i < kParamCount; ++i) {
    if (params[i].rows != shapes[i].rows || params[i].cols != shapes[i].cols)
      throw ShapeError("tensor " + std::string(kParamNames[i]) + " does not match the model configuration");
    tensors.push_back({{"name", kParamNames[i]}, {"rows", params[i].rows}, {"cols", params[i].cols}});
  }
  const json header = {{"format", kFormat},   {"model", to_json(model)}, {"tensors", tensors},
                       {"seed", meta.seed},   {"epoch", meta.epoch},     {"blob_bytes", params.count() * 8}};
  std::string out = header.dump();
  out.push_back('\n');
  for (const auto& t : params.tensors) {
    for (double x : t.data) put_f64(out, x);
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes, const std::string& source) {
  const auto newline = bytes.find('\n');
  if (newline == std::string_view::npos) throw DataError(source + ": missing checkpoint header");
  json header;
  try {
    header = json::parse(bytes.substr(0, newline));
  } catch (const json::exception& e) {
    throw DataError(source + ": unreadable checkpoint header: " + e.what());
  }

  Checkpoint ck;
  try {
    if (header.at("format").get<std::string>() != kFormat) throw DataError(source + ": unknown checkpoint format");
    ck.model = parse_model_config(header.at("model"));
    ck.meta.seed = header.at("seed").get<std::uint64_t>();
    ck.meta.epoch = header.at("epoch").get<std::size_t>();
  } catch (const json::exception& e) {
    throw DataError(source + ": malformed checkpoint header: " + e.what());
  } catch (const ConfigError& e) {
    throw DataError(source + ": " + e.what());
  }

  ck.params = ModelParams::zeros(ck.model);
  const auto& tensors = header.at("tensors");
  if (!tensors.is_array() || tensors.size() != kParamCount)
    throw DataError(source + ": expected " + std::to_string(kParamCount) + " tensors");
  for (std::size_t i = 0; i < kParamCount; ++i) {
    const auto& t = tensors[i];
    if (t.value("name", "") != kParamNames[i] || t.value("rows", 0u) != ck.params[i].rows ||
        t.value("cols", 0u) != ck.params[i].cols)
      throw ShapeError(source + ": tensor " + std::string(kParamNames[i]) + " has an unexpected name or shape");
  }

  const std::string_view blob = bytes.substr(newline + 1);
  const std::size_t expected = ck.params.count() * 8;
  if (header.value("blob_bytes", std::size_t{0}) != expected || blob.size() != expected)
    throw DataError(source + ": parameter blob is " + std::to_string(blob.size()) + " bytes, expected " +
                    std::to_string(expected));
  const char* p = blob.data();
  for (auto& t : ck.params.tensors) {
    for (double& x : t.data) {
      x = get_f64(p);
      p += 8;
    }
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const ModelConfig& model,
                     const CheckpointMeta& meta) {
  write_file_atomic(path, encode_checkpoint(params, model, meta));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path), path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  Checkpoint ck = load_checkpoint(path);
  const auto have = param_shapes(ck.model);
  const auto want = param_shapes(expected);
  for (std::size_t i = 0; i < kParamCount; ++i) {
    if (!(have[i] == want[i]))
      throw ShapeError(path.string() + ": tensor " + std::string(kParamNames[i]) + " is " +
                       std::to_string(have[i].rows) + "x" + std::to_string(have[i].cols) + ", expected " +
                       std::to_string(want[i].rows) + "x" + std::to_string(want[i].cols));
  }
  if (!(ck.model == expected)) throw ConfigError(path.string() + ": checkpoint model configuration differs");
  return ck;
}

}  // namespace navmr
