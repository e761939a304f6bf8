#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "narrationdep/cluster/clustering.hpp"
#include "narrationdep/core/rng.hpp"
#include "narrationdep/model/train.hpp"

namespace narrationdep {

inline constexpr const char* kCheckpointFormat = "narrationdep-ckpt/1";

inline std::string to_string(Branches b) {
  switch (b) {
    case Branches::HanOnly: return "han";
    case Branches::HacnOnly: return "hacn";
    default: return "joint";
  }
}

inline Branches branches_from_string(const std::string& s) {
  if (s == "joint") return Branches::Joint;
  if (s == "han") return Branches::HanOnly;
  if (s == "hacn") return Branches::HacnOnly;
  throw ConfigError("unknown branch selection '" + s + "' (expected joint, han or hacn)");
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"dropout", c.dropout},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"d_hidden", c.d_h},
          {"d_attention", c.d_a},
          {"d_projection", c.d_p},
          {"share_word_encoder", c.share_word},
          {"branches", to_string(c.branches)},
          {"early_stopping_patience", c.early_stopping_patience}};
}

/// Reads the keys present in `j` over `base`; unknown keys are rejected so a
/// typo in a config file does not silently fall back to a default.
inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {}) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "lr") base.lr = value.get<double>();
      else if (key == "dropout") base.dropout = value.get<double>();
      else if (key == "epochs") base.epochs = value.get<std::size_t>();
      else if (key == "batch_size") base.batch_size = value.get<std::size_t>();
      else if (key == "seed") base.seed = value.get<std::uint64_t>();
      else if (key == "d_hidden") base.d_h = value.get<std::size_t>();
      else if (key == "d_attention") base.d_a = value.get<std::size_t>();
      else if (key == "d_projection") base.d_p = value.get<std::size_t>();
      else if (key == "share_word_encoder") base.share_word = value.get<bool>();
      else if (key == "branches") base.branches = branches_from_string(value.get<std::string>());
      else if (key == "early_stopping_patience") base.early_stopping_patience = value.get<std::size_t>();
      else throw ConfigError("unknown train config key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("train config key '" + key + "': " + e.what());
    }
  }
  base.validate();
  return base;
}

inline nlohmann::json to_json(const ModelDims& d) {
  return {{"d_w", d.d_w},
          {"d_h", d.d_h},
          {"d_a", d.attention_width()},
          {"d_p", d.projection_width()},
          {"share_word", d.share_word}};
}

inline ModelDims dims_from_json(const nlohmann::json& j) {
  try {
    return {j.at("d_w").get<std::size_t>(), j.at("d_h").get<std::size_t>(), j.at("d_a").get<std::size_t>(),
            j.at("d_p").get<std::size_t>(), j.at("share_word").get<bool>()};
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint dims: ") + e.what());
  }
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Stable digest of a JSON value (object keys are serialised sorted).
inline std::string config_hash(const nlohmann::json& j) { return hex64(fnv1a64(j.dump())); }

struct Checkpoint {
  ModelParams params;
  TrainConfig train;
  ClusteringConfig clustering;

  nlohmann::json config_json() const { return {{"train", to_json(train)}, {"clustering", to_json(clustering)}}; }
};

/// Parameters as little-endian float32, in registry order.
inline std::string checkpoint_blob(const ModelParams& m) {
  std::string out;
  out.reserve(4 * parameter_count(m));
  for (const auto& r : param_refs(m)) {
    for (Real v : r.tensor->data()) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
    }
  }
  return out;
}

/// Manifest: one entry per registry parameter with its shape and its offset
/// into the blob, counted in float32 elements.
inline nlohmann::json checkpoint_manifest(const Checkpoint& c, const std::string& blob_name) {
  nlohmann::json params = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& r : param_refs(c.params)) {
    params.push_back({{"name", r.name}, {"shape", r.tensor->shape()}, {"offset", offset}});
    offset += r.tensor->size();
  }
  const auto cfg = c.config_json();
  return {{"format", kCheckpointFormat},
          {"dims", to_json(c.params.dims)},
          {"params", params},
          {"elements", offset},
          {"blob", blob_name},
          {"config", cfg},
          {"config_hash", config_hash(cfg)}};
}

/// Rebuilds a checkpoint from its manifest and blob bytes. Parameter names,
/// order and shapes must match the registry of a model with the stored dims.
inline Checkpoint checkpoint_from(const nlohmann::json& manifest, const std::string& blob) {
  if (!manifest.is_object() || manifest.value("format", std::string()) != kCheckpointFormat) {
    throw SchemaError(std::string("checkpoint: expected format '") + kCheckpointFormat + "'");
  }
  Checkpoint c;
  try {
    const auto& cfg = manifest.at("config");
    c.train = train_config_from_json(cfg.at("train"));
    c.clustering = clustering_from_json(cfg.at("clustering"));
    if (manifest.at("config_hash").get<std::string>() != config_hash(cfg)) {
      throw ConsistencyError("checkpoint: config_hash does not match the stored config");
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint config: ") + e.what());
  }
  const ModelDims dims = dims_from_json(manifest.at("dims"));
  if (!(c.train.dims(dims.d_w) == dims)) throw ConsistencyError("checkpoint: dims disagree with the stored train config");
  c.params = ModelParams::init(dims, 0, c.train.branches);

  const auto refs = param_refs(c.params);
  const auto& entries = manifest.at("params");
  if (!entries.is_array() || entries.size() != refs.size()) {
    throw SchemaError("checkpoint: " + std::to_string(entries.is_array() ? entries.size() : 0) +
                      " parameters listed, registry has " + std::to_string(refs.size()));
  }
  std::size_t offset = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& e = entries[i];
    Shape shape;
    std::string name;
    std::size_t at = 0;
    try {
      name = e.at("name").get<std::string>();
      shape = e.at("shape").get<Shape>();
      at = e.at("offset").get<std::size_t>();
    } catch (const nlohmann::json::exception& ex) {
      throw SchemaError("checkpoint parameter " + std::to_string(i) + ": " + ex.what());
    }
    if (name != refs[i].name) {
      throw SchemaError("checkpoint parameter " + std::to_string(i) + " is '" + name + "', registry expects '" +
                        refs[i].name + "'");
    }
    if (shape != refs[i].tensor->shape()) {
      throw SchemaError("checkpoint parameter '" + name + "' has shape " + shape_string(shape) + ", registry expects " +
                        shape_string(refs[i].tensor->shape()));
    }
    if (at != offset) {
      throw SchemaError("checkpoint parameter '" + name + "' at offset " + std::to_string(at) + ", expected " +
                        std::to_string(offset));
    }
    offset += refs[i].tensor->size();
  }
  if (blob.size() != 4 * offset) {
    throw ConsistencyError("checkpoint blob has " + std::to_string(blob.size()) + " bytes, manifest needs " +
                           std::to_string(4 * offset));
  }
  std::size_t pos = 0;
  for (const auto& r : refs) {
    for (Real& v : r.tensor->data()) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob[pos++])) << (8 * b);
      const float f = std::bit_cast<float>(bits);
      if (!std::isfinite(f)) throw NumericalError("checkpoint parameter '" + r.name + "' holds a non-finite value");
      v = static_cast<Real>(f);
    }
  }
  return c;
}

namespace detail {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + p.string() + "'");
}

}  // namespace detail

/// Writes `<path>` (manifest JSON) and `<path minus extension>.bin`.
inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  auto blob_path = path;
  blob_path.replace_extension(".bin");
  detail::write_file(blob_path, checkpoint_blob(c.params));
  detail::write_file(path, checkpoint_manifest(c, blob_path.filename().string()).dump(2) + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("checkpoint '" + path.string() + "': " + e.what());
  }
  if (!manifest.contains("blob") || !manifest["blob"].is_string()) throw SchemaError("checkpoint: missing blob name");
  return checkpoint_from(manifest, detail::read_file(path.parent_path() / manifest["blob"].get<std::string>()));
}

}  // namespace narrationdep
