#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcip/errors.hpp"
#include "pcip/fusion/config.hpp"
#include "pcip/fusion/model.hpp"
#include "pcip/version.hpp"

// Checkpoints are a single structured document: config plus a name -> {shape,
// values} map. Values are written with shortest-round-trip formatting, so a
// save/load cycle reproduces every parameter bit-for-bit.

namespace pcip::fusion {

inline void save_checkpoint(const std::filesystem::path& path, const Model& m) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, t] : m.named_params()) {
    for (double v : t.values()) {
      if (!std::isfinite(v)) {
        throw NumericError("checkpoint: parameter " + name + " holds a non-finite value");
      }
    }
    params[name] = nlohmann::json{{"shape", t.shape()}, {"values", t.values()}};
  }
  nlohmann::json doc{{"schema", "pcip-checkpoint"},
                     {"version", kCheckpointVersion},
                     {"config", config_to_json(m.config())},
                     {"params", std::move(params)}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << doc.dump() << '\n';
  if (!out) throw IoError("short write to " + path.string());
}

inline Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (!doc.is_object() || doc.value("schema", "") != "pcip-checkpoint") {
    throw ConfigError(path.string() + ": not a model checkpoint");
  }
  if (doc.value("version", -1) != kCheckpointVersion) {
    throw ConfigError(path.string() + ": unsupported checkpoint version");
  }
  Model m(config_from_json(doc.at("config")), 0);
  const auto& jp = doc.at("params");
  auto np = m.named_params();
  if (jp.size() != np.size()) {
    throw ConfigError(path.string() + ": checkpoint holds " + std::to_string(jp.size()) +
                      " parameters, model expects " + std::to_string(np.size()));
  }
  for (auto& [name, t] : np) {
    if (!jp.contains(name)) {
      throw ConfigError(path.string() + ": checkpoint is missing parameter " + name);
    }
    const auto& entry = jp.at(name);
    try {
      const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
      if (shape != t.shape()) {
        throw ConfigError(path.string() + ": parameter " + name + " has the wrong shape");
      }
      auto values = entry.at("values").get<std::vector<double>>();
      if (values.size() != t.values().size()) {
        throw ConfigError(path.string() + ": parameter " + name + " has the wrong size");
      }
      t.values() = std::move(values);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": parameter " + name + ": " + e.what());
    }
  }
  return m;
}

}  // namespace pcip::fusion
