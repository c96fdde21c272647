#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcip/data/types.hpp"
#include "pcip/errors.hpp"
#include "pcip/version.hpp"

// Dataset persistence: a line-delimited manifest (header line + one track per
// line) with feature tensors in sidecar binary files next to it.
//
// Sidecar layout, little-endian throughout:
//   magic "PCT1" | u32 rank | i64 dims[rank] | f64 values[product(dims)]

namespace pcip::data {

static_assert(std::endian::native == std::endian::little,
              "sidecar tensor format assumes a little-endian host");

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr char kSidecarMagic[4] = {'P', 'C', 'T', '1'};

inline void write_raw_tensor(const fs::path& path, const RawTensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kSidecarMagic, 4);
  const std::uint32_t rank = static_cast<std::uint32_t>(t.dims.size());
  out.write(reinterpret_cast<const char*>(&rank), sizeof(rank));
  out.write(reinterpret_cast<const char*>(t.dims.data()),
            static_cast<std::streamsize>(t.dims.size() * sizeof(std::int64_t)));
  out.write(reinterpret_cast<const char*>(t.values.data()),
            static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  if (!out) throw IoError("short write to " + path.string());
}

inline RawTensor read_raw_tensor(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != std::string(kSidecarMagic, 4)) {
    throw ParseError(path.string() + ": not a tensor sidecar (bad magic)");
  }
  std::uint32_t rank = 0;
  in.read(reinterpret_cast<char*>(&rank), sizeof(rank));
  if (!in || rank == 0 || rank > 8) {
    throw ParseError(path.string() + ": implausible tensor rank");
  }
  RawTensor t;
  t.dims.resize(rank);
  in.read(reinterpret_cast<char*>(t.dims.data()),
          static_cast<std::streamsize>(rank * sizeof(std::int64_t)));
  if (!in) throw ParseError(path.string() + ": truncated dims");
  std::int64_t n = 1;
  for (auto d : t.dims) {
    if (d < 1 || n > (std::int64_t{1} << 32)) {
      throw ParseError(path.string() + ": implausible dims");
    }
    n *= d;
  }
  t.values.resize(static_cast<std::size_t>(n));
  in.read(reinterpret_cast<char*>(t.values.data()),
          static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  if (!in) throw ParseError(path.string() + ": truncated values");
  return t;
}

namespace detail {

inline json meta_to_json(const DatasetMeta& m) {
  return json{{"schema", "pcip-dataset"},
              {"version", m.version},
              {"kind", feature_kind_name(m.kind)},
              {"feature_dim", m.feature_dim},
              {"img", {m.img_h, m.img_w, m.img_c}},
              {"frame_w", m.frame_w},
              {"frame_h", m.frame_h},
              {"frame_rate", m.frame_rate},
              {"local_context_scale", m.local_context_scale}};
}

inline DatasetMeta meta_from_json(const json& j) {
  if (!j.is_object() || j.value("schema", "") != "pcip-dataset") {
    throw ParseError("manifest line 1: missing pcip-dataset header");
  }
  DatasetMeta m;
  m.version = j.at("version").get<int>();
  if (m.version != kManifestVersion) {
    throw ParseError("manifest line 1: unsupported version " + std::to_string(m.version));
  }
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "vector") m.kind = FeatureKind::kVector;
  else if (kind == "image") m.kind = FeatureKind::kImage;
  else throw ParseError("manifest line 1: unknown kind '" + kind + "'");
  m.feature_dim = j.at("feature_dim").get<std::int64_t>();
  const auto& img = j.at("img");
  m.img_h = img.at(0).get<std::int64_t>();
  m.img_w = img.at(1).get<std::int64_t>();
  m.img_c = img.at(2).get<std::int64_t>();
  m.frame_w = j.at("frame_w").get<std::int64_t>();
  m.frame_h = j.at("frame_h").get<std::int64_t>();
  m.frame_rate = j.at("frame_rate").get<double>();
  m.local_context_scale = j.at("local_context_scale").get<double>();
  return m;
}

inline json track_to_json(const TrackRecord& t) {
  json frames = json::array();
  for (const auto& f : t.frames) {
    json jf{{"bbox", f.bbox}, {"action", f.driver_action}};
    if (f.pose_present) jf["pose"] = f.pose;
    else jf["pose"] = nullptr;
    frames.push_back(std::move(jf));
  }
  json j{{"track_id", t.track_id}, {"label", t.label},
         {"event_frame", t.event_frame}, {"frame_rate", t.frame_rate},
         {"local", t.local_ref}, {"global", t.global_ref},
         {"frames", std::move(frames)}};
  if (t.target_mask_id >= 0) j["target_mask_id"] = t.target_mask_id;
  return j;
}

inline void validate_track(const TrackRecord& t) {
  if (t.label != 0 && t.label != 1) {
    throw ValidationError("track " + t.track_id + ": label must be 0 or 1");
  }
  if (t.event_frame <= static_cast<std::int64_t>(t.frames.size()) - 1) {
    throw ValidationError("track " + t.track_id +
                          ": event_frame must lie past the last observed frame");
  }
  for (std::size_t i = 0; i < t.frames.size(); ++i) {
    const auto& f = t.frames[i];
    if (!(f.bbox[0] < f.bbox[2]) || !(f.bbox[1] < f.bbox[3])) {
      throw ValidationError("track " + t.track_id + ": inverted bbox at frame " +
                            std::to_string(i));
    }
    if (f.driver_action < 0 || f.driver_action >= kDriverActions) {
      throw ValidationError("track " + t.track_id + ": driver_action out of range at frame " +
                            std::to_string(i));
    }
    if (f.pose_present && f.pose.size() != kPoseRawDim) {
      throw ValidationError("track " + t.track_id + ": pose must hold 36 values at frame " +
                            std::to_string(i));
    }
  }
}

inline TrackRecord track_from_json(const json& j, std::size_t line_no) {
  TrackRecord t;
  try {
    t.track_id = j.at("track_id").get<std::string>();
    t.label = j.at("label").get<int>();
    t.event_frame = j.at("event_frame").get<std::int64_t>();
    t.frame_rate = j.at("frame_rate").get<double>();
    t.local_ref = j.at("local").get<std::string>();
    t.global_ref = j.at("global").get<std::string>();
    t.target_mask_id = j.value("target_mask_id", -1);
    for (const auto& jf : j.at("frames")) {
      FrameObs f;
      const auto& bb = jf.at("bbox");
      for (int k = 0; k < 4; ++k) f.bbox[static_cast<std::size_t>(k)] = bb.at(k).get<double>();
      f.driver_action = jf.at("action").get<int>();
      const auto& pose = jf.at("pose");
      if (!pose.is_null()) {
        f.pose = pose.get<std::vector<double>>();
        f.pose_present = true;
      }
      t.frames.push_back(std::move(f));
    }
  } catch (const json::exception& e) {
    throw ParseError("manifest line " + std::to_string(line_no) + ": " + e.what());
  }
  validate_track(t);
  return t;
}

}  // namespace detail

/// Writes manifest.jsonl plus one sidecar pair per resolved track. The
/// optional provenance object is embedded in the header line.
inline fs::path save_dataset(const fs::path& dir, const DatasetMeta& meta,
                             const std::vector<TrackRecord>& tracks,
                             const json& provenance = json()) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path manifest = dir / "manifest.jsonl";
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw IoError("cannot open " + manifest.string() + " for writing");
  json header = detail::meta_to_json(meta);
  if (!provenance.is_null()) header["provenance"] = provenance;
  out << header.dump() << '\n';
  for (const auto& t : tracks) {
    if (!t.resolved) {
      throw ContractError("save_dataset: track " + t.track_id + " has unresolved features");
    }
    detail::validate_track(t);
    write_raw_tensor(dir / t.local_ref, t.local_feat);
    write_raw_tensor(dir / t.global_ref, t.global_feat);
    out << detail::track_to_json(t).dump() << '\n';
  }
  if (!out) throw IoError("short write to " + manifest.string());
  return manifest;
}

struct Dataset {
  DatasetMeta meta;
  std::vector<TrackRecord> tracks;
  fs::path manifest_path;
};

/// Parses and validates the manifest; sidecar tensors stay on disk until
/// resolve_features is called.
inline Dataset load_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open " + manifest.string());
  Dataset ds;
  ds.manifest_path = manifest;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    if (line_no == 1) {
      ds.meta = detail::meta_from_json(j);
    } else {
      ds.tracks.push_back(detail::track_from_json(j, line_no));
    }
  }
  if (line_no == 0) throw ParseError("manifest line 1: empty file, header expected");
  return ds;
}

/// Loads the sidecar tensors of every track and cross-checks their leading
/// dimension against the frame count.
inline void resolve_features(Dataset& ds) {
  const fs::path dir = ds.manifest_path.parent_path();
  for (auto& t : ds.tracks) {
    if (t.resolved) continue;
    t.local_feat = read_raw_tensor(dir / t.local_ref);
    t.global_feat = read_raw_tensor(dir / t.global_ref);
    const auto L = static_cast<std::int64_t>(t.frames.size());
    for (const RawTensor* rt : {&t.local_feat, &t.global_feat}) {
      if (rt->dims.empty() || rt->dims[0] != L) {
        throw ValidationError("track " + t.track_id + ": sidecar leading dim " +
                              (rt->dims.empty() ? std::string("none")
                                                : std::to_string(rt->dims[0])) +
                              " does not match " + std::to_string(L) + " frames");
      }
    }
    t.resolved = true;
  }
}

}  // namespace pcip::data
