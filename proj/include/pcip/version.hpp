#pragma once

namespace pcip {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kManifestVersion = 1;
inline constexpr int kCheckpointVersion = 1;

}  // namespace pcip
