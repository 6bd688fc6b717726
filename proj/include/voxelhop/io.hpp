#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "voxelhop/model.hpp"
#include "voxelhop/tensor.hpp"

#include "json.hpp"

namespace voxelhop {

// Raw volume payload as stored in a VXH1 file. Unlike Volume4D the two
// horizontal dims may differ here; the pipeline re-checks squareness when a
// file is used as input.
struct VolumeData {
  std::uint32_t dims[4] = {0, 0, 0, 0};  // (S1, S2, K, C)
  int dtype = 1;                         // 1 = f32, 2 = f64
  std::vector<double> data;              // row-major (s1, s2, k, c)
};

inline constexpr int kDtypeF32 = 1;
inline constexpr int kDtypeF64 = 2;

// VXH1 format: magic "VXH1", u32 dtype code, 4 x u32 little-endian dims,
// payload row-major, trailing CRC32 over everything after the magic.
void write_volume_raw(const std::string& path, const VolumeData& vol);
VolumeData read_volume_raw(const std::string& path);

void write_volume(const std::string& path, const Volume4D& vol, int dtype = kDtypeF32);
Volume4D read_volume(const std::string& path);  // enforces the square-plane invariant

// Block-mean downsampling by integer factors per axis (the channel axis is
// untouched). All factors must divide their extents exactly.
VolumeData resize_block_mean(const VolumeData& vol, int factor_h1, int factor_h2, int factor_v);

struct ManifestEntry {
  std::string path;
  int label = 0;
  std::string id;
};

// JSON list of {path, label, id}; paths are resolved relative to the
// manifest's directory.
std::vector<ManifestEntry> load_manifest(const std::string& path);
void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);
Dataset load_dataset(const std::string& manifest_path);

RunConfig load_config_file(const std::string& path);
void save_config_file(const std::string& path, const RunConfig& config);

// Defined in serialize.cpp next to the model format so the two stay in sync.
nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);

}  // namespace voxelhop
