#include "voxelhop/io.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "voxelhop/binfmt.hpp"
#include "voxelhop/errors.hpp"

namespace voxelhop {

namespace {

constexpr char kVolumeMagic[4] = {'V', 'X', 'H', '1'};

}  // namespace

void write_volume_raw(const std::string& path, const VolumeData& vol) {
  const std::size_t expected =
      static_cast<std::size_t>(vol.dims[0]) * vol.dims[1] * vol.dims[2] * vol.dims[3];
  if (vol.data.size() != expected) throw ShapeError("volume payload length does not match dims");
  if (vol.dtype != kDtypeF32 && vol.dtype != kDtypeF64) throw ConfigError("unknown dtype code");

  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(vol.dtype));
  for (int i = 0; i < 4; ++i) w.u32(vol.dims[i]);
  if (vol.dtype == kDtypeF32) {
    for (double v : vol.data) w.f32(static_cast<float>(v));
  } else {
    for (double v : vol.data) w.f64(v);
  }
  const std::uint32_t crc = crc32(w.data());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing", path);
  out.write(kVolumeMagic, 4);
  out.write(reinterpret_cast<const char*>(w.data().data()), static_cast<std::streamsize>(w.data().size()));
  ByteWriter tail;
  tail.u32(crc);
  out.write(reinterpret_cast<const char*>(tail.data().data()), 4);
  if (!out) throw IoError("failed writing volume", path);
}

VolumeData read_volume_raw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open volume file", path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4 + 4 + 16 + 4) throw IoError("truncated volume file", path);
  if (std::memcmp(bytes.data(), kVolumeMagic, 4) != 0) throw IoError("not a VXH1 volume file", path);

  const std::size_t body_len = bytes.size() - 4 - 4;
  ByteReader tail(bytes.data() + 4 + body_len, 4);
  if (tail.u32() != crc32(bytes.data() + 4, body_len)) throw IoError("volume checksum failure", path);

  ByteReader r(bytes.data() + 4, body_len);
  VolumeData vol;
  vol.dtype = static_cast<int>(r.u32());
  if (vol.dtype != kDtypeF32 && vol.dtype != kDtypeF64) throw IoError("unknown dtype code", path);
  for (int i = 0; i < 4; ++i) vol.dims[i] = r.u32();
  const std::size_t count =
      static_cast<std::size_t>(vol.dims[0]) * vol.dims[1] * vol.dims[2] * vol.dims[3];
  const std::size_t elem = vol.dtype == kDtypeF32 ? 4 : 8;
  if (r.remaining() != count * elem) throw IoError("volume payload length mismatch", path);
  vol.data.resize(count);
  if (vol.dtype == kDtypeF32) {
    for (std::size_t i = 0; i < count; ++i) vol.data[i] = static_cast<double>(r.f32());
  } else {
    for (std::size_t i = 0; i < count; ++i) vol.data[i] = r.f64();
  }
  return vol;
}

void write_volume(const std::string& path, const Volume4D& vol, int dtype) {
  VolumeData raw;
  raw.dims[0] = static_cast<std::uint32_t>(vol.s);
  raw.dims[1] = static_cast<std::uint32_t>(vol.s);
  raw.dims[2] = static_cast<std::uint32_t>(vol.k);
  raw.dims[3] = static_cast<std::uint32_t>(vol.c);
  raw.dtype = dtype;
  raw.data = vol.data;
  write_volume_raw(path, raw);
}

Volume4D read_volume(const std::string& path) {
  const VolumeData raw = read_volume_raw(path);
  if (raw.dims[0] != raw.dims[1]) {
    throw ShapeError("volume '" + path + "' has a non-square horizontal plane (" +
                     std::to_string(raw.dims[0]) + "x" + std::to_string(raw.dims[1]) + ")");
  }
  Volume4D vol(static_cast<int>(raw.dims[0]), static_cast<int>(raw.dims[2]), static_cast<int>(raw.dims[3]));
  vol.data = raw.data;
  vol.validate();
  return vol;
}

VolumeData resize_block_mean(const VolumeData& vol, int factor_h1, int factor_h2, int factor_v) {
  if (factor_h1 < 1 || factor_h2 < 1 || factor_v < 1) throw ConfigError("resize factors must be >= 1");
  if (vol.dims[0] % factor_h1 != 0 || vol.dims[1] % factor_h2 != 0 || vol.dims[2] % factor_v != 0) {
    throw ShapeError("resize factors must divide the volume dims exactly");
  }
  VolumeData out;
  out.dtype = vol.dtype;
  out.dims[0] = vol.dims[0] / factor_h1;
  out.dims[1] = vol.dims[1] / factor_h2;
  out.dims[2] = vol.dims[2] / factor_v;
  out.dims[3] = vol.dims[3];
  out.data.assign(static_cast<std::size_t>(out.dims[0]) * out.dims[1] * out.dims[2] * out.dims[3], 0.0);

  const std::size_t S2 = vol.dims[1], K = vol.dims[2], C = vol.dims[3];
  const double inv = 1.0 / (static_cast<double>(factor_h1) * factor_h2 * factor_v);
  for (std::uint32_t o1 = 0; o1 < out.dims[0]; ++o1) {
    for (std::uint32_t o2 = 0; o2 < out.dims[1]; ++o2) {
      for (std::uint32_t ok = 0; ok < out.dims[2]; ++ok) {
        for (std::uint32_t c = 0; c < C; ++c) {
          double acc = 0.0;
          for (int d1 = 0; d1 < factor_h1; ++d1) {
            for (int d2 = 0; d2 < factor_h2; ++d2) {
              for (int dv = 0; dv < factor_v; ++dv) {
                const std::size_t idx =
                    ((static_cast<std::size_t>(o1 * factor_h1 + d1) * S2 + (o2 * factor_h2 + d2)) * K +
                     (ok * factor_v + dv)) * C + c;
                acc += vol.data[idx];
              }
            }
          }
          const std::size_t out_idx =
              ((static_cast<std::size_t>(o1) * out.dims[1] + o2) * out.dims[2] + ok) * C + c;
          out.data[out_idx] = acc * inv;
        }
      }
    }
  }
  return out;
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest", path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("manifest is not valid JSON: " + std::string(e.what()), path);
  }
  if (!j.is_array()) throw IoError("manifest must be a JSON array", path);

  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  std::vector<ManifestEntry> entries;
  std::set<std::string> ids;
  for (const auto& item : j) {
    ManifestEntry e;
    try {
      e.path = item.at("path").get<std::string>();
      e.label = item.at("label").get<int>();
      e.id = item.value("id", e.path);
    } catch (const nlohmann::json::exception& ex) {
      throw IoError("bad manifest entry: " + std::string(ex.what()), path);
    }
    if (e.label != 0 && e.label != 1) throw DataError("manifest labels must be 0 or 1");
    if (!ids.insert(e.id).second) throw DataError("duplicate manifest id '" + e.id + "'");
    std::filesystem::path p(e.path);
    if (p.is_relative()) p = base / p;
    e.path = p.string();
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  nlohmann::json j = nlohmann::json::array();
  for (const ManifestEntry& e : entries) {
    j.push_back({{"path", e.path}, {"label", e.label}, {"id", e.id}});
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing", path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing manifest", path);
}

Dataset load_dataset(const std::string& manifest_path) {
  const std::vector<ManifestEntry> entries = load_manifest(manifest_path);
  Dataset dataset;
  for (const ManifestEntry& e : entries) {
    if (!std::filesystem::exists(e.path)) throw IoError("volume file does not exist", e.path);
    dataset.volumes.push_back(read_volume(e.path));
    dataset.labels.push_back(e.label);
    dataset.ids.push_back(e.id);
  }
  return dataset;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config", path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("config is not valid JSON: " + std::string(e.what()), path);
  }
  RunConfig config;
  try {
    config = run_config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad config: " + std::string(e.what()));
  }
  validate_config(config);
  return config;
}

void save_config_file(const std::string& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing", path);
  out << run_config_to_json(config).dump(2) << "\n";
  if (!out) throw IoError("failed writing config", path);
}

}  // namespace voxelhop
