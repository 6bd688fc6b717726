#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "voxelhop/binfmt.hpp"
#include "voxelhop/errors.hpp"
#include "voxelhop/model.hpp"

#include "json.hpp"

namespace voxelhop {

std::uint32_t crc32(const std::uint8_t* data, std::size_t size) {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < size; ++i) crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

namespace {

constexpr char kMagic[4] = {'V', 'X', 'H', 'M'};

void write_matrix(ByteWriter& w, const Eigen::MatrixXd& m) {
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
  }
}

Eigen::MatrixXd read_matrix(ByteReader& r) {
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  Eigen::MatrixXd m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = r.f64();
  }
  return m;
}

void write_vector(ByteWriter& w, const Eigen::VectorXd& v) {
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) w.f64(v[i]);
}

Eigen::VectorXd read_vector(ByteReader& r) {
  const std::uint32_t n = r.u32();
  Eigen::VectorXd v(n);
  for (std::uint32_t i = 0; i < n; ++i) v[i] = r.f64();
  return v;
}

nlohmann::json config_json(const RunConfig& config) {
  nlohmann::json stages = nlohmann::json::array();
  for (const StageConfig& st : config.stages) {
    nlohmann::json s{{"s", st.s}, {"v", st.v}, {"energy_threshold", st.energy.threshold}};
    if (st.energy.max_filters) s["max_filters"] = *st.energy.max_filters;
    if (st.fit_row_cap) s["fit_row_cap"] = *st.fit_row_cap;
    switch (st.pool) {
      case StagePool::kHorizontal: s["pool"] = "horizontal"; break;
      case StagePool::kFull: s["pool"] = "full"; break;
      case StagePool::kNone: s["pool"] = "none"; break;
    }
    stages.push_back(std::move(s));
  }
  nlohmann::json agg = nlohmann::json::array();
  for (const AggSpec& a : config.aggregation) agg.push_back({{"h", a.h}, {"v", a.v}});
  return nlohmann::json{{"stages", std::move(stages)},
                        {"aggregation", std::move(agg)},
                        {"keep_fraction", config.keep_fraction},
                        {"L", config.L},
                        {"omega", config.omega},
                        {"score_bins", config.score_bins},
                        {"summary", config.summary == SummaryMode::kMax ? "max" : "mean"},
                        {"seed", config.seed},
                        {"repeats", config.repeats}};
}

RunConfig config_from_json_obj(const nlohmann::json& j) {
  RunConfig config;
  config.stages.clear();
  for (const auto& s : j.at("stages")) {
    StageConfig st;
    st.s = s.at("s").get<int>();
    st.v = s.at("v").get<int>();
    st.energy.threshold = s.at("energy_threshold").get<double>();
    if (s.contains("max_filters") && !s.at("max_filters").is_null()) {
      st.energy.max_filters = s.at("max_filters").get<int>();
    }
    if (s.contains("fit_row_cap") && !s.at("fit_row_cap").is_null()) {
      st.fit_row_cap = s.at("fit_row_cap").get<long long>();
    }
    const std::string pool = s.value("pool", "none");
    if (pool == "horizontal") {
      st.pool = StagePool::kHorizontal;
    } else if (pool == "full") {
      st.pool = StagePool::kFull;
    } else if (pool == "none") {
      st.pool = StagePool::kNone;
    } else {
      throw ConfigError("unknown pool mode '" + pool + "'");
    }
    config.stages.push_back(st);
  }
  config.aggregation.clear();
  for (const auto& a : j.at("aggregation")) {
    config.aggregation.push_back(AggSpec{a.at("h").get<int>(), a.at("v").get<int>()});
  }
  config.keep_fraction = j.value("keep_fraction", 0.6);
  config.L = j.value("L", 3);
  config.omega = j.value("omega", 10.0);
  config.score_bins = j.value("score_bins", 16);
  const std::string summary = j.value("summary", "mean");
  if (summary == "mean") {
    config.summary = SummaryMode::kMean;
  } else if (summary == "max") {
    config.summary = SummaryMode::kMax;
  } else {
    throw ConfigError("unknown summary mode '" + summary + "'");
  }
  config.seed = j.value("seed", std::uint64_t{1});
  config.repeats = j.value("repeats", 1);
  return config;
}

void write_section(std::ostream& out, const std::string& name, const std::vector<std::uint8_t>& payload) {
  ByteWriter header;
  header.str(name);
  header.u64(payload.size());
  out.write(reinterpret_cast<const char*>(header.data().data()), static_cast<std::streamsize>(header.data().size()));
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  ByteWriter crc;
  crc.u32(crc32(payload));
  out.write(reinterpret_cast<const char*>(crc.data().data()), 4);
}

}  // namespace

// Exposed to io.cpp for config files; declared in io.hpp.
nlohmann::json run_config_to_json(const RunConfig& config) { return config_json(config); }
RunConfig run_config_from_json(const nlohmann::json& j) { return config_from_json_obj(j); }

void save_model(const TrainedModel& model, std::ostream& out) {
  out.write(kMagic, 4);
  ByteWriter head;
  head.u32(model.format_version);
  head.u32(5);  // section count
  out.write(reinterpret_cast<const char*>(head.data().data()), static_cast<std::streamsize>(head.data().size()));

  {
    nlohmann::json meta{{"config", config_json(model.config)},
                        {"channels", model.cascade.channels},
                        {"s0", model.cascade.s0},
                        {"k0", model.cascade.k0},
                        {"threshold", model.threshold}};
    const std::string text = meta.dump();
    ByteWriter w;
    w.bytes(text.data(), text.size());
    write_section(out, "meta", w.data());
  }
  {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(model.cascade.banks.size()));
    for (const StageBanks& stage : model.cascade.banks) {
      w.u32(static_cast<std::uint32_t>(stage.per_channel.size()));
      for (const SaabFilterBank& bank : stage.per_channel) {
        w.u32(static_cast<std::uint32_t>(bank.n));
        w.u32(static_cast<std::uint32_t>(bank.F));
        w.f64(bank.bias);
        w.f64(bank.total_ac_energy);
        write_vector(w, bank.ac_eigenvalues);
        write_matrix(w, bank.ac_anchors);
      }
    }
    write_section(out, "cascade", w.data());
  }
  {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(model.masks.size()));
    for (const auto& stage : model.masks) {
      w.u32(static_cast<std::uint32_t>(stage.size()));
      for (const SelectionMask& mask : stage) {
        w.u32(static_cast<std::uint32_t>(mask.stage));
        w.u32(static_cast<std::uint32_t>(mask.channel));
        w.u32(static_cast<std::uint32_t>(mask.kept.size()));
        for (int idx : mask.kept) w.u32(static_cast<std::uint32_t>(idx));
        w.u32(static_cast<std::uint32_t>(mask.scores.size()));
        for (double s : mask.scores) w.f64(s);
      }
    }
    write_section(out, "masks", w.data());
  }
  {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(model.lag_units.size()));
    for (const LagUnit& unit : model.lag_units) {
      w.u32(static_cast<std::uint32_t>(unit.M));
      w.u32(static_cast<std::uint32_t>(unit.L));
      w.u32(static_cast<std::uint32_t>(unit.n));
      w.f64(unit.omega);
      write_matrix(w, unit.centers);
      write_matrix(w, unit.regression);
    }
    write_section(out, "lag", w.data());
  }
  {
    ByteWriter w;
    write_vector(w, model.classifier);
    w.f64(model.threshold);
    write_section(out, "classifier", w.data());
  }
  if (!out) throw IoError("failed to write model stream");
}

namespace {

std::vector<std::uint8_t> read_exact(std::istream& in, std::size_t n) {
  std::vector<std::uint8_t> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw IoError("truncated model file");
  return buf;
}

}  // namespace

TrainedModel load_model(std::istream& in) {
  const std::vector<std::uint8_t> magic = read_exact(in, 4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw IoError("not a model file (bad magic)");
  const std::vector<std::uint8_t> head_bytes = read_exact(in, 8);
  ByteReader head(head_bytes);
  const std::uint32_t version = head.u32();
  if (version != kModelFormatVersion) {
    throw IoError("unsupported model format version " + std::to_string(version) + " (expected " +
                  std::to_string(kModelFormatVersion) + ")");
  }
  const std::uint32_t section_count = head.u32();
  if (section_count != 5) throw IoError("unexpected section count");

  std::map<std::string, std::vector<std::uint8_t>> sections;
  for (std::uint32_t s = 0; s < section_count; ++s) {
    const std::vector<std::uint8_t> name_len_bytes = read_exact(in, 4);
    ByteReader nr(name_len_bytes);
    const std::uint32_t name_len = nr.u32();
    if (name_len > 64) throw IoError("corrupt section name");
    std::vector<std::uint8_t> name_bytes = read_exact(in, name_len);
    const std::string name(name_bytes.begin(), name_bytes.end());
    const std::vector<std::uint8_t> len_bytes = read_exact(in, 8);
    ByteReader lr(len_bytes);
    const std::uint64_t payload_len = lr.u64();
    if (payload_len > (1ull << 34)) throw IoError("corrupt section length");
    std::vector<std::uint8_t> payload = read_exact(in, payload_len);
    const std::vector<std::uint8_t> crc_bytes = read_exact(in, 4);
    ByteReader cr(crc_bytes);
    if (cr.u32() != crc32(payload)) throw IoError("checksum failure in section '" + name + "'");
    sections.emplace(name, std::move(payload));
  }
  in.peek();
  if (!in.eof()) throw IoError("trailing bytes after last section");

  for (const char* required : {"meta", "cascade", "masks", "lag", "classifier"}) {
    if (!sections.count(required)) throw IoError(std::string("missing section '") + required + "'");
  }

  TrainedModel model;
  model.format_version = version;
  {
    const auto& payload = sections["meta"];
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(payload.begin(), payload.end());
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("corrupt meta section: ") + e.what());
    }
    model.config = config_from_json_obj(meta.at("config"));
    model.cascade.channels = meta.at("channels").get<int>();
    model.cascade.s0 = meta.at("s0").get<int>();
    model.cascade.k0 = meta.at("k0").get<int>();
    model.threshold = meta.at("threshold").get<double>();
    model.cascade.configs = model.config.stages;
  }
  {
    ByteReader r(sections["cascade"]);
    const std::uint32_t stages = r.u32();
    model.cascade.banks.resize(stages);
    for (std::uint32_t i = 0; i < stages; ++i) {
      const std::uint32_t channels = r.u32();
      model.cascade.banks[i].per_channel.resize(channels);
      for (std::uint32_t c = 0; c < channels; ++c) {
        SaabFilterBank& bank = model.cascade.banks[i].per_channel[c];
        bank.n = static_cast<int>(r.u32());
        bank.F = static_cast<int>(r.u32());
        bank.bias = r.f64();
        bank.total_ac_energy = r.f64();
        bank.ac_eigenvalues = read_vector(r);
        bank.ac_anchors = read_matrix(r);
        bank.dc_anchor = Eigen::VectorXd::Constant(bank.n, 1.0 / std::sqrt(static_cast<double>(bank.n)));
        if (bank.ac_anchors.rows() != bank.F - 1 || (bank.F > 1 && bank.ac_anchors.cols() != bank.n)) {
          throw IoError("inconsistent bank dimensions");
        }
      }
    }
    if (!r.at_end()) throw IoError("trailing bytes in cascade section");
  }
  {
    ByteReader r(sections["masks"]);
    const std::uint32_t stages = r.u32();
    model.masks.resize(stages);
    for (std::uint32_t i = 0; i < stages; ++i) {
      const std::uint32_t channels = r.u32();
      model.masks[i].resize(channels);
      for (std::uint32_t c = 0; c < channels; ++c) {
        SelectionMask& mask = model.masks[i][c];
        mask.stage = static_cast<int>(r.u32());
        mask.channel = static_cast<int>(r.u32());
        mask.kept.resize(r.u32());
        for (auto& idx : mask.kept) idx = static_cast<int>(r.u32());
        mask.scores.resize(r.u32());
        for (auto& s : mask.scores) s = r.f64();
      }
    }
    if (!r.at_end()) throw IoError("trailing bytes in masks section");
  }
  {
    ByteReader r(sections["lag"]);
    const std::uint32_t stages = r.u32();
    model.lag_units.resize(stages);
    for (std::uint32_t i = 0; i < stages; ++i) {
      LagUnit& unit = model.lag_units[i];
      unit.M = static_cast<int>(r.u32());
      unit.L = static_cast<int>(r.u32());
      unit.n = static_cast<int>(r.u32());
      unit.omega = r.f64();
      unit.centers = read_matrix(r);
      unit.regression = read_matrix(r);
      if (unit.centers.rows() != unit.m_prime() || unit.regression.rows() != unit.m_prime() ||
          unit.regression.cols() != unit.n + 1) {
        throw IoError("inconsistent LAG dimensions");
      }
    }
    if (!r.at_end()) throw IoError("trailing bytes in lag section");
  }
  {
    ByteReader r(sections["classifier"]);
    model.classifier = read_vector(r);
    model.threshold = r.f64();
    if (!r.at_end()) throw IoError("trailing bytes in classifier section");
  }
  return model;
}

void save_model_file(const TrainedModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing", path);
  save_model(model, out);
  if (!out) throw IoError("failed writing model", path);
}

TrainedModel load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file", path);
  return load_model(in);
}

}  // namespace voxelhop
