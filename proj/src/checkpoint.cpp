#include "mdfn/checkpoint.h"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "mdfn/error.h"

namespace mdfn {

namespace {

constexpr char kMagic[9] = "MDFNCKP1";  // 8 bytes on disk
constexpr int kFormatVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; i++) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; i++) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& s, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; i--) v = (v << 8) | static_cast<unsigned char>(s[at + i]);
  return v;
}

std::uint64_t get_u64(const std::string& s, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; i--) v = (v << 8) | static_cast<unsigned char>(s[at + i]);
  return v;
}

void require_bytes(const std::string& bytes, std::size_t offset, std::size_t need,
                   const std::string& context, const char* what) {
  if (offset + need > bytes.size()) {
    throw DataError(context + ": truncated " + what + " at byte offset " +
                    std::to_string(offset) + ", expected " + std::to_string(need) +
                    " bytes, only " + std::to_string(bytes.size() - offset) + " remain");
  }
}

// nlohmann::json with the default object type keeps keys sorted, and dump()
// emits shortest round-trip doubles, so the metadata bytes are a pure
// function of the meta struct.
nlohmann::json meta_to_json(const CheckpointMeta& meta) {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["model"] = {
      {"d", meta.model.cme.d},
      {"heads", meta.model.cme.heads},
      {"ffn_hidden", meta.model.cme.ffn_hidden},
      {"eps", meta.model.cme.eps},
      {"layers", meta.model.cme.layers},
      {"max_span_len", meta.model.max_span_len},
      {"len_dim", meta.model.len_dim},
      {"decision_threshold", meta.model.decision_threshold},
      {"strict_threshold", meta.model.strict_threshold},
      {"gold_any_all_i", meta.model.gold_any_all_i},
      {"ablate_audio", meta.model.ablate_audio},
      {"positive_class_weight", meta.model.positive_class_weight},
  };
  j["provider"] = {
      {"embed_seed", meta.embed_seed},
      {"noise_scale", meta.frame_config.noise_scale},
      {"position_weight", meta.frame_config.position_weight},
      {"stride_ms", meta.frame_config.timing.stride_ms},
      {"window_ms", meta.frame_config.timing.window_ms},
      {"ms_per_char", meta.frame_config.timing.ms_per_char},
  };
  j["train_seed"] = meta.train_seed;
  j["precision"] = meta.precision == Precision::kF32 ? "f32" : "f64";
  return j;
}

CheckpointMeta meta_from_json(const nlohmann::json& j, const std::string& context) {
  CheckpointMeta meta;
  try {
    int version = j.at("format_version").get<int>();
    if (version != kFormatVersion) {
      throw DataError(context + ": unsupported checkpoint format version " +
                      std::to_string(version));
    }
    const nlohmann::json& m = j.at("model");
    meta.model.cme.d = m.at("d").get<std::size_t>();
    meta.model.cme.heads = m.at("heads").get<std::size_t>();
    meta.model.cme.ffn_hidden = m.at("ffn_hidden").get<std::size_t>();
    meta.model.cme.eps = m.at("eps").get<double>();
    meta.model.cme.layers = m.at("layers").get<std::size_t>();
    meta.model.max_span_len = m.at("max_span_len").get<std::size_t>();
    meta.model.len_dim = m.at("len_dim").get<std::size_t>();
    meta.model.decision_threshold = m.at("decision_threshold").get<double>();
    meta.model.strict_threshold = m.at("strict_threshold").get<bool>();
    meta.model.gold_any_all_i = m.at("gold_any_all_i").get<bool>();
    meta.model.ablate_audio = m.at("ablate_audio").get<bool>();
    meta.model.positive_class_weight = m.at("positive_class_weight").get<double>();
    const nlohmann::json& p = j.at("provider");
    meta.embed_seed = p.at("embed_seed").get<std::uint64_t>();
    meta.frame_config.noise_scale = p.at("noise_scale").get<double>();
    meta.frame_config.position_weight = p.at("position_weight").get<double>();
    meta.frame_config.timing.stride_ms = p.at("stride_ms").get<double>();
    meta.frame_config.timing.window_ms = p.at("window_ms").get<double>();
    meta.frame_config.timing.ms_per_char = p.at("ms_per_char").get<double>();
    meta.train_seed = j.at("train_seed").get<std::uint64_t>();
    std::string precision = j.at("precision").get<std::string>();
    if (precision == "f32") {
      meta.precision = Precision::kF32;
    } else if (precision == "f64") {
      meta.precision = Precision::kF64;
    } else {
      throw DataError(context + ": unknown precision '" + precision + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(context + ": bad metadata: " + e.what());
  }
  return meta;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::string out(kMagic, 8);
  std::string meta = meta_to_json(checkpoint.meta).dump();
  put_u64(out, meta.size());
  out += meta;

  std::vector<std::string> names = checkpoint.params.paths();
  if (names.size() > 0xFFFFFFFFull) throw DataError(path + ": too many parameters");
  put_u32(out, static_cast<std::uint32_t>(names.size()));
  std::uint32_t payload_version = checkpoint.meta.precision == Precision::kF32
                                      ? kEmbeddingVersionF32
                                      : kEmbeddingVersionF64;
  for (const std::string& name : names) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    append_embedding_record(out, checkpoint.params.at(name), payload_version);
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw DataError(path + ": cannot open for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw DataError(path + ": write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DataError(path + ": cannot open");
  std::ostringstream buffer;
  buffer << file.rdbuf();
  std::string bytes = buffer.str();

  require_bytes(bytes, 0, 16, path, "header");
  if (bytes.compare(0, 8, kMagic, 8) != 0) {
    throw DataError(path + ": bad magic, not a checkpoint file");
  }
  std::uint64_t meta_len = get_u64(bytes, 8);
  require_bytes(bytes, 16, meta_len, path, "metadata");

  nlohmann::json meta_json =
      nlohmann::json::parse(bytes.substr(16, meta_len), nullptr, /*allow_exceptions=*/false);
  if (meta_json.is_discarded()) {
    throw DataError(path + ": metadata is not valid JSON");
  }

  Checkpoint checkpoint;
  checkpoint.meta = meta_from_json(meta_json, path);
  checkpoint.params = ParamStore(checkpoint.meta.train_seed);

  std::size_t offset = 16 + meta_len;
  require_bytes(bytes, offset, 4, path, "parameter count");
  std::uint32_t count = get_u32(bytes, offset);
  offset += 4;
  for (std::uint32_t i = 0; i < count; ++i) {
    require_bytes(bytes, offset, 4, path, "parameter name length");
    std::uint32_t name_len = get_u32(bytes, offset);
    offset += 4;
    require_bytes(bytes, offset, name_len, path, "parameter name");
    std::string name = bytes.substr(offset, name_len);
    offset += name_len;
    Matrix value = parse_embedding_record(bytes, offset, path + ": param '" + name + "'");
    checkpoint.params.insert(name, std::move(value));
  }
  if (offset != bytes.size()) {
    throw DataError(path + ": " + std::to_string(bytes.size() - offset) +
                    " trailing bytes after the last parameter");
  }
  return checkpoint;
}

ToyProvider provider_from_meta(const CheckpointMeta& meta) {
  return ToyProvider(meta.model.cme.d, meta.embed_seed, meta.frame_config);
}

}  // namespace mdfn
