#include "mdfn/encoders.h"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>

#include "mdfn/error.h"
#include "mdfn/rng.h"

namespace mdfn {

namespace {

constexpr char kEmbeddingMagic[17] = "MDFN-EMBEDDING-1";  // 16 bytes on disk

std::size_t codepoint_count(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) n++;
  }
  return n;
}

std::vector<double> unit_vector_from_stream(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  while (true) {
    double norm_sq = 0.0;
    for (std::size_t j = 0; j < d; j++) {
      v[j] = rng.normal();
      norm_sq += v[j] * v[j];
    }
    if (norm_sq > 1e-30) {
      double inv = 1.0 / std::sqrt(norm_sq);
      for (double& x : v) x *= inv;
      return v;
    }
  }
}

void check_dim(std::size_t d) {
  if (d < 2) throw ShapeError("embedding dimension must be at least 2, got " + std::to_string(d));
}

double position_signal(std::size_t pos, std::size_t j, std::size_t d) {
  double exponent = static_cast<double>(2 * (j / 2)) / static_cast<double>(d);
  double omega = std::pow(10000.0, -exponent);
  double angle = static_cast<double>(pos) * omega;
  return (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
}

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

const std::array<std::uint32_t, 256>& crc_table() {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; i++) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; k++) {
        c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      }
      t[i] = c;
    }
    return t;
  }();
  return table;
}

void require_bytes(const std::string& bytes, std::size_t offset, std::size_t need,
                   const std::string& context, const char* what) {
  if (offset + need > bytes.size()) {
    throw DataError(context + ": truncated " + what + " at byte offset " +
                    std::to_string(offset) + ", expected " + std::to_string(need) +
                    " bytes, only " + std::to_string(bytes.size() - offset) + " remain");
  }
}

}  // namespace

std::vector<double> unit_token_vector(const std::string& token, std::size_t d,
                                      std::uint64_t seed) {
  check_dim(d);
  if (token.empty()) throw DataError("empty token has no embedding");
  Rng rng(mix64(fnv1a64(token) ^ mix64(seed)));
  return unit_vector_from_stream(rng, d);
}

std::vector<double> cue_direction(std::size_t d) {
  check_dim(d);
  Rng rng(mix64(fnv1a64("cue") ^ 0x637565u));
  return unit_vector_from_stream(rng, d);
}

Matrix sinusoidal_positions(std::size_t count, std::size_t d) {
  check_dim(d);
  Matrix out(count, d);
  for (std::size_t p = 0; p < count; p++) {
    for (std::size_t j = 0; j < d; j++) {
      out(p, j) = position_signal(p, j, d);
    }
  }
  return out;
}

Matrix toy_token_embeddings(const std::vector<std::string>& tokens, std::size_t d,
                            std::uint64_t seed) {
  check_dim(d);
  if (tokens.empty()) throw ShapeError("token embeddings need at least one token");
  Matrix out(tokens.size(), d);
  for (std::size_t m = 0; m < tokens.size(); m++) {
    std::vector<double> v = unit_token_vector(tokens[m], d, seed);
    for (std::size_t j = 0; j < d; j++) {
      out(m, j) = v[j] + position_signal(m, j, d);
    }
  }
  return out;
}

std::size_t frames_for_token(const std::string& token, const FrameTiming& timing) {
  if (token.empty()) throw DataError("empty token has no frames");
  if (!(timing.stride_ms > 0.0)) {
    throw DataError("frame stride must be positive, got " + std::to_string(timing.stride_ms));
  }
  double duration = static_cast<double>(codepoint_count(token)) * timing.ms_per_char;
  auto k = static_cast<long long>(std::llround(duration / timing.stride_ms));
  return k < 1 ? 1 : static_cast<std::size_t>(k);
}

FrameSynthesis toy_frame_embeddings(const std::vector<std::string>& tokens, std::size_t d,
                                    std::uint64_t seed, const std::vector<double>& channel,
                                    const ToyFrameConfig& config) {
  check_dim(d);
  if (tokens.empty()) throw ShapeError("frame synthesis needs at least one token");
  if (channel.size() != tokens.size()) {
    throw ShapeError("channel has " + std::to_string(channel.size()) + " values for " +
                     std::to_string(tokens.size()) + " tokens");
  }

  std::vector<std::size_t> counts(tokens.size());
  std::size_t total = 0;
  for (std::size_t m = 0; m < tokens.size(); m++) {
    counts[m] = frames_for_token(tokens[m], config.timing);
    total += counts[m];
  }

  FrameSynthesis out;
  out.frames = Matrix(total, d);
  out.alignment.reserve(total);
  std::vector<double> cue = cue_direction(d);
  Rng noise(mix64(mix64(seed) ^ 0x6e6f6973u));
  std::size_t j_row = 0;
  for (std::size_t m = 0; m < tokens.size(); m++) {
    std::vector<double> voice = unit_token_vector(tokens[m], d, seed);
    for (std::size_t f = 0; f < counts[m]; f++, j_row++) {
      out.alignment.push_back(m);
      double* row = out.frames.row(j_row);
      for (std::size_t j = 0; j < d; j++) {
        double v = voice[j] + channel[m] * cue[j] +
                   config.position_weight * position_signal(m, j, d);
        if (config.noise_scale != 0.0) v += config.noise_scale * noise.normal();
        row[j] = v;
      }
    }
  }
  return out;
}

std::uint32_t crc32(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  const auto& table = crc_table();
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; i++) {
    c = table[(c ^ p[i]) & 0xFF] ^ (c >> 8);
  }
  return c ^ 0xFFFFFFFFu;
}

void append_embedding_record(std::string& out, const Matrix& m, std::uint32_t version) {
  if (version != kEmbeddingVersionF32 && version != kEmbeddingVersionF64) {
    throw DataError("unknown embedding record version " + std::to_string(version));
  }
  if (!m.all_finite()) throw DataError("refusing to write non-finite embedding values");
  out.append(kEmbeddingMagic, 16);
  put_u32(out, version);
  put_u64(out, m.rows());
  put_u64(out, m.cols());
  std::string payload;
  payload.reserve(m.size() * (version == kEmbeddingVersionF32 ? 4 : 8));
  for (std::size_t i = 0; i < m.rows(); i++) {
    for (std::size_t j = 0; j < m.cols(); j++) {
      if (version == kEmbeddingVersionF32) {
        put_u32(payload, std::bit_cast<std::uint32_t>(static_cast<float>(m(i, j))));
      } else {
        put_u64(payload, std::bit_cast<std::uint64_t>(m(i, j)));
      }
    }
  }
  out += payload;
  put_u32(out, crc32(payload.data(), payload.size()));
}

Matrix parse_embedding_record(const std::string& bytes, std::size_t& offset,
                              const std::string& context, EmbeddingFileInfo* info) {
  require_bytes(bytes, offset, 36, context, "header");
  if (bytes.compare(offset, 16, kEmbeddingMagic, 16) != 0) {
    throw DataError(context + ": bad magic at byte offset " + std::to_string(offset));
  }
  std::uint32_t version = get_u32(bytes, offset + 16);
  if (version != kEmbeddingVersionF32 && version != kEmbeddingVersionF64) {
    throw DataError(context + ": unknown version " + std::to_string(version) +
                    " at byte offset " + std::to_string(offset + 16));
  }
  std::uint64_t rows = get_u64(bytes, offset + 20);
  std::uint64_t cols = get_u64(bytes, offset + 28);
  std::size_t value_size = version == kEmbeddingVersionF32 ? 4 : 8;
  if (rows == 0 || cols == 0 || rows > (1u << 24) || cols > (1u << 24)) {
    throw DataError(context + ": implausible shape " + std::to_string(rows) + "x" +
                    std::to_string(cols) + " at byte offset " + std::to_string(offset + 20));
  }
  std::size_t payload_at = offset + 36;
  std::size_t payload_bytes = static_cast<std::size_t>(rows * cols) * value_size;
  require_bytes(bytes, payload_at, payload_bytes + 4, context, "payload");

  std::uint32_t stored = get_u32(bytes, payload_at + payload_bytes);
  std::uint32_t actual = crc32(bytes.data() + payload_at, payload_bytes);
  if (stored != actual) {
    throw DataError(context + ": payload checksum mismatch (stored " + std::to_string(stored) +
                    ", computed " + std::to_string(actual) + ")");
  }

  Matrix m(rows, cols);
  std::size_t at = payload_at;
  for (std::size_t i = 0; i < m.rows(); i++) {
    for (std::size_t j = 0; j < m.cols(); j++, at += value_size) {
      double v;
      if (version == kEmbeddingVersionF32) {
        v = static_cast<double>(std::bit_cast<float>(get_u32(bytes, at)));
      } else {
        v = std::bit_cast<double>(get_u64(bytes, at));
      }
      if (!std::isfinite(v)) {
        throw DataError(context + ": non-finite value at byte offset " + std::to_string(at));
      }
      m(i, j) = v;
    }
  }
  offset = payload_at + payload_bytes + 4;
  if (info != nullptr) {
    info->version = version;
    info->rows = m.rows();
    info->cols = m.cols();
  }
  return m;
}

void write_embedding_file(const std::string& path, const Matrix& m, std::uint32_t version) {
  std::string bytes;
  append_embedding_record(bytes, m, version);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write embedding file: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path);
}

Matrix read_embedding_file(const std::string& path, EmbeddingFileInfo* info) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t offset = 0;
  Matrix m = parse_embedding_record(bytes, offset, "file " + path, info);
  if (offset != bytes.size()) {
    throw DataError("file " + path + ": " + std::to_string(bytes.size() - offset) +
                    " trailing bytes after record");
  }
  return m;
}

Matrix ToyProvider::token_embeddings(const Utterance& utt) const {
  return toy_token_embeddings(utt.tokens, d_, seed_);
}

FrameSynthesis ToyProvider::frame_embeddings(const Utterance& utt) const {
  return toy_frame_embeddings(utt.tokens, d_, seed_, utt.channel, config_);
}

Matrix FileProvider::token_embeddings(const Utterance& utt) const {
  std::string path = directory_ + "/" + utt.id + ".tok.emb";
  Matrix m = read_embedding_file(path);
  if (m.rows() != utt.tokens.size() || m.cols() != d_) {
    throw DataError("file " + path + ": shape " + m.shape_str() + " does not match " +
                    std::to_string(utt.tokens.size()) + " tokens at dimension " +
                    std::to_string(d_));
  }
  return m;
}

FrameSynthesis FileProvider::frame_embeddings(const Utterance& utt) const {
  std::string path = directory_ + "/" + utt.id + ".frm.emb";
  FrameSynthesis out;
  out.frames = read_embedding_file(path);
  if (out.frames.cols() != d_) {
    throw DataError("file " + path + ": width " + std::to_string(out.frames.cols()) +
                    " does not match dimension " + std::to_string(d_));
  }
  return out;
}

}  // namespace mdfn
