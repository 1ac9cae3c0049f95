#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdfn/corpus.h"
#include "mdfn/matrix.h"

namespace mdfn {

// Token and frame embedding synthesis plus the on-disk embedding container.
// The toy encoders stand in for large pretrained text/speech models: they are
// deterministic in (input, seed, d), so every experiment is reproducible, and
// they give the two modalities just enough shared structure for cross-modal
// attention to latch onto.

// Unit-length pseudorandom vector for a token string. The same (token, seed,
// d) always yields the same vector; it is shared between the token encoder and
// the frame synthesizer so both modalities speak about a token in the same
// direction.
std::vector<double> unit_token_vector(const std::string& token, std::size_t d,
                                      std::uint64_t seed);

// Fixed unit direction that carries the acoustic cue channel. Depends only on
// d, not on the seed, so cue geometry is stable across corpora.
std::vector<double> cue_direction(std::size_t d);

// Classic sinusoidal position code: count x d, row p has sin(p * w_j) in even
// columns and cos(p * w_j) in odd ones, with w_j geometric in the column pair.
Matrix sinusoidal_positions(std::size_t count, std::size_t d);

// Token matrix T (M x d): row m = unit_token_vector(token_m) + position row m.
// Throws DataError on an empty token, ShapeError when d < 2 or M == 0.
Matrix toy_token_embeddings(const std::vector<std::string>& tokens, std::size_t d,
                            std::uint64_t seed);

// Speech timing model. stride_ms paces the frame grid, window_ms is kept for
// provenance but does not enter the frame count, ms_per_char sets how long a
// token "sounds".
struct FrameTiming {
  double stride_ms = 20.0;
  double window_ms = 25.0;
  double ms_per_char = 60.0;
};

// Frames a token occupies: max(1, round(chars * ms_per_char / stride_ms)),
// counting UTF-8 codepoints. Throws DataError on empty token or stride <= 0.
std::size_t frames_for_token(const std::string& token, const FrameTiming& timing);

struct ToyFrameConfig {
  FrameTiming timing;
  double noise_scale = 0.05;
  // Weight of the token-position code mixed into every frame. Lets attention
  // align a frame with its source token by position, which text-identical
  // utterances need; 0 gives frames that depend on the token string alone.
  double position_weight = 1.0;
};

struct FrameSynthesis {
  Matrix frames;                       // J x d
  std::vector<std::size_t> alignment;  // frame j -> source token index, nondecreasing
};

// Frame matrix A (J x d). Token m emits frames_for_token(token_m) consecutive
// frames, each: unit_token_vector + channel[m] * cue_direction
// + position_weight * position row m + noise_scale * fresh seeded noise.
// channel.size() must equal tokens.size().
FrameSynthesis toy_frame_embeddings(const std::vector<std::string>& tokens, std::size_t d,
                                    std::uint64_t seed, const std::vector<double>& channel,
                                    const ToyFrameConfig& config = {});

// CRC-32 (polynomial 0xEDB88320), as used by zip/zlib.
std::uint32_t crc32(const void* data, std::size_t n);

// Embedding container: 16-byte magic "MDFN-EMBEDDING-1", then little-endian
// u32 version (1 = f32 payload, 2 = f64 payload), u64 rows, u64 cols, the
// row-major payload, and a trailing u32 CRC-32 of the payload bytes.
inline constexpr std::uint32_t kEmbeddingVersionF32 = 1;
inline constexpr std::uint32_t kEmbeddingVersionF64 = 2;

struct EmbeddingFileInfo {
  std::uint32_t version = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

// In-memory record form, reused by checkpoints. parse advances offset past
// the record; context names the source in errors ("file x.emb", "parameter
// cls.w"). Non-finite payload values are rejected on both sides.
void append_embedding_record(std::string& out, const Matrix& m, std::uint32_t version);
Matrix parse_embedding_record(const std::string& bytes, std::size_t& offset,
                              const std::string& context, EmbeddingFileInfo* info = nullptr);

void write_embedding_file(const std::string& path, const Matrix& m,
                          std::uint32_t version = kEmbeddingVersionF32);
Matrix read_embedding_file(const std::string& path, EmbeddingFileInfo* info = nullptr);

// Source of T and A for an utterance. Implementations are immutable after
// construction and return identical matrices on repeated calls.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dimension() const = 0;
  virtual Matrix token_embeddings(const Utterance& utt) const = 0;
  virtual FrameSynthesis frame_embeddings(const Utterance& utt) const = 0;
};

class ToyProvider : public EmbeddingProvider {
 public:
  ToyProvider(std::size_t d, std::uint64_t seed, ToyFrameConfig config = {})
      : d_(d), seed_(seed), config_(config) {}
  std::size_t dimension() const override { return d_; }
  Matrix token_embeddings(const Utterance& utt) const override;
  FrameSynthesis frame_embeddings(const Utterance& utt) const override;

 private:
  std::size_t d_;
  std::uint64_t seed_;
  ToyFrameConfig config_;
};

// Reads <dir>/<id>.tok.emb and <dir>/<id>.frm.emb. Shapes are checked against
// the utterance (token rows == token count, both widths == d). Frame-to-token
// alignment is not stored in the files, so it comes back empty.
class FileProvider : public EmbeddingProvider {
 public:
  FileProvider(std::string directory, std::size_t d)
      : directory_(std::move(directory)), d_(d) {}
  std::size_t dimension() const override { return d_; }
  Matrix token_embeddings(const Utterance& utt) const override;
  FrameSynthesis frame_embeddings(const Utterance& utt) const override;

 private:
  std::string directory_;
  std::size_t d_;
};

}  // namespace mdfn
