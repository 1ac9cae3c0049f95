#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mdfn/corpus.h"
#include "mdfn/encoders.h"
#include "mdfn/metrics.h"
#include "mdfn/model.h"
#include "mdfn/param_store.h"

namespace mdfn {

// kF32 keeps all arithmetic in doubles but rounds every parameter through
// 32-bit floats after each optimizer step, so the trajectory is pinned to
// values an f32 checkpoint can represent exactly.
enum class Precision { kF64, kF32 };

struct TrainConfig {
  ModelConfig model;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double learning_rate = 1e-5;
  std::uint64_t seed = 0;
  Precision precision = Precision::kF64;
  // Optional early exits. max_steps caps optimizer steps (0 = no cap) and is
  // checked per batch; stop_at_train_f1 is checked per epoch and implies the
  // train-set evaluation (negative = off).
  std::size_t max_steps = 0;
  double stop_at_train_f1 = -1.0;
  bool eval_train = false;  // score the train set each epoch even without a stop target
};

struct EpochLog {
  std::size_t epoch = 0;           // 1-based
  double mean_loss = 0.0;          // mean per-utterance loss over the epoch
  double train_f1 = -1.0;          // -1 when not evaluated
  double dev_precision = -1.0;     // -1 when dev is empty
  double dev_recall = -1.0;
  double dev_f1 = -1.0;
};

struct TrainResult {
  ParamStore params;  // best-dev snapshot; final params when dev is empty
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;  // 1-based; 0 when dev never scored
  double best_dev_f1 = -1.0;
  std::size_t steps = 0;  // optimizer steps taken
};

// Adam over per-utterance gradient accumulation: each batch loops its
// utterances, scales every gradient by 1/batch_count, then steps once.
// Epoch order is a seeded shuffle, so a fixed config is bit-reproducible.
// Errors: empty train set or provider dimension mismatch (ShapeError),
// non-finite values naming the utterance and epoch (NumericError).
TrainResult train(const std::vector<Utterance>& train_set,
                  const std::vector<Utterance>& dev_set,
                  const EmbeddingProvider& provider, const TrainConfig& config);

}  // namespace mdfn
