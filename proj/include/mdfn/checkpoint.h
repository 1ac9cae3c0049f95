#pragma once

#include <cstdint>
#include <string>

#include "mdfn/encoders.h"
#include "mdfn/model.h"
#include "mdfn/param_store.h"
#include "mdfn/train.h"

namespace mdfn {

// Everything a checkpoint carries besides the weights: the model shape and
// the toy-provider settings needed to rebuild bit-identical inputs later.
struct CheckpointMeta {
  ModelConfig model;
  std::uint64_t embed_seed = 0;
  ToyFrameConfig frame_config;
  std::uint64_t train_seed = 0;
  Precision precision = Precision::kF64;
};

struct Checkpoint {
  CheckpointMeta meta;
  ParamStore params;
};

// File layout: 8-byte magic, u64 metadata length, metadata JSON (sorted
// keys), u32 parameter count, then per parameter in sorted-path order a
// u32 name length, the name, and one embedding record (f64 payload, or f32
// when the checkpoint precision is f32). Writing is deterministic, so
// save -> load -> save is byte-identical.
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);

// Errors name the file and byte offset; unknown magic, malformed metadata,
// truncation, and trailing bytes all raise DataError.
Checkpoint load_checkpoint(const std::string& path);

ToyProvider provider_from_meta(const CheckpointMeta& meta);

}  // namespace mdfn
