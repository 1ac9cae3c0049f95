#ifndef MDFN_PARAM_STORE_H_
#define MDFN_PARAM_STORE_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mdfn/matrix.h"
#include "mdfn/tape.h"

namespace mdfn {

enum class Init {
  kZeros,
  kOnes,
  kXavier,      // uniform(-a, a), a = sqrt(6 / (fan_in + fan_out))
  kTable,       // normal(0, 0.02), for embedding tables
};

// Named parameters with their gradient buffers. Iteration order is the
// sorted path order (std::map), which keeps every traversal deterministic.
// Initialization draws from a stream keyed by (seed, path), so the result
// for a given path does not depend on creation order.
class ParamStore {
 public:
  ParamStore() = default;
  explicit ParamStore(std::uint64_t seed) : seed_(seed) {}

  Matrix& create(const std::string& path, std::size_t rows, std::size_t cols, Init init);
  // Inserts a ready matrix (checkpoint load path).
  Matrix& insert(const std::string& path, Matrix value);

  bool has(const std::string& path) const { return entries_.count(path) != 0; }
  const Matrix& at(const std::string& path) const;
  Matrix& at(const std::string& path);
  const Matrix& grad(const std::string& path) const;

  // Adds scale * g to the stored gradient and marks it populated.
  void accumulate_grad(const std::string& path, const Matrix& g, double scale = 1.0);
  void zero_grads();
  bool grad_populated(const std::string& path) const;

  std::vector<std::string> paths() const;  // sorted
  std::size_t size() const { return entries_.size(); }
  std::uint64_t seed() const { return seed_; }

  struct Entry {
    Matrix value;
    Matrix grad;
    bool populated = false;
  };
  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::map<std::string, Entry>& entries() { return entries_; }

 private:
  std::uint64_t seed_ = 0;
  std::map<std::string, Entry> entries_;
};

// Lazily exposes store parameters as tape leaves so a forward pass can be
// recorded, then routes the tape gradients back into the store.
class TapeBinding {
 public:
  TapeBinding(Tape& tape, ParamStore& store) : tape_(&tape), store_(&store) {}

  Var operator[](const std::string& path);

  // Call after Tape::backward. Adds scale * d(loss)/d(param) into the store
  // for every parameter touched by this binding.
  void accumulate_grads(double scale = 1.0);

 private:
  Tape* tape_;
  ParamStore* store_;
  std::map<std::string, Var> bound_;
};

struct AdamConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. step() consumes the store gradients: every
// parameter must have a populated gradient, updates are applied in sorted
// path order, and all gradients are zeroed afterwards.
class AdamState {
 public:
  explicit AdamState(AdamConfig config = {}) : config_(config) {}

  void step(ParamStore& store);

  long step_count() const { return step_count_; }
  AdamConfig& config() { return config_; }
  const AdamConfig& config() const { return config_; }

  // When set, parameters are rounded through 32-bit floats after each
  // update, pinning the trajectory to what an f32 run can represent.
  bool quantize_f32 = false;

 private:
  AdamConfig config_;
  long step_count_ = 0;
  std::map<std::string, std::pair<Matrix, Matrix>> moments_;  // m, v
};

}  // namespace mdfn

#endif  // MDFN_PARAM_STORE_H_
