#include "mdfn/param_store.h"

#include <cmath>

#include "mdfn/error.h"
#include "mdfn/rng.h"

namespace mdfn {

Matrix& ParamStore::create(const std::string& path, std::size_t rows, std::size_t cols,
                           Init init) {
  if (entries_.count(path)) throw DataError("parameter already exists: " + path);
  if (rows == 0 || cols == 0) throw ShapeError("parameter " + path + " has empty shape");
  Entry e;
  e.value = Matrix(rows, cols);
  e.grad = Matrix(rows, cols);
  Rng rng(mix64(seed_ ^ fnv1a64(path)));
  switch (init) {
    case Init::kZeros:
      break;
    case Init::kOnes:
      e.value.fill(1.0);
      break;
    case Init::kXavier: {
      double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
      for (std::size_t i = 0; i < e.value.size(); i++) e.value.data()[i] = rng.uniform(-a, a);
      break;
    }
    case Init::kTable:
      for (std::size_t i = 0; i < e.value.size(); i++) e.value.data()[i] = 0.02 * rng.normal();
      break;
  }
  return entries_.emplace(path, std::move(e)).first->second.value;
}

Matrix& ParamStore::insert(const std::string& path, Matrix value) {
  if (entries_.count(path)) throw DataError("parameter already exists: " + path);
  Entry e;
  e.grad = Matrix(value.rows(), value.cols());
  e.value = std::move(value);
  return entries_.emplace(path, std::move(e)).first->second.value;
}

const Matrix& ParamStore::at(const std::string& path) const {
  auto it = entries_.find(path);
  if (it == entries_.end()) throw DataError("no such parameter: " + path);
  return it->second.value;
}

Matrix& ParamStore::at(const std::string& path) {
  auto it = entries_.find(path);
  if (it == entries_.end()) throw DataError("no such parameter: " + path);
  return it->second.value;
}

const Matrix& ParamStore::grad(const std::string& path) const {
  auto it = entries_.find(path);
  if (it == entries_.end()) throw DataError("no such parameter: " + path);
  return it->second.grad;
}

void ParamStore::accumulate_grad(const std::string& path, const Matrix& g, double scale) {
  auto it = entries_.find(path);
  if (it == entries_.end()) throw DataError("no such parameter: " + path);
  Entry& e = it->second;
  if (!e.grad.same_shape(g)) {
    throw ShapeError("gradient for " + path + " is " + g.shape_str() + ", parameter is " +
                     e.value.shape_str());
  }
  for (std::size_t i = 0; i < g.size(); i++) e.grad.data()[i] += scale * g.data()[i];
  e.populated = true;
}

void ParamStore::zero_grads() {
  for (auto& [path, e] : entries_) {
    e.grad.fill(0.0);
    e.populated = false;
  }
}

bool ParamStore::grad_populated(const std::string& path) const {
  auto it = entries_.find(path);
  if (it == entries_.end()) throw DataError("no such parameter: " + path);
  return it->second.populated;
}

std::vector<std::string> ParamStore::paths() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [path, e] : entries_) out.push_back(path);
  return out;
}

Var TapeBinding::operator[](const std::string& path) {
  auto it = bound_.find(path);
  if (it != bound_.end()) return it->second;
  Var v = tape_->leaf(store_->at(path), true);
  bound_.emplace(path, v);
  return v;
}

void TapeBinding::accumulate_grads(double scale) {
  for (const auto& [path, var] : bound_) {
    store_->accumulate_grad(path, tape_->grad(var), scale);
  }
}

void AdamState::step(ParamStore& store) {
  for (const auto& [path, e] : store.entries()) {
    if (!e.populated) {
      throw NumericError("adam step: gradient never populated for parameter " + path);
    }
  }
  step_count_++;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
  for (auto& [path, e] : store.entries()) {
    auto mit = moments_.find(path);
    if (mit == moments_.end()) {
      mit = moments_
                .emplace(path, std::make_pair(Matrix(e.value.rows(), e.value.cols()),
                                              Matrix(e.value.rows(), e.value.cols())))
                .first;
    }
    Matrix& m = mit->second.first;
    Matrix& v = mit->second.second;
    if (!m.same_shape(e.value)) {
      throw ShapeError("adam step: moment shape " + m.shape_str() + " vs parameter " +
                       e.value.shape_str() + " for " + path);
    }
    for (std::size_t i = 0; i < e.value.size(); i++) {
      double g = e.grad.data()[i];
      if (!std::isfinite(g)) {
        throw NumericError("adam step: non-finite gradient in " + path);
      }
      m.data()[i] = b1 * m.data()[i] + (1.0 - b1) * g;
      v.data()[i] = b2 * v.data()[i] + (1.0 - b2) * g * g;
      double mhat = m.data()[i] / bc1;
      double vhat = v.data()[i] / bc2;
      double upd = e.value.data()[i] - config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
      if (quantize_f32) upd = static_cast<double>(static_cast<float>(upd));
      e.value.data()[i] = upd;
    }
    e.grad.fill(0.0);
    e.populated = false;
  }
}

}  // namespace mdfn
