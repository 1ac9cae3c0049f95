#include "mdfn/train.h"

#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "mdfn/error.h"
#include "mdfn/rng.h"
#include "mdfn/tape.h"

namespace mdfn {

namespace {

struct Cached {
  Matrix tokens;
  Matrix frames;
};

std::vector<Cached> cache_embeddings(const std::vector<Utterance>& utts,
                                     const EmbeddingProvider& provider) {
  std::vector<Cached> out;
  out.reserve(utts.size());
  for (const Utterance& utt : utts) {
    utt.validate();
    out.push_back({provider.token_embeddings(utt), provider.frame_embeddings(utt).frames});
  }
  return out;
}

EvalReport score(const std::vector<Utterance>& utts, const std::vector<Cached>& cached,
                 const ParamStore& params, const ModelConfig& model) {
  std::vector<std::vector<Tag>> predicted;
  predicted.reserve(utts.size());
  for (std::size_t i = 0; i < utts.size(); ++i) {
    predicted.push_back(predict_tags(cached[i].tokens, cached[i].frames, params, model));
  }
  return evaluate_tags(utts, predicted);
}

}  // namespace

TrainResult train(const std::vector<Utterance>& train_set,
                  const std::vector<Utterance>& dev_set,
                  const EmbeddingProvider& provider, const TrainConfig& config) {
  if (train_set.empty()) throw ShapeError("train: empty training set");
  if (config.batch_size == 0) throw ShapeError("train: batch_size must be positive");
  if (config.epochs == 0) throw ShapeError("train: epochs must be positive");
  if (provider.dimension() != config.model.cme.d) {
    throw ShapeError("train: provider dimension " + std::to_string(provider.dimension()) +
                     " does not match model dimension " + std::to_string(config.model.cme.d));
  }

  std::vector<Cached> train_cache = cache_embeddings(train_set, provider);
  std::vector<Cached> dev_cache = cache_embeddings(dev_set, provider);

  ParamStore store(config.seed);
  add_model_params(store, config.model);

  AdamConfig adam_config;
  adam_config.learning_rate = config.learning_rate;
  AdamState adam(adam_config);
  adam.quantize_f32 = (config.precision == Precision::kF32);

  TrainResult result;
  Rng shuffle_rng(mix64(config.seed ^ 0x74726e73686Full));  // epoch-shuffle stream
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  bool want_train_f1 = config.eval_train || config.stop_at_train_f1 >= 0.0;
  bool step_capped = false;

  for (std::size_t epoch = 1; epoch <= config.epochs && !step_capped; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t seen = 0;

    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      std::size_t end = std::min(begin + config.batch_size, order.size());
      double inv_batch = 1.0 / static_cast<double>(end - begin);
      store.zero_grads();

      for (std::size_t b = begin; b < end; ++b) {
        std::size_t idx = order[b];
        Tape tape;
        TapeBinding binding(tape, store);
        try {
          Var loss = utterance_loss_vars(tape, train_cache[idx].tokens, train_cache[idx].frames,
                                         train_set[idx].tags, binding, config.model);
          double value = tape.value(loss)(0, 0);
          if (!std::isfinite(value)) throw NumericError("non-finite loss");
          loss_sum += value;
          tape.backward(loss);
        } catch (const NumericError& e) {
          throw NumericError("train: utterance '" + train_set[idx].id + "' in epoch " +
                             std::to_string(epoch) + ": " + e.what());
        }
        ++seen;
        binding.accumulate_grads(inv_batch);
      }

      adam.step(store);
      ++result.steps;
      if (config.max_steps != 0 && result.steps >= config.max_steps) {
        step_capped = true;
        break;
      }
    }

    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = loss_sum / static_cast<double>(seen);
    if (want_train_f1) {
      log.train_f1 = score(train_set, train_cache, store, config.model).f1;
    }
    if (!dev_set.empty()) {
      EvalReport dev = score(dev_set, dev_cache, store, config.model);
      log.dev_precision = dev.precision;
      log.dev_recall = dev.recall;
      log.dev_f1 = dev.f1;
      if (log.dev_f1 > result.best_dev_f1) {
        result.best_dev_f1 = log.dev_f1;
        result.best_epoch = epoch;
        result.params = store;
      }
    }
    result.log.push_back(log);

    if (config.stop_at_train_f1 >= 0.0 && log.train_f1 >= config.stop_at_train_f1) break;
  }

  if (dev_set.empty()) result.params = std::move(store);
  return result;
}

}  // namespace mdfn
