#include "mdfn/model.h"

#include "mdfn/error.h"

namespace mdfn {

namespace {

// Classifier input: [fused[start] ; fused[end] ; length code].
std::size_t classifier_width(const ModelConfig& config) {
  return 4 * config.cme.d + config.len_dim;
}

Matrix zeros_like_frames(const Matrix& a) {
  Matrix z(a.rows(), a.cols());
  z.fill(0.0);
  return z;
}

// Shared forward to span logits; tags empty for prediction.
Var span_logits_vars(Tape& tape, const Matrix& t, const Matrix& a, TapeBinding& params,
                     const ModelConfig& config, std::vector<SpanCandidate>& spans) {
  Var tv = tape.leaf(t, false);
  Var av = tape.leaf(config.ablate_audio ? zeros_like_frames(a) : a, false);
  MmiVars mmi = mmi_forward_vars(tape, tv, av, params, config.cme, config.ablate_audio);
  spans = enumerate_spans(t.rows(), config.max_span_len);
  Var features =
      span_feature_matrix(tape, mmi.fused, params["spans.length_table"], spans);
  return tape.linear(features, params["cls.w"], params["cls.b"]);
}

}  // namespace

void add_model_params(ParamStore& store, const ModelConfig& config) {
  add_mmi_params(store, config.cme, !config.ablate_audio);
  store.create("spans.length_table", config.max_span_len, config.len_dim, Init::kTable);
  store.create("cls.w", classifier_width(config), 2, Init::kXavier);
  store.create("cls.b", 1, 2, Init::kZeros);
}

Var utterance_loss_vars(Tape& tape, const Matrix& t, const Matrix& a,
                        const std::vector<Tag>& tags, TapeBinding& params,
                        const ModelConfig& config) {
  if (tags.size() != t.rows()) {
    throw ShapeError(std::to_string(tags.size()) + " tags for " + std::to_string(t.rows()) +
                     " token rows");
  }
  std::vector<SpanCandidate> spans;
  Var logits = span_logits_vars(tape, t, a, params, config, spans);
  std::vector<Tag> labels = gold_span_labels(tags, spans, config.gold_any_all_i);
  std::vector<std::size_t> gold;
  std::vector<double> weights;
  gold.reserve(labels.size());
  weights.reserve(labels.size());
  for (Tag l : labels) {
    gold.push_back(static_cast<std::size_t>(l));
    weights.push_back(l == Tag::kI ? config.positive_class_weight : 1.0);
  }
  if (config.positive_class_weight == 1.0) {
    return tape.cross_entropy(logits, std::move(gold));
  }
  return tape.cross_entropy(logits, std::move(gold), std::move(weights));
}

std::vector<Tag> predict_tags(const Matrix& t, const Matrix& a, const ParamStore& params,
                              const ModelConfig& config) {
  Tape tape;
  // Read-only pass; leaves copy values out of the store.
  TapeBinding binding(tape, const_cast<ParamStore&>(params));
  std::vector<SpanCandidate> spans;
  Var logits = span_logits_vars(tape, t, a, binding, config, spans);
  std::vector<SpanPrediction> preds = span_predictions(
      tape.value(logits), spans, config.decision_threshold, config.strict_threshold);
  return heuristic_decode(preds, t.rows());
}

std::vector<Tag> predict_tags(const Utterance& utt, const EmbeddingProvider& provider,
                              const ParamStore& params, const ModelConfig& config) {
  Matrix t = provider.token_embeddings(utt);
  FrameSynthesis a = provider.frame_embeddings(utt);
  return predict_tags(t, a.frames, params, config);
}

}  // namespace mdfn
