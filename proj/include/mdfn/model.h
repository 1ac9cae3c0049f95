#pragma once

#include <cstddef>
#include <vector>

#include "mdfn/corpus.h"
#include "mdfn/encoders.h"
#include "mdfn/matrix.h"
#include "mdfn/mmi.h"
#include "mdfn/param_store.h"
#include "mdfn/spanlab.h"
#include "mdfn/tape.h"

namespace mdfn {

// End-to-end span classifier over the fused multimodal representation:
// embeddings -> cross-modal fusion -> span features -> 2-class linear head.
struct ModelConfig {
  CmeConfig cme;
  std::size_t max_span_len = 8;
  std::size_t len_dim = 100;
  double decision_threshold = 0.5;
  bool strict_threshold = true;  // tie at the threshold stays O
  bool gold_any_all_i = false;   // alternative gold rule: any all-I span is I
  // Text-only ablation: the frame matrix is replaced by zeros and the gate
  // is forced open, so audio carries no information. Gate parameters are not
  // created for an ablated model.
  bool ablate_audio = false;
  // Cross-entropy weight on gold-I spans; O spans dominate the candidate set.
  double positive_class_weight = 1.0;
};

// Parameters: the fusion blocks (and gate unless ablated) under "mmi.", the
// span length table "spans.length_table" (max_span_len x len_dim), and the
// classifier "cls.w" (4d + len_dim x 2), "cls.b" (1 x 2).
void add_model_params(ParamStore& store, const ModelConfig& config);

// Span-classification loss for one utterance on the tape: weighted mean
// cross-entropy of every candidate span against its gold label.
Var utterance_loss_vars(Tape& tape, const Matrix& t, const Matrix& a,
                        const std::vector<Tag>& tags, TapeBinding& params,
                        const ModelConfig& config);

// Plain forward: classify spans, decode to token tags.
std::vector<Tag> predict_tags(const Matrix& t, const Matrix& a, const ParamStore& params,
                              const ModelConfig& config);
std::vector<Tag> predict_tags(const Utterance& utt, const EmbeddingProvider& provider,
                              const ParamStore& params, const ModelConfig& config);

}  // namespace mdfn
