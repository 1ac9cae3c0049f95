#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mdfn/matrix.h"
#include "mdfn/param_store.h"
#include "mdfn/tape.h"

namespace mdfn {

// Cross-modal fusion of a token matrix T (M x d) and a frame matrix A (J x d).
// Three attention blocks bridge the modalities:
//   P = cme("mmi.a", queries A, kv T)   frames enriched with token context
//   R = cme("mmi.b", queries T, kv P)   speech-aware word representations
//   Q = cme("mmi.d", queries T, kv A)   word-aware speech representations
// A sigmoid gate driven by [R; Q] scales Q elementwise, and the fused
// per-token output is [Q_gated ; R] (M x 2d). No positional information is
// added here; order enters only through the input embeddings.

struct CmeConfig {
  std::size_t d = 16;
  std::size_t heads = 2;
  std::size_t ffn_hidden = 0;  // 0 means 4 * d
  double eps = 1e-5;
  std::size_t layers = 1;  // times each block is applied (re-querying the same kv)

  std::size_t ffn_dim() const { return ffn_hidden ? ffn_hidden : 4 * d; }
  // Throws ShapeError unless d divides evenly into heads.
  std::size_t head_dim() const;
};

// Parameter layout, per block layer l under a prefix like "mmi.a":
//   <prefix>.l<l>.{wq,wk,wv,wo}               d x d attention projections
//   <prefix>.l<l>.ffn.{w1,b1,w2,b2}           position-wise feed-forward
//   <prefix>.l<l>.ln1.{gamma,beta}            norm after attention residual
//   <prefix>.l<l>.ln2.{gamma,beta}            norm after feed-forward residual
// and for the gate: mmi.gate.w (2d x d), mmi.gate.b (1 x d).
void add_cme_params(ParamStore& store, const std::string& prefix, const CmeConfig& config);
void add_mmi_params(ParamStore& store, const CmeConfig& config, bool include_gate = true);

// Multi-head cross attention: per head, softmax(q k^T / sqrt(d/heads)) v over
// column slices of packed projections, heads concatenated, output-projected.
// attention_out, when given, receives each head's weight matrix (values only).
Var cma(Tape& tape, Var queries, Var keys_values, TapeBinding& params,
        const std::string& prefix, const CmeConfig& config,
        std::vector<Matrix>* attention_out = nullptr);

// Post-norm transformer layer around cma: LN(x + att) then LN(y + FFN(y)),
// FFN = linear, GELU, linear. Applies config.layers times.
Var cme_block(Tape& tape, Var queries, Var keys_values, TapeBinding& params,
              const std::string& prefix, const CmeConfig& config,
              std::vector<Matrix>* attention_out = nullptr);

// gate = sigmoid([r ; q] w + b), q_gated = gate * q elementwise.
struct GateVars {
  Var gate;
  Var q_gated;
};
GateVars acoustic_gate_vars(Tape& tape, Var r, Var q, Var w, Var b);

struct MmiVars {
  Var p;        // J x d
  Var r;        // M x d
  Var q;        // M x d
  Var gate;     // M x d; all-ones leaf when the gate is forced open
  Var q_gated;  // M x d
  Var fused;    // M x 2d, [q_gated ; r]
};

// Full fusion graph on the tape. gate_open bypasses the gate entirely
// (q_gated = q, no gate parameters touched), which the audio ablation uses.
MmiVars mmi_forward_vars(Tape& tape, Var t, Var a, TapeBinding& params,
                         const CmeConfig& config, bool gate_open = false);

// Value-only results for inference paths.
struct MmiOutput {
  Matrix r;
  Matrix q_gated;
  Matrix fused;
  Matrix gate;
};
std::pair<Matrix, Matrix> acoustic_gate(const Matrix& r, const Matrix& q, const Matrix& w,
                                        const Matrix& b);
MmiOutput mmi_forward(const Matrix& t, const Matrix& a, const ParamStore& params,
                      const CmeConfig& config, bool gate_open = false);

}  // namespace mdfn
