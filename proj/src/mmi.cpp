#include "mdfn/mmi.h"

#include <cmath>

#include "mdfn/error.h"

namespace mdfn {

namespace {

std::string layer_prefix(const std::string& prefix, std::size_t layer) {
  return prefix + ".l" + std::to_string(layer);
}

void check_width(const Tape& tape, Var x, std::size_t d, const char* what) {
  if (tape.value(x).cols() != d) {
    throw ShapeError(std::string(what) + " has width " +
                     std::to_string(tape.value(x).cols()) + ", model dimension is " +
                     std::to_string(d));
  }
}

// One attention + feed-forward layer; cme_block loops this.
Var cme_layer(Tape& tape, Var queries, Var keys_values, TapeBinding& params,
              const std::string& lp, const CmeConfig& config,
              std::vector<Matrix>* attention_out) {
  Var att = cma(tape, queries, keys_values, params, lp, config, attention_out);
  Var y = tape.layer_norm(tape.add(queries, att), params[lp + ".ln1.gamma"],
                          params[lp + ".ln1.beta"], config.eps);
  Var h = tape.gelu(tape.linear(y, params[lp + ".ffn.w1"], params[lp + ".ffn.b1"]));
  Var f = tape.linear(h, params[lp + ".ffn.w2"], params[lp + ".ffn.b2"]);
  return tape.layer_norm(tape.add(y, f), params[lp + ".ln2.gamma"], params[lp + ".ln2.beta"],
                         config.eps);
}

}  // namespace

std::size_t CmeConfig::head_dim() const {
  if (d == 0 || heads == 0 || d % heads != 0) {
    throw ShapeError("model dimension " + std::to_string(d) + " is not divisible into " +
                     std::to_string(heads) + " heads");
  }
  return d / heads;
}

void add_cme_params(ParamStore& store, const std::string& prefix, const CmeConfig& config) {
  config.head_dim();
  std::size_t d = config.d;
  std::size_t f = config.ffn_dim();
  for (std::size_t l = 0; l < config.layers; l++) {
    std::string lp = layer_prefix(prefix, l);
    store.create(lp + ".wq", d, d, Init::kXavier);
    store.create(lp + ".wk", d, d, Init::kXavier);
    store.create(lp + ".wv", d, d, Init::kXavier);
    store.create(lp + ".wo", d, d, Init::kXavier);
    store.create(lp + ".ffn.w1", d, f, Init::kXavier);
    store.create(lp + ".ffn.b1", 1, f, Init::kZeros);
    store.create(lp + ".ffn.w2", f, d, Init::kXavier);
    store.create(lp + ".ffn.b2", 1, d, Init::kZeros);
    store.create(lp + ".ln1.gamma", 1, d, Init::kOnes);
    store.create(lp + ".ln1.beta", 1, d, Init::kZeros);
    store.create(lp + ".ln2.gamma", 1, d, Init::kOnes);
    store.create(lp + ".ln2.beta", 1, d, Init::kZeros);
  }
}

void add_mmi_params(ParamStore& store, const CmeConfig& config, bool include_gate) {
  add_cme_params(store, "mmi.a", config);
  add_cme_params(store, "mmi.b", config);
  add_cme_params(store, "mmi.d", config);
  if (include_gate) {
    store.create("mmi.gate.w", 2 * config.d, config.d, Init::kXavier);
    store.create("mmi.gate.b", 1, config.d, Init::kZeros);
  }
}

Var cma(Tape& tape, Var queries, Var keys_values, TapeBinding& params,
        const std::string& prefix, const CmeConfig& config,
        std::vector<Matrix>* attention_out) {
  std::size_t hd = config.head_dim();
  check_width(tape, queries, config.d, "query matrix");
  check_width(tape, keys_values, config.d, "key/value matrix");

  Var qp = tape.matmul(queries, params[prefix + ".wq"]);
  Var kp = tape.matmul(keys_values, params[prefix + ".wk"]);
  Var vp = tape.matmul(keys_values, params[prefix + ".wv"]);

  double inv_scale = 1.0 / std::sqrt(static_cast<double>(hd));
  Var concat;
  for (std::size_t h = 0; h < config.heads; h++) {
    Var qh = tape.slice_cols(qp, h * hd, (h + 1) * hd);
    Var kh = tape.slice_cols(kp, h * hd, (h + 1) * hd);
    Var vh = tape.slice_cols(vp, h * hd, (h + 1) * hd);
    Var attn = tape.softmax_rows(tape.scale(tape.matmul_nt(qh, kh), inv_scale));
    if (attention_out != nullptr) attention_out->push_back(tape.value(attn));
    Var head = tape.matmul(attn, vh);
    concat = h == 0 ? head : tape.concat_cols(concat, head);
  }
  return tape.matmul(concat, params[prefix + ".wo"]);
}

Var cme_block(Tape& tape, Var queries, Var keys_values, TapeBinding& params,
              const std::string& prefix, const CmeConfig& config,
              std::vector<Matrix>* attention_out) {
  Var x = queries;
  for (std::size_t l = 0; l < config.layers; l++) {
    x = cme_layer(tape, x, keys_values, params, layer_prefix(prefix, l), config,
                  attention_out);
  }
  return x;
}

GateVars acoustic_gate_vars(Tape& tape, Var r, Var q, Var w, Var b) {
  Var rq = tape.concat_cols(r, q);
  Var gate = tape.sigmoid(tape.add_row(tape.matmul(rq, w), b));
  return {gate, tape.mul(gate, q)};
}

MmiVars mmi_forward_vars(Tape& tape, Var t, Var a, TapeBinding& params,
                         const CmeConfig& config, bool gate_open) {
  check_width(tape, t, config.d, "token matrix");
  check_width(tape, a, config.d, "frame matrix");
  MmiVars out;
  out.p = cme_block(tape, a, t, params, "mmi.a", config);
  out.r = cme_block(tape, t, out.p, params, "mmi.b", config);
  out.q = cme_block(tape, t, a, params, "mmi.d", config);
  if (gate_open) {
    Matrix ones(tape.value(out.q).rows(), config.d);
    ones.fill(1.0);
    out.gate = tape.leaf(std::move(ones), false);
    out.q_gated = out.q;
  } else {
    GateVars g = acoustic_gate_vars(tape, out.r, out.q, params["mmi.gate.w"],
                                    params["mmi.gate.b"]);
    out.gate = g.gate;
    out.q_gated = g.q_gated;
  }
  out.fused = tape.concat_cols(out.q_gated, out.r);
  return out;
}

std::pair<Matrix, Matrix> acoustic_gate(const Matrix& r, const Matrix& q, const Matrix& w,
                                        const Matrix& b) {
  Tape tape;
  GateVars g = acoustic_gate_vars(tape, tape.leaf(r, false), tape.leaf(q, false),
                                  tape.leaf(w, false), tape.leaf(b, false));
  return {tape.value(g.gate), tape.value(g.q_gated)};
}

MmiOutput mmi_forward(const Matrix& t, const Matrix& a, const ParamStore& params,
                      const CmeConfig& config, bool gate_open) {
  Tape tape;
  // Read-only pass: leaves copy parameter values, nothing writes back.
  TapeBinding binding(tape, const_cast<ParamStore&>(params));
  MmiVars vars = mmi_forward_vars(tape, tape.leaf(t, false), tape.leaf(a, false), binding,
                                  config, gate_open);
  return {tape.value(vars.r), tape.value(vars.q_gated), tape.value(vars.fused),
          tape.value(vars.gate)};
}

}  // namespace mdfn
