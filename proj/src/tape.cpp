#include "mdfn/tape.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

#include "mdfn/error.h"

namespace mdfn {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
  }
}

// c += a b
void matmul_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; i++) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (std::size_t p = 0; p < k; p++) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      const double* bp = b.row(p);
      for (std::size_t j = 0; j < m; j++) ci[j] += aip * bp[j];
    }
  }
}

// c += a b^T
void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; i++) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (std::size_t j = 0; j < m; j++) {
      const double* bj = b.row(j);
      double s = 0.0;
      for (std::size_t p = 0; p < k; p++) s += ai[p] * bj[p];
      ci[j] += s;
    }
  }
}

// c += a^T b
void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t p = 0; p < n; p++) {
    const double* ap = a.row(p);
    const double* bp = b.row(p);
    for (std::size_t i = 0; i < k; i++) {
      const double api = ap[i];
      if (api == 0.0) continue;
      double* ci = c.row(i);
      for (std::size_t j = 0; j < m; j++) ci[j] += api * bp[j];
    }
  }
}

}  // namespace

const Matrix& Var::value() const { return tape->value(*this); }
const Matrix& Var::grad() const { return tape->grad(*this); }

Var Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&)> backward) {
  Node n;
  n.grad = Matrix::zeros(value.rows(), value.cols());
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

Var Tape::matmul(Var x, Var w) { return linear(x, w); }

Var Tape::matmul_nt(Var x, Var w) {
  const Matrix& a = value(x);
  const Matrix& b = value(w);
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: x is " + a.shape_str() + ", w is " + b.shape_str());
  }
  Matrix out(a.rows(), b.rows());
  matmul_nt_acc(a, b, out);
  bool rg = requires_grad(x) || requires_grad(w);
  std::size_t xi = x.id, wi = w.id;
  Var v = push(std::move(out), rg, nullptr);
  if (rg) {
    std::size_t oi = v.id;
    nodes_[oi].backward = [xi, wi, oi](Tape& t) {
      const Matrix& g = t.nodes_[oi].grad;
      // y = x w^T: dx += g w ; dw += g^T x
      if (t.nodes_[xi].requires_grad) matmul_acc(g, t.nodes_[wi].value, t.grad_mut(xi));
      if (t.nodes_[wi].requires_grad) matmul_tn_acc(g, t.nodes_[xi].value, t.grad_mut(wi));
    };
  }
  return v;
}

Var Tape::add(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  check_same_shape(x, y, "add");
  Matrix out = x;
  for (std::size_t i = 0; i < out.size(); i++) out.data()[i] += y.data()[i];
  bool rg = requires_grad(a) || requires_grad(b);
  Var v = push(std::move(out), rg, nullptr);
  if (rg) {
    std::size_t ai = a.id, bi = b.id, oi = v.id;
    nodes_[oi].backward = [ai, bi, oi](Tape& t) {
      const Matrix& g = t.nodes_[oi].grad;
      for (std::size_t k : {ai, bi}) {
        if (!t.nodes_[k].requires_grad) continue;
        Matrix& gk = t.grad_mut(k);
        for (std::size_t i = 0; i < g.size(); i++) gk.data()[i] += g.data()[i];
      }
    };
  }
  return v;
}

Var Tape::add_row(Var x, Var bias) {
  const Matrix& a = value(x);
  const Matrix& b = value(bias);
  if (b.rows() != 1 || b.cols() != a.cols()) {
    throw ShapeError("add_row: x is " + a.shape_str() + ", bias is " + b.shape_str());
  }
  Matrix out = a;
  for (std::size_t i = 0; i < a.rows(); i++) {
    double* oi = out.row(i);
    for (std::size_t j = 0; j < a.cols(); j++) oi[j] += b(0, j);
  }
  bool rg = requires_grad(x) || requires_grad(bias);
  Var v = push(std::move(out), rg, nullptr);
  if (rg) {
    std::size_t xi = x.id, bi = bias.id, oi = v.id;
    nodes_[oi].backward = [xi, bi, oi](Tape& t) {
      const Matrix& g = t.nodes_[oi].grad;
      if (t.nodes_[xi].requires_grad) {
        Matrix& gx = t.grad_mut(xi);
        for (std::size_t i = 0; i < g.size(); i++) gx.data()[i] += g.data()[i];
      }
      if (t.nodes_[bi].requires_grad) {
        Matrix& gb = t.grad_mut(bi);
        for (std::size_t i = 0; i < g.rows(); i++) {
          const double* gi = g.row(i);
          for (std::size_t j = 0; j < g.cols(); j++) gb(0, j) += gi[j];
        }
      }
    };
  }
  return v;
}

Var Tape::mul(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  check_same_shape(x, y, "mul");
  Matrix out = x;
  for (std::size_t i = 0; i < out.size(); i++) out.data()[i] *= y.data()[i];
  bool rg = requires_grad(a) || requires_grad(b);
  Var v = push(std::move(out), rg, nullptr);
  if (rg) {
    std::size_t ai = a.id, bi = b.id, oi = v.id;
    nodes_[oi].backward = [ai, bi, oi](Tape& t) {
      const Matrix& g = t.nodes_[oi].grad;
      if (t.nodes_[ai].requires_grad) {
        Matrix& ga = t.grad_mut(ai);
        const Matrix& vb = t.nodes_[bi].value;
        for (std::size_t i = 0; i < g.size(); i++) ga.data()[i] += g.data()[i] * vb.data()[i];
      }
      if (t.nodes_[bi].requires_grad) {
        Matrix& gb = t.grad_mut(bi);
        const Matrix& va = t.nodes_[ai].value;
        for (std::size_t i = 0; i < g.size(); i++) gb.data()[i] += g.data()[i] * va.data()[i];
      }
    };
  }
  return v;
}

Var Tape::scale(Var x, double s) {
  Matrix out = value(x);
  for (std::size_t i = 0; i < out.size(); i++) out.data()[i] *= s;
  bool rg = requires_grad(x);
  Var v = push(std::move(out), rg, nullptr);
  if (rg) {
    std::size_t xi = x.id, oi = v.id;
    nodes_[oi].backward = [xi, s, oi](Tape& t) {
      const Matrix& g = t.nodes_[oi].grad;
      Matrix& gx = t.grad_mut(xi);
      for (std::size_t i = 0; i < g.size(); i++) gx.data()[i] += s * g.data()[i];
    };
  }
  return v;
}

Var Tape::linear(Var x, Var w) {
  const Matrix& a = value(x);
  const Matrix& b = value(w);
  if (a.cols() != b.rows()) {
    throw ShapeError("linear: x is " + a.shape_str() + ", w is " + b.shape_str());
  }
  Matrix out(a.rows(), b.cols());
  matmul_acc(a, b, out);
  bool rg = requires_grad(x) || requires_grad(w);
  Var v = push(std::move(out), rg, nullptr);
  if (rg) {
    std::size_t xi = x.id, wi = w.id, oi = v.id;
    nodes_[oi].backward = [xi, wi, oi](Tape& t) {
      const Matrix& g = t.nodes_[oi].grad;
      // y = x w: dx += g w^T ; dw += x^T g
      if (t.nodes_[xi].requires_grad) matmul_nt_acc(g, t.nodes_[wi].value, t.grad_mut(xi));
      if (t.nodes_[wi].requires_grad) matmul_tn_acc(t.nodes_[xi].value, g, t.grad_mut(wi));
    };
  }
  return v;
}

Var Tape::linear(Var x, Var w, Var bias) { return add_row(linear(x, w), bias); }

Var Tape::softmax_rows(Var x) {
  const Matrix& a = value(x);
  if (!a.all_finite()) {
    throw NumericError("softmax_rows: non-finite input (" + a.shape_str() + ")");
  }
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); i++) {
    const double* ai = a.row(i);
    double* oi = out.row(i);
    double mx = ai[0];
    for (std::size_t j = 1; j < a.cols(); j++) mx = std::max(mx, ai[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < a.cols(); j++) {
      oi[j] = std::exp(ai[j] - mx);
      sum += oi[j];
    }
    for (std::size_t j = 0; j < a.cols(); j++) oi[j] /= sum;
  }
  bool rg = requires_grad(x);
  Var v = push(std::move(out), rg, nullptr);
  if (rg) {
    std::size_t xi = x.id, oi = v.id;
    nodes_[oi].backward = [xi, oi](Tape& t) {
      const Matrix& g = t.nodes_[oi].grad;
      const Matrix& y = t.nodes_[oi].value;
      Matrix& gx = t.grad_mut(xi);
      // dx = y * (g - sum_j g_j y_j) per row
      for (std::size_t i = 0; i < y.rows(); i++) {
        const double* yi = y.row(i);
        const double* gi = g.row(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < y.cols(); j++) dot += gi[j] * yi[j];
        double* gxi = gx.row(i);
        for (std::size_t j = 0; j < y.cols(); j++) gxi[j] += yi[j] * (gi[j] - dot);
      }
    };
  }
  return v;
}

Var Tape::layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Matrix& a = value(x);
  const Matrix& g = value(gamma);
  const Matrix& b = value(beta);
  if (g.rows() != 1 || g.cols() != a.cols() || b.rows() != 1 || b.cols() != a.cols()) {
    throw ShapeError("layer_norm: x is " + a.shape_str() + ", gamma is " + g.shape_str() +
                     ", beta is " + b.shape_str());
  }
  const std::size_t n = a.rows(), d = a.cols();
  Matrix xhat(n, d);
  std::vector<double> inv_std(n);
  for (std::size_t i = 0; i < n; i++) {
    const double* ai = a.row(i);
    double mean = 0.0;
    for (std::size_t j = 0; j < d; j++) mean += ai[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; j++) {
      double c = ai[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);  // population variance
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    double* xi = xhat.row(i);
    for (std::size_t j = 0; j < d; j++) xi[j] = (ai[j] - mean) * inv_std[i];
  }
  Matrix out(n, d);
  for (std::size_t i = 0; i < n; i++) {
    for (std::size_t j = 0; j < d; j++) out(i, j) = g(0, j) * xhat(i, j) + b(0, j);
  }
  bool rg = requires_grad(x) || requires_grad(gamma) || requires_grad(beta);
  Var v = push(std::move(out), rg, nullptr);
  if (rg) {
    std::size_t xi = x.id, gi = gamma.id, bi = beta.id, oi = v.id;
    auto xh = std::make_shared<Matrix>(std::move(xhat));
    auto is = std::make_shared<std::vector<double>>(std::move(inv_std));
    nodes_[oi].backward = [xi, gi, bi, oi, xh, is](Tape& t) {
      const Matrix& go = t.nodes_[oi].grad;
      const Matrix& gam = t.nodes_[gi].value;
      const std::size_t n = go.rows(), d = go.cols();
      if (t.nodes_[gi].requires_grad) {
        Matrix& gg = t.grad_mut(gi);
        for (std::size_t i = 0; i < n; i++) {
          for (std::size_t j = 0; j < d; j++) gg(0, j) += go(i, j) * (*xh)(i, j);
        }
      }
      if (t.nodes_[bi].requires_grad) {
        Matrix& gb = t.grad_mut(bi);
        for (std::size_t i = 0; i < n; i++) {
          for (std::size_t j = 0; j < d; j++) gb(0, j) += go(i, j);
        }
      }
      if (t.nodes_[xi].requires_grad) {
        Matrix& gx = t.grad_mut(xi);
        // dxhat = go * gamma; dx = inv_std (dxhat - mean(dxhat) - xhat mean(dxhat xhat))
        for (std::size_t i = 0; i < n; i++) {
          double m1 = 0.0, m2 = 0.0;
          for (std::size_t j = 0; j < d; j++) {
            double dxh = go(i, j) * gam(0, j);
            m1 += dxh;
            m2 += dxh * (*xh)(i, j);
          }
          m1 /= static_cast<double>(d);
          m2 /= static_cast<double>(d);
          for (std::size_t j = 0; j < d; j++) {
            double dxh = go(i, j) * gam(0, j);
            gx(i, j) += (*is)[i] * (dxh - m1 - (*xh)(i, j) * m2);
          }
        }
      }
    };
  }
  return v;
}

Var Tape::gelu(Var x) {
  const Matrix& a = value(x);
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); i++) {
    double v = out.data()[i];
    out.data()[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
  bool rg = requires_grad(x);
  Var v = push(std::move(out), rg, nullptr);
  if (rg) {
    std::size_t xi = x.id, oi = v.id;
    nodes_[oi].backward = [xi, oi](Tape& t) {
      const Matrix& g = t.nodes_[oi].grad;
      const Matrix& a = t.nodes_[xi].value;
      Matrix& gx = t.grad_mut(xi);
      for (std::size_t i = 0; i < g.size(); i++) {
        double v = a.data()[i];
        double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        gx.data()[i] += g.data()[i] * (cdf + v * pdf);
      }
    };
  }
  return v;
}

Var Tape::sigmoid(Var x) {
  const Matrix& a = value(x);
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); i++) {
    double v = out.data()[i];
    out.data()[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  bool rg = requires_grad(x);
  Var v = push(std::move(out), rg, nullptr);
  if (rg) {
    std::size_t xi = x.id, oi = v.id;
    nodes_[oi].backward = [xi, oi](Tape& t) {
      const Matrix& g = t.nodes_[oi].grad;
      const Matrix& y = t.nodes_[oi].value;
      Matrix& gx = t.grad_mut(xi);
      for (std::size_t i = 0; i < g.size(); i++) {
        double s = y.data()[i];
        gx.data()[i] += g.data()[i] * s * (1.0 - s);
      }
    };
  }
  return v;
}

Var Tape::concat_cols(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  if (x.rows() != y.rows()) {
    throw ShapeError("concat_cols: " + x.shape_str() + " vs " + y.shape_str());
  }
  Matrix out(x.rows(), x.cols() + y.cols());
  for (std::size_t i = 0; i < x.rows(); i++) {
    double* oi = out.row(i);
    const double* xi = x.row(i);
    const double* yi = y.row(i);
    std::copy(xi, xi + x.cols(), oi);
    std::copy(yi, yi + y.cols(), oi + x.cols());
  }
  bool rg = requires_grad(a) || requires_grad(b);
  Var v = push(std::move(out), rg, nullptr);
  if (rg) {
    std::size_t ai = a.id, bi = b.id, oi = v.id;
    std::size_t ac = x.cols();
    nodes_[oi].backward = [ai, bi, oi, ac](Tape& t) {
      const Matrix& g = t.nodes_[oi].grad;
      if (t.nodes_[ai].requires_grad) {
        Matrix& ga = t.grad_mut(ai);
        for (std::size_t i = 0; i < g.rows(); i++) {
          for (std::size_t j = 0; j < ac; j++) ga(i, j) += g(i, j);
        }
      }
      if (t.nodes_[bi].requires_grad) {
        Matrix& gb = t.grad_mut(bi);
        for (std::size_t i = 0; i < g.rows(); i++) {
          for (std::size_t j = ac; j < g.cols(); j++) gb(i, j - ac) += g(i, j);
        }
      }
    };
  }
  return v;
}

Var Tape::slice_cols(Var x, std::size_t c0, std::size_t c1) {
  const Matrix& a = value(x);
  if (c0 >= c1 || c1 > a.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(c0) + ", " + std::to_string(c1) +
                     ") out of " + a.shape_str());
  }
  Matrix out(a.rows(), c1 - c0);
  for (std::size_t i = 0; i < a.rows(); i++) {
    const double* ai = a.row(i);
    std::copy(ai + c0, ai + c1, out.row(i));
  }
  bool rg = requires_grad(x);
  Var v = push(std::move(out), rg, nullptr);
  if (rg) {
    std::size_t xi = x.id, oi = v.id;
    nodes_[oi].backward = [xi, oi, c0](Tape& t) {
      const Matrix& g = t.nodes_[oi].grad;
      Matrix& gx = t.grad_mut(xi);
      for (std::size_t i = 0; i < g.rows(); i++) {
        for (std::size_t j = 0; j < g.cols(); j++) gx(i, c0 + j) += g(i, j);
      }
    };
  }
  return v;
}

Var Tape::select_rows(Var x, std::vector<std::size_t> rows) {
  const Matrix& a = value(x);
  for (std::size_t r : rows) {
    if (r >= a.rows()) {
      throw ShapeError("select_rows: row " + std::to_string(r) + " out of " + a.shape_str());
    }
  }
  Matrix out(rows.size(), a.cols());
  for (std::size_t i = 0; i < rows.size(); i++) {
    const double* ar = a.row(rows[i]);
    std::copy(ar, ar + a.cols(), out.row(i));
  }
  bool rg = requires_grad(x);
  Var v = push(std::move(out), rg, nullptr);
  if (rg) {
    std::size_t xi = x.id, oi = v.id;
    auto idx = std::make_shared<std::vector<std::size_t>>(std::move(rows));
    nodes_[oi].backward = [xi, oi, idx](Tape& t) {
      const Matrix& g = t.nodes_[oi].grad;
      Matrix& gx = t.grad_mut(xi);
      for (std::size_t i = 0; i < idx->size(); i++) {
        const double* gi = g.row(i);
        double* gr = gx.row((*idx)[i]);
        for (std::size_t j = 0; j < g.cols(); j++) gr[j] += gi[j];
      }
    };
  }
  return v;
}

Var Tape::cross_entropy(Var logits, std::vector<std::size_t> gold,
                        std::vector<double> row_weights) {
  const Matrix& a = value(logits);
  if (gold.size() != a.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(gold.size()) + " labels for " +
                     a.shape_str() + " logits");
  }
  if (!row_weights.empty() && row_weights.size() != a.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(row_weights.size()) + " weights for " +
                     a.shape_str() + " logits");
  }
  for (std::size_t i = 0; i < gold.size(); i++) {
    if (gold[i] >= a.cols()) {
      throw ShapeError("cross_entropy: gold class " + std::to_string(gold[i]) + " at row " +
                       std::to_string(i) + " out of range for " + std::to_string(a.cols()) +
                       " classes");
    }
  }
  if (!a.all_finite()) {
    throw NumericError("cross_entropy: non-finite logits (" + a.shape_str() + ")");
  }
  const std::size_t n = a.rows(), c = a.cols();
  Matrix probs(n, c);
  double weight_sum = 0.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; i++) {
    const double* ai = a.row(i);
    double* pi = probs.row(i);
    double mx = ai[0];
    for (std::size_t j = 1; j < c; j++) mx = std::max(mx, ai[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; j++) {
      pi[j] = std::exp(ai[j] - mx);
      sum += pi[j];
    }
    double log_sum = std::log(sum);
    for (std::size_t j = 0; j < c; j++) pi[j] /= sum;
    double w = row_weights.empty() ? 1.0 : row_weights[i];
    weight_sum += w;
    loss += w * (log_sum - (ai[gold[i]] - mx));
  }
  if (weight_sum <= 0.0) {
    throw NumericError("cross_entropy: non-positive weight sum");
  }
  loss /= weight_sum;
  Matrix out(1, 1);
  out(0, 0) = loss;
  bool rg = requires_grad(logits);
  Var v = push(std::move(out), rg, nullptr);
  if (rg) {
    std::size_t xi = logits.id, oi = v.id;
    auto pr = std::make_shared<Matrix>(std::move(probs));
    auto gd = std::make_shared<std::vector<std::size_t>>(std::move(gold));
    auto wt = std::make_shared<std::vector<double>>(std::move(row_weights));
    nodes_[oi].backward = [xi, oi, pr, gd, wt, weight_sum](Tape& t) {
      double g = t.nodes_[oi].grad(0, 0);
      Matrix& gx = t.grad_mut(xi);
      const std::size_t n = pr->rows(), c = pr->cols();
      for (std::size_t i = 0; i < n; i++) {
        double w = wt->empty() ? 1.0 : (*wt)[i];
        double s = g * w / weight_sum;
        const double* pi = pr->row(i);
        double* gi = gx.row(i);
        for (std::size_t j = 0; j < c; j++) gi[j] += s * pi[j];
        gi[(*gd)[i]] -= s;
      }
    };
  }
  return v;
}

Var Tape::mean_all(Var x) {
  const Matrix& a = value(x);
  if (a.size() == 0) throw ShapeError("mean_all: empty matrix");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); i++) sum += a.data()[i];
  Matrix out(1, 1);
  out(0, 0) = sum / static_cast<double>(a.size());
  bool rg = requires_grad(x);
  Var v = push(std::move(out), rg, nullptr);
  if (rg) {
    std::size_t xi = x.id, oi = v.id;
    nodes_[oi].backward = [xi, oi](Tape& t) {
      double g = t.nodes_[oi].grad(0, 0);
      Matrix& gx = t.grad_mut(xi);
      double s = g / static_cast<double>(gx.size());
      for (std::size_t i = 0; i < gx.size(); i++) gx.data()[i] += s;
    };
  }
  return v;
}

void Tape::backward(Var loss) {
  const Matrix& v = value(loss);
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + v.shape_str());
  }
  if (!v.all_finite()) throw NumericError("backward: non-finite loss");
  if (!requires_grad(loss)) return;
  nodes_[loss.id].grad(0, 0) = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (nodes_[i].requires_grad && nodes_[i].backward) nodes_[i].backward(*this);
  }
}

}  // namespace mdfn
