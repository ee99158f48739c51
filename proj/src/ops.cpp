#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mulaaip/autodiff.hpp"
#include "mulaaip/error.hpp"

namespace mulaaip::nn {
namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": " + a.shape_string() + " vs " + b.shape_string());
}

void require_rank2(const char* op, const Tensor& a) {
  if (a.rank() != 2) throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": expected a matrix, got " + a.shape_string());
}

template <typename F>
Var unary(const char* op, Var a, F&& f, Tape::BackwardFn backward) {
  Tensor out = a.value();
  for (auto& v : out.values()) v = f(v);
  return a.tape->record(op, std::move(out), {a}, std::move(backward));
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_rank2("matmul", A);
  require_rank2("matmul", B);
  if (A.cols() != B.rows()) shape_error("matmul", A, B);
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  Tensor out(n, m);
  {
    const double* pa = A.data().data();
    const double* pb = B.data().data();
    double* po = out.data().data();
    for (std::size_t i = 0; i < n; ++i) {
      double* row = po + i * m;
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = pa[i * k + p];
        const double* brow = pb + p * m;
        for (std::size_t j = 0; j < m; ++j) row[j] += aip * brow[j];
      }
    }
  }
  return a.tape->record("matmul", std::move(out), {a, b}, [a, b, n, k, m](Tape& t, const Tensor& g) {
    const double* pa = t.value(a).data().data();
    const double* pb = t.value(b).data().data();
    const double* pg = g.data().data();
    if (t.requires_grad(a)) {
      double* ga = t.grad(a).data().data();
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = pg + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = pb + p * m;
          double s = 0.0;
          for (std::size_t j = 0; j < m; ++j) s += grow[j] * brow[j];
          ga[i * k + p] += s;
        }
      }
    }
    if (t.requires_grad(b)) {
      double* gb = t.grad(b).data().data();
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = pg + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = pa[i * k + p];
          double* gbrow = gb + p * m;
          for (std::size_t j = 0; j < m; ++j) gbrow[j] += aip * grow[j];
        }
      }
    }
  });
}

Var add(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (!A.same_shape(B)) shape_error("add", A, B);
  Tensor out = A;
  out += B;
  return a.tape->record("add", std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) t.grad(a) += g;
    if (t.requires_grad(b)) t.grad(b) += g;
  });
}

Var sub(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (!A.same_shape(B)) shape_error("sub", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= B[i];
  return a.tape->record("sub", std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) t.grad(a) += g;
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (!A.same_shape(B)) shape_error("mul", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  return a.tape->record("mul", std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    const Tensor& A = t.value(a);
    const Tensor& B = t.value(b);
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * A[i];
    }
  });
}

Var add_row(Var a, Var row) {
  const Tensor& A = a.value();
  const Tensor& R = row.value();
  require_rank2("add_row", A);
  if (R.rows() != 1 || R.cols() != A.cols()) shape_error("add_row", A, R);
  Tensor out = A;
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) += R(0, j);
  return a.tape->record("add_row", std::move(out), {a, row}, [a, row](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) t.grad(a) += g;
    if (t.requires_grad(row)) {
      Tensor& gr = t.grad(row);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
    }
  });
}

Var mul_col(Var a, Var col) {
  const Tensor& A = a.value();
  const Tensor& C = col.value();
  require_rank2("mul_col", A);
  if (C.cols() != 1 || C.rows() != A.rows()) shape_error("mul_col", A, C);
  Tensor out = A;
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) *= C(i, 0);
  return a.tape->record("mul_col", std::move(out), {a, col}, [a, col](Tape& t, const Tensor& g) {
    const Tensor& A = t.value(a);
    const Tensor& C = t.value(col);
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad(a);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) ga(i, j) += g(i, j) * C(i, 0);
    }
    if (t.requires_grad(col)) {
      Tensor& gc = t.grad(col);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < g.cols(); ++j) s += g(i, j) * A(i, j);
        gc(i, 0) += s;
      }
    }
  });
}

Var mul_scalar(Var a, Var s) {
  const Tensor& S = s.value();
  if (S.size() != 1) shape_error("mul_scalar", a.value(), S);
  const double sv = S[0];
  Tensor out = a.value();
  for (auto& v : out.values()) v *= sv;
  return a.tape->record("mul_scalar", std::move(out), {a, s}, [a, s](Tape& t, const Tensor& g) {
    const Tensor& A = t.value(a);
    const double sv = t.value(s)[0];
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * sv;
    }
    if (t.requires_grad(s)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * A[i];
      t.grad(s)[0] += acc;
    }
  });
}

Var scale(Var a, double c) {
  return unary("scale", a, [c](double v) { return v * c; }, [a, c](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  });
}

Var add_scalar(Var a, double c) {
  return unary("add_scalar", a, [c](double v) { return v + c; },
               [a](Tape& t, const Tensor& g) { t.grad(a) += g; });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorCode::ShapeMismatch, "concat_cols: no inputs");
  const std::size_t n = parts[0].rows();
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_rank2("concat_cols", p.value());
    if (p.rows() != n) shape_error("concat_cols", parts[0].value(), p.value());
    total += p.cols();
  }
  Tensor out(n, total);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& P = p.value();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < P.cols(); ++j) out(i, offset + j) = P(i, j);
    offset += P.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape->record("concat_cols", std::move(out), parts, [inputs](Tape& t, const Tensor& g) {
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t w = t.value(p).cols();
      if (t.requires_grad(p)) {
        Tensor& gp = t.grad(p);
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < w; ++j) gp(i, j) += g(i, offset + j);
      }
      offset += w;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorCode::ShapeMismatch, "concat_rows: no inputs");
  const std::size_t m = parts[0].cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_rank2("concat_rows", p.value());
    if (p.cols() != m) shape_error("concat_rows", parts[0].value(), p.value());
    total += p.rows();
  }
  Tensor out(total, m);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const auto& src = p.value().values();
    std::copy(src.begin(), src.end(), out.values().begin() + static_cast<std::ptrdiff_t>(offset * m));
    offset += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape->record("concat_rows", std::move(out), parts, [inputs, m](Tape& t, const Tensor& g) {
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t r = t.value(p).rows();
      if (t.requires_grad(p)) {
        Tensor& gp = t.grad(p);
        for (std::size_t k = 0; k < r * m; ++k) gp[k] += g[offset * m + k];
      }
      offset += r;
    }
  });
}

Var sum_rows(Var a) {
  const Tensor& A = a.value();
  require_rank2("sum_rows", A);
  Tensor out(1, A.cols());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) out(0, j) += A(i, j);
  return a.tape->record("sum_rows", std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad(a);
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(0, j);
  });
}

Var mean_rows(Var a) {
  const std::size_t n = a.rows();
  if (n == 0) throw Error(ErrorCode::ShapeMismatch, "mean_rows: no rows");
  return scale(sum_rows(a), 1.0 / static_cast<double>(n));
}

Var sum_cols(Var a) {
  const Tensor& A = a.value();
  require_rank2("sum_cols", A);
  Tensor out(A.rows(), 1);
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) out(i, 0) += A(i, j);
  return a.tape->record("sum_cols", std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad(a);
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(i, 0);
  });
}

Var sum_all(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape->record("sum_all", Tensor::scalar(s), {a}, [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad(a);
    for (auto& v : ga.values()) v += g[0];
  });
}

Var leaky_relu(Var a, double slope) {
  return unary("leaky_relu", a, [slope](double v) { return v > 0.0 ? v : slope * v; },
               [a, slope](Tape& t, const Tensor& g) {
                 const Tensor& A = t.value(a);
                 Tensor& ga = t.grad(a);
                 for (std::size_t i = 0; i < g.size(); ++i) ga[i] += A[i] > 0.0 ? g[i] : slope * g[i];
               });
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (auto& v : out.values()) {
    if (v >= 0.0) {
      v = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      v = e / (1.0 + e);
    }
  }
  const Var self{a.tape, a.tape->size()};  // id this node is about to get
  return a.tape->record("sigmoid", std::move(out), {a}, [a, self](Tape& t, const Tensor& g) {
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var log(Var a) {
  for (double v : a.value().values()) {
    if (!(v > 0.0)) throw Error(ErrorCode::NonFinite, "log of non-positive value");
  }
  return unary("log", a, [](double v) { return std::log(v); }, [a](Tape& t, const Tensor& g) {
    const Tensor& A = t.value(a);
    Tensor& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / A[i];
  });
}

Var abs(Var a) {
  return unary("abs", a, [](double v) { return std::abs(v); }, [a](Tape& t, const Tensor& g) {
    const Tensor& A = t.value(a);
    Tensor& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += A[i] > 0.0 ? g[i] : (A[i] < 0.0 ? -g[i] : 0.0);
  });
}

Var square(Var a) {
  return unary("square", a, [](double v) { return v * v; }, [a](Tape& t, const Tensor& g) {
    const Tensor& A = t.value(a);
    Tensor& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * A[i] * g[i];
  });
}

Var pow(Var a, double exponent) {
  return unary("pow", a, [exponent](double v) { return std::pow(v, exponent); },
               [a, exponent](Tape& t, const Tensor& g) {
                 const Tensor& A = t.value(a);
                 Tensor& ga = t.grad(a);
                 for (std::size_t i = 0; i < g.size(); ++i)
                   ga[i] += g[i] * exponent * std::pow(A[i], exponent - 1.0);
               });
}

Var max_scalar(Var a, double floor) {
  return unary("max_scalar", a, [floor](double v) { return std::max(v, floor); },
               [a, floor](Tape& t, const Tensor& g) {
                 const Tensor& A = t.value(a);
                 Tensor& ga = t.grad(a);
                 for (std::size_t i = 0; i < g.size(); ++i)
                   if (A[i] > floor) ga[i] += g[i];
               });
}

Var clamp(Var a, double lo, double hi) {
  return unary("clamp", a, [lo, hi](double v) { return std::clamp(v, lo, hi); },
               [a, lo, hi](Tape& t, const Tensor& g) {
                 const Tensor& A = t.value(a);
                 Tensor& ga = t.grad(a);
                 for (std::size_t i = 0; i < g.size(); ++i)
                   if (A[i] >= lo && A[i] <= hi) ga[i] += g[i];
               });
}

Var dropout(Var a, double p, Rng& rng, bool training) {
  if (!(p >= 0.0 && p < 1.0)) throw Error(ErrorCode::ShapeMismatch, "dropout probability must be in [0, 1)");
  if (!training || p == 0.0) return a;
  Tensor mask(a.value().shape(), 0.0);
  const double keep_scale = 1.0 / (1.0 - p);
  for (auto& m : mask.values()) m = rng.uniform() < p ? 0.0 : keep_scale;
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return a.tape->record("dropout", std::move(out), {a}, [a, mask = std::move(mask)](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
  });
}

Var softmax_segmented(Var logits, std::span<const std::size_t> segments, std::size_t num_segments) {
  const Tensor& L = logits.value();
  if (L.cols() != 1 || L.rows() != segments.size()) {
    throw Error(ErrorCode::ShapeMismatch, "softmax_segmented: logits " + L.shape_string() +
                                              " for " + std::to_string(segments.size()) + " segment ids");
  }
  std::vector<double> seg_max(num_segments, -std::numeric_limits<double>::infinity());
  for (std::size_t e = 0; e < segments.size(); ++e) {
    if (segments[e] >= num_segments) throw Error(ErrorCode::ShapeMismatch, "softmax_segmented: segment id out of range");
    seg_max[segments[e]] = std::max(seg_max[segments[e]], L[e]);
  }
  Tensor out(L.rows(), 1);
  std::vector<double> seg_sum(num_segments, 0.0);
  for (std::size_t e = 0; e < segments.size(); ++e) {
    out[e] = std::exp(L[e] - seg_max[segments[e]]);
    seg_sum[segments[e]] += out[e];
  }
  for (std::size_t e = 0; e < segments.size(); ++e) out[e] /= seg_sum[segments[e]];
  std::vector<std::size_t> seg(segments.begin(), segments.end());
  Tape& tape = *logits.tape;
  const Var probs{&tape, tape.size()};  // id this node is about to get
  return tape.record("softmax_segmented", std::move(out), {logits},
                     [logits, probs, seg = std::move(seg), num_segments](Tape& t, const Tensor& g) {
                       const Tensor& y = t.value(probs);
                       std::vector<double> dot(num_segments, 0.0);
                       for (std::size_t e = 0; e < seg.size(); ++e) dot[seg[e]] += g[e] * y[e];
                       Tensor& gl = t.grad(logits);
                       for (std::size_t e = 0; e < seg.size(); ++e) gl[e] += y[e] * (g[e] - dot[seg[e]]);
                     });
}

Var gather_rows(Var a, std::span<const std::size_t> index) {
  const Tensor& A = a.value();
  require_rank2("gather_rows", A);
  const std::size_t m = A.cols();
  Tensor out(index.size(), m);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= A.rows()) throw Error(ErrorCode::ShapeMismatch, "gather_rows: index out of range");
    for (std::size_t j = 0; j < m; ++j) out(r, j) = A(index[r], j);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return a.tape->record("gather_rows", std::move(out), {a}, [a, idx = std::move(idx), m](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad(a);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < m; ++j) ga(idx[r], j) += g(r, j);
  });
}

Var scatter_add_rows(Var a, std::span<const std::size_t> index, std::size_t num_rows) {
  const Tensor& A = a.value();
  require_rank2("scatter_add_rows", A);
  if (A.rows() != index.size()) throw Error(ErrorCode::ShapeMismatch, "scatter_add_rows: index length mismatch");
  const std::size_t m = A.cols();
  Tensor out(num_rows, m);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= num_rows) throw Error(ErrorCode::ShapeMismatch, "scatter_add_rows: index out of range");
    for (std::size_t j = 0; j < m; ++j) out(index[r], j) += A(r, j);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return a.tape->record("scatter_add_rows", std::move(out), {a}, [a, idx = std::move(idx), m](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad(a);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < m; ++j) ga(r, j) += g(idx[r], j);
  });
}

}  // namespace mulaaip::nn
