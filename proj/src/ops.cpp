/* Copyright 2026 The parkdiff Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "parkdiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "parkdiff/error.hpp"

namespace parkdiff::ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MutMap as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return MutMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

Graph& graph_of(Var a) {
  if (!a.valid()) throw ContractError("op applied to an unbound Var");
  return *a.graph();
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

template <typename F, typename D>
Var unary(Var a, F f, D df) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return graph_of(a).record(std::move(y), {a}, [ia, df](Graph& g, const Tensor& dy) {
    if (!g.requires_grad(ia)) return;
    const Tensor& x = g.value(ia);
    Tensor& dx = g.grad_buffer(ia);
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] += dy[i] * df(x[i]);
  });
}

Shape replace_last(const Shape& s, std::size_t last) {
  Shape out = s.empty() ? Shape{1} : s;
  out.back() = last;
  return out;
}

}  // namespace

// ---- dense algebra ------------------------------------------------------------

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_string(A.shape()) + " x " +
                         shape_string(B.shape()));
  }
  const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
  Tensor C(Shape{m, n});
  as_matrix(C, m, n).noalias() = as_matrix(A, m, k) * as_matrix(B, k, n);
  const std::size_t ia = a.id(), ib = b.id();
  return graph_of(a).record(std::move(C), {a, b}, [ia, ib, m, k, n](Graph& g, const Tensor& dC) {
    auto dCm = as_matrix(dC, m, n);
    if (g.requires_grad(ia)) {
      as_matrix(g.grad_buffer(ia), m, k).noalias() += dCm * as_matrix(g.value(ib), k, n).transpose();
    }
    if (g.requires_grad(ib)) {
      as_matrix(g.grad_buffer(ib), k, n).noalias() += as_matrix(g.value(ia), m, k).transpose() * dCm;
    }
  });
}

namespace {

Var linear_impl(Var x, Var w, const Var* b) {
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  if (W.rank() != 2 || X.rank() == 0 || X.cols() != W.dim(0)) {
    throw DimensionError("linear: input " + shape_string(X.shape()) + " vs weight " +
                         shape_string(W.shape()));
  }
  const std::size_t in = W.dim(0), out = W.dim(1), rows = X.rows();
  if (b && (b->value().rank() != 1 || b->value().dim(0) != out)) {
    throw DimensionError("linear: bias " + shape_string(b->value().shape()) +
                         " does not match output width " + std::to_string(out));
  }
  Tensor Y(replace_last(X.shape(), out));
  auto Ym = as_matrix(Y, rows, out);
  Ym.noalias() = as_matrix(X, rows, in) * as_matrix(W, in, out);
  if (b) {
    Eigen::Map<const Eigen::RowVectorXd> bv(b->value().data(), static_cast<Eigen::Index>(out));
    Ym.rowwise() += bv;
  }
  const std::size_t ix = x.id(), iw = w.id();
  const std::size_t ib = b ? b->id() : std::numeric_limits<std::size_t>::max();
  std::vector<Var> inputs{x, w};
  if (b) inputs.push_back(*b);
  return graph_of(x).record(
      std::move(Y), inputs, [ix, iw, ib, rows, in, out](Graph& g, const Tensor& dY) {
        auto dYm = as_matrix(dY, rows, out);
        if (g.requires_grad(ix)) {
          as_matrix(g.grad_buffer(ix), rows, in).noalias() +=
              dYm * as_matrix(g.value(iw), in, out).transpose();
        }
        if (g.requires_grad(iw)) {
          as_matrix(g.grad_buffer(iw), in, out).noalias() +=
              as_matrix(g.value(ix), rows, in).transpose() * dYm;
        }
        if (ib != std::numeric_limits<std::size_t>::max() && g.requires_grad(ib)) {
          Eigen::Map<Eigen::RowVectorXd> db(g.grad_buffer(ib).data(), static_cast<Eigen::Index>(out));
          db += dYm.colwise().sum();
        }
      });
}

}  // namespace

Var linear(Var x, Var weight, Var bias) { return linear_impl(x, weight, &bias); }
Var linear(Var x, Var weight) { return linear_impl(x, weight, nullptr); }

// ---- elementwise ----------------------------------------------------------------

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor y = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += B[i];
  const std::size_t ia = a.id(), ib = b.id();
  return graph_of(a).record(std::move(y), {a, b}, [ia, ib](Graph& g, const Tensor& dy) {
    g.accumulate(ia, dy);
    g.accumulate(ib, dy);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor y = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= B[i];
  const std::size_t ia = a.id(), ib = b.id();
  return graph_of(a).record(std::move(y), {a, b}, [ia, ib](Graph& g, const Tensor& dy) {
    g.accumulate(ia, dy);
    if (g.requires_grad(ib)) {
      Tensor& d = g.grad_buffer(ib);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= dy[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  Tensor y(A.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = A[i] * B[i];
  const std::size_t ia = a.id(), ib = b.id();
  return graph_of(a).record(std::move(y), {a, b}, [ia, ib](Graph& g, const Tensor& dy) {
    if (g.requires_grad(ia)) {
      Tensor& d = g.grad_buffer(ia);
      const Tensor& B = g.value(ib);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * B[i];
    }
    if (g.requires_grad(ib)) {
      Tensor& d = g.grad_buffer(ib);
      const Tensor& A = g.value(ia);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * A[i];
    }
  });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Var scale(Var a, double c) {
  return unary(a, [c](double x) { return c * x; }, [c](double) { return c; });
}

Var add_scalar(Var a, double c) {
  return unary(a, [c](double x) { return x + c; }, [](double) { return 1.0; });
}

Var mul_const(Var a, const Tensor& c) {
  if (a.value().size() != c.size()) {
    throw DimensionError("mul_const: shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(c.shape()));
  }
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= c[i];
  const std::size_t ia = a.id();
  return graph_of(a).record(std::move(y), {a}, [ia, c](Graph& g, const Tensor& dy) {
    if (!g.requires_grad(ia)) return;
    Tensor& d = g.grad_buffer(ia);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * c[i];
  });
}

Var add_const(Var a, const Tensor& c) {
  if (a.value().size() != c.size()) {
    throw DimensionError("add_const: shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(c.shape()));
  }
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += c[i];
  const std::size_t ia = a.id();
  return graph_of(a).record(std::move(y), {a},
                            [ia](Graph& g, const Tensor& dy) { g.accumulate(ia, dy); });
}

Var scale_rows(Var a, const std::vector<double>& row_scale) {
  const Tensor& A = a.value();
  if (A.rows() != row_scale.size()) {
    throw DimensionError("scale_rows: " + std::to_string(row_scale.size()) +
                         " scales for " + std::to_string(A.rows()) + " rows");
  }
  const std::size_t cols = A.cols();
  Tensor y = A;
  for (std::size_t r = 0; r < row_scale.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] *= row_scale[r];
  }
  const std::size_t ia = a.id();
  return graph_of(a).record(std::move(y), {a}, [ia, row_scale, cols](Graph& g, const Tensor& dy) {
    if (!g.requires_grad(ia)) return;
    Tensor& d = g.grad_buffer(ia);
    for (std::size_t r = 0; r < row_scale.size(); ++r) {
      for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] += dy[r * cols + c] * row_scale[r];
    }
  });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double x) {
                 const double t = std::tanh(x);
                 return 1.0 - t * t;
               });
}

Var sigmoid(Var a) {
  auto f = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  return unary(a, f, [f](double x) {
    const double s = f(x);
    return s * (1.0 - s);
  });
}

Var gelu(Var a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return unary(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [](double x) {
        return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
      });
}

// ---- reductions / normalization -----------------------------------------------

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const std::size_t ia = a.id();
  return graph_of(a).record(Tensor::scalar(s), {a}, [ia](Graph& g, const Tensor& dy) {
    if (!g.requires_grad(ia)) return;
    Tensor& d = g.grad_buffer(ia);
    for (double& v : d.values()) v += dy[0];
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var softmax(Var x, int axis) {
  const Tensor& X = x.value();
  if (X.rank() == 0) throw DimensionError("softmax of a scalar");
  const std::size_t ax = axis < 0 ? X.rank() + axis : static_cast<std::size_t>(axis);
  if (ax >= X.rank()) throw DimensionError("softmax: axis out of range");
  const std::size_t n = X.dim(ax);
  if (n == 0) throw DimensionError("softmax over an empty axis");
  std::size_t inner = 1;
  for (std::size_t i = ax + 1; i < X.rank(); ++i) inner *= X.dim(i);
  const std::size_t outer = X.size() / (n * inner);
  Tensor Y(X.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, X[base + j * inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double e = std::exp(X[base + j * inner] - mx);
        Y[base + j * inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < n; ++j) Y[base + j * inner] /= z;
    }
  }
  const std::size_t ix = x.id();
  Graph& g = graph_of(x);
  const std::size_t iy = g.size();
  return g.record(std::move(Y), {x}, [ix, iy, n, inner, outer](Graph& g, const Tensor& dy) {
    if (!g.requires_grad(ix)) return;
    const Tensor& Y = g.value(iy);
    Tensor& dx = g.grad_buffer(ix);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += dy[base + j * inner] * Y[base + j * inner];
        for (std::size_t j = 0; j < n; ++j) {
          dx[base + j * inner] += Y[base + j * inner] * (dy[base + j * inner] - dot);
        }
      }
    }
  });
}

Var log_softmax(Var x) {
  const Tensor& X = x.value();
  if (X.rank() == 0 || X.cols() == 0) throw DimensionError("log_softmax: empty last axis");
  const std::size_t rows = X.rows(), n = X.cols();
  Tensor Y(X.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = X.data() + r * n;
    double mx = *std::max_element(xr, xr + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(xr[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) Y[r * n + j] = xr[j] - lse;
  }
  const std::size_t ix = x.id();
  Graph& g = graph_of(x);
  const std::size_t iy = g.size();
  return g.record(std::move(Y), {x}, [ix, iy, rows, n](Graph& g, const Tensor& dy) {
    if (!g.requires_grad(ix)) return;
    const Tensor& Y = g.value(iy);
    Tensor& dx = g.grad_buffer(ix);
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += dy[r * n + j];
      for (std::size_t j = 0; j < n; ++j) dx[r * n + j] += dy[r * n + j] - std::exp(Y[r * n + j]) * s;
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& X = x.value();
  const std::size_t n = X.cols(), rows = X.rows();
  if (gain.value().size() != n || bias.value().size() != n) {
    throw DimensionError("layer_norm: gain/bias width does not match " + std::to_string(n));
  }
  Tensor xhat(X.shape());
  std::vector<double> inv_std(rows);
  Tensor Y(X.shape());
  const Tensor& G = gain.value();
  const Tensor& B = bias.value();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = X.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xr[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (xr[j] - mu) * inv_std[r];
      xhat[r * n + j] = h;
      Y[r * n + j] = h * G[j] + B[j];
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return graph_of(x).record(
      std::move(Y), {x, gain, bias},
      [ix, ig, ib, rows, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Graph& g, const Tensor& dy) {
        const Tensor& G = g.value(ig);
        if (g.requires_grad(ig)) {
          Tensor& dg = g.grad_buffer(ig);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < n; ++j) dg[j] += dy[r * n + j] * xhat[r * n + j];
        }
        if (g.requires_grad(ib)) {
          Tensor& db = g.grad_buffer(ib);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < n; ++j) db[j] += dy[r * n + j];
        }
        if (g.requires_grad(ix)) {
          Tensor& dx = g.grad_buffer(ix);
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t r = 0; r < rows; ++r) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double dh = dy[r * n + j] * G[j];
              m1 += dh;
              m2 += dh * xhat[r * n + j];
            }
            m1 *= inv_n;
            m2 *= inv_n;
            for (std::size_t j = 0; j < n; ++j) {
              const double dh = dy[r * n + j] * G[j];
              dx[r * n + j] += inv_std[r] * (dh - m1 - xhat[r * n + j] * m2);
            }
          }
        }
      });
}

// ---- structural -------------------------------------------------------------------

Var reshape(Var a, Shape shape) {
  if (shape_size(shape) != a.value().size()) {
    throw DimensionError("reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
  }
  const std::size_t ia = a.id();
  return graph_of(a).record(a.value().reshaped(std::move(shape)), {a},
                            [ia](Graph& g, const Tensor& dy) {
                              if (!g.requires_grad(ia)) return;
                              Tensor& d = g.grad_buffer(ia);
                              for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i];
                            });
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  const std::size_t rows = parts.front().value().rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    if (p.value().rows() != rows) {
      throw DimensionError("concat: row count mismatch " + shape_string(p.shape()) + " vs " +
                           shape_string(parts.front().shape()));
    }
    widths.push_back(p.value().cols());
    total += widths.back();
  }
  Tensor Y(replace_last(parts.front().shape(), total));
  std::size_t off = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor& P = parts[i].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(P.data() + r * widths[i], widths[i], Y.data() + r * total + off);
    }
    off += widths[i];
  }
  std::vector<std::size_t> ids;
  for (const Var& p : parts) ids.push_back(p.id());
  return graph_of(parts.front())
      .record(std::move(Y), parts, [ids, widths, rows, total](Graph& g, const Tensor& dy) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (g.requires_grad(ids[i])) {
            Tensor& d = g.grad_buffer(ids[i]);
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t c = 0; c < widths[i]; ++c)
                d[r * widths[i] + c] += dy[r * total + off + c];
          }
          off += widths[i];
        }
      });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_rows of zero tensors");
  const std::size_t cols = parts.front().value().cols();
  std::size_t total = 0;
  std::vector<std::size_t> counts;
  for (const Var& p : parts) {
    if (p.value().rank() != 2 || p.value().cols() != cols) {
      throw DimensionError("concat_rows: expected [n, " + std::to_string(cols) + "], got " + shape_string(p.shape()));
    }
    counts.push_back(p.value().rows());
    total += counts.back();
  }
  Tensor Y(Shape{total, cols});
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy_n(p.value().data(), p.value().size(), Y.data() + off);
    off += p.value().size();
  }
  std::vector<std::size_t> ids;
  for (const Var& p : parts) ids.push_back(p.id());
  return graph_of(parts.front()).record(std::move(Y), parts, [ids, counts, cols](Graph& g, const Tensor& dy) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const std::size_t n = counts[i] * cols;
      if (g.requires_grad(ids[i])) {
        Tensor& d = g.grad_buffer(ids[i]);
        for (std::size_t j = 0; j < n; ++j) d[j] += dy[off + j];
      }
      off += n;
    }
  });
}

Var slice_cols(Var a, std::size_t start, std::size_t len) {
  const Tensor& A = a.value();
  const std::size_t cols = A.cols(), rows = A.rows();
  if (start + len > cols) {
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") outside width " + std::to_string(cols));
  }
  Tensor Y(replace_last(A.shape(), len));
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(A.data() + r * cols + start, len, Y.data() + r * len);
  }
  const std::size_t ia = a.id();
  return graph_of(a).record(std::move(Y), {a},
                            [ia, rows, cols, start, len](Graph& g, const Tensor& dy) {
                              if (!g.requires_grad(ia)) return;
                              Tensor& d = g.grad_buffer(ia);
                              for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t c = 0; c < len; ++c)
                                  d[r * cols + start + c] += dy[r * len + c];
                            });
}

Var gather_rows(Var a, const std::vector<std::size_t>& rows) {
  const Tensor& A = a.value();
  const std::size_t cols = A.cols(), n = A.rows();
  Tensor Y(Shape{rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n) {
      throw ContractError("gather_rows: index " + std::to_string(rows[i]) + " >= " +
                          std::to_string(n));
    }
    std::copy_n(A.data() + rows[i] * cols, cols, Y.data() + i * cols);
  }
  const std::size_t ia = a.id();
  return graph_of(a).record(std::move(Y), {a}, [ia, rows, cols](Graph& g, const Tensor& dy) {
    if (!g.requires_grad(ia)) return;
    Tensor& d = g.grad_buffer(ia);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t c = 0; c < cols; ++c) d[rows[i] * cols + c] += dy[i * cols + c];
  });
}

Var time_slice(Var x, std::size_t t) {
  const Tensor& X = x.value();
  if (X.rank() != 3 || t >= X.dim(1)) {
    throw DimensionError("time_slice: bad step " + std::to_string(t) + " for " +
                         shape_string(X.shape()));
  }
  const std::size_t B = X.dim(0), T = X.dim(1), C = X.dim(2);
  Tensor Y(Shape{B, C});
  for (std::size_t b = 0; b < B; ++b) std::copy_n(X.data() + (b * T + t) * C, C, Y.data() + b * C);
  const std::size_t ix = x.id();
  return graph_of(x).record(std::move(Y), {x}, [ix, B, T, C, t](Graph& g, const Tensor& dy) {
    if (!g.requires_grad(ix)) return;
    Tensor& d = g.grad_buffer(ix);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c) d[(b * T + t) * C + c] += dy[b * C + c];
  });
}

Var weighted_time_sum(Var x, const Tensor& weights) {
  const Tensor& X = x.value();
  if (X.rank() != 3 || weights.size() != X.dim(0) * X.dim(1)) {
    throw DimensionError("weighted_time_sum: input " + shape_string(X.shape()) +
                         " vs weights " + shape_string(weights.shape()));
  }
  const std::size_t B = X.dim(0), T = X.dim(1), C = X.dim(2);
  Tensor Y(Shape{B, C});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t) {
      const double w = weights[b * T + t];
      if (w == 0.0) continue;
      for (std::size_t c = 0; c < C; ++c) Y[b * C + c] += w * X[(b * T + t) * C + c];
    }
  const std::size_t ix = x.id();
  return graph_of(x).record(std::move(Y), {x}, [ix, B, T, C, weights](Graph& g, const Tensor& dy) {
    if (!g.requires_grad(ix)) return;
    Tensor& d = g.grad_buffer(ix);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < T; ++t) {
        const double w = weights[b * T + t];
        for (std::size_t c = 0; c < C; ++c) d[(b * T + t) * C + c] += w * dy[b * C + c];
      }
  });
}

// ---- sequence / attention -------------------------------------------------------

Var conv1d(Var x, Var kernel) {
  const Tensor& X = x.value();
  const Tensor& K = kernel.value();
  if (K.rank() != 3) throw DimensionError("conv1d: kernel must be [k,c_in,c_out]");
  const std::size_t k = K.dim(0), cin = K.dim(1), cout = K.dim(2);
  if (k % 2 == 0) throw ConfigError("conv1d: kernel size must be odd, got " + std::to_string(k));
  if ((X.rank() != 2 && X.rank() != 3) || X.cols() != cin) {
    throw DimensionError("conv1d: input " + shape_string(X.shape()) + " vs kernel " +
                         shape_string(K.shape()));
  }
  const std::size_t B = X.rank() == 3 ? X.dim(0) : 1;
  const std::size_t T = X.rank() == 3 ? X.dim(1) : X.dim(0);
  const std::size_t pad = k / 2;
  Shape out_shape = X.shape();
  out_shape.back() = cout;
  Tensor Y(out_shape);
  auto Ym = as_matrix(Y, B * T, cout);
  auto Xm = as_matrix(X, B * T, cin);
  // Output row t reads input row t + j - pad.
  auto span_for = [T, pad](std::size_t j) {
    const std::size_t lo = j < pad ? pad - j : 0;
    const std::size_t hi = std::min(T, T + pad - j);
    return std::pair{lo, hi};
  };
  for (std::size_t j = 0; j < k; ++j) {
    auto [lo, hi] = span_for(j);
    if (hi <= lo) continue;
    auto Kj = ConstMap(K.data() + j * cin * cout, static_cast<Eigen::Index>(cin),
                       static_cast<Eigen::Index>(cout));
    const auto n = static_cast<Eigen::Index>(hi - lo);
    for (std::size_t b = 0; b < B; ++b) {
      const auto out_row = static_cast<Eigen::Index>(b * T + lo);
      const auto in_row = static_cast<Eigen::Index>(b * T + lo + j - pad);
      Ym.block(out_row, 0, n, static_cast<Eigen::Index>(cout)).noalias() +=
          Xm.block(in_row, 0, n, static_cast<Eigen::Index>(cin)) * Kj;
    }
  }
  const std::size_t ix = x.id(), ik = kernel.id();
  return graph_of(x).record(
      std::move(Y), {x, kernel},
      [ix, ik, B, T, k, cin, cout, pad, span_for](Graph& g, const Tensor& dY) {
        auto dYm = as_matrix(dY, B * T, cout);
        const bool gx = g.requires_grad(ix), gk = g.requires_grad(ik);
        for (std::size_t j = 0; j < k; ++j) {
          auto [lo, hi] = span_for(j);
          if (hi <= lo) continue;
          const auto n = static_cast<Eigen::Index>(hi - lo);
          for (std::size_t b = 0; b < B; ++b) {
            const auto out_row = static_cast<Eigen::Index>(b * T + lo);
            const auto in_row = static_cast<Eigen::Index>(b * T + lo + j - pad);
            auto dyb = dYm.block(out_row, 0, n, static_cast<Eigen::Index>(cout));
            if (gx) {
              auto Kj = ConstMap(g.value(ik).data() + j * cin * cout,
                                 static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(cout));
              as_matrix(g.grad_buffer(ix), B * T, cin)
                  .block(in_row, 0, n, static_cast<Eigen::Index>(cin))
                  .noalias() += dyb * Kj.transpose();
            }
            if (gk) {
              auto dKj = MutMap(g.grad_buffer(ik).data() + j * cin * cout,
                                static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(cout));
              dKj.noalias() += as_matrix(g.value(ix), B * T, cin)
                                   .block(in_row, 0, n, static_cast<Eigen::Index>(cin))
                                   .transpose() *
                               dyb;
            }
          }
        }
      });
}

std::vector<std::vector<double>> segment_attention_weights(const Tensor& Q, const Tensor& K,
                                                           const std::vector<Range>& ranges) {
  const std::size_t d = Q.cols();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<std::vector<double>> weights(ranges.size());
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const auto [lo, hi] = ranges[i];
    auto& w = weights[i];
    w.resize(hi - lo);
    if (hi == lo) continue;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = lo; j < hi; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += Q[i * d + c] * K[j * d + c];
      w[j - lo] = s * inv_sqrt_d;
      mx = std::max(mx, w[j - lo]);
    }
    double z = 0.0;
    for (double& v : w) {
      v = std::exp(v - mx);
      z += v;
    }
    for (double& v : w) v /= z;
  }
  return weights;
}

Var segment_attention(Var q, Var k, Var v, const std::vector<Range>& ranges) {
  const Tensor& Q = q.value();
  const Tensor& K = k.value();
  const Tensor& V = v.value();
  if (Q.rank() != 2 || K.rank() != 2 || V.rank() != 2 || Q.dim(1) != K.dim(1) ||
      K.dim(0) != V.dim(0)) {
    throw DimensionError("attention: Q " + shape_string(Q.shape()) + ", K " +
                         shape_string(K.shape()) + ", V " + shape_string(V.shape()));
  }
  if (Q.dim(1) == 0) throw DimensionError("attention: feature dimension must be > 0");
  if (ranges.size() != Q.dim(0)) throw ContractError("attention: one range per query row");
  for (const auto& [lo, hi] : ranges) {
    if (lo > hi || hi > K.dim(0)) throw ContractError("attention: key range out of bounds");
  }
  const std::size_t m = Q.dim(0), d = Q.dim(1), dv = V.dim(1);
  auto weights = segment_attention_weights(Q, K, ranges);
  Tensor Y(Shape{m, dv});
  for (std::size_t i = 0; i < m; ++i) {
    const auto lo = ranges[i].first;
    for (std::size_t j = 0; j < weights[i].size(); ++j) {
      const double w = weights[i][j];
      for (std::size_t c = 0; c < dv; ++c) Y[i * dv + c] += w * V[(lo + j) * dv + c];
    }
  }
  const std::size_t iq = q.id(), ik = k.id(), iv = v.id();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  return graph_of(q).record(
      std::move(Y), {q, k, v},
      [iq, ik, iv, m, d, dv, ranges, weights = std::move(weights), inv_sqrt_d](
          Graph& g, const Tensor& dY) {
        const Tensor& Q = g.value(iq);
        const Tensor& K = g.value(ik);
        const Tensor& V = g.value(iv);
        const bool gq = g.requires_grad(iq), gk = g.requires_grad(ik), gv = g.requires_grad(iv);
        Tensor* dQ = gq ? &g.grad_buffer(iq) : nullptr;
        Tensor* dK = gk ? &g.grad_buffer(ik) : nullptr;
        Tensor* dV = gv ? &g.grad_buffer(iv) : nullptr;
        std::vector<double> dl;
        for (std::size_t i = 0; i < m; ++i) {
          const auto lo = ranges[i].first;
          const auto& w = weights[i];
          if (w.empty()) continue;
          dl.assign(w.size(), 0.0);
          double dot = 0.0;
          for (std::size_t j = 0; j < w.size(); ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < dv; ++c) s += dY[i * dv + c] * V[(lo + j) * dv + c];
            dl[j] = s;
            dot += w[j] * s;
          }
          for (std::size_t j = 0; j < w.size(); ++j) {
            const double dlog = w[j] * (dl[j] - dot) * inv_sqrt_d;
            if (dV) {
              for (std::size_t c = 0; c < dv; ++c) (*dV)[(lo + j) * dv + c] += w[j] * dY[i * dv + c];
            }
            if (dQ) {
              for (std::size_t c = 0; c < d; ++c) (*dQ)[i * d + c] += dlog * K[(lo + j) * d + c];
            }
            if (dK) {
              for (std::size_t c = 0; c < d; ++c) (*dK)[(lo + j) * d + c] += dlog * Q[i * d + c];
            }
          }
        }
      });
}

Var scaled_dot_attention(Var q, Var k, Var v) {
  const std::size_t n = k.value().rank() == 2 ? k.value().dim(0) : 0;
  if (n == 0) throw ContractError("scaled_dot_attention: empty key set");
  const std::size_t m = q.value().rank() == 2 ? q.value().dim(0) : 0;
  return segment_attention(q, k, v, std::vector<Range>(m, Range{0, n}));
}

Var multihead_self_attention(Var q, Var k, Var v, std::size_t batches, std::size_t steps,
                             std::size_t heads, const std::vector<std::uint8_t>& key_valid) {
  const Tensor& Q = q.value();
  const Tensor& K = k.value();
  const Tensor& V = v.value();
  const std::size_t rows = batches * steps;
  if (Q.rank() != 2 || Q.shape() != K.shape() || Q.shape() != V.shape() || Q.dim(0) != rows) {
    throw DimensionError("multihead_self_attention: Q/K/V must all be [" +
                         std::to_string(rows) + ", D]");
  }
  const std::size_t D = Q.dim(1);
  if (heads == 0 || D % heads != 0) {
    throw ConfigError("multihead_self_attention: width " + std::to_string(D) +
                      " not divisible by " + std::to_string(heads) + " heads");
  }
  if (key_valid.size() != rows) throw ContractError("multihead_self_attention: mask size");
  const std::size_t dh = D / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  // probs[((b*H + h)*T + i)*T + j]
  std::vector<double> probs(batches * heads * steps * steps, 0.0);
  Tensor Y(Shape{rows, D});
  for (std::size_t b = 0; b < batches; ++b) {
    bool any = false;
    for (std::size_t t = 0; t < steps; ++t) any = any || key_valid[b * steps + t];
    if (!any) continue;
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < steps; ++i) {
        double* p = probs.data() + ((b * heads + h) * steps + i) * steps;
        const double* qi = Q.data() + (b * steps + i) * D + h * dh;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < steps; ++j) {
          if (!key_valid[b * steps + j]) continue;
          const double* kj = K.data() + (b * steps + j) * D + h * dh;
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
          p[j] = s * inv_sqrt;
          mx = std::max(mx, p[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < steps; ++j) {
          if (!key_valid[b * steps + j]) continue;
          p[j] = std::exp(p[j] - mx);
          z += p[j];
        }
        double* yi = Y.data() + (b * steps + i) * D + h * dh;
        for (std::size_t j = 0; j < steps; ++j) {
          if (!key_valid[b * steps + j]) continue;
          p[j] /= z;
          const double* vj = V.data() + (b * steps + j) * D + h * dh;
          for (std::size_t c = 0; c < dh; ++c) yi[c] += p[j] * vj[c];
        }
      }
    }
  }
  const std::size_t iq = q.id(), ik = k.id(), iv = v.id();
  return graph_of(q).record(
      std::move(Y), {q, k, v},
      [iq, ik, iv, batches, steps, heads, D, dh, inv_sqrt, probs = std::move(probs)](
          Graph& g, const Tensor& dY) {
        const Tensor& Q = g.value(iq);
        const Tensor& K = g.value(ik);
        const Tensor& V = g.value(iv);
        Tensor* dQ = g.requires_grad(iq) ? &g.grad_buffer(iq) : nullptr;
        Tensor* dK = g.requires_grad(ik) ? &g.grad_buffer(ik) : nullptr;
        Tensor* dV = g.requires_grad(iv) ? &g.grad_buffer(iv) : nullptr;
        std::vector<double> dp(steps);
        for (std::size_t b = 0; b < batches; ++b) {
          for (std::size_t h = 0; h < heads; ++h) {
            for (std::size_t i = 0; i < steps; ++i) {
              const double* p = probs.data() + ((b * heads + h) * steps + i) * steps;
              const double* dyi = dY.data() + (b * steps + i) * D + h * dh;
              double dot = 0.0;
              for (std::size_t j = 0; j < steps; ++j) {
                if (p[j] == 0.0) {
                  dp[j] = 0.0;
                  continue;
                }
                const double* vj = V.data() + (b * steps + j) * D + h * dh;
                double s = 0.0;
                for (std::size_t c = 0; c < dh; ++c) s += dyi[c] * vj[c];
                dp[j] = s;
                dot += p[j] * s;
              }
              for (std::size_t j = 0; j < steps; ++j) {
                if (p[j] == 0.0) continue;
                const double dl = p[j] * (dp[j] - dot) * inv_sqrt;
                const std::size_t qi = (b * steps + i) * D + h * dh;
                const std::size_t kj = (b * steps + j) * D + h * dh;
                for (std::size_t c = 0; c < dh; ++c) {
                  if (dV) (*dV)[kj + c] += p[j] * dyi[c];
                  if (dQ) (*dQ)[qi + c] += dl * K[kj + c];
                  if (dK) (*dK)[kj + c] += dl * Q[qi + c];
                }
              }
            }
          }
        }
      });
}

// ---- kinematics helper --------------------------------------------------------------

Var clamp_norm_rows(Var u, double max_norm) {
  const Tensor& U = u.value();
  const std::size_t rows = U.rows(), n = U.cols();
  Tensor Y = U;
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += U[r * n + c] * U[r * n + c];
    norms[r] = std::sqrt(s);
    if (norms[r] > max_norm) {
      const double f = max_norm / norms[r];
      for (std::size_t c = 0; c < n; ++c) Y[r * n + c] *= f;
    }
  }
  const std::size_t iu = u.id();
  return graph_of(u).record(
      std::move(Y), {u}, [iu, rows, n, max_norm, norms = std::move(norms)](Graph& g, const Tensor& dy) {
        if (!g.requires_grad(iu)) return;
        const Tensor& U = g.value(iu);
        Tensor& du = g.grad_buffer(iu);
        for (std::size_t r = 0; r < rows; ++r) {
          if (norms[r] <= max_norm) {
            for (std::size_t c = 0; c < n; ++c) du[r * n + c] += dy[r * n + c];
            continue;
          }
          // d/du (m u / |u|) = (m/|u|) (I - u u^T / |u|^2)
          double proj = 0.0;
          for (std::size_t c = 0; c < n; ++c) proj += U[r * n + c] * dy[r * n + c];
          proj /= norms[r] * norms[r];
          const double f = max_norm / norms[r];
          for (std::size_t c = 0; c < n; ++c) {
            du[r * n + c] += f * (dy[r * n + c] - U[r * n + c] * proj);
          }
        }
      });
}

}  // namespace parkdiff::ops
