#include <algorithm>
#include <cmath>
#include <vector>

#include "revol/errors.hpp"
#include "revol/nn/graph.hpp"

namespace revol::nn {
namespace {

Graph& same_graph(Var a, Var b) {
  Graph& g = a.graph();
  if (&b.graph() != &g) throw StateError("operands live on different graphs");
  return g;
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
}

bool is_bias_for(const Tensor& a, const Tensor& b) {
  return b.rows() == 1 && b.cols() == a.cols() && a.rows() != 1;
}

// c += a(m x k) * b(k x n)
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c(m x k) += g(m x n) * b(k x n)^T
void gemm_nt(const Tensor& g, const Tensor& b, Tensor& c) {
  const std::size_t m = g.rows(), n = g.cols(), k = b.rows();
  const double* pg = g.data();
  const double* pb = b.data();
  double* pc = c.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = pg + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = pb + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      pc[i * k + p] += acc;
    }
  }
}

// c(k x n) += a(m x k)^T * g(m x n)
void gemm_tn(const Tensor& a, const Tensor& g, Tensor& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = g.cols();
  const double* pa = a.data();
  const double* pg = g.data();
  double* pc = c.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = pg + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      double* crow = pc + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Graph& g = a.graph();
  const Tensor& x = a.value();
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  // deriv(input, output) -> d out / d input
  return g.record(std::move(out), {a}, [a, deriv](Graph& gr, const Tensor& y, const Tensor& gy) {
    Tensor* ga = gr.grad_sink(a);
    if (!ga) return;
    const Tensor& x = gr.value(a);
    for (std::size_t i = 0; i < y.size(); ++i) (*ga)[i] += gy[i] * deriv(x[i], y[i]);
  });
}

int check_axis(int axis) {
  if (axis != 0 && axis != 1) throw ShapeError("axis must be 0 or 1");
  return axis;
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.cols() != y.rows()) {
    throw ShapeError("matmul: " + x.shape_string() + " * " + y.shape_string());
  }
  Tensor out(x.rows(), y.cols());
  gemm_nn(x, y, out);
  return g.record(std::move(out), {a, b}, [a, b](Graph& gr, const Tensor&, const Tensor& gy) {
    if (Tensor* ga = gr.grad_sink(a)) gemm_nt(gy, gr.value(b), *ga);
    if (Tensor* gb = gr.grad_sink(b)) gemm_tn(gr.value(a), gy, *gb);
  });
}

namespace {

Var add_like(Var a, Var b, double sign, const char* name) {
  Graph& g = same_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const bool bias = is_bias_for(x, y);
  if (!bias) require_same(x, y, name);
  Tensor out = x;
  const std::size_t cols = x.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += sign * (bias ? y[i % cols] : y[i]);
  return g.record(std::move(out), {a, b}, [a, b, sign, bias, cols](Graph& gr, const Tensor&, const Tensor& gy) {
    if (Tensor* ga = gr.grad_sink(a))
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i];
    if (Tensor* gb = gr.grad_sink(b)) {
      if (bias) {
        for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i % cols] += sign * gy[i];
      } else {
        for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] += sign * gy[i];
      }
    }
  });
}

}  // namespace

Var add(Var a, Var b) { return add_like(a, b, 1.0, "add"); }
Var sub(Var a, Var b) { return add_like(a, b, -1.0, "sub"); }

Var mul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same(x, y, "mul");
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph& gr, const Tensor&, const Tensor& gy) {
    if (Tensor* ga = gr.grad_sink(a)) {
      const Tensor& y = gr.value(b);
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * y[i];
    }
    if (Tensor* gb = gr.grad_sink(b)) {
      const Tensor& x = gr.value(a);
      for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] += gy[i] * x[i];
    }
  });
}

Var div(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same(x, y, "div");
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (y[i] == 0.0) throw NumericDomainError("div: division by zero");
    out[i] = x[i] / y[i];
  }
  return g.record(std::move(out), {a, b}, [a, b](Graph& gr, const Tensor& q, const Tensor& gy) {
    const Tensor& y = gr.value(b);
    if (Tensor* ga = gr.grad_sink(a))
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] / y[i];
    if (Tensor* gb = gr.grad_sink(b))
      for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] -= gy[i] * q[i] / y[i];
  });
}

Var scale(Var a, double factor) {
  return unary(a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Var shift(Var a, double offset) {
  return unary(a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  for (double v : a.value().values())
    if (!(v > 0.0)) throw NumericDomainError("log of nonpositive value");
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sqrt(Var a) {
  for (double v : a.value().values())
    if (!(v >= 0.0)) throw NumericDomainError("sqrt of negative value");
  return unary(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Var softmax(Var a, int axis) {
  check_axis(axis);
  Graph& g = a.graph();
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out(rows, cols);
  // groups: rows of the matrix for axis 1, columns for axis 0
  const std::size_t groups = axis == 1 ? rows : cols;
  const std::size_t len = axis == 1 ? cols : rows;
  auto index = [=](std::size_t grp, std::size_t k) { return axis == 1 ? grp * cols + k : k * cols + grp; };
  for (std::size_t grp = 0; grp < groups; ++grp) {
    double mx = -INFINITY;
    for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, x[index(grp, k)]);
    double total = 0.0;
    for (std::size_t k = 0; k < len; ++k) total += (out[index(grp, k)] = std::exp(x[index(grp, k)] - mx));
    for (std::size_t k = 0; k < len; ++k) out[index(grp, k)] /= total;
  }
  return g.record(std::move(out), {a}, [a, groups, len, index](Graph& gr, const Tensor& y, const Tensor& gy) {
    Tensor* ga = gr.grad_sink(a);
    if (!ga) return;
    for (std::size_t grp = 0; grp < groups; ++grp) {
      double dot = 0.0;
      for (std::size_t k = 0; k < len; ++k) dot += gy[index(grp, k)] * y[index(grp, k)];
      for (std::size_t k = 0; k < len; ++k) {
        const auto i = index(grp, k);
        (*ga)[i] += y[i] * (gy[i] - dot);
      }
    }
  });
}

Var sum(Var a) {
  Graph& g = a.graph();
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return g.record(Tensor::scalar(total), {a}, [a](Graph& gr, const Tensor&, const Tensor& gy) {
    if (Tensor* ga = gr.grad_sink(a))
      for (auto& v : ga->values()) v += gy[0];
  });
}

Var sum(Var a, int axis) {
  check_axis(axis);
  Graph& g = a.graph();
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out = axis == 1 ? Tensor(rows, 1) : Tensor(1, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[axis == 1 ? r : c] += x(r, c);
  return g.record(std::move(out), {a}, [a, axis, rows, cols](Graph& gr, const Tensor&, const Tensor& gy) {
    Tensor* ga = gr.grad_sink(a);
    if (!ga) return;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) (*ga)(r, c) += gy[axis == 1 ? r : c];
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var mean(Var a, int axis) {
  check_axis(axis);
  const double n = static_cast<double>(axis == 1 ? a.value().cols() : a.value().rows());
  if (n == 0) throw ShapeError("mean over empty axis");
  return scale(sum(a, axis), 1.0 / n);
}

Var concat(std::span<const Var> parts, int axis) {
  check_axis(axis);
  if (parts.empty()) throw ShapeError("concat of nothing");
  Graph& g = parts.front().graph();
  const std::size_t fixed = axis == 1 ? parts.front().rows() : parts.front().cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (&p.graph() != &g) throw StateError("concat operands live on different graphs");
    const std::size_t other = axis == 1 ? p.rows() : p.cols();
    if (other != fixed) throw ShapeError("concat: incompatible shapes");
    total += axis == 1 ? p.cols() : p.rows();
  }
  Tensor out = axis == 1 ? Tensor(fixed, total) : Tensor(total, fixed);
  std::vector<std::size_t> offsets;
  offsets.reserve(parts.size());
  std::size_t off = 0;
  for (const Var& p : parts) {
    offsets.push_back(off);
    const Tensor& x = p.value();
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) {
        if (axis == 1)
          out(r, off + c) = x(r, c);
        else
          out(off + r, c) = x(r, c);
      }
    off += axis == 1 ? x.cols() : x.rows();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return g.record(std::move(out), parts,
                  [saved = std::move(saved), offsets = std::move(offsets), axis](Graph& gr, const Tensor&,
                                                                                const Tensor& gy) {
                    for (std::size_t k = 0; k < saved.size(); ++k) {
                      Tensor* gp = gr.grad_sink(saved[k]);
                      if (!gp) continue;
                      const std::size_t off = offsets[k];
                      for (std::size_t r = 0; r < gp->rows(); ++r)
                        for (std::size_t c = 0; c < gp->cols(); ++c)
                          (*gp)(r, c) += axis == 1 ? gy(r, off + c) : gy(off + r, c);
                    }
                  });
}

Var slice(Var a, int axis, std::size_t begin, std::size_t end) {
  check_axis(axis);
  Graph& g = a.graph();
  const Tensor& x = a.value();
  const std::size_t extent = axis == 1 ? x.cols() : x.rows();
  if (begin >= end || end > extent) throw ShapeError("slice: bad range on " + x.shape_string());
  const std::size_t n = end - begin;
  Tensor out = axis == 1 ? Tensor(x.rows(), n) : Tensor(n, x.cols());
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = axis == 1 ? x(r, begin + c) : x(begin + r, c);
  return g.record(std::move(out), {a}, [a, axis, begin](Graph& gr, const Tensor& y, const Tensor& gy) {
    Tensor* ga = gr.grad_sink(a);
    if (!ga) return;
    for (std::size_t r = 0; r < y.rows(); ++r)
      for (std::size_t c = 0; c < y.cols(); ++c) {
        if (axis == 1)
          (*ga)(r, begin + c) += gy(r, c);
        else
          (*ga)(begin + r, c) += gy(r, c);
      }
  });
}

}  // namespace revol::nn
