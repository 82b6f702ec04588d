#include "visemeforge/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace vf::ad {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

MatMap map2d(Tensor& t, long rows, long cols) { return MatMap(t.data(), rows, cols); }
ConstMatMap map2d(const Tensor& t, long rows, long cols) {
  return ConstMatMap(t.data(), rows, cols);
}

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const Var& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backward_fn = std::move(backward_fn);
  return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->value.same_shape(b->value))
    throw ShapeError(std::string(op) + ": shape mismatch " + a->value.shape_str() + " vs " +
                     b->value.shape_str());
}

// Unary elementwise helper: f(value) and df(value_in, value_out) per element.
template <typename F, typename DF>
Var unary(const Var& a, F f, DF df) {
  Tensor out(a->value.shape());
  const long n = a->value.numel();
  for (long i = 0; i < n; ++i) out[i] = f(a->value[i]);
  return make_node(std::move(out), {a}, [f, df](Node& node) {
    Var a = node.parents[0];
    if (!a->requires_grad) return;
    a->ensure_grad();
    const long n = node.value.numel();
    for (long i = 0; i < n; ++i) a->grad[i] += df(a->value[i], node.value[i]) * node.grad[i];
  });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    const double z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

}  // namespace

Var leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

Var constant(double value) { return leaf(Tensor::scalar(value), false); }

Var detach(const Var& a) { return leaf(a->value, false); }

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a->value;
  for (long i = 0; i < out.numel(); ++i) out[i] += b->value[i];
  return make_node(std::move(out), {a, b}, [](Node& node) {
    for (const Var& p : node.parents) {
      if (!p->requires_grad) continue;
      p->ensure_grad();
      for (long i = 0; i < node.grad.numel(); ++i) p->grad[i] += node.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a->value;
  for (long i = 0; i < out.numel(); ++i) out[i] -= b->value[i];
  return make_node(std::move(out), {a, b}, [](Node& node) {
    Var a = node.parents[0], b = node.parents[1];
    if (a->requires_grad) {
      a->ensure_grad();
      for (long i = 0; i < node.grad.numel(); ++i) a->grad[i] += node.grad[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (long i = 0; i < node.grad.numel(); ++i) b->grad[i] -= node.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a->value;
  for (long i = 0; i < out.numel(); ++i) out[i] *= b->value[i];
  return make_node(std::move(out), {a, b}, [](Node& node) {
    Var a = node.parents[0], b = node.parents[1];
    if (a->requires_grad) {
      a->ensure_grad();
      for (long i = 0; i < node.grad.numel(); ++i) a->grad[i] += b->value[i] * node.grad[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (long i = 0; i < node.grad.numel(); ++i) b->grad[i] += a->value[i] * node.grad[i];
    }
  });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double c) {
  Tensor out = a->value;
  for (long i = 0; i < out.numel(); ++i) out[i] *= c;
  return make_node(std::move(out), {a}, [c](Node& node) {
    Var a = node.parents[0];
    if (!a->requires_grad) return;
    a->ensure_grad();
    for (long i = 0; i < node.grad.numel(); ++i) a->grad[i] += c * node.grad[i];
  });
}

Var add_scalar(const Var& a, double c) {
  Tensor out = a->value;
  for (long i = 0; i < out.numel(); ++i) out[i] += c;
  return make_node(std::move(out), {a}, [](Node& node) {
    Var a = node.parents[0];
    if (!a->requires_grad) return;
    a->ensure_grad();
    for (long i = 0; i < node.grad.numel(); ++i) a->grad[i] += node.grad[i];
  });
}

Var relu(const Var& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(const Var& a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var sigmoid(const Var& a) {
  return unary(
      a, [](double x) { return stable_sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh_(const Var& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var log_(const Var& a) {
  for (long i = 0; i < a->value.numel(); ++i)
    if (!(a->value[i] > 0.0)) throw DomainError("log of non-positive value");
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var abs_(const Var& a) {
  return unary(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var clamp(const Var& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (long i = 0; i < a->value.numel(); ++i) s += a->value[i];
  return make_node(Tensor::scalar(s), {a}, [](Node& node) {
    Var a = node.parents[0];
    if (!a->requires_grad) return;
    a->ensure_grad();
    const double g = node.grad[0];
    for (long i = 0; i < a->grad.numel(); ++i) a->grad[i] += g;
  });
}

Var mean(const Var& a) {
  const long n = a->value.numel();
  if (n == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var reshape(const Var& a, std::vector<long> shape) {
  Tensor out = a->value.reshaped(std::move(shape));
  return make_node(std::move(out), {a}, [](Node& node) {
    Var a = node.parents[0];
    if (!a->requires_grad) return;
    a->ensure_grad();
    for (long i = 0; i < node.grad.numel(); ++i) a->grad[i] += node.grad[i];
  });
}

namespace {

// For axis ops we view a tensor of shape [outer, axis_dim, inner].
void axis_extents(const std::vector<long>& shape, long axis, long& outer, long& inner) {
  outer = 1;
  inner = 1;
  for (long i = 0; i < axis; ++i) outer *= shape[static_cast<std::size_t>(i)];
  for (long i = axis + 1; i < static_cast<long>(shape.size()); ++i)
    inner *= shape[static_cast<std::size_t>(i)];
}

}  // namespace

Var concat(const std::vector<Var>& xs, long axis) {
  if (xs.empty()) throw ShapeError("concat of zero tensors");
  const auto& s0 = xs[0]->value.shape();
  if (axis < 0 || axis >= static_cast<long>(s0.size())) throw ShapeError("concat: bad axis");
  long axis_total = 0;
  for (const Var& x : xs) {
    const auto& s = x->value.shape();
    if (s.size() != s0.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i)
      if (static_cast<long>(i) != axis && s[i] != s0[i])
        throw ShapeError("concat: off-axis dimension mismatch");
    axis_total += s[static_cast<std::size_t>(axis)];
  }
  std::vector<long> out_shape = s0;
  out_shape[static_cast<std::size_t>(axis)] = axis_total;
  Tensor out(out_shape);
  long outer, inner;
  axis_extents(out_shape, axis, outer, inner);
  long offset = 0;
  for (const Var& x : xs) {
    const long ad = x->value.dim(axis);
    for (long o = 0; o < outer; ++o) {
      const double* src = x->value.data() + o * ad * inner;
      double* dst = out.data() + (o * axis_total + offset) * inner;
      std::copy(src, src + ad * inner, dst);
    }
    offset += ad;
  }
  return make_node(std::move(out), std::vector<Var>(xs), [axis](Node& node) {
    long outer, inner;
    axis_extents(node.value.shape(), axis, outer, inner);
    const long axis_total = node.value.dim(axis);
    long offset = 0;
    for (const Var& x : node.parents) {
      const long ad = x->value.dim(axis);
      if (x->requires_grad) {
        x->ensure_grad();
        for (long o = 0; o < outer; ++o) {
          const double* src = node.grad.data() + (o * axis_total + offset) * inner;
          double* dst = x->grad.data() + o * ad * inner;
          for (long i = 0; i < ad * inner; ++i) dst[i] += src[i];
        }
      }
      offset += ad;
    }
  });
}

Var slice(const Var& a, long axis, long start, long len) {
  const auto& s = a->value.shape();
  if (axis < 0 || axis >= static_cast<long>(s.size())) throw ShapeError("slice: bad axis");
  const long ad = s[static_cast<std::size_t>(axis)];
  if (start < 0 || len < 0 || start + len > ad) throw ShapeError("slice: out of range");
  std::vector<long> out_shape = s;
  out_shape[static_cast<std::size_t>(axis)] = len;
  Tensor out(out_shape);
  long outer, inner;
  axis_extents(s, axis, outer, inner);
  for (long o = 0; o < outer; ++o) {
    const double* src = a->value.data() + (o * ad + start) * inner;
    double* dst = out.data() + o * len * inner;
    std::copy(src, src + len * inner, dst);
  }
  return make_node(std::move(out), {a}, [axis, start, len](Node& node) {
    Var a = node.parents[0];
    if (!a->requires_grad) return;
    a->ensure_grad();
    long outer, inner;
    axis_extents(a->value.shape(), axis, outer, inner);
    const long ad = a->value.dim(axis);
    for (long o = 0; o < outer; ++o) {
      const double* src = node.grad.data() + o * len * inner;
      double* dst = a->grad.data() + (o * ad + start) * inner;
      for (long i = 0; i < len * inner; ++i) dst[i] += src[i];
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a->value.ndim() != 2 || b->value.ndim() != 2 || a->value.dim(1) != b->value.dim(0))
    throw ShapeError("matmul: incompatible shapes " + a->value.shape_str() + " x " +
                     b->value.shape_str());
  const long m = a->value.dim(0), k = a->value.dim(1), n = b->value.dim(1);
  Tensor out({m, n});
  map2d(out, m, n).noalias() = map2d(a->value, m, k) * map2d(b->value, k, n);
  return make_node(std::move(out), {a, b}, [m, k, n](Node& node) {
    Var a = node.parents[0], b = node.parents[1];
    auto g = map2d(node.grad, m, n);
    if (a->requires_grad) {
      a->ensure_grad();
      map2d(a->grad, m, k).noalias() += g * map2d(b->value, k, n).transpose();
    }
    if (b->requires_grad) {
      b->ensure_grad();
      map2d(b->grad, k, n).noalias() += map2d(a->value, m, k).transpose() * g;
    }
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  if (x->value.ndim() != 2 || w->value.ndim() != 2 || x->value.dim(1) != w->value.dim(0))
    throw ShapeError("linear: incompatible shapes " + x->value.shape_str() + " x " +
                     w->value.shape_str());
  const long n = x->value.dim(0), in = x->value.dim(1), out_dim = w->value.dim(1);
  if (b->value.numel() != out_dim) throw ShapeError("linear: bias size mismatch");
  Tensor out({n, out_dim});
  map2d(out, n, out_dim).noalias() = map2d(x->value, n, in) * map2d(w->value, in, out_dim);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < out_dim; ++j) out.at(i, j) += b->value[j];
  return make_node(std::move(out), {x, w, b}, [n, in, out_dim](Node& node) {
    Var x = node.parents[0], w = node.parents[1], b = node.parents[2];
    auto g = map2d(node.grad, n, out_dim);
    if (x->requires_grad) {
      x->ensure_grad();
      map2d(x->grad, n, in).noalias() += g * map2d(w->value, in, out_dim).transpose();
    }
    if (w->requires_grad) {
      w->ensure_grad();
      map2d(w->grad, in, out_dim).noalias() += map2d(x->value, n, in).transpose() * g;
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (long i = 0; i < n; ++i)
        for (long j = 0; j < out_dim; ++j) b->grad[j] += node.grad.at(i, j);
    }
  });
}

namespace {

struct ConvDims {
  long n, cin, h, w, cout, kh, kw, oh, ow;
  long stride_h, stride_w, pad_h, pad_w;
  long k() const { return cin * kh * kw; }
  long m() const { return n * oh * ow; }
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, long stride_h, long stride_w, long pad_h,
                   long pad_w) {
  if (x.ndim() != 4 || w.ndim() != 4) throw ShapeError("conv2d: expects 4-D input and weight");
  if (x.dim(1) != w.dim(1))
    throw ShapeError("conv2d: channel mismatch " + x.shape_str() + " vs " + w.shape_str());
  if (stride_h < 1 || stride_w < 1) throw ShapeError("conv2d: stride must be >= 1");
  ConvDims d;
  d.n = x.dim(0);
  d.cin = x.dim(1);
  d.h = x.dim(2);
  d.w = x.dim(3);
  d.cout = w.dim(0);
  d.kh = w.dim(2);
  d.kw = w.dim(3);
  d.stride_h = stride_h;
  d.stride_w = stride_w;
  d.pad_h = pad_h;
  d.pad_w = pad_w;
  d.oh = (d.h + 2 * pad_h - d.kh) / stride_h + 1;
  d.ow = (d.w + 2 * pad_w - d.kw) / stride_w + 1;
  if (d.oh < 1 || d.ow < 1) throw ShapeError("conv2d: kernel larger than padded input");
  return d;
}

// col is [K, M] row-major with K = cin*kh*kw, M = n*oh*ow.
void im2col(const Tensor& x, const ConvDims& d, Tensor& col) {
  const long M = d.m();
  for (long ci = 0; ci < d.cin; ++ci) {
    for (long i = 0; i < d.kh; ++i) {
      for (long j = 0; j < d.kw; ++j) {
        const long r = (ci * d.kh + i) * d.kw + j;
        double* dst = col.data() + r * M;
        for (long n = 0; n < d.n; ++n) {
          const double* xn = x.data() + (n * d.cin + ci) * d.h * d.w;
          for (long oh = 0; oh < d.oh; ++oh) {
            const long ih = oh * d.stride_h - d.pad_h + i;
            const long base = (n * d.oh + oh) * d.ow;
            if (ih < 0 || ih >= d.h) {
              for (long ow = 0; ow < d.ow; ++ow) dst[base + ow] = 0.0;
              continue;
            }
            for (long ow = 0; ow < d.ow; ++ow) {
              const long iw = ow * d.stride_w - d.pad_w + j;
              dst[base + ow] = (iw >= 0 && iw < d.w) ? xn[ih * d.w + iw] : 0.0;
            }
          }
        }
      }
    }
  }
}

void col2im_accumulate(const Tensor& col, const ConvDims& d, Tensor& dx) {
  const long M = d.m();
  for (long ci = 0; ci < d.cin; ++ci) {
    for (long i = 0; i < d.kh; ++i) {
      for (long j = 0; j < d.kw; ++j) {
        const long r = (ci * d.kh + i) * d.kw + j;
        const double* src = col.data() + r * M;
        for (long n = 0; n < d.n; ++n) {
          double* xn = dx.data() + (n * d.cin + ci) * d.h * d.w;
          for (long oh = 0; oh < d.oh; ++oh) {
            const long ih = oh * d.stride_h - d.pad_h + i;
            if (ih < 0 || ih >= d.h) continue;
            const long base = (n * d.oh + oh) * d.ow;
            for (long ow = 0; ow < d.ow; ++ow) {
              const long iw = ow * d.stride_w - d.pad_w + j;
              if (iw >= 0 && iw < d.w) xn[ih * d.w + iw] += src[base + ow];
            }
          }
        }
      }
    }
  }
}

// out value is [N,Cout,OH,OW]; GEMM result is [Cout, M] with M = N*OH*OW.
void scatter_out(const Tensor& mat, const ConvDims& d, Tensor& out) {
  for (long n = 0; n < d.n; ++n)
    for (long co = 0; co < d.cout; ++co) {
      double* dst = out.data() + (n * d.cout + co) * d.oh * d.ow;
      const double* src = mat.data() + co * d.m() + n * d.oh * d.ow;
      std::copy(src, src + d.oh * d.ow, dst);
    }
}

void gather_grad(const Tensor& gout, const ConvDims& d, Tensor& gmat) {
  for (long n = 0; n < d.n; ++n)
    for (long co = 0; co < d.cout; ++co) {
      const double* src = gout.data() + (n * d.cout + co) * d.oh * d.ow;
      double* dst = gmat.data() + co * d.m() + n * d.oh * d.ow;
      std::copy(src, src + d.oh * d.ow, dst);
    }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, long stride, long pad) {
  return conv2d(x, w, b, stride, stride, pad, pad);
}

Var conv2d(const Var& x, const Var& w, const Var& b, long stride_h, long stride_w, long pad_h,
           long pad_w) {
  const ConvDims d = conv_dims(x->value, w->value, stride_h, stride_w, pad_h, pad_w);
  if (b->value.numel() != d.cout) throw ShapeError("conv2d: bias size mismatch");
  Tensor col({d.k(), d.m()});
  im2col(x->value, d, col);
  Tensor mat({d.cout, d.m()});
  map2d(mat, d.cout, d.m()).noalias() =
      map2d(w->value, d.cout, d.k()) * map2d(col, d.k(), d.m());
  Tensor out({d.n, d.cout, d.oh, d.ow});
  scatter_out(mat, d, out);
  for (long n = 0; n < d.n; ++n)
    for (long co = 0; co < d.cout; ++co) {
      double* dst = out.data() + (n * d.cout + co) * d.oh * d.ow;
      for (long i = 0; i < d.oh * d.ow; ++i) dst[i] += b->value[co];
    }
  return make_node(std::move(out), {x, w, b}, [d](Node& node) {
    Var x = node.parents[0], w = node.parents[1], b = node.parents[2];
    Tensor gmat({d.cout, d.m()});
    gather_grad(node.grad, d, gmat);
    auto g = map2d(gmat, d.cout, d.m());
    if (w->requires_grad || x->requires_grad) {
      // im2col is recomputed here rather than cached; graphs hold many conv
      // nodes and the column buffers dominate memory otherwise.
      Tensor col({d.k(), d.m()});
      im2col(x->value, d, col);
      if (w->requires_grad) {
        w->ensure_grad();
        map2d(w->grad, d.cout, d.k()).noalias() += g * map2d(col, d.k(), d.m()).transpose();
      }
      if (x->requires_grad) {
        x->ensure_grad();
        Tensor dcol({d.k(), d.m()});
        map2d(dcol, d.k(), d.m()).noalias() =
            map2d(w->value, d.cout, d.k()).transpose() * g;
        col2im_accumulate(dcol, d, x->grad);
      }
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (long co = 0; co < d.cout; ++co) {
        double s = 0.0;
        const double* row = gmat.data() + co * d.m();
        for (long i = 0; i < d.m(); ++i) s += row[i];
        b->grad[co] += s;
      }
    }
  });
}

Var upsample_nearest2x(const Var& x) {
  if (x->value.ndim() != 4) throw ShapeError("upsample_nearest2x: expects 4-D input");
  const long n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2), w = x->value.dim(3);
  Tensor out({n, c, 2 * h, 2 * w});
  for (long nc = 0; nc < n * c; ++nc) {
    const double* src = x->value.data() + nc * h * w;
    double* dst = out.data() + nc * 4 * h * w;
    for (long i = 0; i < h; ++i)
      for (long j = 0; j < w; ++j) {
        const double v = src[i * w + j];
        dst[(2 * i) * 2 * w + 2 * j] = v;
        dst[(2 * i) * 2 * w + 2 * j + 1] = v;
        dst[(2 * i + 1) * 2 * w + 2 * j] = v;
        dst[(2 * i + 1) * 2 * w + 2 * j + 1] = v;
      }
  }
  return make_node(std::move(out), {x}, [n, c, h, w](Node& node) {
    Var x = node.parents[0];
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (long nc = 0; nc < n * c; ++nc) {
      double* dst = x->grad.data() + nc * h * w;
      const double* src = node.grad.data() + nc * 4 * h * w;
      for (long i = 0; i < h; ++i)
        for (long j = 0; j < w; ++j)
          dst[i * w + j] += src[(2 * i) * 2 * w + 2 * j] + src[(2 * i) * 2 * w + 2 * j + 1] +
                            src[(2 * i + 1) * 2 * w + 2 * j] +
                            src[(2 * i + 1) * 2 * w + 2 * j + 1];
    }
  });
}

Var spatial_mean(const Var& x) {
  if (x->value.ndim() != 4) throw ShapeError("spatial_mean: expects 4-D input");
  const long n = x->value.dim(0), c = x->value.dim(1), hw = x->value.dim(2) * x->value.dim(3);
  Tensor out({n, c});
  for (long nc = 0; nc < n * c; ++nc) {
    const double* src = x->value.data() + nc * hw;
    double s = 0.0;
    for (long i = 0; i < hw; ++i) s += src[i];
    out[nc] = s / static_cast<double>(hw);
  }
  return make_node(std::move(out), {x}, [n, c, hw](Node& node) {
    Var x = node.parents[0];
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (long nc = 0; nc < n * c; ++nc) {
      const double g = node.grad[nc] / static_cast<double>(hw);
      double* dst = x->grad.data() + nc * hw;
      for (long i = 0; i < hw; ++i) dst[i] += g;
    }
  });
}

Var softmax_cross_entropy(const Var& logits, long target) {
  const long k = logits->value.numel();
  if (target < 0 || target >= k) throw InvalidArgument("cross_entropy: target out of range");
  double mx = logits->value[0];
  for (long i = 1; i < k; ++i) mx = std::max(mx, logits->value[i]);
  double se = 0.0;
  for (long i = 0; i < k; ++i) se += std::exp(logits->value[i] - mx);
  const double lse = mx + std::log(se);
  const double loss = lse - logits->value[target];
  return make_node(Tensor::scalar(loss), {logits}, [target, mx, lse](Node& node) {
    Var logits = node.parents[0];
    if (!logits->requires_grad) return;
    logits->ensure_grad();
    const double g = node.grad[0];
    const long k = logits->value.numel();
    for (long i = 0; i < k; ++i) {
      const double p = std::exp(logits->value[i] - lse);
      logits->grad[i] += g * (p - (i == target ? 1.0 : 0.0));
    }
    (void)mx;
  });
}

Tensor softmax(const Tensor& logits) {
  Tensor out(logits.shape());
  const long k = logits.numel();
  double mx = logits[0];
  for (long i = 1; i < k; ++i) mx = std::max(mx, logits[i]);
  double se = 0.0;
  for (long i = 0; i < k; ++i) {
    out[i] = std::exp(logits[i] - mx);
    se += out[i];
  }
  for (long i = 0; i < k; ++i) out[i] /= se;
  return out;
}

void backward(const Var& loss) {
  if (loss->value.numel() != 1) throw ShapeError("backward: loss must be scalar");
  if (!loss->requires_grad) return;

  // Iterative post-order DFS; nodes are processed in reverse topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.get(), 0);
  visited.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx].get();
      ++idx;
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss->ensure_grad();
  loss->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn) {
      node->ensure_grad();
      node->backward_fn(*node);
    }
  }
}

}  // namespace vf::ad
