#include "e2e/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "e2e/error.hpp"

namespace e2e::ad {

namespace {

void require_same_shape(Var a, Var b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": operand shapes differ, " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_rank(Var a, std::size_t rank, const char* op, const char* what) {
  if (a.shape().size() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) + ", got " +
                     shape_string(a.shape()));
  }
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  const auto bv = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return a.graph->push(std::move(out), {a, b}, [a = a.id, b = b.id](Graph& g, std::size_t self) {
    const auto gs = g.grad(self).data();
    for (std::size_t in : {a, b}) {
      if (!g.requires_grad(in)) continue;
      auto gi = g.grad(in).data();
      for (std::size_t i = 0; i < gs.size(); ++i) gi[i] += gs[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  const auto bv = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return a.graph->push(std::move(out), {a, b}, [a = a.id, b = b.id](Graph& g, std::size_t self) {
    const auto gs = g.grad(self).data();
    if (g.requires_grad(a)) {
      auto ga = g.grad(a).data();
      for (std::size_t i = 0; i < gs.size(); ++i) ga[i] += gs[i];
    }
    if (g.requires_grad(b)) {
      auto gb = g.grad(b).data();
      for (std::size_t i = 0; i < gs.size(); ++i) gb[i] -= gs[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  const auto bv = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return a.graph->push(std::move(out), {a, b}, [a = a.id, b = b.id](Graph& g, std::size_t self) {
    const auto gs = g.grad(self).data();
    const auto av = g.value(a).data();
    const auto bv = g.value(b).data();
    if (g.requires_grad(a)) {
      auto ga = g.grad(a).data();
      for (std::size_t i = 0; i < gs.size(); ++i) ga[i] += gs[i] * bv[i];
    }
    if (g.requires_grad(b)) {
      auto gb = g.grad(b).data();
      for (std::size_t i = 0; i < gs.size(); ++i) gb[i] += gs[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= s;
  return a.graph->push(std::move(out), {a}, [a = a.id, s](Graph& g, std::size_t self) {
    const auto gs = g.grad(self).data();
    auto ga = g.grad(a).data();
    for (std::size_t i = 0; i < gs.size(); ++i) ga[i] += s * gs[i];
  });
}

Var add_scalar(Var a, double s) {
  Tensor out = a.value();
  for (double& v : out.data()) v += s;
  return a.graph->push(std::move(out), {a}, [a = a.id](Graph& g, std::size_t self) {
    const auto gs = g.grad(self).data();
    auto ga = g.grad(a).data();
    for (std::size_t i = 0; i < gs.size(); ++i) ga[i] += gs[i];
  });
}

Var square(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= v;
  return a.graph->push(std::move(out), {a}, [a = a.id](Graph& g, std::size_t self) {
    const auto gs = g.grad(self).data();
    const auto av = g.value(a).data();
    auto ga = g.grad(a).data();
    for (std::size_t i = 0; i < gs.size(); ++i) ga[i] += 2.0 * av[i] * gs[i];
  });
}

Var relu(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return a.graph->push(std::move(out), {a}, [a = a.id](Graph& g, std::size_t self) {
    const auto gs = g.grad(self).data();
    const auto av = g.value(a).data();
    auto ga = g.grad(a).data();
    // Subgradient at exactly zero is taken as zero.
    for (std::size_t i = 0; i < gs.size(); ++i)
      if (av[i] > 0.0) ga[i] += gs[i];
  });
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = sigmoid_scalar(v);
  return a.graph->push(std::move(out), {a}, [a = a.id](Graph& g, std::size_t self) {
    const auto gs = g.grad(self).data();
    const auto y = g.value(self).data();
    auto ga = g.grad(a).data();
    for (std::size_t i = 0; i < gs.size(); ++i) ga[i] += gs[i] * y[i] * (1.0 - y[i]);
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.graph->push(Tensor::scalar(s), {a}, [a = a.id](Graph& g, std::size_t self) {
    const double gs = g.grad(self)[0];
    for (double& v : g.grad(a).data()) v += gs;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.graph->push(Tensor::scalar(s / n), {a}, [a = a.id, n](Graph& g, std::size_t self) {
    const double gs = g.grad(self)[0] / n;
    for (double& v : g.grad(a).data()) v += gs;
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.graph->push(std::move(out), {a}, [a = a.id](Graph& g, std::size_t self) {
    const auto gs = g.grad(self).data();
    auto ga = g.grad(a).data();
    for (std::size_t i = 0; i < gs.size(); ++i) ga[i] += gs[i];
  });
}

Var concat(Var a, Var b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != sb.size() || sa.empty() || !std::equal(sa.begin() + 1, sa.end(), sb.begin() + 1)) {
    throw ShapeError("concat: trailing axes differ, " + shape_string(sa) + " vs " + shape_string(sb));
  }
  Shape so = sa;
  so[0] += sb[0];
  std::vector<double> data;
  data.reserve(shape_size(so));
  data.insert(data.end(), a.value().vec().begin(), a.value().vec().end());
  data.insert(data.end(), b.value().vec().begin(), b.value().vec().end());
  const std::size_t na = a.value().size();
  return a.graph->push(Tensor(so, std::move(data)), {a, b}, [a = a.id, b = b.id, na](Graph& g, std::size_t self) {
    const auto gs = g.grad(self).data();
    if (g.requires_grad(a)) {
      auto ga = g.grad(a).data();
      for (std::size_t i = 0; i < na; ++i) ga[i] += gs[i];
    }
    if (g.requires_grad(b)) {
      auto gb = g.grad(b).data();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gs[na + i];
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  const Shape& sa = a.shape();
  if (sa.empty() || begin + count > sa[0]) {
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + "," + std::to_string(begin + count) +
                     ") exceed axis 0 of " + shape_string(sa));
  }
  Shape so = sa;
  so[0] = count;
  const std::size_t inner = shape_size(sa) / sa[0];
  const auto& src = a.value().vec();
  std::vector<double> data(src.begin() + static_cast<std::ptrdiff_t>(begin * inner),
                           src.begin() + static_cast<std::ptrdiff_t>((begin + count) * inner));
  const std::size_t off = begin * inner;
  return a.graph->push(Tensor(so, std::move(data)), {a}, [a = a.id, off](Graph& g, std::size_t self) {
    const auto gs = g.grad(self).data();
    auto ga = g.grad(a).data();
    for (std::size_t i = 0; i < gs.size(); ++i) ga[off + i] += gs[i];
  });
}

Var bias_add(Var input, Var bias) {
  require_rank(input, 3, "bias_add", "input");
  const std::size_t c = input.shape()[0];
  if (bias.shape() != Shape{c}) {
    throw ShapeError("bias_add: bias axis 0 must equal input channels " + std::to_string(c) + ", got " +
                     shape_string(bias.shape()));
  }
  const std::size_t hw = input.shape()[1] * input.shape()[2];
  Tensor out = input.value();
  auto o = out.data();
  const auto bv = bias.value().data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < hw; ++i) o[ch * hw + i] += bv[ch];
  return input.graph->push(std::move(out), {input, bias},
                           [x = input.id, b = bias.id, c, hw](Graph& g, std::size_t self) {
                             const auto gs = g.grad(self).data();
                             if (g.requires_grad(x)) {
                               auto gx = g.grad(x).data();
                               for (std::size_t i = 0; i < gs.size(); ++i) gx[i] += gs[i];
                             }
                             if (g.requires_grad(b)) {
                               auto gb = g.grad(b).data();
                               for (std::size_t ch = 0; ch < c; ++ch) {
                                 double s = 0.0;
                                 for (std::size_t i = 0; i < hw; ++i) s += gs[ch * hw + i];
                                 gb[ch] += s;
                               }
                             }
                           });
}

Var dense(Var input, Var weights, Var bias) {
  require_rank(input, 1, "dense", "input");
  require_rank(weights, 2, "dense", "weights");
  const std::size_t n = input.shape()[0];
  const std::size_t m = weights.shape()[0];
  if (weights.shape()[1] != n) {
    throw ShapeError("dense: weights axis 1 (" + std::to_string(weights.shape()[1]) + ") must equal input length " +
                     std::to_string(n));
  }
  if (bias.shape() != Shape{m}) {
    throw ShapeError("dense: bias axis 0 must equal weights axis 0 (" + std::to_string(m) + ")");
  }
  const auto x = input.value().data();
  const auto w = weights.value().data();
  Tensor out = bias.value();
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += w[i * n + j] * x[j];
    out[i] += s;
  }
  return input.graph->push(std::move(out), {input, weights, bias},
                           [x = input.id, w = weights.id, b = bias.id, m, n](Graph& g, std::size_t self) {
                             const auto gs = g.grad(self).data();
                             if (g.requires_grad(x)) {
                               const auto wv = g.value(w).data();
                               auto gx = g.grad(x).data();
                               for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t j = 0; j < n; ++j) gx[j] += wv[i * n + j] * gs[i];
                             }
                             if (g.requires_grad(w)) {
                               const auto xv = g.value(x).data();
                               auto gw = g.grad(w).data();
                               for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t j = 0; j < n; ++j) gw[i * n + j] += gs[i] * xv[j];
                             }
                             if (g.requires_grad(b)) {
                               auto gb = g.grad(b).data();
                               for (std::size_t i = 0; i < m; ++i) gb[i] += gs[i];
                             }
                           });
}

Var layer_norm(Var input, Var scale_p, Var offset_p, double eps) {
  if (!(eps > 0.0)) throw DomainError("layer_norm: eps must be positive");
  require_rank(input, 3, "layer_norm", "input");
  const std::size_t c = input.shape()[0];
  if (scale_p.shape() != Shape{c} || offset_p.shape() != Shape{c}) {
    throw ShapeError("layer_norm: scale/offset axis 0 must equal input channels " + std::to_string(c));
  }
  const std::size_t hw = input.shape()[1] * input.shape()[2];
  const std::size_t n = c * hw;
  const auto x = input.value().data();
  double mu = 0.0;
  for (double v : x) mu += v;
  mu /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  var /= static_cast<double>(n);
  const double inv_std = 1.0 / std::sqrt(var + eps);

  Tensor xhat(input.shape());
  auto xh = xhat.data();
  for (std::size_t i = 0; i < n; ++i) xh[i] = (x[i] - mu) * inv_std;
  Tensor out(input.shape());
  auto o = out.data();
  const auto sc = scale_p.value().data();
  const auto of = offset_p.value().data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < hw; ++i) o[ch * hw + i] = sc[ch] * xh[ch * hw + i] + of[ch];

  return input.graph->push(
      std::move(out), {input, scale_p, offset_p},
      [x = input.id, s = scale_p.id, b = offset_p.id, xhat = std::move(xhat), inv_std, c, hw](Graph& g,
                                                                                             std::size_t self) {
        const auto gs = g.grad(self).data();
        const auto xh = xhat.data();
        if (g.requires_grad(s)) {
          auto gsc = g.grad(s).data();
          for (std::size_t ch = 0; ch < c; ++ch) {
            double acc = 0.0;
            for (std::size_t i = 0; i < hw; ++i) acc += gs[ch * hw + i] * xh[ch * hw + i];
            gsc[ch] += acc;
          }
        }
        if (g.requires_grad(b)) {
          auto gb = g.grad(b).data();
          for (std::size_t ch = 0; ch < c; ++ch) {
            double acc = 0.0;
            for (std::size_t i = 0; i < hw; ++i) acc += gs[ch * hw + i];
            gb[ch] += acc;
          }
        }
        if (g.requires_grad(x)) {
          const auto sc = g.value(s).data();
          const std::size_t n = c * hw;
          double sum_d = 0.0;
          double sum_dx = 0.0;
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < hw; ++i) {
              const double d = gs[ch * hw + i] * sc[ch];
              sum_d += d;
              sum_dx += d * xh[ch * hw + i];
            }
          const double inv_n = 1.0 / static_cast<double>(n);
          auto gx = g.grad(x).data();
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < hw; ++i) {
              const std::size_t k = ch * hw + i;
              const double d = gs[k] * sc[ch];
              gx[k] += inv_std * (d - inv_n * sum_d - xh[k] * inv_n * sum_dx);
            }
        }
      });
}

Var global_avg_pool(Var input) {
  require_rank(input, 3, "global_avg_pool", "input");
  const std::size_t c = input.shape()[0];
  const std::size_t hw = input.shape()[1] * input.shape()[2];
  const auto x = input.value().data();
  Tensor out({c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += x[ch * hw + i];
    out[ch] = s / static_cast<double>(hw);
  }
  return input.graph->push(std::move(out), {input}, [x = input.id, c, hw](Graph& g, std::size_t self) {
    const auto gs = g.grad(self).data();
    auto gx = g.grad(x).data();
    const double inv = 1.0 / static_cast<double>(hw);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < hw; ++i) gx[ch * hw + i] += gs[ch] * inv;
  });
}

Var channel_scale(Var alpha, Var z) {
  require_rank(z, 3, "channel_scale", "z");
  const std::size_t c = z.shape()[0];
  if (alpha.shape() != Shape{c}) {
    throw ShapeError("channel_scale: alpha axis 0 must equal z channels " + std::to_string(c));
  }
  const std::size_t hw = z.shape()[1] * z.shape()[2];
  Tensor out = z.value();
  auto o = out.data();
  const auto a = alpha.value().data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < hw; ++i) o[ch * hw + i] *= a[ch];
  return z.graph->push(std::move(out), {alpha, z}, [a = alpha.id, z = z.id, c, hw](Graph& g, std::size_t self) {
    const auto gs = g.grad(self).data();
    if (g.requires_grad(a)) {
      const auto zv = g.value(z).data();
      auto ga = g.grad(a).data();
      for (std::size_t ch = 0; ch < c; ++ch) {
        double s = 0.0;
        for (std::size_t i = 0; i < hw; ++i) s += gs[ch * hw + i] * zv[ch * hw + i];
        ga[ch] += s;
      }
    }
    if (g.requires_grad(z)) {
      const auto av = g.value(a).data();
      auto gz = g.grad(z).data();
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < hw; ++i) gz[ch * hw + i] += gs[ch * hw + i] * av[ch];
    }
  });
}

Var bce_with_logits(Var logits, const Tensor& targets) {
  if (logits.shape() != targets.shape()) {
    throw ShapeError("bce_with_logits: logits " + shape_string(logits.shape()) + " vs targets " +
                     shape_string(targets.shape()));
  }
  const auto x = logits.value().data();
  const auto t = targets.data();
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    // softplus(x) - t*x, written to avoid overflow for large |x|
    s += std::max(x[i], 0.0) - t[i] * x[i] + std::log1p(std::exp(-std::abs(x[i])));
  }
  return logits.graph->push(Tensor::scalar(s / n), {logits}, [l = logits.id, targets, n](Graph& g, std::size_t self) {
    const double gs = g.grad(self)[0] / n;
    const auto x = g.value(l).data();
    const auto t = targets.data();
    auto gl = g.grad(l).data();
    for (std::size_t i = 0; i < x.size(); ++i) gl[i] += gs * (sigmoid_scalar(x[i]) - t[i]);
  });
}

Var linear_map(Var input, std::shared_ptr<const LinearOperator> op) {
  if (input.shape() != op->input_shape()) {
    throw ShapeError("linear_map: input " + shape_string(input.shape()) + " does not match operator domain " +
                     shape_string(op->input_shape()));
  }
  Tensor out(op->output_shape());
  op->apply(input.value().data(), out.data());
  return input.graph->push(std::move(out), {input}, [x = input.id, op = std::move(op)](Graph& g, std::size_t self) {
    Tensor tmp(op->input_shape());
    op->adjoint(g.grad(self).data(), tmp.data());
    auto gx = g.grad(x).data();
    const auto t = tmp.data();
    for (std::size_t i = 0; i < t.size(); ++i) gx[i] += t[i];
  });
}

Var normalize_points(Var points) {
  if (points.shape().size() != 2 || points.shape()[0] != 2) {
    throw ShapeError("normalize_points: expected complex points of shape [2xP], got " + shape_string(points.shape()));
  }
  const std::size_t p = points.shape()[1];
  const auto c = points.value().data();
  double m_re = 0.0, m_im = 0.0, pow = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    m_re += c[i];
    m_im += c[p + i];
  }
  m_re /= static_cast<double>(p);
  m_im /= static_cast<double>(p);
  for (std::size_t i = 0; i < p; ++i) {
    const double dr = c[i] - m_re;
    const double di = c[p + i] - m_im;
    pow += dr * dr + di * di;
  }
  pow /= static_cast<double>(p);
  if (!(pow > 1e-300)) throw DomainError("normalize_points: all points identical (zero variance)");
  const double s = std::sqrt(pow);
  Tensor out(points.shape());
  auto u = out.data();
  for (std::size_t i = 0; i < p; ++i) {
    u[i] = (c[i] - m_re) / s;
    u[p + i] = (c[p + i] - m_im) / s;
  }
  return points.graph->push(std::move(out), {points}, [x = points.id, p, s](Graph& g, std::size_t self) {
    const auto gs = g.grad(self).data();
    const auto u = g.value(self).data();
    double gu = 0.0;
    for (std::size_t i = 0; i < 2 * p; ++i) gu += gs[i] * u[i];
    std::vector<double> dd(2 * p);
    for (std::size_t i = 0; i < 2 * p; ++i) dd[i] = (gs[i] - gu * u[i] / static_cast<double>(p)) / s;
    auto gx = g.grad(x).data();
    for (std::size_t plane = 0; plane < 2; ++plane) {
      double m = 0.0;
      for (std::size_t i = 0; i < p; ++i) m += dd[plane * p + i];
      m /= static_cast<double>(p);
      for (std::size_t i = 0; i < p; ++i) gx[plane * p + i] += dd[plane * p + i] - m;
    }
  });
}

Var gather_points(Var points, const std::vector<std::size_t>& indices, Shape out_shape) {
  if (points.shape().size() != 2 || points.shape()[0] != 2) {
    throw ShapeError("gather_points: expected complex points of shape [2xP], got " + shape_string(points.shape()));
  }
  if (shape_size(out_shape) != indices.size()) {
    throw ShapeError("gather_points: output shape " + shape_string(out_shape) + " does not hold " +
                     std::to_string(indices.size()) + " indices");
  }
  const std::size_t p = points.shape()[1];
  const std::size_t n = indices.size();
  Shape full{2};
  full.insert(full.end(), out_shape.begin(), out_shape.end());
  Tensor out(full);
  const auto c = points.value().data();
  auto o = out.data();
  for (std::size_t k = 0; k < n; ++k) {
    if (indices[k] >= p) throw ContractError("gather_points: index out of range");
    o[k] = c[indices[k]];
    o[n + k] = c[p + indices[k]];
  }
  return points.graph->push(std::move(out), {points}, [x = points.id, indices, p, n](Graph& g, std::size_t self) {
    const auto gs = g.grad(self).data();
    auto gx = g.grad(x).data();
    for (std::size_t k = 0; k < n; ++k) {
      gx[indices[k]] += gs[k];
      gx[p + indices[k]] += gs[n + k];
    }
  });
}

Var abs2(Var complex) {
  const Shape& s = complex.shape();
  if (s.empty() || s[0] != 2) throw ShapeError("abs2: expected leading axis of length 2, got " + shape_string(s));
  Shape so(s.begin() + 1, s.end());
  const std::size_t n = shape_size(so);
  const auto z = complex.value().data();
  Tensor out(so);
  for (std::size_t i = 0; i < n; ++i) out[i] = z[i] * z[i] + z[n + i] * z[n + i];
  return complex.graph->push(std::move(out), {complex}, [x = complex.id, n](Graph& g, std::size_t self) {
    const auto gs = g.grad(self).data();
    const auto z = g.value(x).data();
    auto gx = g.grad(x).data();
    for (std::size_t i = 0; i < n; ++i) {
      gx[i] += 2.0 * z[i] * gs[i];
      gx[n + i] += 2.0 * z[n + i] * gs[i];
    }
  });
}

Var normalize_rows_by_mean(Var a) {
  require_rank(a, 2, "normalize_rows_by_mean", "input");
  const std::size_t r = a.shape()[0];
  const std::size_t n = a.shape()[1];
  const auto x = a.value().data();
  std::vector<double> means(r);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < r; ++i) {
    double m = 0.0;
    for (std::size_t j = 0; j < n; ++j) m += x[i * n + j];
    m /= static_cast<double>(n);
    if (!(m > 0.0)) throw DomainError("normalize_rows_by_mean: row " + std::to_string(i) + " has nonpositive mean");
    means[i] = m;
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] / m;
  }
  return a.graph->push(std::move(out), {a}, [x = a.id, r, n, means = std::move(means)](Graph& g, std::size_t self) {
    const auto gs = g.grad(self).data();
    const auto xv = g.value(x).data();
    auto gx = g.grad(x).data();
    for (std::size_t i = 0; i < r; ++i) {
      const double m = means[i];
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += gs[i * n + j] * xv[i * n + j];
      const double corr = dot / (m * m * static_cast<double>(n));
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += gs[i * n + j] / m - corr;
    }
  });
}

}  // namespace e2e::ad
