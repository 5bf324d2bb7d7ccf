// Convolutions lowered to im2col + GEMM (Eigen). Column buffers are rebuilt
// during backward instead of being cached to keep peak memory per graph low.

#include <Eigen/Core>
#include <algorithm>
#include <string>

#include "e2e/autodiff/ops.hpp"
#include "e2e/error.hpp"

namespace e2e::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;

struct ConvGeometry {
  std::size_t c_in, h, w, kh, kw, dh, dw;
  std::size_t pad_top, pad_left;

  std::size_t rows() const { return c_in * kh * kw; }
  std::size_t cols() const { return h * w; }
};

ConvGeometry make_geometry(std::size_t c_in, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
                           Dilation d) {
  if (d.h == 0 || d.w == 0) throw ConfigError("conv2d: dilation must be >= 1");
  if (kh == 0 || kw == 0) throw ShapeError("conv2d: kernel spatial axes must be nonzero");
  const std::size_t eh = (kh - 1) * d.h + 1;
  const std::size_t ew = (kw - 1) * d.w + 1;
  return ConvGeometry{c_in, h, w, kh, kw, d.h, d.w, (eh - 1) / 2, (ew - 1) / 2};
}

// cols[(ci*kh + i)*kw + j][y*w + x] = input[ci][y - pad_top + i*dh][x - pad_left + j*dw]
void im2col(const ConvGeometry& g, const double* in, double* cols) {
  const auto H = static_cast<std::ptrdiff_t>(g.h);
  const auto W = static_cast<std::ptrdiff_t>(g.w);
  std::size_t row = 0;
  for (std::size_t ci = 0; ci < g.c_in; ++ci) {
    const double* plane = in + ci * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(i * g.dh) - static_cast<std::ptrdiff_t>(g.pad_top);
      for (std::size_t j = 0; j < g.kw; ++j, ++row) {
        const std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(j * g.dw) - static_cast<std::ptrdiff_t>(g.pad_left);
        double* dst = cols + row * g.h * g.w;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -ox);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - ox);
        for (std::ptrdiff_t y = 0; y < H; ++y) {
          double* d = dst + y * W;
          const std::ptrdiff_t sy = y + oy;
          if (sy < 0 || sy >= H || x0 >= x1) {
            std::fill(d, d + W, 0.0);
            continue;
          }
          const double* s = plane + sy * W;
          for (std::ptrdiff_t x = 0; x < x0; ++x) d[x] = 0.0;
          for (std::ptrdiff_t x = x0; x < x1; ++x) d[x] = s[x + ox];
          for (std::ptrdiff_t x = std::max(x1, x0); x < W; ++x) d[x] = 0.0;
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* cols, double* out) {
  const auto H = static_cast<std::ptrdiff_t>(g.h);
  const auto W = static_cast<std::ptrdiff_t>(g.w);
  std::size_t row = 0;
  for (std::size_t ci = 0; ci < g.c_in; ++ci) {
    double* plane = out + ci * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(i * g.dh) - static_cast<std::ptrdiff_t>(g.pad_top);
      for (std::size_t j = 0; j < g.kw; ++j, ++row) {
        const std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(j * g.dw) - static_cast<std::ptrdiff_t>(g.pad_left);
        const double* src = cols + row * g.h * g.w;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -ox);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - ox);
        for (std::ptrdiff_t y = 0; y < H; ++y) {
          const std::ptrdiff_t sy = y + oy;
          if (sy < 0 || sy >= H) continue;
          const double* s = src + y * W;
          double* d = plane + sy * W;
          for (std::ptrdiff_t x = x0; x < x1; ++x) d[x + ox] += s[x];
        }
      }
    }
  }
}

void check_input(Var input, const char* op) {
  if (input.shape().size() != 3) {
    throw ShapeError(std::string(op) + ": input must be [C x H x W], got " + shape_string(input.shape()));
  }
}

}  // namespace

Var conv2d(Var input, Var kernels, Dilation dilation) {
  check_input(input, "conv2d");
  const Shape& ks = kernels.shape();
  if (ks.size() != 4) throw ShapeError("conv2d: kernels must be [C_out x C_in x Kh x Kw], got " + shape_string(ks));
  const std::size_t c_in = input.shape()[0];
  if (ks[1] != c_in) {
    throw ShapeError("conv2d: kernels axis 1 (C_in=" + std::to_string(ks[1]) + ") does not match input axis 0 (" +
                     std::to_string(c_in) + ")");
  }
  const std::size_t c_out = ks[0];
  const ConvGeometry geo = make_geometry(c_in, input.shape()[1], input.shape()[2], ks[2], ks[3], dilation);

  std::vector<double> cols(geo.rows() * geo.cols());
  im2col(geo, input.value().data().data(), cols.data());
  Tensor out({c_out, geo.h, geo.w});
  MapMat(out.data().data(), static_cast<Eigen::Index>(c_out), static_cast<Eigen::Index>(geo.cols())).noalias() =
      MapConstMat(kernels.value().data().data(), static_cast<Eigen::Index>(c_out),
                  static_cast<Eigen::Index>(geo.rows())) *
      MapConstMat(cols.data(), static_cast<Eigen::Index>(geo.rows()), static_cast<Eigen::Index>(geo.cols()));

  return input.graph->push(
      std::move(out), {input, kernels}, [x = input.id, k = kernels.id, geo, c_out](Graph& g, std::size_t self) {
        const auto R = static_cast<Eigen::Index>(geo.rows());
        const auto N = static_cast<Eigen::Index>(geo.cols());
        const auto C = static_cast<Eigen::Index>(c_out);
        MapConstMat dout(g.grad(self).data().data(), C, N);
        if (g.requires_grad(k)) {
          std::vector<double> cols(geo.rows() * geo.cols());
          im2col(geo, g.value(x).data().data(), cols.data());
          MapMat(g.grad(k).data().data(), C, R).noalias() += dout * MapConstMat(cols.data(), R, N).transpose();
        }
        if (g.requires_grad(x)) {
          std::vector<double> dcols(geo.rows() * geo.cols());
          MapMat(dcols.data(), R, N).noalias() = MapConstMat(g.value(k).data().data(), C, R).transpose() * dout;
          col2im_add(geo, dcols.data(), g.grad(x).data().data());
        }
      });
}

Var depthwise_conv2d(Var input, Var kernels, Dilation dilation) {
  check_input(input, "depthwise_conv2d");
  const Shape& ks = kernels.shape();
  if (ks.size() != 4) {
    throw ShapeError("depthwise_conv2d: kernels must be [C/g x g x K x K], got " + shape_string(ks));
  }
  const std::size_t c = input.shape()[0];
  const std::size_t groups = ks[0];
  const std::size_t gamma = ks[1];
  if (gamma == 0 || c % gamma != 0) {
    throw ConfigError("depthwise_conv2d: channels " + std::to_string(c) + " not divisible by reduction ratio " +
                      std::to_string(gamma));
  }
  if (groups * gamma != c) {
    throw ShapeError("depthwise_conv2d: kernels axis 0 (" + std::to_string(groups) + ") must equal C/g (" +
                     std::to_string(c / gamma) + ")");
  }
  const ConvGeometry geo = make_geometry(c, input.shape()[1], input.shape()[2], ks[2], ks[3], dilation);
  const std::size_t per_group = gamma * geo.kh * geo.kw;

  std::vector<double> cols(geo.rows() * geo.cols());
  im2col(geo, input.value().data().data(), cols.data());
  Tensor out({groups, geo.h, geo.w});
  const auto N = static_cast<Eigen::Index>(geo.cols());
  const auto P = static_cast<Eigen::Index>(per_group);
  for (std::size_t o = 0; o < groups; ++o) {
    Eigen::Map<const Eigen::RowVectorXd> krow(kernels.value().data().data() + o * per_group, P);
    Eigen::Map<Eigen::RowVectorXd>(out.data().data() + o * geo.cols(), N).noalias() =
        krow * MapConstMat(cols.data() + o * per_group * geo.cols(), P, N);
  }

  return input.graph->push(std::move(out), {input, kernels},
                           [x = input.id, k = kernels.id, geo, groups, per_group](Graph& g, std::size_t self) {
                             const auto N = static_cast<Eigen::Index>(geo.cols());
                             const auto P = static_cast<Eigen::Index>(per_group);
                             const double* dout = g.grad(self).data().data();
                             std::vector<double> cols;
                             if (g.requires_grad(k)) {
                               cols.resize(geo.rows() * geo.cols());
                               im2col(geo, g.value(x).data().data(), cols.data());
                             }
                             std::vector<double> dcols;
                             if (g.requires_grad(x)) dcols.assign(geo.rows() * geo.cols(), 0.0);
                             for (std::size_t o = 0; o < groups; ++o) {
                               Eigen::Map<const Eigen::RowVectorXd> d(dout + o * geo.cols(), N);
                               if (g.requires_grad(k)) {
                                 Eigen::Map<Eigen::RowVectorXd>(g.grad(k).data().data() + o * per_group, P).noalias() +=
                                     d * MapConstMat(cols.data() + o * per_group * geo.cols(), P, N).transpose();
                               }
                               if (g.requires_grad(x)) {
                                 Eigen::Map<const Eigen::VectorXd> kv(g.value(k).data().data() + o * per_group, P);
                                 MapMat(dcols.data() + o * per_group * geo.cols(), P, N).noalias() = kv * d;
                               }
                             }
                             if (g.requires_grad(x)) col2im_add(geo, dcols.data(), g.grad(x).data().data());
                           });
}

Var pointwise_conv2d(Var input, Var kernels) {
  check_input(input, "pointwise_conv2d");
  const Shape& ks = kernels.shape();
  if (ks.size() != 4 || ks[2] != 1 || ks[3] != 1) {
    throw ShapeError("pointwise_conv2d: kernels must be [C_out x C_in x 1 x 1], got " + shape_string(ks));
  }
  const std::size_t c_in = input.shape()[0];
  if (ks[1] != c_in) {
    throw ShapeError("pointwise_conv2d: kernels axis 1 (C_in=" + std::to_string(ks[1]) +
                     ") does not match input axis 0 (" + std::to_string(c_in) + ")");
  }
  const std::size_t c_out = ks[0];
  const std::size_t hw = input.shape()[1] * input.shape()[2];
  const auto Ci = static_cast<Eigen::Index>(c_in);
  const auto Co = static_cast<Eigen::Index>(c_out);
  const auto N = static_cast<Eigen::Index>(hw);
  Tensor out({c_out, input.shape()[1], input.shape()[2]});
  MapMat(out.data().data(), Co, N).noalias() =
      MapConstMat(kernels.value().data().data(), Co, Ci) * MapConstMat(input.value().data().data(), Ci, N);
  return input.graph->push(std::move(out), {input, kernels},
                           [x = input.id, k = kernels.id, Ci, Co, N](Graph& g, std::size_t self) {
                             MapConstMat dout(g.grad(self).data().data(), Co, N);
                             if (g.requires_grad(k)) {
                               MapMat(g.grad(k).data().data(), Co, Ci).noalias() +=
                                   dout * MapConstMat(g.value(x).data().data(), Ci, N).transpose();
                             }
                             if (g.requires_grad(x)) {
                               MapMat(g.grad(x).data().data(), Ci, N).noalias() +=
                                   MapConstMat(g.value(k).data().data(), Co, Ci).transpose() * dout;
                             }
                           });
}

}  // namespace e2e::ad
