#pragma once

#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

#include "e2e/autodiff/graph.hpp"

namespace e2e::ad {

struct Dilation {
  std::size_t h = 1;
  std::size_t w = 1;
};

/// Real linear map with an explicit adjoint. Complex operators act on the
/// {2, ...} real/imaginary plane layout; the adjoint is then the real
/// transpose, which coincides with the complex Hermitian adjoint.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual Shape input_shape() const = 0;
  virtual Shape output_shape() const = 0;
  virtual void apply(std::span<const double> in, std::span<double> out) const = 0;
  virtual void adjoint(std::span<const double> in, std::span<double> out) const = 0;
};

// Elementwise arithmetic (shapes must match exactly; no broadcasting).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var square(Var a);
Var relu(Var a);
Var sigmoid(Var a);

// Reductions to a {1} scalar.
Var sum(Var a);
Var mean(Var a);

Var reshape(Var a, Shape shape);
/// Concatenates along axis 0; trailing dimensions must agree.
Var concat(Var a, Var b);
/// Rows [begin, begin+count) along axis 0.
Var slice_rows(Var a, std::size_t begin, std::size_t count);

/// "Same" zero-padded cross-correlation: input {C_in,H,W}, kernels
/// {C_out,C_in,Kh,Kw} -> {C_out,H,W}.
Var conv2d(Var input, Var kernels, Dilation dilation = {});
/// Grouped reduction: input {C,H,W}, kernels {C/g, g, K, K} -> {C/g,H,W};
/// output channel o sums input channels [o*g, (o+1)*g).
Var depthwise_conv2d(Var input, Var kernels, Dilation dilation = {});
/// Per-pixel channel mixing: kernels {C_out,C_in,1,1}.
Var pointwise_conv2d(Var input, Var kernels);
/// Adds bias[c] to every element of channel c of {C,H,W}.
Var bias_add(Var input, Var bias);

/// weights {M,N} * input {N} + bias {M}.
Var dense(Var input, Var weights, Var bias);

/// Normalizes {C,H,W} jointly over all axes, then applies per-channel
/// scale and offset.
Var layer_norm(Var input, Var scale, Var offset, double eps);

/// Mean over the spatial axes of {C,H,W} -> {C}.
Var global_avg_pool(Var input);
/// alpha {C} times each channel of z {C,H,W}.
Var channel_scale(Var alpha, Var z);

/// Mean binary cross-entropy with logits against fixed 0/1 targets.
Var bce_with_logits(Var logits, const Tensor& targets);

Var linear_map(Var input, std::shared_ptr<const LinearOperator> op);

/// Centers and scales complex points {2,P} to zero mean, unit mean power.
Var normalize_points(Var points);
/// Picks complex points {2,P} at `indices`; result shape {2, out_shape...}.
Var gather_points(Var points, const std::vector<std::size_t>& indices, Shape out_shape);
/// |z|^2 of a complex tensor {2, ...} -> {...}.
Var abs2(Var complex);
/// Divides each row of {R,N} by that row's mean.
Var normalize_rows_by_mean(Var a);

}  // namespace e2e::ad
