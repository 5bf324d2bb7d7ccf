#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "e2e/autodiff/tensor.hpp"

namespace e2e::constellation {

using cd = std::complex<double>;

/// Trainable geometric constellation of 2^max_order points.
///
/// Points are stored unnormalized, exactly as the optimizer sees them;
/// `normalized()` applies centering and unit-power scaling. Point index I
/// carries the label whose binary expansion (MSB first) is the bit group
/// b_0 ... b_{M_max-1}.
class Constellation {
 public:
  Constellation(int max_order, std::vector<cd> points);

  /// Gray-labeled QAM. Even bit positions (b_0, b_2, ...) select the
  /// in-phase level and odd positions the quadrature level, so every
  /// power-of-two subset keeps one point per quadrant. Odd orders give a
  /// rectangular grid with the extra bit on the in-phase axis.
  static Constellation qam(int max_order);

  int max_order() const { return max_order_; }
  std::size_t size() const { return points_.size(); }
  const std::vector<cd>& points() const { return points_; }

  std::vector<cd> normalized() const;

  /// {2, 2^M_max} real/imag planes, the layout used by the training graph.
  ad::Tensor to_tensor() const;
  static Constellation from_tensor(int max_order, const ad::Tensor& t);

 private:
  int max_order_;
  std::vector<cd> points_;
};

/// Subtracts the mean and divides by the standard deviation of the point
/// cloud. Throws DomainError when all points coincide.
std::vector<cd> normalize(std::span<const cd> points);

/// Order-M view of a normalized max-order constellation.
struct SubsetView {
  int order = 0;
  int max_order = 0;
  std::vector<std::size_t> indices;  // i * 2^(M_max - M), i = 0 .. 2^M - 1
  std::vector<cd> points;
  double power = 1.0;  // mean |c|^2 over the subset

  /// Bit m (0 = MSB) of the label of subset point i.
  int bit(std::size_t i, int m) const { return static_cast<int>((i >> (order - 1 - m)) & 1U); }
};

SubsetView subset(std::span<const cd> normalized, int max_order, int order);

/// Index into the max-order table of an M-bit group, zero-padded in the
/// least-significant positions.
std::size_t padded_index(unsigned group, int order, int max_order);

/// Plain-text table: one "index label re im" row per point with a header.
/// Values are written with 17 significant digits so import is lossless.
void write_table(std::ostream& os, const SubsetView& view);
SubsetView read_table(std::istream& is);

}  // namespace e2e::constellation
