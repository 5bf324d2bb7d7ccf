#pragma once

#include <complex>
#include <span>

namespace e2e::phy {

using cd = std::complex<double>;

/// Unitary DFT (scaled by 1/sqrt(n)). `in` and `out` must have equal length
/// and may alias. Plans are cached per (length, direction) and shared
/// across threads.
void dft(std::span<const cd> in, std::span<cd> out);
void idft(std::span<const cd> in, std::span<cd> out);

}  // namespace e2e::phy
