#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "e2e/constellation/constellation.hpp"
#include "e2e/phy/frontend.hpp"

namespace e2e::baseline {

using cd = std::complex<double>;

inline constexpr double kLlrClip = 40.0;

/// y / x at the pilot REs: {N_r, pilot symbols, N_c}, pilot symbols in
/// pattern order.
phy::ResourceGrid ls_estimate(const phy::ResourceGrid& y, const phy::PilotPattern& pilots);

/// Linear interpolation in time between pilot symbols, constant
/// extrapolation beyond the first and last one.
phy::ResourceGrid interpolate(const phy::ResourceGrid& estimates, const phy::PilotPattern& pilots, std::size_t symbols);

/// Per-RE LMMSE combining over the receive antennas. x_hat = g x + noise of
/// variance nu, with g = |h|^2 / (|h|^2 + N0/Es) and
/// nu = N0 |h|^2 / (|h|^2 + N0/Es)^2.
struct Equalized {
  std::vector<cd> x;
  std::vector<double> gain;
  std::vector<double> nu;
};

Equalized lmmse_equalize(const phy::ResourceGrid& y, const phy::ResourceGrid& h, double n0, double es = 1.0);

/// Exact bitwise LLRs log P(b=1)/P(b=0) under x_hat ~ CN(g c, nu), clipped
/// to +-kLlrClip. Output is RE-major: llr[re * M + m].
std::vector<double> gaussian_llr(std::span<const cd> x_hat, std::span<const double> gain, std::span<const double> nu,
                                 const constellation::SubsetView& points);

/// Posterior probability of every subset point for one observation.
std::vector<double> posteriors(cd x_hat, double gain, double nu, const constellation::SubsetView& points);

}  // namespace e2e::baseline
