#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "e2e/autodiff/ops.hpp"
#include "e2e/constellation/constellation.hpp"

namespace e2e::phy {

using cd = std::complex<double>;

/// Bits b_m at RE (s, k), stored plane-major: M x N_s x N_c.
struct BitGrid {
  int order = 0;
  std::size_t symbols = 0;
  std::size_t subcarriers = 0;
  std::vector<std::uint8_t> bits;

  std::uint8_t& at(int m, std::size_t s, std::size_t k) { return bits[(m * symbols + s) * subcarriers + k]; }
  std::uint8_t at(int m, std::size_t s, std::size_t k) const { return bits[(m * symbols + s) * subcarriers + k]; }
};

/// Complex grid over (antenna, OFDM symbol, subcarrier).
struct ResourceGrid {
  std::size_t antennas = 0;
  std::size_t symbols = 0;
  std::size_t subcarriers = 0;
  std::vector<cd> values;

  ResourceGrid() = default;
  ResourceGrid(std::size_t a, std::size_t s, std::size_t k) : antennas(a), symbols(s), subcarriers(k), values(a * s * k) {}

  cd& at(std::size_t a, std::size_t s, std::size_t k) { return values[(a * symbols + s) * subcarriers + k]; }
  const cd& at(std::size_t a, std::size_t s, std::size_t k) const { return values[(a * symbols + s) * subcarriers + k]; }

  /// {2, A, N_s, N_c} real/imag planes.
  ad::Tensor to_tensor() const;
  static ResourceGrid from_tensor(const ad::Tensor& t);
};

struct PilotPattern {
  std::vector<std::size_t> symbols;  // slot symbol indices carrying full-band pilots
  std::vector<cd> sequence;          // symbols.size() * N_c values, symbol-major

  bool empty() const { return symbols.empty(); }
  bool is_pilot_symbol(std::size_t s) const;
  std::size_t data_res(std::size_t n_symbols, std::size_t n_subcarriers) const {
    return (n_symbols - symbols.size()) * n_subcarriers;
  }
};

BitGrid generate_bits(int order, std::size_t symbols, std::size_t subcarriers, std::uint64_t seed);

/// Max-order table index of the bit group at every RE, row-major over (s, k).
std::vector<std::size_t> symbol_indices(const BitGrid& bits, int max_order);

/// Maps bits to the normalized constellation. `normalized` holds all
/// 2^M_max points; groups shorter than M_max are zero-padded at the LSB end.
ResourceGrid map_bits(const BitGrid& bits, std::span<const cd> normalized, int max_order);

/// Time signal of N_s symbols of (cp + N_c) samples each, concatenated.
std::vector<cd> ofdm_modulate(const ResourceGrid& grid, std::size_t cp);

/// One stream per receive antenna; each must hold N_s * (cp + N_c) samples.
ResourceGrid ofdm_demodulate(std::span<const std::vector<cd>> streams, std::size_t symbols, std::size_t subcarriers,
                             std::size_t cp);

/// L*N_c-point inverse DFT of a zero-padded spectrum. Bins k < N_c/2 keep
/// their position, the upper half-band moves to the top of the padded
/// spectrum. Scaled by 1/sqrt(L*N_c).
std::vector<cd> oversampled_ifft(std::span<const cd> row, std::size_t oversampling);

/// Peak-to-average power ratio in dB.
double papr_db(std::span<const cd> signal);

/// Limits |x| to clip_rate * rms, phase preserved.
std::vector<cd> clip(std::span<const cd> signal, double clip_rate);

/// Pilots on slot symbols `symbols` with a seeded unit-modulus QPSK sequence.
PilotPattern make_pilots(std::vector<std::size_t> symbols, std::size_t subcarriers, std::uint64_t seed);
PilotPattern default_pilots(std::size_t subcarriers, std::uint64_t seed);

/// Writes the pilot sequence onto antenna 0 of a transmit grid.
ResourceGrid insert_pilots(ResourceGrid grid, const PilotPattern& pattern);

/// Fraction of REs carrying data: (N_s - pilot symbols) / N_s times the
/// useful share N_c / (N_c + cp) of the samples.
double data_fraction(const PilotPattern& pattern, std::size_t symbols, std::size_t subcarriers, std::size_t cp);

/// Oversampled IFFT over every OFDM symbol of a {2, S, N_c} grid, giving
/// {2, S, L*N_c}. Used by the PAPR penalty in the training graph.
class OversampledIfftOperator final : public ad::LinearOperator {
 public:
  OversampledIfftOperator(std::size_t symbols, std::size_t subcarriers, std::size_t oversampling);
  ad::Shape input_shape() const override { return {2, symbols_, subcarriers_}; }
  ad::Shape output_shape() const override { return {2, symbols_, oversampling_ * subcarriers_}; }
  void apply(std::span<const double> in, std::span<double> out) const override;
  void adjoint(std::span<const double> in, std::span<double> out) const override;

 private:
  std::size_t symbols_, subcarriers_, oversampling_;
};

}  // namespace e2e::phy
