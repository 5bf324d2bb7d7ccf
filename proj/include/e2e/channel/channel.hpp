#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "e2e/autodiff/ops.hpp"
#include "e2e/phy/frontend.hpp"

namespace e2e::channel {

using cd = std::complex<double>;

inline constexpr double kSpeedOfLight = 3.0e8;

struct ChannelProfile {
  std::string name = "flat";
  std::vector<std::size_t> delays{0};  // samples
  std::vector<double> powers{1.0};     // linear, sum 1
  double rician_k = 0.0;               // LOS to scattered power ratio of the first tap
  double speed_kmh = 0.0;
  double carrier_hz = 3.5e9;
  bool correlated_antennas = false;    // all antennas share one realization
  bool fading = true;                  // false: fixed real taps sqrt(power)
};

/// Sample period 1/(N_c * subcarrier spacing).
double sample_period(std::size_t subcarriers, double subcarrier_spacing);

double max_doppler(double speed_kmh, double carrier_hz);

/// Named power-delay profiles: awgn (static unit tap), flat, tdl-a ... tdl-e, cdlc-like. Normalized
/// delays are scaled to `delay_spread` seconds and rounded to whole samples;
/// taps landing on the same sample are merged.
ChannelProfile preset(const std::string& name, double speed_kmh, double carrier_hz, double delay_spread,
                      double sample_period_s);

/// Time-varying taps h[a][t][l] over `samples` time instants.
struct ChannelRealization {
  std::size_t antennas = 0;
  std::size_t samples = 0;
  std::vector<std::size_t> delays;
  std::vector<cd> taps;

  std::size_t num_taps() const { return delays.size(); }
  const cd& tap(std::size_t a, std::size_t t, std::size_t l) const { return taps[(a * samples + t) * delays.size() + l]; }
  cd& tap(std::size_t a, std::size_t t, std::size_t l) { return taps[(a * samples + t) * delays.size() + l]; }
};

void validate(const ChannelProfile& profile, std::size_t subcarriers);

/// Sum-of-sinusoids Rayleigh (or Rician on the first tap) fading with a
/// Jakes Doppler spectrum.
ChannelRealization gen_channel(const ChannelProfile& profile, std::size_t samples, std::size_t antennas,
                               double sample_period_s, std::uint64_t seed);

/// y_a[t] = sum_l h[a][t][l] x[t - d_l]. Output keeps the input length.
std::vector<std::vector<cd>> apply_channel(std::span<const cd> tx, const ChannelRealization& ch);

/// Per-RE response sum_l h[a][t_s][l] exp(-j 2 pi k d_l / N_c), with t_s the
/// midpoint of symbol s's useful part.
phy::ResourceGrid freq_response(const ChannelRealization& ch, std::size_t symbols, std::size_t subcarriers,
                                std::size_t cp);

double ebno_to_n0(double ebno_db, double rate, int order, double subset_power);

void awgn(std::span<cd> signal, double n0, std::uint64_t seed);

/// Noiseless CP-OFDM link as a linear map: {2, N_s, N_c} transmit grid to
/// {2, N_r, N_s, N_c} received grid. The adjoint makes the channel a
/// differentiable layer between mapper and receiver.
class LinkOperator final : public ad::LinearOperator {
 public:
  LinkOperator(ChannelRealization ch, std::size_t symbols, std::size_t subcarriers, std::size_t cp);
  ad::Shape input_shape() const override { return {2, symbols_, subcarriers_}; }
  ad::Shape output_shape() const override { return {2, ch_.antennas, symbols_, subcarriers_}; }
  void apply(std::span<const double> in, std::span<double> out) const override;
  void adjoint(std::span<const double> in, std::span<double> out) const override;

 private:
  ChannelRealization ch_;
  std::size_t symbols_, subcarriers_, cp_;
};

}  // namespace e2e::channel
