#include "e2e/channel/channel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <utility>

#include "e2e/error.hpp"
#include "e2e/phy/dft.hpp"

namespace e2e::channel {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kSinusoids = 32;

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct Tap {
  double delay;  // normalized to the RMS delay spread
  double power_db;
};

struct Table {
  std::vector<Tap> taps;
  double k_db = -1000.0;  // LOS share of the first tap
};

// Power-delay profiles of the standard TDL models, normalized delays.
const std::map<std::string, Table>& tables() {
  static const std::map<std::string, Table> t = {
      {"tdl-a",
       {{{0.0, -13.4},   {0.3819, 0.0},   {0.4025, -2.2},  {0.5868, -4.0},  {0.4610, -6.0},  {0.5375, -8.2},
         {0.6708, -9.9}, {0.5750, -10.5}, {0.7618, -7.5},  {1.5375, -15.9}, {1.8978, -6.6},  {2.2242, -16.7},
         {2.1718, -12.4}, {2.4942, -15.2}, {2.5119, -10.8}, {3.0582, -11.3}, {4.0810, -12.7}, {4.4579, -16.2},
         {4.5695, -18.3}, {4.7966, -18.9}, {5.0066, -16.6}, {5.3043, -19.9}, {9.6586, -29.7}}}},
      {"tdl-b",
       {{{0.0, 0.0},     {0.1072, -2.2},  {0.2155, -4.0},  {0.2095, -3.2},  {0.2870, -9.8},  {0.2986, -1.2},
         {0.3752, -3.4}, {0.5055, -5.2},  {0.3681, -7.6},  {0.3697, -3.0},  {0.5700, -8.9},  {0.5283, -9.0},
         {1.1021, -4.8}, {1.2756, -5.7},  {1.5474, -7.5},  {1.7842, -1.9},  {2.0169, -7.6},  {2.8294, -12.2},
         {3.0219, -9.8}, {3.6187, -11.4}, {4.1067, -14.9}, {4.2790, -9.2},  {4.7834, -11.3}}}},
      {"tdl-c",
       {{{0.0, -4.4},    {0.2099, -1.2},  {0.2219, -3.5},  {0.2329, -5.2},  {0.2176, -2.5},  {0.6366, 0.0},
         {0.6448, -2.2}, {0.6560, -3.9},  {0.6584, -7.4},  {0.7935, -7.1},  {0.8213, -10.7}, {0.9336, -11.1},
         {1.2285, -5.1}, {1.3083, -6.8},  {2.1704, -8.7},  {2.7105, -13.2}, {4.2589, -13.9}, {4.6003, -13.9},
         {5.4902, -15.8}, {5.6077, -17.1}, {6.3065, -16.0}, {6.6374, -15.7}, {7.0427, -21.6}, {8.6523, -22.8}}}},
      {"tdl-d",
       {{{0.0, -0.2},    {0.0, -13.5},    {0.035, -18.8},  {0.612, -21.0},  {1.363, -22.8},  {1.405, -17.9},
         {1.804, -20.1}, {2.596, -21.9},  {1.775, -22.9},  {4.042, -27.8},  {7.937, -23.6},  {9.424, -24.8},
         {9.708, -30.0}, {12.525, -27.7}},
        13.3}},
      {"tdl-e",
       {{{0.0, -0.03},   {0.0, -22.03},   {0.5133, -15.8}, {0.5440, -18.1}, {0.5630, -19.8}, {0.5440, -22.9},
         {0.7112, -22.4}, {1.9092, -18.6}, {1.9293, -20.8}, {1.9589, -22.6}, {2.6426, -22.3}, {3.7136, -25.6},
         {5.4524, -20.2}, {12.0034, -29.8}, {20.6519, -29.2}},
        22.0}},
  };
  return t;
}

}  // namespace

double sample_period(std::size_t subcarriers, double subcarrier_spacing) {
  return 1.0 / (static_cast<double>(subcarriers) * subcarrier_spacing);
}

double max_doppler(double speed_kmh, double carrier_hz) { return speed_kmh / 3.6 * carrier_hz / kSpeedOfLight; }

ChannelProfile preset(const std::string& name, double speed_kmh, double carrier_hz, double delay_spread,
                      double sample_period_s) {
  ChannelProfile p;
  p.name = name;
  p.speed_kmh = speed_kmh;
  p.carrier_hz = carrier_hz;
  if (name == "flat") return p;
  if (name == "awgn") {
    p.fading = false;
    return p;
  }
  const std::string table_name = name == "cdlc-like" ? "tdl-c" : name;
  const auto it = tables().find(table_name);
  if (it == tables().end()) throw ConfigError("unknown channel profile '" + name + "'");
  const Table& tab = it->second;

  std::map<std::size_t, double> bins;
  double total = 0.0;
  for (const Tap& t : tab.taps) {
    const double pw = std::pow(10.0, t.power_db / 10.0);
    const auto d = static_cast<std::size_t>(std::lround(t.delay * delay_spread / sample_period_s));
    bins[d] += pw;
    total += pw;
  }
  p.delays.clear();
  p.powers.clear();
  for (const auto& [d, pw] : bins) {
    p.delays.push_back(d);
    p.powers.push_back(pw / total);
  }
  if (tab.k_db > -100.0) {
    // the LOS ray is the first listed tap; everything else in its bin is scattered
    const double los = std::pow(10.0, tab.taps[0].power_db / 10.0) / total;
    p.rician_k = los / std::max(p.powers[0] - los, 1e-12);
  }
  return p;
}

void validate(const ChannelProfile& profile, std::size_t subcarriers) {
  if (profile.delays.empty() || profile.delays.size() != profile.powers.size()) {
    throw ConfigError("channel profile '" + profile.name + "': delays and powers must be non-empty and equal length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < profile.powers.size(); ++i) {
    if (profile.powers[i] < 0.0) throw ConfigError("channel profile '" + profile.name + "': negative tap power");
    if (profile.delays[i] >= subcarriers) throw ConfigError("channel profile '" + profile.name + "': tap delay exceeds N_c");
    sum += profile.powers[i];
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("channel profile '" + profile.name + "': tap powers must sum to 1");
  if (profile.speed_kmh < 0.0 || profile.rician_k < 0.0) throw ConfigError("channel profile '" + profile.name + "': negative speed or K");
}

ChannelRealization gen_channel(const ChannelProfile& profile, std::size_t samples, std::size_t antennas,
                               double sample_period_s, std::uint64_t seed) {
  ChannelRealization ch;
  ch.antennas = antennas;
  ch.samples = samples;
  ch.delays = profile.delays;
  const std::size_t nt = profile.delays.size();
  ch.taps.assign(antennas * samples * nt, cd{});
  const double wd = kTwoPi * max_doppler(profile.speed_kmh, profile.carrier_hz) * sample_period_s;
  std::mt19937_64 rng(seed);

  std::vector<double> freq(kSinusoids), phase(kSinusoids);
  for (std::size_t a = 0; a < antennas; ++a) {
    if (profile.correlated_antennas && a > 0) {
      std::copy_n(ch.taps.begin(), samples * nt, ch.taps.begin() + a * samples * nt);
      continue;
    }
    if (!profile.fading) {
      for (std::size_t t = 0; t < samples; ++t)
        for (std::size_t l = 0; l < nt; ++l) ch.tap(a, t, l) = std::sqrt(profile.powers[l]);
      continue;
    }
    for (std::size_t l = 0; l < nt; ++l) {
      double scattered = profile.powers[l];
      double los = 0.0;
      if (l == 0 && profile.rician_k > 0.0) {
        los = scattered * profile.rician_k / (profile.rician_k + 1.0);
        scattered -= los;
      }
      const double theta = kTwoPi * uniform01(rng);
      for (int n = 0; n < kSinusoids; ++n) {
        const double alpha = (kTwoPi * (n + 1) - std::numbers::pi + theta) / kSinusoids;
        freq[n] = wd * std::cos(alpha);
        phase[n] = kTwoPi * uniform01(rng);
      }
      const double los_freq = wd * std::cos(kTwoPi * uniform01(rng));
      const double los_phase = kTwoPi * uniform01(rng);
      const double amp = std::sqrt(scattered / kSinusoids);
      const double los_amp = std::sqrt(los);
      const std::size_t distinct = wd == 0.0 ? 1 : samples;
      for (std::size_t t = 0; t < distinct; ++t) {
        const double tt = static_cast<double>(t);
        cd h{};
        for (int n = 0; n < kSinusoids; ++n) h += std::polar(amp, freq[n] * tt + phase[n]);
        if (los_amp > 0.0) h += std::polar(los_amp, los_freq * tt + los_phase);
        ch.tap(a, t, l) = h;
      }
      for (std::size_t t = distinct; t < samples; ++t) ch.tap(a, t, l) = ch.tap(a, 0, l);
    }
  }
  return ch;
}

std::vector<std::vector<cd>> apply_channel(std::span<const cd> tx, const ChannelRealization& ch) {
  if (ch.samples < tx.size()) {
    throw ShapeError("apply_channel: channel covers " + std::to_string(ch.samples) + " samples, signal has " +
                     std::to_string(tx.size()));
  }
  std::vector<std::vector<cd>> out(ch.antennas, std::vector<cd>(tx.size()));
  for (std::size_t a = 0; a < ch.antennas; ++a) {
    for (std::size_t t = 0; t < tx.size(); ++t) {
      cd acc{};
      for (std::size_t l = 0; l < ch.num_taps(); ++l) {
        const std::size_t d = ch.delays[l];
        if (t >= d) acc += ch.tap(a, t, l) * tx[t - d];
      }
      out[a][t] = acc;
    }
  }
  return out;
}

phy::ResourceGrid freq_response(const ChannelRealization& ch, std::size_t symbols, std::size_t subcarriers,
                                std::size_t cp) {
  phy::ResourceGrid h(ch.antennas, symbols, subcarriers);
  const std::size_t len = subcarriers + cp;
  for (std::size_t a = 0; a < ch.antennas; ++a) {
    for (std::size_t s = 0; s < symbols; ++s) {
      const std::size_t t = std::min(s * len + cp + subcarriers / 2, ch.samples - 1);
      for (std::size_t k = 0; k < subcarriers; ++k) {
        cd acc{};
        for (std::size_t l = 0; l < ch.num_taps(); ++l) {
          const double ang = -kTwoPi * static_cast<double>((k * ch.delays[l]) % subcarriers) / static_cast<double>(subcarriers);
          acc += ch.tap(a, t, l) * std::polar(1.0, ang);
        }
        h.at(a, s, k) = acc;
      }
    }
  }
  return h;
}

double ebno_to_n0(double ebno_db, double rate, int order, double subset_power) {
  if (!(rate > 0.0) || rate > 1.0) throw DomainError("ebno_to_n0: code rate must be in (0, 1]");
  if (order < 1) throw DomainError("ebno_to_n0: order must be >= 1");
  if (!(subset_power > 0.0)) throw DomainError("ebno_to_n0: subset power must be positive");
  return subset_power / (rate * order * std::pow(10.0, ebno_db / 10.0));
}

void awgn(std::span<cd> signal, double n0, std::uint64_t seed) {
  if (n0 < 0.0) throw DomainError("awgn: negative noise power");
  if (n0 == 0.0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, std::sqrt(n0 / 2.0));
  for (cd& x : signal) {
    const double re = nd(rng);
    const double im = nd(rng);
    x += cd(re, im);
  }
}

LinkOperator::LinkOperator(ChannelRealization ch, std::size_t symbols, std::size_t subcarriers, std::size_t cp)
    : ch_(std::move(ch)), symbols_(symbols), subcarriers_(subcarriers), cp_(cp) {
  if (cp >= subcarriers) throw ConfigError("cyclic prefix must be shorter than N_c");
  if (ch_.samples < symbols * (subcarriers + cp)) throw ShapeError("LinkOperator: channel shorter than the slot");
}

void LinkOperator::apply(std::span<const double> in, std::span<double> out) const {
  const std::size_t n = symbols_ * subcarriers_;
  phy::ResourceGrid x(1, symbols_, subcarriers_);
  for (std::size_t i = 0; i < n; ++i) x.values[i] = cd(in[i], in[n + i]);
  const auto tx = phy::ofdm_modulate(x, cp_);
  const auto rx = apply_channel(tx, ch_);
  const auto y = phy::ofdm_demodulate(rx, symbols_, subcarriers_, cp_);
  const std::size_t m = y.values.size();
  for (std::size_t i = 0; i < m; ++i) {
    out[i] = y.values[i].real();
    out[m + i] = y.values[i].imag();
  }
}

void LinkOperator::adjoint(std::span<const double> in, std::span<double> out) const {
  const std::size_t nc = subcarriers_, len = subcarriers_ + cp_, total = symbols_ * len;
  const std::size_t m = ch_.antennas * symbols_ * nc;

  // demodulator adjoint: inverse DFT into the useful part, zeros on the CP
  std::vector<std::vector<cd>> rx(ch_.antennas, std::vector<cd>(total));
  std::vector<cd> row(nc);
  for (std::size_t a = 0; a < ch_.antennas; ++a) {
    for (std::size_t s = 0; s < symbols_; ++s) {
      const std::size_t base = (a * symbols_ + s) * nc;
      for (std::size_t k = 0; k < nc; ++k) row[k] = cd(in[base + k], in[m + base + k]);
      phy::idft(row, std::span<cd>(rx[a].data() + s * len + cp_, nc));
    }
  }

  std::vector<cd> tx(total);
  for (std::size_t a = 0; a < ch_.antennas; ++a) {
    for (std::size_t t = 0; t < total; ++t) {
      for (std::size_t l = 0; l < ch_.num_taps(); ++l) {
        const std::size_t src = t + ch_.delays[l];
        if (src < total) tx[t] += std::conj(ch_.tap(a, src, l)) * rx[a][src];
      }
    }
  }

  // modulator adjoint: fold the CP back onto the tail, then forward DFT
  const std::size_t n = symbols_ * nc;
  std::vector<cd> body(nc);
  for (std::size_t s = 0; s < symbols_; ++s) {
    const cd* sym = tx.data() + s * len;
    for (std::size_t k = 0; k < nc; ++k) body[k] = sym[cp_ + k];
    for (std::size_t c = 0; c < cp_; ++c) body[nc - cp_ + c] += sym[c];
    phy::dft(body, body);
    for (std::size_t k = 0; k < nc; ++k) {
      out[s * nc + k] = body[k].real();
      out[n + s * nc + k] = body[k].imag();
    }
  }
}

}  // namespace e2e::channel
