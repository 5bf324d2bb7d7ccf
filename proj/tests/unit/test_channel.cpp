#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "e2e/channel/channel.hpp"
#include "e2e/error.hpp"
#include "e2e/phy/frontend.hpp"

using namespace e2e;
using channel::cd;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTs = 1.0 / (72.0 * 30e3);

channel::ChannelRealization fixed_taps(std::vector<std::size_t> delays, std::vector<cd> taps, std::size_t samples) {
  channel::ChannelRealization ch;
  ch.antennas = 1;
  ch.samples = samples;
  ch.delays = std::move(delays);
  for (std::size_t t = 0; t < samples; ++t)
    for (const cd& h : taps) ch.taps.push_back(h);
  return ch;
}

// Bessel J0 by its integral representation, independent of the simulator.
double bessel_j0(double x) {
  const int n = 4000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += std::cos(x * std::sin(kPi * (i + 0.5) / n));
  return acc / n;
}

}  // namespace

TEST_CASE("doppler and sampling constants") {
  CHECK(std::abs(channel::max_doppler(120.0, 3.5e9) - 388.9) < 0.05);
  CHECK(std::abs(channel::sample_period(72, 30e3) - kTs) < 1e-20);
}

TEST_CASE("profile presets are valid") {
  for (const char* name : {"awgn", "flat", "tdl-a", "tdl-b", "tdl-c", "tdl-d", "tdl-e", "cdlc-like"}) {
    const auto p = channel::preset(name, 30.0, 3.5e9, 100e-9, kTs);
    CHECK_NOTHROW(channel::validate(p, 72));
    CHECK(p.delays.front() == 0);
  }
  CHECK(channel::preset("tdl-d", 0, 3.5e9, 100e-9, kTs).rician_k > 1.0);
  CHECK(channel::preset("tdl-a", 0, 3.5e9, 100e-9, kTs).rician_k == 0.0);
  CHECK_THROWS_AS(channel::preset("nope", 0, 3.5e9, 100e-9, kTs), ConfigError);
  channel::ChannelProfile bad;
  bad.powers = {0.5};
  CHECK_THROWS_AS(channel::validate(bad, 72), ConfigError);
}

TEST_CASE("awgn profile is a unit tap") {
  const auto ch = channel::gen_channel(channel::preset("awgn", 120.0, 3.5e9, 100e-9, kTs), 50, 2, kTs, 3);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t t = 0; t < 50; ++t) CHECK(ch.tap(a, t, 0) == channel::cd(1.0, 0.0));
}

TEST_CASE("static channel is constant in time") {
  const auto p = channel::preset("tdl-c", 0.0, 3.5e9, 100e-9, kTs);
  const auto ch = channel::gen_channel(p, 500, 2, kTs, 7);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t t = 0; t < 500; ++t)
      for (std::size_t l = 0; l < ch.num_taps(); ++l) CHECK(ch.tap(a, t, l) == ch.tap(a, 0, l));
  const auto again = channel::gen_channel(p, 500, 2, kTs, 7);
  CHECK(again.taps == ch.taps);
}

TEST_CASE("rayleigh tap power over many draws") {
  channel::ChannelProfile p;
  double acc = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) acc += std::norm(channel::gen_channel(p, 1, 1, kTs, 1000 + i).tap(0, 0, 0));
  CHECK(std::abs(acc / draws - 1.0) < 0.02);
}

TEST_CASE("tap autocorrelation follows J0") {
  channel::ChannelProfile p;
  p.speed_kmh = 120.0;
  const double fd = channel::max_doppler(120.0, 3.5e9);
  // a longer sample period so the lags span several Doppler cycles
  const double ts = 1e-4;
  const std::size_t n = 100000;
  const std::size_t reals = 20;
  for (std::size_t lag : {0, 3, 7, 12, 20}) {
    double corr = 0.0;
    for (std::size_t r = 0; r < reals; ++r) {
      const auto ch = channel::gen_channel(p, n, 1, ts, 77 + r);
      cd acc{};
      for (std::size_t t = 0; t + lag < n; ++t) acc += ch.tap(0, t + lag, 0) * std::conj(ch.tap(0, t, 0));
      double pw = 0.0;
      for (std::size_t t = 0; t < n; ++t) pw += std::norm(ch.tap(0, t, 0));
      corr += (acc / static_cast<double>(n - lag)).real() / (pw / n);
    }
    corr /= reals;
    const double j0 = bessel_j0(2.0 * kPi * fd * lag * ts);
    CHECK(std::abs(corr - j0) < 0.05);
  }
}

TEST_CASE("apply_channel basic taps") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  std::vector<cd> x(50);
  for (cd& v : x) v = cd(nd(rng), nd(rng));
  const auto id = channel::apply_channel(x, fixed_taps({0}, {1.0}, 50));
  CHECK(id[0] == x);
  const auto rot = channel::apply_channel(x, fixed_taps({0}, {cd(0, 1)}, 50));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(rot[0][i] - cd(0, 1) * x[i]) < 1e-15);
  CHECK_THROWS_AS(channel::apply_channel(x, fixed_taps({0}, {1.0}, 10)), ShapeError);
}

TEST_CASE("frequency response shapes") {
  const auto one = channel::freq_response(fixed_taps({0}, {cd(0.3, -0.2)}, 14 * 72), 14, 72, 0);
  for (const cd& h : one.values) CHECK(std::abs(h - cd(0.3, -0.2)) < 1e-15);

  const std::size_t d = 3;
  const auto ramp = channel::freq_response(fixed_taps({d}, {1.0}, 14 * 72), 14, 72, 0);
  for (std::size_t k = 0; k < 72; ++k) {
    CHECK(std::abs(std::abs(ramp.at(0, 0, k)) - 1.0) < 1e-12);
    CHECK(std::abs(ramp.at(0, 0, k) - std::polar(1.0, -2.0 * kPi * k * d / 72.0)) < 1e-12);
  }

  const auto two = channel::freq_response(fixed_taps({0, 8}, {1.0, 1.0}, 14 * 72), 14, 72, 0);
  for (std::size_t k = 0; k < 72; ++k) {
    const double ref = std::abs(1.0 + std::polar(1.0, -2.0 * kPi * k * 8 / 72.0));
    CHECK(std::abs(std::abs(two.at(0, 3, k)) - ref) < 1e-12);
  }
  // nulls repeat every 72/8 = 9 subcarriers, the first one between k = 4 and 5
  for (std::size_t k = 0; k + 9 < 72; ++k) CHECK(std::abs(std::abs(two.at(0, 0, k)) - std::abs(two.at(0, 0, k + 9))) < 1e-12);
  CHECK(std::abs(two.at(0, 0, 4)) < 0.35);
  CHECK(std::abs(two.at(0, 0, 0)) > 1.99);
}

TEST_CASE("cyclic prefix longer than the delay spread gives H times X") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  phy::ResourceGrid x(1, 14, 72);
  for (cd& v : x.values) v = cd(nd(rng), nd(rng));
  const std::size_t cp = 6;
  const auto p = channel::preset("tdl-a", 0.0, 3.5e9, 100e-9, kTs);
  const auto ch = channel::gen_channel(p, 14 * 78, 2, kTs, 9);
  const auto y = phy::ofdm_demodulate(channel::apply_channel(phy::ofdm_modulate(x, cp), ch), 14, 72, cp);
  const auto h = channel::freq_response(ch, 14, 72, cp);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t s = 1; s < 14; ++s)
      for (std::size_t k = 0; k < 72; ++k) CHECK(std::abs(y.at(a, s, k) - h.at(a, s, k) * x.at(0, s, k)) < 1e-9);
}

TEST_CASE("noise bookkeeping") {
  CHECK(std::abs(channel::ebno_to_n0(0.0, 0.5, 2, 1.0) - 1.0) < 1e-15);
  CHECK(std::abs(channel::ebno_to_n0(10.0 * std::log10(2.0), 0.5, 2, 1.0) - 0.5) < 1e-12);
  CHECK(std::abs(channel::ebno_to_n0(4.0, 0.5, 2, 1.3) / channel::ebno_to_n0(4.0, 0.5, 2, 1.0) - 1.3) < 1e-12);
  CHECK_THROWS_AS(channel::ebno_to_n0(0.0, 0.0, 2, 1.0), DomainError);
  CHECK_THROWS_AS(channel::ebno_to_n0(0.0, 0.5, 0, 1.0), DomainError);
  CHECK_THROWS_AS(channel::ebno_to_n0(0.0, 0.5, 2, -1.0), DomainError);

  std::vector<cd> z(1000000);
  channel::awgn(z, 0.37, 5);
  double var = 0.0, re = 0.0;
  for (const cd& v : z) {
    var += std::norm(v);
    re += v.real() * v.real();
  }
  var /= z.size();
  CHECK(std::abs(var / 0.37 - 1.0) < 0.01);
  CHECK(std::abs(re / z.size() / 0.185 - 1.0) < 0.01);

  std::vector<cd> a(10, 1.0), b(10, 1.0);
  channel::awgn(a, 0.1, 3);
  channel::awgn(b, 0.1, 3);
  CHECK(a == b);
  std::vector<cd> c(10, 1.0);
  channel::awgn(c, 0.0, 3);
  CHECK(c == std::vector<cd>(10, 1.0));
}

TEST_CASE("received power is transmit power times tap power plus noise") {
  const auto p = channel::preset("tdl-b", 30.0, 3.5e9, 100e-9, kTs);
  double rx = 0.0, tx = 0.0;
  const double n0 = 0.2;
  std::mt19937_64 rng(4);
  const int trials = 20000;
  for (int trial = 0; trial < trials; ++trial) {
    const auto bits = phy::generate_bits(2, 1, 72, trial);
    phy::ResourceGrid g(1, 1, 72);
    const double a = 1.0 / std::sqrt(2.0);
    for (std::size_t i = 0; i < 72; ++i) g.values[i] = cd(bits.bits[i] ? a : -a, bits.bits[72 + i] ? a : -a);
    const auto x = phy::ofdm_modulate(g, 0);
    const auto ch = channel::gen_channel(p, x.size(), 2, kTs, 500 + trial);
    auto y = channel::apply_channel(x, ch);
    for (auto& s : y) {
      channel::awgn(s, n0, rng());
      for (const cd& v : s) rx += std::norm(v);
    }
    for (const cd& v : x) tx += 2.0 * std::norm(v);
  }
  CHECK(std::abs(rx / (tx + trials * 2 * 72 * n0) - 1.0) < 0.02);
}

TEST_CASE("link operator matches the time-domain chain and its adjoint") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  const auto p = channel::preset("tdl-c", 120.0, 3.5e9, 300e-9, kTs);
  for (std::size_t cp : {0, 6}) {
    const auto ch = channel::gen_channel(p, 4 * (24 + cp), 2, kTs, 8);
    channel::LinkOperator op(ch, 4, 24, cp);
    std::vector<double> x(2 * 4 * 24), y(2 * 2 * 4 * 24), ax(y.size()), aty(x.size());
    for (double& v : x) v = nd(rng);
    for (double& v : y) v = nd(rng);
    op.apply(x, ax);
    op.adjoint(y, aty);
    double l = 0.0, r = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) l += ax[i] * y[i];
    for (std::size_t i = 0; i < x.size(); ++i) r += x[i] * aty[i];
    CHECK(std::abs(l - r) < 1e-12 * std::max(1.0, std::abs(l)));

    phy::ResourceGrid g(1, 4, 24);
    for (std::size_t i = 0; i < 96; ++i) g.values[i] = cd(x[i], x[96 + i]);
    const auto ref = phy::ofdm_demodulate(channel::apply_channel(phy::ofdm_modulate(g, cp), ch), 4, 24, cp);
    for (std::size_t i = 0; i < ref.values.size(); ++i) CHECK(std::abs(cd(ax[i], ax[192 + i]) - ref.values[i]) < 1e-12);
  }
}
