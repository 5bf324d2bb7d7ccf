#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "e2e/constellation/constellation.hpp"
#include "e2e/error.hpp"
#include "e2e/receiver/baseline.hpp"
#include "e2e/receiver/neural.hpp"
#include "gradcheck.hpp"

using namespace e2e;
using baseline::cd;

namespace {

nrx::ReceiverConfig tiny() {
  nrx::ReceiverConfig c;
  c.rx_antennas = 1;
  c.symbols = 2;
  c.subcarriers = 8;
  c.channels = 8;
  c.max_order = 2;
  c.blocks = nrx::ReceiverConfig::reference_blocks(1);
  return c;
}

ad::Tensor random_rx(const nrx::ReceiverConfig& c, std::mt19937_64& rng) {
  return testing::random_tensor({2, c.rx_antennas, c.symbols, c.subcarriers}, rng);
}

void randomize(ad::ParameterSet& p, std::mt19937_64& rng, double scale = 0.3) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& item : p.items())
    for (double& v : item.value.data()) v += u(rng);
}

bool same_bits(const ad::Tensor& a, const ad::Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

// Brute-force LLR by enumerating every point in linear probability space.
double brute_llr(cd x, double g, double nu, const constellation::SubsetView& v, int bit) {
  long double num = 0.0L, den = 0.0L;
  for (std::size_t i = 0; i < v.points.size(); ++i) {
    const long double p = std::exp(static_cast<long double>(-std::norm(x - g * v.points[i]) / nu));
    if (v.bit(i, bit)) num += p;
    else den += p;
  }
  return static_cast<double>(std::log(num) - std::log(den));
}

}  // namespace

TEST_CASE("input assembly") {
  auto c = tiny();
  ad::Graph g;
  auto in = nrx::assemble_input(g, g.constant(ad::Tensor({2, 1, 2, 8})), 0.5);
  CHECK(in.shape() == ad::Shape{3, 2, 8});
  for (std::size_t i = 0; i < 32; ++i) CHECK(in.value()[i] == 0.0);
  for (std::size_t i = 32; i < 48; ++i) CHECK(in.value()[i] == std::log(0.5));
  auto big = nrx::assemble_input(g, g.constant(ad::Tensor({2, 32, 14, 72})), 1.0);
  CHECK(big.shape()[0] == 65);
  CHECK_THROWS_AS(nrx::assemble_input(g, g.constant(ad::Tensor({2, 1, 2, 8})), 0.0), DomainError);
  (void)c;
}

TEST_CASE("residual block with zero kernels is the identity") {
  auto c = tiny();
  ad::ParameterSet p;
  nrx::init_params(p, c, 1);
  p.get("block0.conv2.w").value.fill(0.0);
  std::mt19937_64 rng(2);
  const auto z = testing::random_tensor({8, 2, 8}, rng);
  ad::Graph g;
  const auto out = nrx::residual_block(g, p, c, 0, g.constant(z)).value();
  CHECK(same_bits(out, z));
}

TEST_CASE("every reference block preserves shape") {
  nrx::ReceiverConfig c = tiny();
  c.symbols = 14;
  c.subcarriers = 72;
  c.blocks = nrx::ReceiverConfig::reference_blocks(5);
  ad::ParameterSet p;
  nrx::init_params(p, c, 3);
  std::mt19937_64 rng(4);
  ad::Graph g;
  auto z = g.constant(testing::random_tensor({8, 14, 72}, rng));
  for (std::size_t i = 0; i < 5; ++i) {
    z = nrx::residual_block(g, p, c, i, z);
    CHECK(z.shape() == ad::Shape{8, 14, 72});
  }
}

TEST_CASE("attention factor") {
  auto c = tiny();
  ad::ParameterSet p;
  nrx::init_params(p, c, 5);
  std::mt19937_64 rng(6);
  const auto f = testing::random_tensor({8, 2, 8}, rng);
  {
    ad::ParameterSet q;
    nrx::init_params(q, c, 5);
    q.get("adapter0.af2.w").value.fill(0.0);
    ad::Graph g;
    const auto a = nrx::attention_factor(g, q, 0, g.constant(f), 0.3).value();
    for (double v : a.data()) CHECK(v == 0.5);
  }
  randomize(p, rng, 1.0);
  ad::Graph g1, g2;
  const auto a1 = nrx::attention_factor(g1, p, 0, g1.constant(f), 0.01).value();
  const auto a2 = nrx::attention_factor(g2, p, 0, g2.constant(f), 3.0).value();
  double diff = 0.0;
  for (std::size_t i = 0; i < a1.size(); ++i) {
    CHECK(a1[i] > 0.0);
    CHECK(a1[i] < 1.0);
    diff += std::abs(a1[i] - a2[i]);
  }
  CHECK(diff > 1e-6);
}

TEST_CASE("channel adapter") {
  auto c = tiny();
  ad::ParameterSet p;
  nrx::init_params(p, c, 7);
  std::mt19937_64 rng(8);
  const auto z = testing::random_tensor({8, 2, 8}, rng);
  ad::Graph g;
  const auto out = nrx::channel_adapter(g, p, c, 0, g.constant(z), 0.2).value();
  CHECK(same_bits(out, z));

  randomize(p, rng);
  // saturated gate: alpha -> 0
  p.get("adapter0.af2.w").value.fill(0.0);
  p.get("adapter0.af2.b").value.fill(-800.0);
  ad::Graph g2;
  const auto shut = nrx::channel_adapter(g2, p, c, 0, g2.constant(z), 0.2).value();
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(std::abs(shut[i] - z[i]) < 1e-12);

  nrx::ReceiverConfig bad = c;
  bad.channels = 6;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("forward output shapes and masking") {
  nrx::ReceiverConfig c = tiny();
  c.max_order = 4;
  ad::ParameterSet p;
  nrx::init_params(p, c, 9);
  std::mt19937_64 rng(10);
  randomize(p, rng);
  const auto y = random_rx(c, rng);

  ad::Graph g;
  const auto full = nrx::forward(g, p, c, g.constant(y), 0.1, 4).value();
  CHECK(full.shape() == ad::Shape{4, 2, 8});
  for (int m = 1; m < 4; ++m) {
    ad::Graph gm;
    const auto part = nrx::forward(gm, p, c, gm.constant(y), 0.1, m).value();
    CHECK(part.shape() == ad::Shape{static_cast<std::size_t>(m), 2, 8});
    for (std::size_t i = 0; i < part.size(); ++i) CHECK(part[i] == full[i]);
  }
  CHECK_THROWS_AS(nrx::forward(g, p, c, g.constant(y), 0.1, 5), ConfigError);

  auto& mask = p.get("mask.logits").value;
  for (std::size_t i = 0; i < 16; ++i) mask[16 + i] = -1e4;
  ad::Graph g2;
  const auto erased = nrx::forward(g2, p, c, g2.constant(y), 0.1, 4).value();
  for (std::size_t i = 0; i < 16; ++i) CHECK(erased[16 + i] == 0.0);

  ad::Graph g3, g4;
  CHECK(same_bits(nrx::forward(g3, p, c, g3.constant(y), 0.1, 4).value(),
                  nrx::forward(g4, p, c, g4.constant(y), 0.1, 4).value()));

  nrx::ReceiverConfig desk = nrx::ReceiverConfig::desk();
  ad::ParameterSet pd;
  nrx::init_params(pd, desk, 1);
  ad::Graph gd;
  CHECK(nrx::forward(gd, pd, desk, gd.constant(ad::Tensor({2, 2, 14, 72})), 1.0, 2).shape() == ad::Shape{2, 14, 72});
}

TEST_CASE("receiver gradients match finite differences") {
  const auto c = tiny();
  std::mt19937_64 rng(12);
  ad::ParameterSet p;
  nrx::init_params(p, c, 11);
  randomize(p, rng);
  const auto y = random_rx(c, rng);
  // gradient w.r.t. the received grid
  const double err_y = testing::gradcheck({y}, [&](ad::Graph& g, const std::vector<ad::Var>& v) {
    return testing::probe(g, nrx::forward(g, p, c, v[0], 0.3, 2));
  });
  CHECK(err_y <= 1e-4);

  // gradient w.r.t. every parameter
  const double err_p = testing::param_gradcheck(p, [&](ad::Graph& g) {
    return testing::probe(g, nrx::forward(g, p, c, g.constant(y), 0.3, 2));
  });
  CHECK(err_p <= 1e-4);
}

TEST_CASE("partition modes") {
  auto paper = nrx::ReceiverConfig::paper_scale();
  ad::ParameterSet p;
  nrx::init_params(p, paper, 1);
  nrx::apply_mode(p, nrx::Mode::adapter_only);
  const double ratio = static_cast<double>(p.trainable_count()) / static_cast<double>(p.total_count());
  MESSAGE("paper-shaped receiver: ", p.total_count(), " parameters, trainable share ", ratio);
  CHECK(ratio <= 0.05);
  nrx::apply_mode(p, nrx::Mode::full);
  CHECK(p.trainable_count() == p.total_count());
  for (const auto& item : p.items()) CHECK(item.trainable);
  CHECK(nrx::mode_from_string("adapter-only") == nrx::Mode::adapter_only);
  CHECK_THROWS_AS(nrx::mode_from_string("half"), ConfigError);

  auto c = tiny();
  ad::ParameterSet q;
  nrx::init_params(q, c, 2);
  nrx::apply_mode(q, nrx::Mode::adapter_only);
  std::mt19937_64 rng(3);
  ad::Graph g;
  auto loss = testing::probe(g, nrx::forward(g, q, c, g.constant(random_rx(c, rng)), 0.5, 2));
  g.backward(loss);
  const auto grads = g.parameter_gradients();
  for (const auto& item : q.items()) {
    if (item.partition == ad::Partition::backbone) CHECK(grads.count(item.name) == 0);
    else CHECK(grads.count(item.name) == 1);
  }
}

TEST_CASE("ls estimation") {
  const auto pat = phy::default_pilots(8, 3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  phy::ResourceGrid h(2, 14, 8), x(1, 14, 8);
  for (cd& v : h.values) v = cd(nd(rng), nd(rng));
  for (cd& v : x.values) v = cd(nd(rng), nd(rng));
  x = phy::insert_pilots(x, pat);
  phy::ResourceGrid y(2, 14, 8);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t s = 0; s < 14; ++s)
      for (std::size_t k = 0; k < 8; ++k) y.at(a, s, k) = h.at(a, s, k) * x.at(0, s, k);
  const auto est = baseline::ls_estimate(y, pat);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t p = 0; p < 2; ++p)
      for (std::size_t k = 0; k < 8; ++k) CHECK(std::abs(est.at(a, p, k) - h.at(a, pat.symbols[p], k)) < 1e-12);

  phy::PilotPattern one{{0}, {cd(1.0, 0.0)}};
  phy::ResourceGrid y1(1, 1, 1);
  y1.values[0] = cd(2.0, 1.0);
  CHECK(baseline::ls_estimate(y1, one).values[0] == cd(2.0, 1.0));
  phy::PilotPattern zero{{0}, {cd(0.0, 0.0)}};
  CHECK_THROWS_AS(baseline::ls_estimate(y1, zero), DomainError);

  // LS noise variance equals N0 for unit-modulus pilots
  const double n0 = 0.4;
  double acc = 0.0;
  std::size_t count = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    phy::ResourceGrid yy(1, 14, 8);
    for (std::size_t s = 0; s < 14; ++s)
      for (std::size_t k = 0; k < 8; ++k) yy.at(0, s, k) = x.at(0, s, k) + cd(nd(rng), nd(rng)) * std::sqrt(n0 / 2);
    const auto e = baseline::ls_estimate(yy, pat);
    for (const cd& v : e.values) {
      acc += std::norm(v - 1.0);
      ++count;
    }
  }
  CHECK(std::abs(acc / count / n0 - 1.0) < 0.03);
}

TEST_CASE("time interpolation") {
  phy::PilotPattern pat = phy::make_pilots({2, 11}, 4, 1);
  phy::ResourceGrid est(1, 2, 4);
  for (std::size_t k = 0; k < 4; ++k) {
    est.at(0, 0, k) = cd(1.0 + k, -1.0);
    est.at(0, 1, k) = cd(1.0 + k, -1.0);
  }
  const auto flat = baseline::interpolate(est, pat, 14);
  for (std::size_t s = 0; s < 14; ++s)
    for (std::size_t k = 0; k < 4; ++k) CHECK(flat.at(0, s, k) == cd(1.0 + k, -1.0));

  // linear in time: h(s) = a + b s
  const cd a(0.3, 0.1), b(-0.05, 0.02);
  for (std::size_t k = 0; k < 4; ++k) {
    est.at(0, 0, k) = a + b * 2.0;
    est.at(0, 1, k) = a + b * 11.0;
  }
  const auto lin = baseline::interpolate(est, pat, 14);
  for (std::size_t s = 2; s <= 11; ++s) CHECK(std::abs(lin.at(0, s, 1) - (a + b * static_cast<double>(s))) < 1e-15);
  CHECK(lin.at(0, 0, 0) == est.at(0, 0, 0));
  CHECK(lin.at(0, 13, 0) == est.at(0, 1, 0));

  phy::PilotPattern single = phy::make_pilots({5}, 4, 1);
  phy::ResourceGrid e1(1, 1, 4);
  e1.at(0, 0, 2) = cd(0.7, 0.7);
  const auto c1 = baseline::interpolate(e1, single, 14);
  for (std::size_t s = 0; s < 14; ++s) CHECK(c1.at(0, s, 2) == cd(0.7, 0.7));
  CHECK_THROWS_AS(baseline::interpolate(phy::ResourceGrid(1, 0, 4), phy::PilotPattern{}, 14), ContractError);
}

TEST_CASE("lmmse equalization") {
  phy::ResourceGrid y(1, 1, 1), h(1, 1, 1);
  y.values[0] = cd(0.3, -0.4);
  h.values[0] = 1.0;
  const auto e = baseline::lmmse_equalize(y, h, 1e-14);
  CHECK(std::abs(e.x[0] - y.values[0]) < 1e-12);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  phy::ResourceGrid hh(3, 2, 5), yy(3, 2, 5), xx(1, 2, 5);
  for (cd& v : hh.values) v = cd(nd(rng), nd(rng));
  for (cd& v : xx.values) v = cd(nd(rng), nd(rng));
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t r = 0; r < 10; ++r) yy.values[a * 10 + r] = hh.values[a * 10 + r] * xx.values[r];
  const auto z = baseline::lmmse_equalize(yy, hh, 1e-12);
  for (std::size_t r = 0; r < 10; ++r) CHECK(std::abs(z.x[r] - xx.values[r]) <= 1e-6 * std::abs(xx.values[r]));

  // scalar formula recomputation with noise
  for (cd& v : yy.values) v += cd(nd(rng), nd(rng)) * 0.3;
  const double n0 = 0.18, es = 1.3;
  const auto w = baseline::lmmse_equalize(yy, hh, n0, es);
  for (std::size_t r = 0; r < 10; ++r) {
    double nh = 0.0;
    cd num{};
    for (std::size_t a = 0; a < 3; ++a) {
      nh += std::norm(hh.values[a * 10 + r]);
      num += std::conj(hh.values[a * 10 + r]) * yy.values[a * 10 + r];
    }
    const cd ref = num / (nh + n0 / es);
    CHECK(std::abs(w.x[r] - ref) < 1e-12);
    CHECK(std::abs(w.gain[r] - nh / (nh + n0 / es)) < 1e-12);
    CHECK(std::abs(w.nu[r] - n0 * nh / ((nh + n0 / es) * (nh + n0 / es))) < 1e-12);
  }
}

TEST_CASE("gaussian demapper") {
  constellation::SubsetView bpsk;
  bpsk.order = 1;
  bpsk.max_order = 1;
  bpsk.indices = {0, 1};
  bpsk.points = {cd(-1.0, 0.0), cd(1.0, 0.0)};
  const std::vector<cd> xs{cd(0.3, 0.2), cd(-0.7, 1.0), cd(0.01, -0.5)};
  const std::vector<double> g(3, 1.0), nu{0.5, 2.0, 0.8};
  const auto l = baseline::gaussian_llr(xs, g, nu, bpsk);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(l[i] - 4.0 * xs[i].real() / nu[i]) < 1e-12);

  const auto qam = constellation::Constellation::qam(4).normalized();
  const auto v = constellation::subset(qam, 4, 4);
  for (std::size_t i = 0; i < 16; ++i) {
    const std::vector<cd> on{v.points[i]};
    const auto sharp = baseline::gaussian_llr(on, std::vector<double>{1.0}, std::vector<double>{1e-6}, v);
    for (int b = 0; b < 4; ++b) {
      CHECK(std::abs(sharp[b]) == baseline::kLlrClip);
      CHECK((sharp[b] > 0) == (v.bit(i, b) == 1));
    }
  }

  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(0.2, 1.0);
  for (int m : {2, 4, 6}) {
    const auto sub = constellation::subset(constellation::Constellation::qam(6).normalized(), 6, m);
    std::vector<cd> x(1000);
    std::vector<double> gg(1000), vv(1000);
    for (std::size_t i = 0; i < 1000; ++i) {
      x[i] = cd(nd(rng), nd(rng));
      gg[i] = u(rng);
      vv[i] = u(rng);
    }
    const auto llr = baseline::gaussian_llr(x, gg, vv, sub);
    double worst = 0.0;
    for (std::size_t i = 0; i < 1000; ++i)
      for (int b = 0; b < m; ++b) {
        const double ref = std::clamp(brute_llr(x[i], gg[i], vv[i], sub, b), -40.0, 40.0);
        worst = std::max(worst, std::abs(llr[i * m + b] - ref));
      }
    CHECK(worst <= 1e-10);
  }

  const auto post = baseline::posteriors(cd(0.2, -0.1), 0.9, 0.3, v);
  double s = 0.0;
  for (double p : post) s += p;
  CHECK(std::abs(s - 1.0) < 1e-12);
}
