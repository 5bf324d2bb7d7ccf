#include "e2e/receiver/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "e2e/error.hpp"

namespace e2e::baseline {

namespace {

double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace

phy::ResourceGrid ls_estimate(const phy::ResourceGrid& y, const phy::PilotPattern& pilots) {
  const std::size_t nc = y.subcarriers;
  if (pilots.sequence.size() != pilots.symbols.size() * nc) throw ShapeError("ls_estimate: pilot sequence length mismatch");
  phy::ResourceGrid est(y.antennas, pilots.symbols.size(), nc);
  for (std::size_t p = 0; p < pilots.symbols.size(); ++p) {
    const std::size_t s = pilots.symbols[p];
    if (s >= y.symbols) throw ContractError("ls_estimate: pilot symbol outside the slot");
    for (std::size_t k = 0; k < nc; ++k) {
      const cd x = pilots.sequence[p * nc + k];
      if (std::abs(x) == 0.0) throw DomainError("ls_estimate: zero pilot symbol at subcarrier " + std::to_string(k));
      for (std::size_t a = 0; a < y.antennas; ++a) est.at(a, p, k) = y.at(a, s, k) / x;
    }
  }
  return est;
}

phy::ResourceGrid interpolate(const phy::ResourceGrid& estimates, const phy::PilotPattern& pilots, std::size_t symbols) {
  if (pilots.symbols.empty()) throw ContractError("interpolate: no pilot symbols");
  if (estimates.symbols != pilots.symbols.size()) throw ShapeError("interpolate: estimate/pattern mismatch");
  std::vector<std::size_t> order(pilots.symbols.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pilots.symbols[a] < pilots.symbols[b]; });

  const std::size_t nc = estimates.subcarriers;
  phy::ResourceGrid h(estimates.antennas, symbols, nc);
  for (std::size_t s = 0; s < symbols; ++s) {
    // bracketing pilots in sorted order
    std::size_t hi = 0;
    while (hi < order.size() && pilots.symbols[order[hi]] < s) ++hi;
    std::size_t p0, p1;
    double w = 0.0;
    if (hi == 0) {
      p0 = p1 = order.front();
    } else if (hi == order.size()) {
      p0 = p1 = order.back();
    } else {
      p0 = order[hi - 1];
      p1 = order[hi];
      const double s0 = static_cast<double>(pilots.symbols[p0]), s1 = static_cast<double>(pilots.symbols[p1]);
      w = (static_cast<double>(s) - s0) / (s1 - s0);
    }
    for (std::size_t a = 0; a < estimates.antennas; ++a)
      for (std::size_t k = 0; k < nc; ++k) h.at(a, s, k) = (1.0 - w) * estimates.at(a, p0, k) + w * estimates.at(a, p1, k);
  }
  return h;
}

Equalized lmmse_equalize(const phy::ResourceGrid& y, const phy::ResourceGrid& h, double n0, double es) {
  if (y.antennas != h.antennas || y.symbols != h.symbols || y.subcarriers != h.subcarriers) {
    throw ShapeError("lmmse_equalize: channel estimate and received grid differ in shape");
  }
  if (!(es > 0.0)) throw DomainError("lmmse_equalize: Es must be positive");
  if (n0 < 0.0) throw DomainError("lmmse_equalize: negative noise power");
  const std::size_t res = y.symbols * y.subcarriers;
  Equalized out{std::vector<cd>(res), std::vector<double>(res), std::vector<double>(res)};
  const double reg = n0 / es;
  for (std::size_t r = 0; r < res; ++r) {
    double hh = 0.0;
    cd hy{};
    for (std::size_t a = 0; a < y.antennas; ++a) {
      const cd hv = h.values[a * res + r];
      hh += std::norm(hv);
      hy += std::conj(hv) * y.values[a * res + r];
    }
    const double den = hh + reg;
    if (den == 0.0) continue;
    out.x[r] = hy / den;
    out.gain[r] = hh / den;
    out.nu[r] = n0 * hh / (den * den);
  }
  return out;
}

std::vector<double> posteriors(cd x_hat, double gain, double nu, const constellation::SubsetView& points) {
  if (!(nu > 0.0)) throw DomainError("posteriors: nu must be positive");
  std::vector<double> logp(points.points.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logp.size(); ++i) {
    logp[i] = -std::norm(x_hat - gain * points.points[i]) / nu;
    mx = std::max(mx, logp[i]);
  }
  double z = 0.0;
  for (double& v : logp) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : logp) v /= z;
  return logp;
}

std::vector<double> gaussian_llr(std::span<const cd> x_hat, std::span<const double> gain, std::span<const double> nu,
                                 const constellation::SubsetView& points) {
  if (gain.size() != x_hat.size() || nu.size() != x_hat.size()) throw ShapeError("gaussian_llr: input lengths differ");
  const int m = points.order;
  const std::size_t count = points.points.size();
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<double> llr(x_hat.size() * m, 0.0);
  std::vector<double> metric(count);
  std::vector<double> num(m), den(m);
  for (std::size_t r = 0; r < x_hat.size(); ++r) {
    // no channel energy means no information: LLR stays 0
    if (!(nu[r] > 0.0)) continue;
    for (std::size_t i = 0; i < count; ++i) metric[i] = -std::norm(x_hat[r] - gain[r] * points.points[i]) / nu[r];
    std::fill(num.begin(), num.end(), ninf);
    std::fill(den.begin(), den.end(), ninf);
    for (std::size_t i = 0; i < count; ++i) {
      for (int b = 0; b < m; ++b) {
        if (points.bit(i, b))
          num[b] = log_sum_exp(num[b], metric[i]);
        else
          den[b] = log_sum_exp(den[b], metric[i]);
      }
    }
    for (int b = 0; b < m; ++b) llr[r * m + b] = std::clamp(num[b] - den[b], -kLlrClip, kLlrClip);
  }
  return llr;
}

}  // namespace e2e::baseline
