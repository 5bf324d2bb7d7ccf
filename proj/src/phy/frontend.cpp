#include "e2e/phy/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <string>

#include "e2e/error.hpp"
#include "e2e/phy/dft.hpp"

namespace e2e::phy {

ad::Tensor ResourceGrid::to_tensor() const {
  const std::size_t n = values.size();
  ad::Tensor t({2, antennas, symbols, subcarriers});
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = values[i].real();
    t[n + i] = values[i].imag();
  }
  return t;
}

ResourceGrid ResourceGrid::from_tensor(const ad::Tensor& t) {
  if (t.rank() != 4 || t.dim(0) != 2) throw ShapeError("resource grid tensor must be [2 x A x S x K], got " + ad::shape_string(t.shape()));
  ResourceGrid g(t.dim(1), t.dim(2), t.dim(3));
  const std::size_t n = g.values.size();
  for (std::size_t i = 0; i < n; ++i) g.values[i] = cd(t[i], t[n + i]);
  return g;
}

bool PilotPattern::is_pilot_symbol(std::size_t s) const {
  return std::find(symbols.begin(), symbols.end(), s) != symbols.end();
}

BitGrid generate_bits(int order, std::size_t symbols, std::size_t subcarriers, std::uint64_t seed) {
  if (order < 1) throw ConfigError("generate_bits: order must be >= 1");
  BitGrid g{order, symbols, subcarriers, {}};
  g.bits.resize(static_cast<std::size_t>(order) * symbols * subcarriers);
  std::mt19937_64 rng(seed);
  std::uint64_t word = 0;
  int left = 0;
  for (auto& b : g.bits) {
    if (left == 0) {
      word = rng();
      left = 64;
    }
    b = static_cast<std::uint8_t>(word & 1U);
    word >>= 1;
    --left;
  }
  return g;
}

std::vector<std::size_t> symbol_indices(const BitGrid& bits, int max_order) {
  if (bits.order < 1 || bits.order > max_order) {
    throw ConfigError("modulation order " + std::to_string(bits.order) + " exceeds max order " + std::to_string(max_order));
  }
  const std::size_t res = bits.symbols * bits.subcarriers;
  std::vector<std::size_t> idx(res, 0);
  for (int m = 0; m < bits.order; ++m) {
    const std::size_t weight = std::size_t{1} << (max_order - 1 - m);
    const std::uint8_t* plane = bits.bits.data() + m * res;
    for (std::size_t r = 0; r < res; ++r)
      if (plane[r]) idx[r] += weight;
  }
  return idx;
}

ResourceGrid map_bits(const BitGrid& bits, std::span<const cd> normalized, int max_order) {
  if (normalized.size() != (std::size_t{1} << max_order)) throw ShapeError("map_bits: constellation size mismatch");
  const auto idx = symbol_indices(bits, max_order);
  ResourceGrid g(1, bits.symbols, bits.subcarriers);
  for (std::size_t r = 0; r < idx.size(); ++r) g.values[r] = normalized[idx[r]];
  return g;
}

std::vector<cd> ofdm_modulate(const ResourceGrid& grid, std::size_t cp) {
  const std::size_t nc = grid.subcarriers;
  if (grid.antennas != 1) throw ShapeError("ofdm_modulate: transmit grid must have one antenna");
  if (cp >= nc) throw ConfigError("cyclic prefix " + std::to_string(cp) + " must be shorter than N_c=" + std::to_string(nc));
  const std::size_t len = nc + cp;
  std::vector<cd> out(grid.symbols * len);
  std::vector<cd> body(nc);
  for (std::size_t s = 0; s < grid.symbols; ++s) {
    idft(std::span<const cd>(grid.values.data() + s * nc, nc), body);
    cd* dst = out.data() + s * len;
    std::copy(body.end() - static_cast<std::ptrdiff_t>(cp), body.end(), dst);
    std::copy(body.begin(), body.end(), dst + cp);
  }
  return out;
}

ResourceGrid ofdm_demodulate(std::span<const std::vector<cd>> streams, std::size_t symbols, std::size_t subcarriers,
                             std::size_t cp) {
  const std::size_t len = subcarriers + cp;
  ResourceGrid g(streams.size(), symbols, subcarriers);
  for (std::size_t a = 0; a < streams.size(); ++a) {
    if (streams[a].size() != symbols * len) {
      throw ShapeError("ofdm_demodulate: stream " + std::to_string(a) + " has " + std::to_string(streams[a].size()) +
                       " samples, expected " + std::to_string(symbols * len));
    }
    for (std::size_t s = 0; s < symbols; ++s) {
      dft(std::span<const cd>(streams[a].data() + s * len + cp, subcarriers),
          std::span<cd>(&g.at(a, s, 0), subcarriers));
    }
  }
  return g;
}

namespace {

void pad_spectrum(std::span<const cd> row, std::span<cd> padded) {
  const std::size_t nc = row.size();
  const std::size_t total = padded.size();
  const std::size_t low = (nc + 1) / 2;
  std::fill(padded.begin(), padded.end(), cd{});
  std::copy(row.begin(), row.begin() + low, padded.begin());
  std::copy(row.begin() + low, row.end(), padded.begin() + (total - (nc - low)));
}

void unpad_spectrum(std::span<const cd> padded, std::span<cd> row) {
  const std::size_t nc = row.size();
  const std::size_t total = padded.size();
  const std::size_t low = (nc + 1) / 2;
  std::copy(padded.begin(), padded.begin() + low, row.begin());
  std::copy(padded.begin() + (total - (nc - low)), padded.end(), row.begin() + low);
}

}  // namespace

std::vector<cd> oversampled_ifft(std::span<const cd> row, std::size_t oversampling) {
  if (oversampling < 1) throw ConfigError("oversampling factor must be >= 1");
  std::vector<cd> padded(row.size() * oversampling);
  pad_spectrum(row, padded);
  idft(padded, padded);
  return padded;
}

double papr_db(std::span<const cd> signal) {
  double peak = 0.0, mean = 0.0;
  for (const cd& x : signal) {
    const double p = std::norm(x);
    peak = std::max(peak, p);
    mean += p;
  }
  if (signal.empty() || !(mean > 0.0)) throw DomainError("papr: signal is all zeros");
  mean /= static_cast<double>(signal.size());
  return 10.0 * std::log10(peak / mean);
}

std::vector<cd> clip(std::span<const cd> signal, double clip_rate) {
  if (!(clip_rate > 0.0)) throw ConfigError("clip rate must be positive");
  double mean = 0.0;
  for (const cd& x : signal) mean += std::norm(x);
  std::vector<cd> out(signal.begin(), signal.end());
  if (signal.empty()) return out;
  const double a = clip_rate * std::sqrt(mean / static_cast<double>(signal.size()));
  for (cd& x : out) {
    const double m = std::abs(x);
    if (m > a) x *= a / m;
  }
  return out;
}

PilotPattern make_pilots(std::vector<std::size_t> symbols, std::size_t subcarriers, std::uint64_t seed) {
  PilotPattern p;
  p.symbols = std::move(symbols);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const double a = 1.0 / std::numbers::sqrt2;
  p.sequence.resize(p.symbols.size() * subcarriers);
  for (cd& v : p.sequence) {
    const auto r = rng();
    v = cd((r & 1U) ? -a : a, (r & 2U) ? -a : a);
  }
  return p;
}

PilotPattern default_pilots(std::size_t subcarriers, std::uint64_t seed) { return make_pilots({2, 11}, subcarriers, seed); }

ResourceGrid insert_pilots(ResourceGrid grid, const PilotPattern& pattern) {
  const std::size_t nc = grid.subcarriers;
  if (pattern.sequence.size() != pattern.symbols.size() * nc) {
    throw ShapeError("insert_pilots: pilot sequence has " + std::to_string(pattern.sequence.size()) + " values, expected " +
                     std::to_string(pattern.symbols.size() * nc));
  }
  std::set<std::size_t> seen;
  for (std::size_t i = 0; i < pattern.symbols.size(); ++i) {
    const std::size_t s = pattern.symbols[i];
    if (s >= grid.symbols) throw ContractError("insert_pilots: pilot symbol " + std::to_string(s) + " outside the slot");
    if (!seen.insert(s).second) throw ContractError("insert_pilots: pilot symbol " + std::to_string(s) + " listed twice");
    for (std::size_t k = 0; k < nc; ++k) grid.at(0, s, k) = pattern.sequence[i * nc + k];
  }
  return grid;
}

double data_fraction(const PilotPattern& pattern, std::size_t symbols, std::size_t subcarriers, std::size_t cp) {
  const double time = static_cast<double>(symbols - pattern.symbols.size()) / static_cast<double>(symbols);
  return time * static_cast<double>(subcarriers) / static_cast<double>(subcarriers + cp);
}

OversampledIfftOperator::OversampledIfftOperator(std::size_t symbols, std::size_t subcarriers, std::size_t oversampling)
    : symbols_(symbols), subcarriers_(subcarriers), oversampling_(oversampling) {
  if (oversampling < 1) throw ConfigError("oversampling factor must be >= 1");
}

void OversampledIfftOperator::apply(std::span<const double> in, std::span<double> out) const {
  const std::size_t nc = subcarriers_, nl = oversampling_ * subcarriers_;
  const std::size_t in_plane = symbols_ * nc, out_plane = symbols_ * nl;
  std::vector<cd> row(nc), padded(nl);
  for (std::size_t s = 0; s < symbols_; ++s) {
    for (std::size_t k = 0; k < nc; ++k) row[k] = cd(in[s * nc + k], in[in_plane + s * nc + k]);
    pad_spectrum(row, padded);
    idft(padded, padded);
    for (std::size_t n = 0; n < nl; ++n) {
      out[s * nl + n] = padded[n].real();
      out[out_plane + s * nl + n] = padded[n].imag();
    }
  }
}

void OversampledIfftOperator::adjoint(std::span<const double> in, std::span<double> out) const {
  const std::size_t nc = subcarriers_, nl = oversampling_ * subcarriers_;
  const std::size_t in_plane = symbols_ * nl, out_plane = symbols_ * nc;
  std::vector<cd> row(nc), padded(nl);
  for (std::size_t s = 0; s < symbols_; ++s) {
    for (std::size_t n = 0; n < nl; ++n) padded[n] = cd(in[s * nl + n], in[in_plane + s * nl + n]);
    dft(padded, padded);
    unpad_spectrum(padded, row);
    for (std::size_t k = 0; k < nc; ++k) {
      out[s * nc + k] = row[k].real();
      out[out_plane + s * nc + k] = row[k].imag();
    }
  }
}

}  // namespace e2e::phy
