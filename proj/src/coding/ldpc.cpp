#include "e2e/coding/ldpc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <queue>
#include <random>
#include <string>

#include "e2e/error.hpp"

namespace e2e::coding {

namespace {

using Row = std::vector<std::uint64_t>;

bool get_bit(const Row& r, std::size_t i) { return (r[i / 64] >> (i % 64)) & 1U; }
void set_bit(Row& r, std::size_t i) { r[i / 64] |= std::uint64_t{1} << (i % 64); }

std::vector<std::vector<std::uint32_t>> peg(std::size_t n, std::size_t m, int dv, int dc, std::mt19937_64& rng) {
  std::vector<std::vector<std::uint32_t>> checks(m), vars(n);
  std::vector<int> depth(m);
  for (std::size_t j = 0; j < n; ++j) {
    for (int e = 0; e < dv; ++e) {
      // breadth-first search from variable j over the current graph
      std::fill(depth.begin(), depth.end(), -1);
      std::queue<std::size_t> frontier;
      std::vector<char> var_seen(n, 0);
      var_seen[j] = 1;
      for (auto c : vars[j]) {
        depth[c] = 0;
        frontier.push(c);
      }
      while (!frontier.empty()) {
        const std::size_t c = frontier.front();
        frontier.pop();
        for (auto v : checks[c]) {
          if (var_seen[v]) continue;
          var_seen[v] = 1;
          for (auto c2 : vars[v]) {
            if (depth[c2] >= 0) continue;
            depth[c2] = depth[c] + 1;
            frontier.push(c2);
          }
        }
      }
      auto open = [&](std::size_t c) {
        return checks[c].size() < static_cast<std::size_t>(dc) &&
               std::find(vars[j].begin(), vars[j].end(), c) == vars[j].end();
      };
      std::vector<std::size_t> cand;
      for (std::size_t c = 0; c < m; ++c)
        if (open(c) && depth[c] < 0) cand.push_back(c);
      if (cand.empty()) {
        int far = -1;
        for (std::size_t c = 0; c < m; ++c)
          if (open(c)) far = std::max(far, depth[c]);
        for (std::size_t c = 0; c < m; ++c)
          if (open(c) && depth[c] == far) cand.push_back(c);
      }
      if (cand.empty()) {
        for (std::size_t c = 0; c < m; ++c)
          if (std::find(vars[j].begin(), vars[j].end(), c) == vars[j].end()) cand.push_back(c);
      }
      std::size_t best = checks.size();
      std::size_t min_deg = 0;
      std::size_t ties = 0;
      for (auto c : cand) {
        const std::size_t d = checks[c].size();
        if (best == checks.size() || d < min_deg) {
          best = c;
          min_deg = d;
          ties = 1;
        } else if (d == min_deg && rng() % ++ties == 0) {
          best = c;
        }
      }
      checks[best].push_back(static_cast<std::uint32_t>(j));
      vars[j].push_back(static_cast<std::uint32_t>(best));
    }
  }
  for (auto& c : checks) std::sort(c.begin(), c.end());
  return checks;
}

}  // namespace

LdpcCode LdpcCode::from_checks(std::size_t n, std::vector<std::vector<std::uint32_t>> checks) {
  LdpcCode code;
  code.n_ = n;
  code.checks_ = std::move(checks);
  code.vars_.assign(n, {});
  for (std::size_t c = 0; c < code.checks_.size(); ++c) {
    for (auto v : code.checks_[c]) {
      if (v >= n) throw FormatError("ldpc: check " + std::to_string(c) + " references variable " + std::to_string(v));
      code.vars_[v].push_back(static_cast<std::uint32_t>(c));
    }
  }
  code.build_encoder();
  return code;
}

LdpcCode LdpcCode::regular(std::size_t n, std::uint64_t seed, int dv, int dc) {
  if (n == 0 || (n * dv) % dc != 0) throw ConfigError("ldpc: n*dv must be divisible by dc (n=" + std::to_string(n) + ")");
  const std::size_t m = n * dv / dc;
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    std::mt19937_64 rng(seed + attempt);
    auto code = from_checks(n, peg(n, m, dv, dc, rng));
    if (code.k() == n - m) {
      code.seed_ = seed + attempt;
      return code;
    }
  }
  throw Error("ldpc: no full-rank construction found for n=" + std::to_string(n));
}

void LdpcCode::build_encoder() {
  const std::size_t m = checks_.size();
  const std::size_t words = (n_ + 63) / 64;
  std::vector<Row> h(m, Row(words, 0));
  for (std::size_t c = 0; c < m; ++c)
    for (auto v : checks_[c]) h[c][v / 64] ^= std::uint64_t{1} << (v % 64);

  // reduced row echelon form over GF(2)
  std::vector<std::uint32_t> pivots;
  std::size_t rank = 0;
  for (std::size_t col = 0; col < n_ && rank < m; ++col) {
    std::size_t sel = rank;
    while (sel < m && !get_bit(h[sel], col)) ++sel;
    if (sel == m) continue;
    std::swap(h[sel], h[rank]);
    for (std::size_t r = 0; r < m; ++r) {
      if (r != rank && get_bit(h[r], col))
        for (std::size_t w = 0; w < words; ++w) h[r][w] ^= h[rank][w];
    }
    pivots.push_back(static_cast<std::uint32_t>(col));
    ++rank;
  }
  parity_cols_ = pivots;
  info_cols_.clear();
  std::vector<char> is_pivot(n_, 0);
  for (auto p : pivots) is_pivot[p] = 1;
  for (std::size_t c = 0; c < n_; ++c)
    if (!is_pivot[c]) info_cols_.push_back(static_cast<std::uint32_t>(c));

  const std::size_t kw = (info_cols_.size() + 63) / 64;
  parity_rows_.assign(rank, Row(kw, 0));
  for (std::size_t r = 0; r < rank; ++r)
    for (std::size_t i = 0; i < info_cols_.size(); ++i)
      if (get_bit(h[r], info_cols_[i])) set_bit(parity_rows_[r], i);
}

std::vector<std::uint8_t> LdpcCode::encode(std::span<const std::uint8_t> info) const {
  if (info.size() != k()) {
    throw ShapeError("ldpc encode: expected " + std::to_string(k()) + " info bits, got " + std::to_string(info.size()));
  }
  Row packed((k() + 63) / 64, 0);
  std::vector<std::uint8_t> cw(n_, 0);
  for (std::size_t i = 0; i < info.size(); ++i) {
    const std::uint8_t b = info[i] & 1U;
    cw[info_cols_[i]] = b;
    if (b) set_bit(packed, i);
  }
  for (std::size_t r = 0; r < parity_rows_.size(); ++r) {
    unsigned acc = 0;
    for (std::size_t w = 0; w < packed.size(); ++w) acc += std::popcount(parity_rows_[r][w] & packed[w]);
    cw[parity_cols_[r]] = static_cast<std::uint8_t>(acc & 1U);
  }
  return cw;
}

bool LdpcCode::satisfies(std::span<const std::uint8_t> codeword) const {
  if (codeword.size() != n_) throw ShapeError("ldpc: codeword length mismatch");
  for (const auto& c : checks_) {
    unsigned acc = 0;
    for (auto v : c) acc ^= codeword[v] & 1U;
    if (acc) return false;
  }
  return true;
}

DecodeResult LdpcCode::decode(std::span<const double> llr, int max_iters) const {
  if (llr.size() != n_) throw ShapeError("ldpc decode: expected " + std::to_string(n_) + " LLRs");
  constexpr double kMsgClip = 30.0;
  // internal messages are log P(0)/P(1)
  std::vector<double> prior(n_);
  for (std::size_t v = 0; v < n_; ++v) prior[v] = std::clamp(-llr[v], -kMsgClip, kMsgClip);

  // edge storage in check order
  std::vector<std::size_t> offset(checks_.size() + 1, 0);
  for (std::size_t c = 0; c < checks_.size(); ++c) offset[c + 1] = offset[c] + checks_[c].size();
  std::vector<double> c2v(offset.back(), 0.0), v2c(offset.back(), 0.0);
  std::vector<double> total(prior);
  std::vector<double> t;

  DecodeResult res;
  res.codeword.assign(n_, 0);
  for (int it = 1; it <= max_iters; ++it) {
    for (std::size_t c = 0; c < checks_.size(); ++c) {
      const std::size_t deg = checks_[c].size();
      t.resize(deg);
      for (std::size_t e = 0; e < deg; ++e) {
        const auto v = checks_[c][e];
        v2c[offset[c] + e] = total[v] - c2v[offset[c] + e];
        t[e] = std::tanh(0.5 * std::clamp(v2c[offset[c] + e], -kMsgClip, kMsgClip));
      }
      for (std::size_t e = 0; e < deg; ++e) {
        double prod = 1.0;
        for (std::size_t f = 0; f < deg; ++f)
          if (f != e) prod *= t[f];
        prod = std::clamp(prod, -0.999999999999, 0.999999999999);
        c2v[offset[c] + e] = 2.0 * std::atanh(prod);
      }
    }
    std::copy(prior.begin(), prior.end(), total.begin());
    for (std::size_t c = 0; c < checks_.size(); ++c)
      for (std::size_t e = 0; e < checks_[c].size(); ++e) total[checks_[c][e]] += c2v[offset[c] + e];

    bool decided = true;
    for (std::size_t v = 0; v < n_; ++v) {
      res.codeword[v] = total[v] < 0.0 ? 1 : 0;
      if (total[v] == 0.0) decided = false;
    }
    res.iterations = it;
    if (decided && satisfies(res.codeword)) {
      res.converged = true;
      break;
    }
  }
  res.info.resize(k());
  for (std::size_t i = 0; i < k(); ++i) res.info[i] = res.codeword[info_cols_[i]];
  return res;
}

void LdpcCode::save(std::ostream& os) const {
  os << "ldpc " << n_ << ' ' << checks_.size() << ' ' << seed_ << '\n';
  for (const auto& c : checks_) {
    os << c.size();
    for (auto v : c) os << ' ' << v;
    os << '\n';
  }
}

LdpcCode LdpcCode::load(std::istream& is) {
  std::string tag;
  std::size_t n = 0, m = 0;
  std::uint64_t seed = 0;
  if (!(is >> tag >> n >> m >> seed) || tag != "ldpc") throw FormatError("ldpc: bad header");
  std::vector<std::vector<std::uint32_t>> checks(m);
  for (auto& c : checks) {
    std::size_t deg = 0;
    if (!(is >> deg)) throw FormatError("ldpc: truncated check list");
    c.resize(deg);
    for (auto& v : c)
      if (!(is >> v)) throw FormatError("ldpc: truncated check list");
  }
  auto code = from_checks(n, std::move(checks));
  code.seed_ = seed;
  return code;
}

LdpcCode LdpcCode::cached(std::size_t n, std::uint64_t seed, const std::filesystem::path& dir) {
  const auto path = dir / ("ldpc_n" + std::to_string(n) + "_s" + std::to_string(seed) + ".txt");
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    return load(in);
  }
  auto code = regular(n, seed);
  std::filesystem::create_directories(dir);
  std::ofstream out(path);
  code.save(out);
  if (!out) throw Error("ldpc: cannot write cache file " + path.string());
  return code;
}

std::vector<std::uint32_t> interleaver(std::size_t size, std::uint64_t seed) {
  std::vector<std::uint32_t> p(size);
  std::iota(p.begin(), p.end(), 0U);
  std::mt19937_64 rng(seed);
  for (std::size_t i = size; i > 1; --i) std::swap(p[i - 1], p[rng() % i]);
  return p;
}

}  // namespace e2e::coding
