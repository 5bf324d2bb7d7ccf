#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace e2e::coding {

struct DecodeResult {
  std::vector<std::uint8_t> info;
  std::vector<std::uint8_t> codeword;
  bool converged = false;
  int iterations = 0;
};

/// Binary LDPC code with a systematic encoder derived from its parity-check
/// matrix. LLR inputs follow log P(b=1)/P(b=0).
class LdpcCode {
 public:
  /// Column-weight dv, row-weight dc code of length n built by progressive
  /// edge growth from `seed`. Seeds are advanced deterministically until the
  /// parity-check matrix has full rank n*dv/dc.
  static LdpcCode regular(std::size_t n, std::uint64_t seed, int dv = 3, int dc = 6);

  /// Loads `dir/ldpc_n<n>_s<seed>.txt` if present, else builds and writes it.
  static LdpcCode cached(std::size_t n, std::uint64_t seed, const std::filesystem::path& dir);

  static LdpcCode from_checks(std::size_t n, std::vector<std::vector<std::uint32_t>> checks);

  std::size_t n() const { return n_; }
  std::size_t k() const { return info_cols_.size(); }
  std::size_t m() const { return checks_.size(); }
  double rate() const { return static_cast<double>(k()) / static_cast<double>(n_); }
  std::uint64_t construction_seed() const { return seed_; }

  const std::vector<std::vector<std::uint32_t>>& checks() const { return checks_; }
  const std::vector<std::uint32_t>& info_positions() const { return info_cols_; }

  std::vector<std::uint8_t> encode(std::span<const std::uint8_t> info) const;
  bool satisfies(std::span<const std::uint8_t> codeword) const;
  DecodeResult decode(std::span<const double> llr, int max_iters = 20) const;

  void save(std::ostream& os) const;
  static LdpcCode load(std::istream& is);

 private:
  LdpcCode() = default;
  void build_encoder();

  std::size_t n_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::vector<std::uint32_t>> checks_;
  std::vector<std::vector<std::uint32_t>> vars_;
  std::vector<std::uint32_t> info_cols_;
  std::vector<std::uint32_t> parity_cols_;
  // parity bit r = XOR of info bits selected by parity_rows_[r] (bitset over k)
  std::vector<std::vector<std::uint64_t>> parity_rows_;
};

/// Seeded permutation of `size` positions.
std::vector<std::uint32_t> interleaver(std::size_t size, std::uint64_t seed);

}  // namespace e2e::coding
