#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <sstream>

#include "e2e/coding/ldpc.hpp"
#include "e2e/error.hpp"

using namespace e2e;

namespace {

std::vector<std::uint8_t> random_bits(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::uint8_t> b(n);
  for (auto& v : b) v = rng() & 1U;
  return b;
}

// Brute-force parity test straight from the check lists.
bool parity_ok(const coding::LdpcCode& code, const std::vector<std::uint8_t>& cw) {
  for (const auto& c : code.checks()) {
    int acc = 0;
    for (auto v : c) acc += cw[v];
    if (acc % 2) return false;
  }
  return true;
}

std::vector<double> strong_llrs(const std::vector<std::uint8_t>& cw, double mag) {
  std::vector<double> l(cw.size());
  for (std::size_t i = 0; i < cw.size(); ++i) l[i] = cw[i] ? mag : -mag;
  return l;
}

}  // namespace

TEST_CASE("toy code structure") {
  const auto code = coding::LdpcCode::regular(16, 1);
  CHECK(code.n() == 16);
  CHECK(code.k() == 8);
  CHECK(code.m() == 8);
  CHECK(code.rate() == 0.5);
  std::vector<int> col(16, 0);
  for (const auto& c : code.checks()) {
    CHECK(c.size() == 6);
    for (auto v : c) ++col[v];
  }
  for (int d : col) CHECK(d == 3);
}

TEST_CASE("toy code: every codeword satisfies parity") {
  const auto code = coding::LdpcCode::regular(16, 1);
  std::vector<std::vector<std::uint8_t>> seen;
  for (unsigned w = 0; w < 256; ++w) {
    std::vector<std::uint8_t> info(8);
    for (int i = 0; i < 8; ++i) info[i] = (w >> i) & 1U;
    const auto cw = code.encode(info);
    CHECK(parity_ok(code, cw));
    CHECK(code.satisfies(cw));
    for (int i = 0; i < 8; ++i) CHECK(cw[code.info_positions()[i]] == info[i]);
    seen.push_back(cw);
  }
  std::sort(seen.begin(), seen.end());
  CHECK(std::unique(seen.begin(), seen.end()) == seen.end());
  CHECK(code.encode(std::vector<std::uint8_t>(8, 0)) == std::vector<std::uint8_t>(16, 0));
  CHECK_THROWS_AS(code.encode(std::vector<std::uint8_t>(7)), ShapeError);
}

TEST_CASE("toy code: single errors are corrected at every position") {
  const auto code = coding::LdpcCode::regular(16, 1);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 8; ++trial) {
    const auto info = random_bits(8, rng);
    const auto cw = code.encode(info);
    for (std::size_t pos = 0; pos < 16; ++pos) {
      auto llr = strong_llrs(cw, 8.0);
      llr[pos] = -llr[pos];
      const auto r = code.decode(llr, 20);
      CHECK(r.converged);
      CHECK(r.codeword == cw);
      CHECK(r.info == info);
    }
  }
}

TEST_CASE("decoder convergence flags") {
  const auto code = coding::LdpcCode::regular(16, 1);
  std::mt19937_64 rng(4);
  const auto cw = code.encode(random_bits(8, rng));
  const auto r = code.decode(strong_llrs(cw, 30.0), 20);
  CHECK(r.converged);
  CHECK(r.iterations == 1);

  const auto z = code.decode(std::vector<double>(16, 0.0), 20);
  CHECK_FALSE(z.converged);
  CHECK(z.iterations == 20);
}

TEST_CASE("slot-sized codes") {
  for (std::size_t n : {864, 1008}) {
    const auto code = coding::LdpcCode::regular(n, 7);
    CHECK(code.k() == n / 2);
    std::mt19937_64 rng(n);
    for (int t = 0; t < 5; ++t) {
      const auto info = random_bits(code.k(), rng);
      const auto cw = code.encode(info);
      CHECK(parity_ok(code, cw));
      const auto r = code.decode(strong_llrs(cw, 5.0));
      CHECK(r.converged);
      CHECK(r.info == info);
    }
  }
}

TEST_CASE("decoding beats hard decisions on a noisy channel") {
  const auto code = coding::LdpcCode::regular(1008, 7);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  // BPSK over AWGN at Eb/N0 = 2.5 dB, rate 1/2
  const double ebno = std::pow(10.0, 0.25);
  const double sigma2 = 1.0 / (2.0 * 0.5 * ebno);
  std::size_t hard_err = 0, dec_err = 0, bits = 0;
  for (int t = 0; t < 30; ++t) {
    const auto info = random_bits(code.k(), rng);
    const auto cw = code.encode(info);
    std::vector<double> llr(cw.size());
    for (std::size_t i = 0; i < cw.size(); ++i) {
      const double y = (cw[i] ? 1.0 : -1.0) + std::sqrt(sigma2) * nd(rng);
      llr[i] = 2.0 * y / sigma2;
      hard_err += (llr[i] > 0) != (cw[i] == 1);
    }
    const auto r = code.decode(llr);
    for (std::size_t i = 0; i < code.k(); ++i) dec_err += r.info[i] != info[i];
    bits += code.n();
  }
  MESSAGE("hard BER ", double(hard_err) / bits, " decoded BER ", double(dec_err) / (bits / 2));
  CHECK(double(dec_err) / (bits / 2) < double(hard_err) / bits);
}

TEST_CASE("save/load and cache") {
  const auto code = coding::LdpcCode::regular(96, 2);
  std::stringstream ss;
  code.save(ss);
  const auto back = coding::LdpcCode::load(ss);
  CHECK(back.checks() == code.checks());
  CHECK(back.info_positions() == code.info_positions());

  const auto dir = std::filesystem::temp_directory_path() / "e2e_ldpc_cache_test";
  std::filesystem::remove_all(dir);
  const auto a = coding::LdpcCode::cached(96, 2, dir);
  CHECK(std::filesystem::exists(dir / "ldpc_n96_s2.txt"));
  const auto b = coding::LdpcCode::cached(96, 2, dir);
  CHECK(a.checks() == b.checks());
  std::filesystem::remove_all(dir);

  std::stringstream bad("garbage");
  CHECK_THROWS_AS(coding::LdpcCode::load(bad), FormatError);
}

TEST_CASE("interleaver is a seeded permutation") {
  const auto p = coding::interleaver(2016, 9);
  auto sorted = p;
  std::sort(sorted.begin(), sorted.end());
  for (std::uint32_t i = 0; i < 2016; ++i) CHECK(sorted[i] == i);
  CHECK(coding::interleaver(2016, 9) == p);
  CHECK(coding::interleaver(2016, 10) != p);
}
