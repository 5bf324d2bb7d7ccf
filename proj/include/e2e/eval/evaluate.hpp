#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "e2e/constellation/constellation.hpp"
#include "e2e/eval/config.hpp"
#include "e2e/training/training.hpp"

namespace e2e::eval {

/// Slots/s * REs/slot * r * rho * M * (1 - BLER), in bit/s.
double throughput(double slots_per_second, std::size_t res_per_slot, double code_rate, double rho, int order,
                  double bler);

/// Half-width of the 95% Wilson interval for `errors` out of `trials`.
double wilson_halfwidth(std::size_t errors, std::size_t trials);

struct SweepRow {
  double ebno_db = 0.0;
  int order = 0;
  std::size_t slots = 0;
  std::size_t bits = 0;
  std::size_t bit_errors = 0;
  std::size_t blocks = 0;
  std::size_t block_errors = 0;
  std::size_t coded_bits = 0;
  std::size_t raw_errors = 0;  // hard decisions on the channel LLRs
  double ber = 0.0;
  double ber_halfwidth = 0.0;
  double bler = 0.0;
  double bler_halfwidth = 0.0;
  double raw_ber = 0.0;
  double rho = 1.0;
  double throughput_bps = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  Json config;
};

/// Coded Monte-Carlo sweep over cfg.ebno_db at cfg.order. Each slot carries
/// M LDPC codewords of length = data REs, bit-interleaved over the slot.
/// Every point stops at cfg.max_errors information-bit errors or
/// cfg.max_bits information bits. `model` is required in neural mode.
SweepResult evaluate(const EvalConfig& cfg, train::Model* model);

void write_csv(std::ostream& os, const SweepResult& r);
void write_json(std::ostream& os, const SweepResult& r);

/// Per-OFDM-symbol PAPR (dB) of `slots` random slots mapped onto
/// `normalized` (2^max_order points) at `order`, oversampled by L, with
/// optional clipping at clip_rate * rms first.
std::vector<double> papr_samples(std::span<const constellation::cd> normalized, int max_order, int order,
                                 std::size_t slots, std::size_t symbols, std::size_t subcarriers,
                                 std::size_t oversampling, double clip_rate, std::uint64_t seed);

/// Fraction of samples strictly above each threshold.
std::vector<double> ccdf(std::span<const double> samples, std::span<const double> thresholds_db);

/// Normalized points of a checkpoint's constellation.
std::vector<constellation::cd> model_constellation(const train::Model& model);

struct LinkChoice {
  double ebno_db = 0.0;
  int order = 0;
  double bler = 0.0;
  double throughput_bps = 0.0;
  bool met_target = true;
};

/// Highest order whose measured BLER is within the target at each Eb/N0;
/// if none qualifies, the lowest-BLER order with met_target = false.
std::vector<LinkChoice> select_orders(const std::vector<SweepResult>& per_order, double bler_target);

}  // namespace e2e::eval
