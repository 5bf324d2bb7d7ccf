#include "e2e/eval/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include "e2e/channel/channel.hpp"
#include "e2e/coding/ldpc.hpp"
#include "e2e/error.hpp"
#include "e2e/phy/frontend.hpp"
#include "e2e/receiver/baseline.hpp"
#include "e2e/receiver/neural.hpp"
#include "e2e/seed.hpp"

namespace e2e::eval {

namespace {

using constellation::cd;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Grid {
  std::size_t antennas, symbols, subcarriers;
  int max_order;
};

std::vector<double> baseline_llrs(const phy::ResourceGrid& y, const phy::ResourceGrid& h, double n0,
                                  const constellation::SubsetView& view) {
  const auto eq = baseline::lmmse_equalize(y, h, n0, view.power);
  return baseline::gaussian_llr(eq.x, eq.gain, eq.nu, view);
}

coding::LdpcCode make_code(std::size_t n, const EvalConfig& cfg) {
  if (cfg.ldpc_cache.empty()) return coding::LdpcCode::regular(n, cfg.ldpc_seed);
  return coding::LdpcCode::cached(n, cfg.ldpc_seed, cfg.ldpc_cache);
}

}  // namespace

double throughput(double slots_per_second, std::size_t res_per_slot, double code_rate, double rho, int order,
                  double bler) {
  return slots_per_second * static_cast<double>(res_per_slot) * code_rate * rho * order * (1.0 - bler);
}

double wilson_halfwidth(std::size_t errors, std::size_t trials) {
  if (trials == 0) return 1.0;
  const double z = 1.959963984540054;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(errors) / n;
  return z / (1.0 + z * z / n) * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n));
}

std::vector<cd> model_constellation(const train::Model& model) {
  const auto& t = model.params.get(train::kConstellationParam).value;
  return constellation::Constellation::from_tensor(model.config.receiver.max_order, t).normalized();
}

SweepResult evaluate(const EvalConfig& cfg, train::Model* model) {
  cfg.validate();
  const bool neural = cfg.mode == "neural";
  if (neural && model == nullptr) throw ConfigError("neural evaluation needs a checkpoint");

  Grid g{cfg.rx_antennas, cfg.symbols, cfg.subcarriers, cfg.order};
  std::vector<cd> points;
  if (neural) {
    const auto& rc = model->config.receiver;
    g = {rc.rx_antennas, rc.symbols, rc.subcarriers, rc.max_order};
    if (cfg.order > rc.max_order) {
      throw ConfigError("eval.order " + std::to_string(cfg.order) + " exceeds the checkpoint's max_order " +
                        std::to_string(rc.max_order));
    }
    if (cfg.cp >= g.subcarriers) throw ConfigError("eval.cp must be shorter than the symbol");
    points = model_constellation(*model);
  } else {
    points = constellation::Constellation::qam(cfg.order).normalized();
  }
  const int order = cfg.order;
  const auto view = constellation::subset(points, g.max_order, order);
  const auto m = static_cast<std::size_t>(order);

  phy::PilotPattern pilots;
  if (cfg.pilot_layout == "2sym") {
    if (g.symbols < 12) throw ConfigError("pilot layout 2sym needs at least 12 OFDM symbols");
    pilots = phy::default_pilots(g.subcarriers, cfg.pilot_seed);
  }
  std::vector<std::size_t> data_res;  // s * K + k
  for (std::size_t s = 0; s < g.symbols; ++s)
    if (!pilots.is_pilot_symbol(s))
      for (std::size_t k = 0; k < g.subcarriers; ++k) data_res.push_back(s * g.subcarriers + k);
  const std::size_t n = data_res.size();
  if (n % 2 != 0) throw ConfigError("number of data REs per slot must be even for the rate-1/2 code");
  const auto code = make_code(n, cfg);
  const std::size_t k_info = code.k();
  const auto perm = coding::interleaver(n * m, cfg.ldpc_seed);

  const double ts = channel::sample_period(g.subcarriers, cfg.subcarrier_spacing);
  const auto profile = channel::preset(cfg.profile, cfg.speed_kmh, cfg.carrier_hz, cfg.delay_spread, ts);
  channel::validate(profile, g.subcarriers);
  const double rho = phy::data_fraction(pilots, g.symbols, g.subcarriers, cfg.cp);
  const std::size_t res = g.symbols * g.subcarriers;
  const std::size_t sym_len = g.subcarriers + cfg.cp;

  SweepResult result;
  result.config = to_json(cfg);
  if (neural) result.config["checkpoint_config_hash"] = config_hash(model->config);

  std::vector<std::uint8_t> coded(n * m), stream(n * m);
  std::vector<double> llr_stream(n * m), llr_coded(n * m);
  for (std::size_t pi = 0; pi < cfg.ebno_db.size(); ++pi) {
    SweepRow row;
    row.ebno_db = cfg.ebno_db[pi];
    row.order = order;
    row.rho = rho;
    const double n0 = channel::ebno_to_n0(row.ebno_db, code.rate(), order, view.power);
    const double n0_rx = n0 * cfg.noise_mismatch;

    while (row.bit_errors < cfg.max_errors && row.bits < cfg.max_bits) {
      const std::uint64_t slot_seed = derive_seed(cfg.seed, {pi, row.slots});
      std::mt19937_64 rng(derive_seed(slot_seed, {0}));
      std::vector<std::vector<std::uint8_t>> info(m, std::vector<std::uint8_t>(k_info));
      for (std::size_t w = 0; w < m; ++w) {
        for (auto& b : info[w]) b = rng() & 1U;
        const auto cw = code.encode(info[w]);
        std::copy(cw.begin(), cw.end(), coded.begin() + static_cast<std::ptrdiff_t>(w * n));
      }
      for (std::size_t q = 0; q < n * m; ++q) stream[q] = coded[perm[q]];

      phy::BitGrid bits{order, g.symbols, g.subcarriers, std::vector<std::uint8_t>(m * res, 0)};
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t b = 0; b < m; ++b) bits.bits[b * res + data_res[r]] = stream[r * m + b];
      auto grid = phy::map_bits(bits, points, g.max_order);
      if (!pilots.empty()) grid = phy::insert_pilots(std::move(grid), pilots);

      auto tx = phy::ofdm_modulate(grid, cfg.cp);
      if (cfg.clip_rate > 0.0) {
        for (std::size_t s = 0; s < g.symbols; ++s) {
          std::span<cd> block(tx.data() + s * sym_len, sym_len);
          const auto clipped = phy::clip(block, cfg.clip_rate);
          std::copy(clipped.begin(), clipped.end(), block.begin());
        }
      }
      const auto ch = channel::gen_channel(profile, tx.size(), g.antennas, ts, derive_seed(slot_seed, {1}));
      auto rx = channel::apply_channel(tx, ch);
      for (std::size_t a = 0; a < rx.size(); ++a) channel::awgn(rx[a], n0, derive_seed(slot_seed, {2, a}));
      const auto y = phy::ofdm_demodulate(rx, g.symbols, g.subcarriers, cfg.cp);

      if (neural) {
        const auto t = nrx::infer(model->params, model->config.receiver, y, n0_rx, order);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t b = 0; b < m; ++b) llr_stream[r * m + b] = t[b * res + data_res[r]];
      } else {
        const auto h = cfg.mode == "baseline"
                           ? baseline::interpolate(baseline::ls_estimate(y, pilots), pilots, g.symbols)
                           : channel::freq_response(ch, g.symbols, g.subcarriers, cfg.cp);
        const auto l = baseline_llrs(y, h, n0_rx, view);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t b = 0; b < m; ++b) llr_stream[r * m + b] = l[data_res[r] * m + b];
      }

      for (std::size_t q = 0; q < n * m; ++q) {
        row.raw_errors += (llr_stream[q] > 0.0) != (stream[q] == 1);
        llr_coded[perm[q]] = llr_stream[q];
      }
      row.coded_bits += n * m;
      for (std::size_t w = 0; w < m; ++w) {
        const auto dec = code.decode(std::span<const double>(llr_coded.data() + w * n, n), cfg.ldpc_iters);
        std::size_t errs = 0;
        for (std::size_t i = 0; i < k_info; ++i) errs += dec.info[i] != info[w][i];
        row.bit_errors += errs;
        row.block_errors += errs > 0;
      }
      row.blocks += m;
      row.bits += m * k_info;
      ++row.slots;
    }
    row.ber = static_cast<double>(row.bit_errors) / static_cast<double>(row.bits);
    row.ber_halfwidth = wilson_halfwidth(row.bit_errors, row.bits);
    row.bler = static_cast<double>(row.block_errors) / static_cast<double>(row.blocks);
    row.bler_halfwidth = wilson_halfwidth(row.block_errors, row.blocks);
    row.raw_ber = static_cast<double>(row.raw_errors) / static_cast<double>(row.coded_bits);
    row.throughput_bps = throughput(cfg.slots_per_second, res, code.rate(), rho, order, row.bler);
    result.rows.push_back(row);
  }
  return result;
}

void write_csv(std::ostream& os, const SweepResult& r) {
  os << "ebno_db,order,slots,bits,bit_errors,ber,ber_halfwidth,blocks,block_errors,bler,bler_halfwidth,coded_bits,"
        "raw_errors,raw_ber,rho,throughput_bps\n";
  for (const auto& x : r.rows) {
    os << num(x.ebno_db) << ',' << x.order << ',' << x.slots << ',' << x.bits << ',' << x.bit_errors << ','
       << num(x.ber) << ',' << num(x.ber_halfwidth) << ',' << x.blocks << ',' << x.block_errors << ',' << num(x.bler)
       << ',' << num(x.bler_halfwidth) << ',' << x.coded_bits << ',' << x.raw_errors << ',' << num(x.raw_ber) << ','
       << num(x.rho) << ',' << num(x.throughput_bps) << '\n';
  }
}

void write_json(std::ostream& os, const SweepResult& r) {
  Json j;
  j["config"] = r.config;
  j["rows"] = Json::array();
  for (const auto& x : r.rows) {
    j["rows"].push_back({{"ebno_db", x.ebno_db},       {"order", x.order},
                         {"slots", x.slots},           {"bits", x.bits},
                         {"bit_errors", x.bit_errors}, {"ber", x.ber},
                         {"ber_halfwidth", x.ber_halfwidth}, {"blocks", x.blocks},
                         {"block_errors", x.block_errors}, {"bler", x.bler},
                         {"bler_halfwidth", x.bler_halfwidth}, {"coded_bits", x.coded_bits},
                         {"raw_errors", x.raw_errors}, {"raw_ber", x.raw_ber},
                         {"rho", x.rho},               {"throughput_bps", x.throughput_bps}});
  }
  os << j.dump(2) << '\n';
}

std::vector<double> papr_samples(std::span<const cd> normalized, int max_order, int order, std::size_t slots,
                                 std::size_t symbols, std::size_t subcarriers, std::size_t oversampling,
                                 double clip_rate, std::uint64_t seed) {
  std::vector<double> out;
  out.reserve(slots * symbols);
  std::vector<cd> row(subcarriers);
  for (std::size_t i = 0; i < slots; ++i) {
    const auto bits = phy::generate_bits(order, symbols, subcarriers, derive_seed(seed, {i}));
    const auto grid = phy::map_bits(bits, normalized, max_order);
    for (std::size_t s = 0; s < symbols; ++s) {
      for (std::size_t k = 0; k < subcarriers; ++k) row[k] = grid.at(0, s, k);
      auto x = phy::oversampled_ifft(row, oversampling);
      if (clip_rate > 0.0) x = phy::clip(x, clip_rate);
      out.push_back(phy::papr_db(x));
    }
  }
  return out;
}

std::vector<double> ccdf(std::span<const double> samples, std::span<const double> thresholds_db) {
  if (samples.empty()) throw ContractError("ccdf: no samples");
  std::vector<double> out;
  for (double t : thresholds_db) {
    const auto above = std::count_if(samples.begin(), samples.end(), [t](double v) { return v > t; });
    out.push_back(static_cast<double>(above) / static_cast<double>(samples.size()));
  }
  return out;
}

std::vector<LinkChoice> select_orders(const std::vector<SweepResult>& per_order, double bler_target) {
  if (per_order.empty()) throw ContractError("select_orders: no sweeps");
  const std::size_t points = per_order.front().rows.size();
  for (const auto& r : per_order)
    if (r.rows.size() != points) throw ContractError("select_orders: sweeps cover different Eb/N0 lists");
  std::vector<LinkChoice> out;
  for (std::size_t i = 0; i < points; ++i) {
    const SweepRow* best = nullptr;
    for (const auto& r : per_order) {
      const auto& row = r.rows[i];
      if (row.bler <= bler_target && (!best || row.order > best->order)) best = &row;
    }
    bool met = best != nullptr;
    if (!best) {
      for (const auto& r : per_order) {
        const auto& row = r.rows[i];
        if (!best || row.bler < best->bler || (row.bler == best->bler && row.order < best->order)) best = &row;
      }
    }
    out.push_back({best->ebno_db, best->order, best->bler, best->throughput_bps, met});
  }
  return out;
}

}  // namespace e2e::eval
