#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "e2e/training/training.hpp"

namespace e2e::eval {

using Json = nlohmann::ordered_json;

/// Settings of a Monte-Carlo run. Keys are addressed as "eval.<field>" in
/// config files; plain keys belong to the training config.
struct EvalConfig {
  std::string mode = "neural";  // neural | baseline | perfect-csi
  std::vector<double> ebno_db{0.0, 2.0, 4.0, 6.0, 8.0};
  int order = 2;
  std::vector<int> orders{2};  // link adaptation candidates
  double bler_target = 0.1;
  std::string profile = "flat";
  double speed_kmh = 0.0;
  double carrier_hz = 3.5e9;
  double delay_spread = 100e-9;
  double subcarrier_spacing = 30e3;
  // grid of the baselines; neural runs take it from the checkpoint
  std::size_t rx_antennas = 2;
  std::size_t symbols = 14;
  std::size_t subcarriers = 72;
  std::string pilot_layout = "none";  // none | 2sym
  std::size_t cp = 0;
  double noise_mismatch = 1.0;
  double clip_rate = 0.0;  // 0 disables clipping
  std::size_t max_bits = 1000000;
  std::size_t max_errors = 100;
  double slots_per_second = 2000.0;
  int ldpc_iters = 20;
  std::uint64_t ldpc_seed = 7;
  std::string ldpc_cache;
  std::uint64_t pilot_seed = 11;
  std::size_t papr_slots = 1000;
  std::size_t oversampling = 4;
  std::vector<double> papr_thresholds_db{4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0};
  std::uint64_t seed = 1;

  void validate() const;
};

/// Flat (key, value) pairs in file order. JSON objects are flattened to
/// dotted keys; key=value lines take a JSON literal or a bare string.
using Layer = std::vector<std::pair<std::string, Json>>;

Layer parse_layer(std::string_view text);
Layer read_layer(const std::filesystem::path& path);
/// "key=value" from the command line.
std::pair<std::string, Json> parse_assignment(const std::string& text);

/// Applies one key; throws ConfigError naming the key on unknown keys or
/// wrong value types.
void apply(train::TrainConfig& config, const std::string& key, const Json& value);
void apply(EvalConfig& config, const std::string& key, const Json& value);

/// Routes "eval.*" keys to `eval`, the rest to `train`.
void apply(const Layer& layer, train::TrainConfig& train, EvalConfig& eval);

bool has_key(const Layer& layer, const std::string& key);

Json to_json(const train::TrainConfig& config);
Json to_json(const EvalConfig& config);
train::TrainConfig train_config_from_json(const Json& j);

std::uint64_t fnv1a(std::string_view bytes);
/// FNV-1a of the canonical JSON of the config, as 16 hex digits.
std::string config_hash(const train::TrainConfig& config);

}  // namespace e2e::eval
