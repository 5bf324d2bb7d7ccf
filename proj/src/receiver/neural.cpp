#include "e2e/receiver/neural.hpp"

#include <cmath>
#include <random>
#include <string>

#include "e2e/error.hpp"

namespace e2e::nrx {

namespace {

using ad::Partition;
using ad::Tensor;

std::string block_name(std::size_t i) { return "block" + std::to_string(i); }
std::string adapter_name(std::size_t i) { return "adapter" + std::to_string(i); }

Tensor glorot(ad::Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

Tensor conv_kernel(std::size_t out, std::size_t in, std::size_t kh, std::size_t kw, std::mt19937_64& rng) {
  return glorot({out, in, kh, kw}, in * kh * kw, out * kh * kw, rng);
}

ad::Var conv_bias(ad::Graph& g, ad::ParameterSet& p, const std::string& prefix, ad::Var x, ad::Dilation d = {}) {
  return ad::bias_add(ad::conv2d(x, g.parameter(p, prefix + ".w"), d), g.parameter(p, prefix + ".b"));
}

}  // namespace

std::vector<BlockSpec> ReceiverConfig::reference_blocks(std::size_t count) {
  static const std::vector<BlockSpec> table = {
      {7, 7, {7, 2}}, {7, 5, {7, 1}}, {5, 3, {1, 2}}, {3, 3, {1, 1}}, {3, 3, {1, 1}},
  };
  std::vector<BlockSpec> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(i < table.size() ? table[i] : table.back());
  return out;
}

ReceiverConfig ReceiverConfig::desk() {
  ReceiverConfig c;
  c.blocks = reference_blocks(2);
  return c;
}

ReceiverConfig ReceiverConfig::paper_scale() {
  ReceiverConfig c;
  c.rx_antennas = 32;
  c.channels = 128;
  c.max_order = 8;
  c.blocks = reference_blocks(5);
  return c;
}

void ReceiverConfig::validate() const {
  if (rx_antennas == 0 || symbols == 0 || subcarriers == 0) throw ConfigError("receiver: grid dimensions must be positive");
  if (channels == 0) throw ConfigError("receiver: channels must be positive");
  if (max_order < 1) throw ConfigError("receiver: max_order must be >= 1");
  if (adapters && (reduction == 0 || channels % reduction != 0)) {
    throw ConfigError("receiver: channels (" + std::to_string(channels) + ") not divisible by reduction ratio " +
                      std::to_string(reduction));
  }
  if (!(ln_eps > 0.0)) throw ConfigError("receiver: ln_eps must be positive");
}

Mode mode_from_string(const std::string& s) {
  if (s == "full") return Mode::full;
  if (s == "adapter-only") return Mode::adapter_only;
  throw ConfigError("unknown fine-tuning mode '" + s + "' (expected full or adapter-only)");
}

std::string to_string(Mode m) { return m == Mode::full ? "full" : "adapter-only"; }

void init_params(ad::ParameterSet& params, const ReceiverConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const std::size_t c = cfg.channels;
  params.add("input.w", Partition::backbone, conv_kernel(c, cfg.input_channels(), 3, 3, rng));
  params.add("input.b", Partition::backbone, Tensor({c}));
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
    const auto& b = cfg.blocks[i];
    const std::string n = block_name(i);
    for (const char* ln : {".ln1", ".ln2"}) {
      params.add(n + ln + ".scale", Partition::backbone, Tensor({c}, 1.0));
      params.add(n + ln + ".offset", Partition::backbone, Tensor({c}));
    }
    for (const char* conv : {".conv1", ".conv2"}) {
      params.add(n + conv + ".w", Partition::backbone, conv_kernel(c, c, b.kh, b.kw, rng));
      params.add(n + conv + ".b", Partition::backbone, Tensor({c}));
    }
    if (cfg.adapters) {
      const std::string a = adapter_name(i);
      const std::size_t r = c / cfg.reduction, k = cfg.adapter_kernel;
      params.add(a + ".down", Partition::adapter, glorot({r, cfg.reduction, k, k}, cfg.reduction * k * k, k * k, rng));
      params.add(a + ".up", Partition::adapter, Tensor({c, r, 1, 1}));
      params.add(a + ".af1.w", Partition::adapter, glorot({cfg.af_hidden, c + 1}, c + 1, cfg.af_hidden, rng));
      params.add(a + ".af1.b", Partition::adapter, Tensor({cfg.af_hidden}));
      params.add(a + ".af2.w", Partition::adapter, glorot({c, cfg.af_hidden}, cfg.af_hidden, c, rng));
      params.add(a + ".af2.b", Partition::adapter, Tensor({c}));
    }
  }
  const auto mmax = static_cast<std::size_t>(cfg.max_order);
  params.add("output.w", Partition::backbone, conv_kernel(mmax, c, 1, 1, rng));
  params.add("output.b", Partition::backbone, Tensor({mmax}));
  params.add("mask.logits", Partition::mask, Tensor({mmax, cfg.symbols, cfg.subcarriers}, cfg.mask_init));
}

void apply_mode(ad::ParameterSet& params, Mode mode) {
  params.set_all_trainable(true);
  if (mode == Mode::adapter_only) {
    if (params.count(Partition::adapter) == 0) throw ConfigError("adapter-only mode needs a receiver with adapters");
    params.set_trainable(Partition::backbone, false);
    params.set_trainable(Partition::constellation, false);
  }
}

ad::Var assemble_input(ad::Graph& g, ad::Var y, double n0) {
  if (!(n0 > 0.0)) throw DomainError("assemble_input: N0 must be positive");
  const ad::Shape s = y.shape();
  if (s.size() != 4 || s[0] != 2) throw ShapeError("assemble_input: expected [2 x N_r x N_s x N_c], got " + ad::shape_string(s));
  ad::Var planes = ad::reshape(y, {2 * s[1], s[2], s[3]});
  return ad::concat(planes, g.constant(Tensor({1, s[2], s[3]}, std::log(n0))));
}

ad::Var residual_block(ad::Graph& g, ad::ParameterSet& params, const ReceiverConfig& cfg, std::size_t index,
                       ad::Var z) {
  const auto& b = cfg.blocks.at(index);
  const std::string n = block_name(index);
  ad::Var h = ad::layer_norm(z, g.parameter(params, n + ".ln1.scale"), g.parameter(params, n + ".ln1.offset"), cfg.ln_eps);
  h = conv_bias(g, params, n + ".conv1", ad::relu(h), b.dilation);
  h = ad::layer_norm(h, g.parameter(params, n + ".ln2.scale"), g.parameter(params, n + ".ln2.offset"), cfg.ln_eps);
  h = conv_bias(g, params, n + ".conv2", ad::relu(h), b.dilation);
  return ad::add(z, h);
}

ad::Var attention_factor(ad::Graph& g, ad::ParameterSet& params, std::size_t index, ad::Var features, double n0) {
  if (!(n0 > 0.0)) throw DomainError("attention_factor: N0 must be positive");
  const std::string a = adapter_name(index);
  ad::Var pooled = ad::concat(ad::global_avg_pool(features), g.constant(Tensor({1}, std::log(n0))));
  ad::Var h = ad::relu(ad::dense(pooled, g.parameter(params, a + ".af1.w"), g.parameter(params, a + ".af1.b")));
  return ad::sigmoid(ad::dense(h, g.parameter(params, a + ".af2.w"), g.parameter(params, a + ".af2.b")));
}

ad::Var channel_adapter(ad::Graph& g, ad::ParameterSet& params, const ReceiverConfig& cfg, std::size_t index,
                        ad::Var z, double n0) {
  (void)cfg;
  const std::string a = adapter_name(index);
  ad::Var down = ad::relu(ad::depthwise_conv2d(z, g.parameter(params, a + ".down")));
  ad::Var up = ad::pointwise_conv2d(down, g.parameter(params, a + ".up"));
  ad::Var alpha = attention_factor(g, params, index, up, n0);
  return ad::add(ad::channel_scale(alpha, up), z);
}

ad::Var raw_llrs(ad::Graph& g, ad::ParameterSet& params, const ReceiverConfig& cfg, ad::Var y, double n0) {
  ad::Var z = conv_bias(g, params, "input", assemble_input(g, y, n0));
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
    z = residual_block(g, params, cfg, i, z);
    if (cfg.adapters) z = channel_adapter(g, params, cfg, i, z, n0);
  }
  return conv_bias(g, params, "output", z);
}

ad::Var forward(ad::Graph& g, ad::ParameterSet& params, const ReceiverConfig& cfg, ad::Var y, double n0, int order) {
  if (order < 1 || order > cfg.max_order) {
    throw ConfigError("receiver: modulation order " + std::to_string(order) + " outside [1, " +
                      std::to_string(cfg.max_order) + "]");
  }
  ad::Var z = raw_llrs(g, params, cfg, y, n0);
  ad::Var masked = ad::mul(z, ad::sigmoid(g.parameter(params, "mask.logits")));
  if (order == cfg.max_order) return masked;
  return ad::slice_rows(masked, 0, static_cast<std::size_t>(order));
}

ad::Tensor infer(ad::ParameterSet& params, const ReceiverConfig& cfg, const phy::ResourceGrid& y, double n0, int order) {
  ad::Graph g;
  return forward(g, params, cfg, g.constant(y.to_tensor()), n0, order).value();
}

}  // namespace e2e::nrx
