#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "e2e/autodiff/graph.hpp"
#include "e2e/autodiff/ops.hpp"
#include "e2e/phy/frontend.hpp"

namespace e2e::nrx {

struct BlockSpec {
  std::size_t kh = 3;
  std::size_t kw = 3;
  ad::Dilation dilation{};
};

/// Grid orientation: H = OFDM symbols, W = subcarriers.
struct ReceiverConfig {
  std::size_t rx_antennas = 2;
  std::size_t symbols = 14;
  std::size_t subcarriers = 72;
  std::size_t channels = 32;
  int max_order = 2;
  std::vector<BlockSpec> blocks;
  bool adapters = true;
  std::size_t reduction = 4;  // gamma
  std::size_t adapter_kernel = 3;
  std::size_t af_hidden = 16;
  double ln_eps = 1e-5;
  double mask_init = 4.0;

  /// Per-block kernels and dilations of the reference architecture.
  static std::vector<BlockSpec> reference_blocks(std::size_t count);
  static ReceiverConfig desk();
  static ReceiverConfig paper_scale();

  std::size_t input_channels() const { return 2 * rx_antennas + 1; }
  void validate() const;
};

enum class Mode { full, adapter_only };

Mode mode_from_string(const std::string& s);
std::string to_string(Mode m);

/// Adds every receiver parameter (backbone, adapters, mask) to `params`.
void init_params(ad::ParameterSet& params, const ReceiverConfig& cfg, std::uint64_t seed);

/// full: everything trainable. adapter_only: backbone frozen; adapters,
/// mask and constellation trainable.
void apply_mode(ad::ParameterSet& params, Mode mode);

/// Real/imag planes of the received grid {2, N_r, N_s, N_c} stacked to
/// {2 N_r, N_s, N_c}, plus one constant plane holding ln(N0).
ad::Var assemble_input(ad::Graph& g, ad::Var y, double n0);

ad::Var residual_block(ad::Graph& g, ad::ParameterSet& params, const ReceiverConfig& cfg, std::size_t index,
                       ad::Var z);

/// Noise-aware channel gate in (0,1)^C from pooled features and ln(N0).
ad::Var attention_factor(ad::Graph& g, ad::ParameterSet& params, std::size_t index, ad::Var features, double n0);

ad::Var channel_adapter(ad::Graph& g, ad::ParameterSet& params, const ReceiverConfig& cfg, std::size_t index,
                        ad::Var z, double n0);

/// Unmasked LLRs Z {M_max, N_s, N_c}.
ad::Var raw_llrs(ad::Graph& g, ad::ParameterSet& params, const ReceiverConfig& cfg, ad::Var y, double n0);

/// First M rows of Z * sigmoid(W). LLR > 0 favours bit 1.
ad::Var forward(ad::Graph& g, ad::ParameterSet& params, const ReceiverConfig& cfg, ad::Var y, double n0, int order);

/// Inference helper: received grid in, {M, N_s, N_c} LLR tensor out.
ad::Tensor infer(ad::ParameterSet& params, const ReceiverConfig& cfg, const phy::ResourceGrid& y, double n0, int order);

}  // namespace e2e::nrx
