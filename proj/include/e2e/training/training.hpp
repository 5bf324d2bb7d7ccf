#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "e2e/autodiff/graph.hpp"
#include "e2e/autodiff/ops.hpp"
#include "e2e/channel/channel.hpp"
#include "e2e/phy/frontend.hpp"
#include "e2e/receiver/neural.hpp"

namespace e2e::train {

struct TrainConfig {
  nrx::ReceiverConfig receiver = nrx::ReceiverConfig::desk();
  std::size_t batch = 32;
  std::size_t outer = 2500;  // K
  std::size_t inner = 12;    // T
  double lr = 1e-3;
  double finetune_lr = 5e-4;
  double constellation_lr_scale = 1.0;  // multiplies lr for the constellation points
  double papr_target_db = std::numeric_limits<double>::infinity();
  std::size_t oversampling = 4;
  double lambda0 = 0.0;
  double mu0 = 0.1;
  double tau = 1.004;
  double ebno_min_db = -10.0;
  double ebno_max_db = 5.0;
  double code_rate = 0.5;
  std::vector<int> orders{2};
  nrx::Mode mode = nrx::Mode::full;
  bool train_constellation = true;
  std::string profile = "flat";
  double speed_kmh = 0.0;
  double carrier_hz = 3.5e9;
  double delay_spread = 100e-9;
  double subcarrier_spacing = 30e3;
  std::size_t cp = 0;
  double clip_norm = 10.0;
  std::size_t papr_batch = 32;  // slots in the fresh batch behind each multiplier update
  std::uint64_t seed = 1;

  bool constrained() const { return std::isfinite(papr_target_db); }
  double papr_target_linear() const;
  double sample_period() const;
  channel::ChannelProfile channel_profile() const;
  void validate() const;
};

struct TrainState {
  double lambda = 0.0;
  double mu = 0.1;
  double tau = 1.004;
  std::size_t outer = 0;   // k
  std::size_t step = 0;    // updates applied, also the data stream position
  std::size_t adam_t = 0;  // optimizer steps since the moments were reset
  std::map<std::string, ad::Tensor> m;
  std::map<std::string, ad::Tensor> v;
  double last_lp = 0.0;
};

/// Everything a checkpoint carries.
struct Model {
  TrainConfig config;
  ad::ParameterSet params;
  TrainState state;
};

/// QAM-initialized constellation plus a freshly initialized receiver.
Model init_model(const TrainConfig& config);

inline constexpr const char* kConstellationParam = "constellation.points";

/// Binary cross-entropy between sigmoid(LLR) and the bits, averaged over
/// M * N_s * N_c.
ad::Var ce_loss(ad::Var llr, const phy::BitGrid& bits);

/// Mean over every oversampled time sample of max(|x|^2 / mean_row |x|^2 - eps, 0)
/// for a transmit grid {2, N_s, N_c}; each OFDM symbol is normalized by its
/// own mean power.
ad::Var papr_penalty(ad::Graph& g, ad::Var tx, double eps_linear, std::size_t oversampling);

/// ce + lambda lp + mu/2 lp^2
ad::Var aug_lagrangian(ad::Var ce, ad::Var lp, double lambda, double mu);

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double constellation_scale = 1.0;  // lr multiplier for Partition::constellation
};

/// One Adam update of every trainable parameter that has an entry in `grads`.
void adam_step(ad::ParameterSet& params, const std::map<std::string, ad::Tensor>& grads, double lr,
               TrainState& state, const AdamSettings& settings = {});

/// Rescales all gradients to global norm at most `max_norm`; returns the norm
/// before clipping.
double clip_global_norm(std::map<std::string, ad::Tensor>& grads, double max_norm);

/// One training example: a slot with its own bits, channel and noise.
struct Sample {
  int order = 2;
  double ebno_db = 0.0;
  std::uint64_t seed = 0;
};

/// Samples for update number `step`: one order per batch, Eb/N0 per slot.
std::vector<Sample> draw_batch(const TrainConfig& config, std::size_t step);

struct SampleGraph {
  ad::Var ce;
  ad::Var tx;  // {2, N_s, N_c}
  phy::BitGrid bits;
  double n0 = 0.0;
};

/// mapper -> link -> noise -> receiver -> CE for one slot, built into `g`.
/// `n0_mismatch` scales only the N0 handed to the receiver.
SampleGraph build_sample(ad::Graph& g, Model& model, const Sample& sample, double n0_mismatch = 1.0);

struct BatchTerms {
  ad::Var loss;
  ad::Var ce;
  ad::Var lp;
};

/// Whole-batch objective in a single graph.
BatchTerms batch_loss(ad::Graph& g, Model& model, const std::vector<Sample>& batch);

struct BatchGradient {
  double loss = 0.0;
  double ce = 0.0;
  double lp = 0.0;
  std::map<std::string, ad::Tensor> grads;
};

/// Gradient of the batch objective, one slot graph at a time: the penalty
/// values are computed first, then each slot contributes
/// (ce_i + (lambda + mu lp) lp_i) / B.
BatchGradient batch_gradient(Model& model, const std::vector<Sample>& batch);

/// Monte-Carlo penalty on `slots` fresh slots.
double fresh_penalty(Model& model, std::size_t slots, std::uint64_t seed);

/// Mean CE over `slots` slots drawn from a fixed seed, no updates.
double heldout_ce(Model& model, std::size_t slots, std::uint64_t seed);

/// Runs `outer` iterations of `inner` updates at learning rate `lr`,
/// continuing from the model's state. Writes one JSON record per update to
/// `log` when given.
void run(Model& model, std::size_t outer, std::size_t inner, double lr, std::ostream* log = nullptr);

Model train(const TrainConfig& config, std::ostream* log = nullptr);

struct FinetuneOptions {
  nrx::Mode mode = nrx::Mode::adapter_only;
  std::string profile;  // empty keeps the pretraining profile
  double speed_kmh = -1.0;  // negative keeps the pretraining speed
  std::size_t budget = 0;   // updates; 0 means a quarter of pretraining
};

Model finetune(Model pretrained, const FinetuneOptions& options, std::ostream* log = nullptr);

}  // namespace e2e::train
