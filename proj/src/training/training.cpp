#include "e2e/training/training.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <random>

#include <json.hpp>

#include "e2e/constellation/constellation.hpp"
#include "e2e/error.hpp"
#include "e2e/seed.hpp"

namespace e2e::train {

namespace {

using ad::Tensor;
using ad::Var;

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<phy::cd> complex_points(const Tensor& t) {
  const std::size_t n = t.dim(1);
  std::vector<phy::cd> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {t[i], t[n + i]};
  return out;
}

void apply_partitions(Model& model) {
  nrx::apply_mode(model.params, model.config.mode);
  if (!model.config.train_constellation) model.params.set_trainable(ad::Partition::constellation, false);
}

int pick_order(const TrainConfig& c, std::mt19937_64& rng) { return c.orders[rng() % c.orders.size()]; }

struct Transmit {
  Var tx;
  phy::BitGrid bits;
  double subset_power = 1.0;
};

Transmit transmit(ad::Graph& g, Model& model, const Sample& s) {
  const auto& rc = model.config.receiver;
  Transmit t;
  Var cn = ad::normalize_points(g.parameter(model.params, kConstellationParam));
  t.bits = phy::generate_bits(s.order, rc.symbols, rc.subcarriers, derive_seed(s.seed, {0}));
  t.tx = ad::gather_points(cn, phy::symbol_indices(t.bits, rc.max_order), {rc.symbols, rc.subcarriers});
  t.subset_power = constellation::subset(complex_points(cn.value()), rc.max_order, s.order).power;
  return t;
}

void accumulate(std::map<std::string, Tensor>& into, const std::map<std::string, Tensor>& grads) {
  for (const auto& [name, g] : grads) {
    auto it = into.find(name);
    if (it == into.end()) {
      into.emplace(name, g);
      continue;
    }
    auto dst = it->second.data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

}  // namespace

double TrainConfig::papr_target_linear() const { return std::pow(10.0, papr_target_db / 10.0); }

double TrainConfig::sample_period() const { return channel::sample_period(receiver.subcarriers, subcarrier_spacing); }

channel::ChannelProfile TrainConfig::channel_profile() const {
  return channel::preset(profile, speed_kmh, carrier_hz, delay_spread, sample_period());
}

void TrainConfig::validate() const {
  receiver.validate();
  if (batch == 0) throw ConfigError("batch must be positive");
  if (orders.empty()) throw ConfigError("orders must not be empty");
  for (int m : orders) {
    if (m < 1 || m > receiver.max_order) {
      throw ConfigError("order " + std::to_string(m) + " outside [1, max_order=" + std::to_string(receiver.max_order) +
                        "]");
    }
  }
  if (!(lr > 0.0) || !(finetune_lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(constellation_lr_scale > 0.0)) throw ConfigError("constellation_lr_scale must be positive");
  if (!(mu0 > 0.0)) throw ConfigError("mu0 must be positive");
  if (!(tau >= 1.0)) throw ConfigError("tau must be >= 1");
  if (!(lambda0 >= 0.0)) throw ConfigError("lambda0 must be non-negative");
  if (!(ebno_min_db <= ebno_max_db)) throw ConfigError("ebno_min_db must not exceed ebno_max_db");
  if (!(code_rate > 0.0 && code_rate <= 1.0)) throw ConfigError("code_rate must lie in (0, 1]");
  if (std::isnan(papr_target_db)) throw ConfigError("papr_target_db is NaN");
  if (oversampling == 0) throw ConfigError("oversampling must be positive");
  if (cp >= receiver.subcarriers) throw ConfigError("cp must be shorter than the symbol");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (papr_batch == 0) throw ConfigError("papr_batch must be positive");
  if (!(subcarrier_spacing > 0.0)) throw ConfigError("subcarrier_spacing must be positive");
  channel::validate(channel_profile(), receiver.subcarriers);
}

Model init_model(const TrainConfig& config) {
  config.validate();
  Model model;
  model.config = config;
  model.params.add(kConstellationParam, ad::Partition::constellation,
                   constellation::Constellation::qam(config.receiver.max_order).to_tensor());
  nrx::init_params(model.params, config.receiver, derive_seed(config.seed, {0}));
  apply_partitions(model);
  model.state.lambda = config.lambda0;
  model.state.mu = config.mu0;
  model.state.tau = config.tau;
  return model;
}

Var ce_loss(Var llr, const phy::BitGrid& bits) {
  const ad::Shape want{static_cast<std::size_t>(bits.order), bits.symbols, bits.subcarriers};
  if (llr.shape() != want) {
    throw ShapeError("ce_loss: LLRs " + ad::shape_string(llr.shape()) + " vs bits " + ad::shape_string(want));
  }
  Tensor targets(want);
  for (std::size_t i = 0; i < bits.bits.size(); ++i) targets[i] = bits.bits[i];
  return ad::bce_with_logits(llr, targets);
}

Var papr_penalty(ad::Graph& g, Var tx, double eps_linear, std::size_t oversampling) {
  const ad::Shape s = tx.shape();
  if (s.size() != 3 || s[0] != 2) throw ShapeError("papr_penalty: expected [2 x N_s x N_c], got " + ad::shape_string(s));
  if (std::isinf(eps_linear) && eps_linear > 0) return g.constant(Tensor::scalar(0.0));
  auto op = std::make_shared<phy::OversampledIfftOperator>(s[1], s[2], oversampling);
  Var power = ad::normalize_rows_by_mean(ad::abs2(ad::linear_map(tx, op)));
  return ad::mean(ad::relu(ad::add_scalar(power, -eps_linear)));
}

Var aug_lagrangian(Var ce, Var lp, double lambda, double mu) {
  if (!(mu > 0.0)) throw ContractError("aug_lagrangian: mu must be positive");
  return ad::add(ce, ad::add(ad::scale(lp, lambda), ad::scale(ad::square(lp), 0.5 * mu)));
}

void adam_step(ad::ParameterSet& params, const std::map<std::string, Tensor>& grads, double lr, TrainState& state,
               const AdamSettings& settings) {
  ++state.adam_t;
  const double t = static_cast<double>(state.adam_t);
  const double c1 = 1.0 - std::pow(settings.beta1, t);
  const double c2 = 1.0 - std::pow(settings.beta2, t);
  for (auto& p : params.items()) {
    if (!p.trainable) continue;
    auto it = grads.find(p.name);
    if (it == grads.end()) continue;
    if (it->second.shape() != p.value.shape()) throw ShapeError("adam_step: gradient shape mismatch for " + p.name);
    auto& m = state.m.try_emplace(p.name, p.value.shape()).first->second;
    auto& v = state.v.try_emplace(p.name, p.value.shape()).first->second;
    auto w = p.value.data();
    auto g = it->second.data();
    const double step = p.partition == ad::Partition::constellation ? lr * settings.constellation_scale : lr;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = settings.beta1 * m[i] + (1.0 - settings.beta1) * g[i];
      v[i] = settings.beta2 * v[i] + (1.0 - settings.beta2) * g[i] * g[i];
      w[i] -= step * (m[i] / c1) / (std::sqrt(v[i] / c2) + settings.eps);
    }
  }
}

double clip_global_norm(std::map<std::string, Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double x : g.data()) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& [name, g] : grads)
      for (double& x : g.data()) x *= f;
  }
  return norm;
}

std::vector<Sample> draw_batch(const TrainConfig& config, std::size_t step) {
  std::mt19937_64 rng(derive_seed(config.seed, {1, step}));
  const int order = pick_order(config, rng);
  std::vector<Sample> batch(config.batch);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    batch[b].order = order;
    batch[b].ebno_db = config.ebno_min_db + (config.ebno_max_db - config.ebno_min_db) * unit_uniform(rng);
    batch[b].seed = derive_seed(config.seed, {2, step, b});
  }
  return batch;
}

SampleGraph build_sample(ad::Graph& g, Model& model, const Sample& sample, double n0_mismatch) {
  const auto& c = model.config;
  const auto& rc = c.receiver;
  Transmit t = transmit(g, model, sample);
  SampleGraph out;
  out.tx = t.tx;
  out.n0 = channel::ebno_to_n0(sample.ebno_db, c.code_rate, sample.order, t.subset_power);

  const std::size_t samples = rc.symbols * (rc.subcarriers + c.cp);
  auto ch = channel::gen_channel(c.channel_profile(), samples, rc.rx_antennas, c.sample_period(),
                                 derive_seed(sample.seed, {1}));
  auto link = std::make_shared<channel::LinkOperator>(std::move(ch), rc.symbols, rc.subcarriers, c.cp);

  const std::size_t n = rc.rx_antennas * rc.symbols * rc.subcarriers;
  std::vector<phy::cd> noise(n);
  channel::awgn(noise, out.n0, derive_seed(sample.seed, {2}));
  Tensor nt({2, rc.rx_antennas, rc.symbols, rc.subcarriers});
  for (std::size_t i = 0; i < n; ++i) {
    nt[i] = noise[i].real();
    nt[n + i] = noise[i].imag();
  }
  Var y = ad::add(ad::linear_map(t.tx, link), g.constant(std::move(nt)));
  Var llr = nrx::forward(g, model.params, rc, y, out.n0 * n0_mismatch, sample.order);
  out.ce = ce_loss(llr, t.bits);
  out.bits = std::move(t.bits);
  return out;
}

BatchTerms batch_loss(ad::Graph& g, Model& model, const std::vector<Sample>& batch) {
  if (batch.empty()) throw ContractError("batch_loss: empty batch");
  const auto& c = model.config;
  const double inv = 1.0 / static_cast<double>(batch.size());
  Var ce_sum, lp_sum;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    SampleGraph s = build_sample(g, model, batch[i]);
    Var lp = papr_penalty(g, s.tx, c.papr_target_linear(), c.oversampling);
    ce_sum = i == 0 ? s.ce : ad::add(ce_sum, s.ce);
    lp_sum = i == 0 ? lp : ad::add(lp_sum, lp);
  }
  BatchTerms t;
  t.ce = ad::scale(ce_sum, inv);
  t.lp = ad::scale(lp_sum, inv);
  t.loss = aug_lagrangian(t.ce, t.lp, model.state.lambda, model.state.mu);
  return t;
}

BatchGradient batch_gradient(Model& model, const std::vector<Sample>& batch) {
  if (batch.empty()) throw ContractError("batch_gradient: empty batch");
  const auto& c = model.config;
  const double inv = 1.0 / static_cast<double>(batch.size());
  const double eps = c.papr_target_linear();
  BatchGradient out;

  if (c.constrained()) {
    for (const auto& s : batch) {
      ad::Graph g;
      out.lp += papr_penalty(g, transmit(g, model, s).tx, eps, c.oversampling).value()[0] * inv;
    }
  }
  const double coef = model.state.lambda + model.state.mu * out.lp;

  for (const auto& s : batch) {
    ad::Graph g;
    SampleGraph sg = build_sample(g, model, s);
    Var loss = ad::scale(sg.ce, inv);
    if (c.constrained() && coef != 0.0) {
      loss = ad::add(loss, ad::scale(papr_penalty(g, sg.tx, eps, c.oversampling), coef * inv));
    }
    out.ce += sg.ce.value()[0] * inv;
    g.backward(loss);
    accumulate(out.grads, g.parameter_gradients());
  }
  out.loss = out.ce + model.state.lambda * out.lp + 0.5 * model.state.mu * out.lp * out.lp;
  return out;
}

double fresh_penalty(Model& model, std::size_t slots, std::uint64_t seed) {
  const auto& c = model.config;
  if (!c.constrained()) return 0.0;
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (std::size_t i = 0; i < slots; ++i) {
    Sample s;
    s.order = pick_order(c, rng);
    s.seed = derive_seed(seed, {i});
    ad::Graph g;
    total += papr_penalty(g, transmit(g, model, s).tx, c.papr_target_linear(), c.oversampling).value()[0];
  }
  return total / static_cast<double>(slots);
}

double heldout_ce(Model& model, std::size_t slots, std::uint64_t seed) {
  const auto& c = model.config;
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (std::size_t i = 0; i < slots; ++i) {
    Sample s;
    s.order = c.orders[i % c.orders.size()];
    s.ebno_db = c.ebno_min_db + (c.ebno_max_db - c.ebno_min_db) * unit_uniform(rng);
    s.seed = derive_seed(seed, {i});
    ad::Graph g;
    total += build_sample(g, model, s).ce.value()[0];
  }
  return total / static_cast<double>(slots);
}

void run(Model& model, std::size_t outer, std::size_t inner, double lr, std::ostream* log) {
  auto& c = model.config;
  auto& st = model.state;
  c.validate();
  AdamSettings adam;
  adam.constellation_scale = c.constellation_lr_scale;
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t t = 0; t < inner; ++t) {
      BatchGradient bg;
      try {
        bg = batch_gradient(model, draw_batch(c, st.step));
      } catch (const DomainError& e) {
        throw DomainError("training diverged at step " + std::to_string(st.step) + ": " + e.what());
      }
      const double norm = clip_global_norm(bg.grads, c.clip_norm);
      if (!std::isfinite(bg.loss) || !std::isfinite(norm)) {
        throw DomainError("training diverged at step " + std::to_string(st.step) + ": non-finite loss or gradient");
      }
      adam_step(model.params, bg.grads, lr, st, adam);
      ++st.step;
      if (log) {
        *log << nlohmann::json{{"step", st.step}, {"outer", st.outer},   {"ce", bg.ce},         {"lp", bg.lp},
                               {"loss", bg.loss}, {"lambda", st.lambda}, {"mu", st.mu}, {"grad_norm", norm}}
                    .dump()
             << '\n';
      }
    }
    if (c.constrained()) {
      st.last_lp = fresh_penalty(model, c.papr_batch, derive_seed(c.seed, {3, st.outer}));
      st.lambda += st.mu * st.last_lp;
    }
    ++st.outer;
    st.mu = c.mu0 * std::pow(c.tau, static_cast<double>(st.outer));
    if (log) {
      *log << nlohmann::json{{"outer_done", st.outer}, {"fresh_lp", st.last_lp}, {"lambda", st.lambda}, {"mu", st.mu}}
                  .dump()
           << '\n';
    }
  }
}

Model train(const TrainConfig& config, std::ostream* log) {
  Model model = init_model(config);
  run(model, config.outer, config.inner, config.lr, log);
  return model;
}

Model finetune(Model model, const FinetuneOptions& options, std::ostream* log) {
  auto& c = model.config;
  const std::size_t pretrain_updates = c.outer * c.inner;
  if (!options.profile.empty()) c.profile = options.profile;
  if (options.speed_kmh >= 0.0) c.speed_kmh = options.speed_kmh;
  c.mode = options.mode;
  c.validate();
  apply_partitions(model);
  model.state.m.clear();
  model.state.v.clear();
  model.state.adam_t = 0;
  std::size_t remaining = options.budget ? options.budget : (pretrain_updates + 3) / 4;
  const std::size_t chunk = std::max<std::size_t>(c.inner, 1);
  while (remaining > 0) {
    const std::size_t n = std::min(chunk, remaining);
    run(model, 1, n, c.finetune_lr, log);
    remaining -= n;
  }
  return model;
}

}  // namespace e2e::train
