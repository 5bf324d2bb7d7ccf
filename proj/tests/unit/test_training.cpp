#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <sstream>

#include "e2e/error.hpp"
#include "e2e/training/training.hpp"
#include "gradcheck.hpp"

using namespace e2e;
using cd = std::complex<double>;

namespace {

train::TrainConfig tiny() {
  train::TrainConfig c;
  c.receiver.rx_antennas = 1;
  c.receiver.symbols = 2;
  c.receiver.subcarriers = 8;
  c.receiver.channels = 8;
  c.receiver.max_order = 2;
  c.receiver.blocks = nrx::ReceiverConfig::reference_blocks(1);
  c.batch = 4;
  c.papr_batch = 8;
  return c;
}

// Independent penalty: direct oversampled DFT per row.
double penalty_oracle(const std::vector<std::vector<cd>>& rows, double eps, std::size_t L) {
  double acc = 0.0;
  std::size_t count = 0;
  for (const auto& x : rows) {
    const std::size_t n = x.size(), big = L * n;
    std::vector<double> p(big);
    double mean = 0.0;
    for (std::size_t t = 0; t < big; ++t) {
      cd s = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t bin = k < (n + 1) / 2 ? k : k + big - n;
        s += x[k] * std::polar(1.0, 2.0 * std::numbers::pi * double(bin * t % big) / double(big));
      }
      p[t] = std::norm(s) / double(big);
      mean += p[t] / double(big);
    }
    for (double v : p) acc += std::max(v / mean - eps, 0.0);
    count += big;
  }
  return acc / double(count);
}

ad::Tensor grid_tensor(const std::vector<std::vector<cd>>& rows) {
  const std::size_t s = rows.size(), k = rows[0].size();
  ad::Tensor t({2, s, k});
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      t.at(0, i, j) = rows[i][j].real();
      t.at(1, i, j) = rows[i][j].imag();
    }
  return t;
}

bool same_partition(const ad::ParameterSet& a, const ad::ParameterSet& b, ad::Partition p) {
  for (std::size_t i = 0; i < a.items().size(); ++i)
    if (a.items()[i].partition == p && a.items()[i].value != b.items()[i].value) return false;
  return true;
}

}  // namespace

TEST_CASE("ce_loss") {
  phy::BitGrid bits = phy::generate_bits(2, 3, 5, 4);
  ad::Graph g;
  CHECK(train::ce_loss(g.constant(ad::Tensor({2, 3, 5})), bits).value()[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  ad::Tensor big({2, 3, 5});
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = bits.bits[i] ? 40.0 : -40.0;
  CHECK(train::ce_loss(g.constant(big), bits).value()[0] < 1e-16);

  std::mt19937_64 rng(8);
  ad::Tensor llr = testing::random_tensor({2, 3, 5}, rng, -6, 6);
  double ref = 0.0;
  for (std::size_t i = 0; i < llr.size(); ++i) {
    const double l = 1.0 / (1.0 + std::exp(-llr[i]));
    ref -= bits.bits[i] ? std::log(l) : std::log(1.0 - l);
  }
  ref /= 30.0;
  CHECK(std::abs(train::ce_loss(g.constant(llr), bits).value()[0] - ref) < 1e-12);
  CHECK_THROWS_AS(train::ce_loss(g.constant(ad::Tensor({1, 3, 5})), bits), ShapeError);
}

TEST_CASE("papr_penalty") {
  ad::Graph g;
  // one active subcarrier per symbol: constant envelope
  std::vector<std::vector<cd>> single(3, std::vector<cd>(16, 0.0));
  for (std::size_t s = 0; s < 3; ++s) single[s][s + 2] = std::polar(1.0, 0.3 * s);
  CHECK(train::papr_penalty(g, g.constant(grid_tensor(single)), 1.0, 4).value()[0] == doctest::Approx(0.0).epsilon(1e-12));

  std::mt19937_64 rng(12);
  std::vector<std::vector<cd>> qpsk(6, std::vector<cd>(72));
  for (auto& row : qpsk)
    for (auto& v : row) v = cd((rng() & 1) ? 1 : -1, (rng() & 1) ? 1 : -1) / std::sqrt(2.0);
  ad::Var tx = g.constant(grid_tensor(qpsk));
  CHECK(train::papr_penalty(g, tx, std::numeric_limits<double>::infinity(), 4).value()[0] == 0.0);
  for (double eps_db : {0.0, 3.0, 6.0}) {
    const double eps = std::pow(10.0, eps_db / 10.0);
    const double got = train::papr_penalty(g, tx, eps, 4).value()[0];
    CHECK(std::abs(got - penalty_oracle(qpsk, eps, 4)) < 1e-12);
  }
  CHECK(train::papr_penalty(g, tx, 1.0, 4).value()[0] > 0.0);
}

TEST_CASE("aug_lagrangian") {
  ad::Graph g;
  auto s = [&](double v) { return g.constant(ad::Tensor::scalar(v)); };
  CHECK(train::aug_lagrangian(s(0.7), s(0.0), 3.0, 0.1).value()[0] == 0.7);
  CHECK(train::aug_lagrangian(s(0.0), s(1.0), 0.0, 0.1).value()[0] == doctest::Approx(0.05).epsilon(1e-15));
  CHECK_THROWS_AS(train::aug_lagrangian(s(0.0), s(1.0), 0.0, 0.0), ContractError);
}

TEST_CASE("adam") {
  ad::ParameterSet p;
  p.add("w", ad::Partition::backbone, ad::Tensor({3}, std::vector<double>{1.0, -2.0, 0.5}));
  train::TrainState st;
  const auto before = p.get("w").value;
  train::adam_step(p, {{"w", ad::Tensor({3})}}, 0.1, st);
  CHECK(p.get("w").value == before);

  train::TrainState st2;
  train::adam_step(p, {{"w", ad::Tensor({3}, std::vector<double>{0.3, -5.0, 1e-3})}}, 0.01, st2);
  CHECK(p.get("w").value[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(p.get("w").value[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
  CHECK(p.get("w").value[2] == doctest::Approx(0.5 - 0.01).epsilon(1e-4));

  p.get("w").trainable = false;
  const auto frozen = p.get("w").value;
  train::adam_step(p, {{"w", ad::Tensor({3}, 1.0)}}, 0.01, st2);
  CHECK(p.get("w").value == frozen);
}

TEST_CASE("global norm clipping") {
  std::map<std::string, ad::Tensor> g{{"a", ad::Tensor({2}, std::vector<double>{3.0, 0.0})},
                                      {"b", ad::Tensor({1}, std::vector<double>{4.0})}};
  CHECK(train::clip_global_norm(g, 10.0) == 5.0);
  CHECK(g["a"][0] == 3.0);
  CHECK(train::clip_global_norm(g, 1.0) == 5.0);
  CHECK(g["a"][0] == doctest::Approx(0.6));
  CHECK(g["b"][0] == doctest::Approx(0.8));
}

TEST_CASE("end-to-end gradient matches finite differences") {
  auto cfg = tiny();
  cfg.papr_target_db = 2.0;
  cfg.batch = 2;
  auto model = train::init_model(cfg);
  model.state.lambda = 0.3;
  model.state.mu = 0.7;
  // move away from the zero-initialized adapter output so every path carries gradient
  std::mt19937_64 rng(2);
  for (auto& p : model.params.items())
    if (p.name.ends_with(".up")) p.value = testing::random_tensor(p.value.shape(), rng, -0.3, 0.3);
  const auto batch = train::draw_batch(cfg, 0);
  const double err = testing::param_gradcheck(model.params, [&](ad::Graph& g) { return train::batch_loss(g, model, batch).loss; }, 6);
  MESSAGE("worst relative error ", err);
  CHECK(err <= 1e-4);
}

TEST_CASE("per-slot accumulation equals the single-graph gradient") {
  auto cfg = tiny();
  cfg.papr_target_db = 2.0;
  auto model = train::init_model(cfg);
  model.state.lambda = 0.4;
  model.state.mu = 2.0;
  const auto batch = train::draw_batch(cfg, 3);

  ad::Graph g;
  auto terms = train::batch_loss(g, model, batch);
  g.backward(terms.loss);
  const auto ref = g.parameter_gradients();
  const auto bg = train::batch_gradient(model, batch);
  CHECK(bg.lp > 0.0);
  CHECK(std::abs(bg.loss - terms.loss.value()[0]) < 1e-12);
  CHECK(std::abs(bg.lp - terms.lp.value()[0]) < 1e-12);
  REQUIRE(bg.grads.size() == ref.size());
  double worst = 0.0;
  for (const auto& [name, t] : ref)
    for (std::size_t i = 0; i < t.size(); ++i) worst = std::max(worst, std::abs(t[i] - bg.grads.at(name)[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("batch sampling") {
  auto cfg = tiny();
  cfg.receiver.max_order = 6;
  cfg.orders = {2, 4, 6};
  cfg.batch = 16;
  std::map<int, int> seen;
  for (std::size_t step = 0; step < 300; ++step) {
    const auto b = train::draw_batch(cfg, step);
    for (const auto& s : b) {
      CHECK(s.order == b[0].order);
      CHECK(s.ebno_db >= -10.0);
      CHECK(s.ebno_db <= 5.0);
    }
    ++seen[b[0].order];
  }
  for (int m : {2, 4, 6}) CHECK(seen[m] > 70);
  CHECK(train::draw_batch(cfg, 5)[3].seed == train::draw_batch(cfg, 5)[3].seed);
  CHECK(train::draw_batch(cfg, 5)[3].seed != train::draw_batch(cfg, 6)[3].seed);
}

TEST_CASE("multiplier schedule") {
  auto cfg = tiny();
  auto model = train::init_model(cfg);
  const auto init = model.params.items();
  for (std::size_t k = 1; k <= 2500; ++k) {
    train::run(model, 1, 0, cfg.lr);
    CHECK(model.state.mu == 0.1 * std::pow(1.004, double(k)));
    CHECK(model.state.lambda == 0.0);
  }
  CHECK(model.state.step == 0);
  for (std::size_t i = 0; i < init.size(); ++i) CHECK(model.params.items()[i].value == init[i].value);

  cfg.papr_target_db = 1.0;
  auto con = train::init_model(cfg);
  double prev = 0.0;
  for (int k = 0; k < 20; ++k) {
    train::run(con, 1, 0, cfg.lr);
    CHECK(con.state.lambda >= prev);
    CHECK(con.state.last_lp > 0.0);
    prev = con.state.lambda;
  }
  CHECK(prev > 0.0);
}

TEST_CASE("K=1, T=0 leaves parameters at initialization") {
  auto cfg = tiny();
  cfg.outer = 1;
  cfg.inner = 0;
  cfg.papr_target_db = 4.0;
  const auto init = train::init_model(cfg);
  const auto out = train::train(cfg);
  for (std::size_t i = 0; i < init.params.items().size(); ++i)
    CHECK(out.params.items()[i].value == init.params.items()[i].value);
  CHECK(out.state.outer == 1);
  CHECK(out.state.mu == 0.1 * 1.004);
}

TEST_CASE("training is deterministic and logs every update") {
  auto cfg = tiny();
  cfg.outer = 2;
  cfg.inner = 3;
  cfg.papr_target_db = 5.0;
  std::stringstream log;
  const auto a = train::train(cfg, &log);
  const auto b = train::train(cfg);
  for (std::size_t i = 0; i < a.params.items().size(); ++i) CHECK(a.params.items()[i].value == b.params.items()[i].value);
  CHECK(a.state.lambda == b.state.lambda);
  std::string line;
  int updates = 0;
  while (std::getline(log, line)) updates += line.find("\"grad_norm\"") != std::string::npos;
  CHECK(updates == 6);
}

TEST_CASE("unconstrained training reduces held-out CE") {
  auto cfg = tiny();
  cfg.profile = "awgn";
  cfg.ebno_min_db = 0.0;
  cfg.ebno_max_db = 10.0;
  cfg.batch = 8;
  cfg.outer = 50;
  cfg.inner = 10;
  const std::uint64_t seed = 99;
  auto init = train::init_model(cfg);
  const double before = train::heldout_ce(init, 64, seed);
  auto model = train::train(cfg);
  const double after = train::heldout_ce(model, 64, seed);
  MESSAGE("held-out CE ", before, " -> ", after);
  CHECK(model.state.lambda == 0.0);
  CHECK(after <= 0.5 * before);
}

TEST_CASE("fine-tuning partitions") {
  auto cfg = tiny();
  cfg.outer = 2;
  cfg.inner = 4;
  const auto pre = train::train(cfg);

  train::FinetuneOptions opt;
  opt.mode = nrx::Mode::adapter_only;
  opt.profile = "tdl-c";
  opt.budget = 3;
  const auto ad_only = train::finetune(pre, opt);
  CHECK(ad_only.state.step == pre.state.step + 3);
  CHECK(same_partition(pre.params, ad_only.params, ad::Partition::backbone));
  CHECK_FALSE(same_partition(pre.params, ad_only.params, ad::Partition::adapter));

  opt.mode = nrx::Mode::full;
  const auto full = train::finetune(pre, opt);
  for (std::size_t i = 0; i < pre.params.items().size(); ++i) CHECK(full.params.items()[i].value != pre.params.items()[i].value);

  auto no_adapters = cfg;
  no_adapters.receiver.adapters = false;
  no_adapters.outer = 0;
  opt.mode = nrx::Mode::adapter_only;
  CHECK_THROWS_AS(train::finetune(train::train(no_adapters), opt), ConfigError);

  opt.budget = 0;
  opt.mode = nrx::Mode::adapter_only;
  CHECK(train::finetune(pre, opt).state.step == pre.state.step + 2);
}

TEST_CASE("adapter-only fine-tuning helps on a shifted profile") {
  auto cfg = tiny();
  cfg.profile = "awgn";
  cfg.ebno_min_db = 0.0;
  cfg.ebno_max_db = 10.0;
  cfg.batch = 8;
  cfg.outer = 30;
  cfg.inner = 10;
  const auto pre = train::train(cfg);

  train::FinetuneOptions opt;
  opt.mode = nrx::Mode::adapter_only;
  opt.profile = "flat";
  opt.budget = 100;
  auto tuned = train::finetune(pre, opt);
  auto untuned = pre;
  untuned.config.profile = "flat";
  const double before = train::heldout_ce(untuned, 64, 5);
  const double after = train::heldout_ce(tuned, 64, 5);
  MESSAGE("shifted-profile CE ", before, " -> ", after);
  CHECK(after < before);
  CHECK(same_partition(pre.params, tuned.params, ad::Partition::backbone));
}
