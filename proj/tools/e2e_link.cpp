#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "e2e/constellation/constellation.hpp"
#include "e2e/error.hpp"
#include "e2e/eval/checkpoint.hpp"
#include "e2e/eval/config.hpp"
#include "e2e/eval/evaluate.hpp"
#include "e2e/runtime.hpp"

namespace fs = std::filesystem;
using namespace e2e;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::string checkpoint;
  std::string mode;
  std::string ebno;
  std::optional<double> speed;
  std::string profile;
  std::string pilot_layout;
  std::optional<std::size_t> cp;
  std::optional<double> noise_mismatch;
  std::optional<double> clip_rate;
  std::optional<int> order;
  std::string orders;
  std::optional<std::size_t> budget;
  std::vector<std::string> set;
};

struct Setup {
  train::TrainConfig train;
  eval::EvalConfig eval;
  eval::Layer layer;  // file layer followed by command-line overrides
};

Setup configure(const Options& o, const std::string& verb) {
  Setup s;
  if (!o.config.empty()) s.layer = eval::read_layer(o.config);
  auto put = [&](const std::string& key, eval::Json v) { s.layer.emplace_back(key, std::move(v)); };
  if (o.seed) {
    put("seed", *o.seed);
    put("eval.seed", *o.seed);
  }
  if (!o.ebno.empty()) put("eval.ebno_db", o.ebno);
  if (o.speed) put("eval.speed_kmh", *o.speed);
  if (!o.profile.empty()) put("eval.profile", o.profile);
  if (!o.pilot_layout.empty()) put("eval.pilot_layout", o.pilot_layout);
  if (o.cp) put("eval.cp", *o.cp);
  if (o.noise_mismatch) put("eval.noise_mismatch", *o.noise_mismatch);
  if (o.clip_rate) put("eval.clip_rate", *o.clip_rate);
  if (o.order) put("eval.order", *o.order);
  if (!o.orders.empty()) put("eval.orders", o.orders);
  if (!o.mode.empty() && verb == "evaluate") put("eval.mode", o.mode);
  if (verb == "train") {
    if (o.speed) put("speed_kmh", *o.speed);
    if (!o.profile.empty()) put("profile", o.profile);
    if (!o.mode.empty()) put("mode", o.mode);
  }
  for (const auto& a : o.set) s.layer.push_back(eval::parse_assignment(a));
  eval::apply(s.layer, s.train, s.eval);
  return s;
}

fs::path out_path(const Options& o, const std::string& name) {
  fs::create_directories(o.out_dir);
  return fs::path(o.out_dir) / name;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw Error("cannot write " + p.string());
  return os;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

train::Model need_checkpoint(const Options& o) {
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  return eval::load_checkpoint(fs::path(o.checkpoint));
}

void write_sweep(const Options& o, const std::string& stem, const eval::SweepResult& r) {
  auto csv = open_out(out_path(o, stem + ".csv"));
  eval::write_csv(csv, r);
  auto js = open_out(out_path(o, stem + ".json"));
  eval::write_json(js, r);
}

int cmd_train(const Options& o) {
  auto s = configure(o, "train");
  if (!eval::has_key(s.layer, "papr_target_db"))
    std::cerr << "notice: papr_target_db not set, training unconstrained (papr_target_db = inf)\n";
  s.train.validate();
  const auto ckpt = out_path(o, "checkpoint.e2e");
  auto log = open_out(out_path(o, "train_log.jsonl"));
  const auto model = train::train(s.train, &log);
  eval::save_checkpoint(model, ckpt);
  auto cfg = open_out(out_path(o, "train_config.json"));
  cfg << eval::to_json(s.train).dump(2) << '\n';
  std::cout << ckpt.string() << ' ' << hex(eval::file_hash(ckpt)) << '\n';
  return 0;
}

int cmd_finetune(const Options& o) {
  configure(o, "finetune");
  auto model = need_checkpoint(o);
  train::FinetuneOptions f;
  f.mode = o.mode.empty() ? nrx::Mode::adapter_only : nrx::mode_from_string(o.mode);
  f.profile = o.profile;
  if (o.speed) f.speed_kmh = *o.speed;
  if (o.budget) f.budget = *o.budget;
  const auto ckpt = out_path(o, "finetuned.e2e");
  auto log = open_out(out_path(o, "finetune_log.jsonl"));
  const auto tuned = train::finetune(std::move(model), f, &log);
  eval::save_checkpoint(tuned, ckpt);
  std::cout << ckpt.string() << ' ' << hex(eval::file_hash(ckpt)) << '\n';
  return 0;
}

int cmd_evaluate(const Options& o) {
  auto s = configure(o, "evaluate");
  std::optional<train::Model> model;
  if (s.eval.mode == "neural") model = need_checkpoint(o);
  const auto r = eval::evaluate(s.eval, model ? &*model : nullptr);
  write_sweep(o, "sweep", r);
  eval::write_csv(std::cout, r);
  return 0;
}

int cmd_papr(const Options& o) {
  auto s = configure(o, "papr");
  std::vector<constellation::cd> points;
  int max_order = s.eval.order;
  std::size_t symbols = s.eval.symbols, subcarriers = s.eval.subcarriers;
  eval::Json source = "qam";
  if (!o.checkpoint.empty()) {
    const auto model = need_checkpoint(o);
    points = eval::model_constellation(model);
    max_order = model.config.receiver.max_order;
    symbols = model.config.receiver.symbols;
    subcarriers = model.config.receiver.subcarriers;
    source = {{"checkpoint_hash", hex(eval::file_hash(o.checkpoint))}};
    if (s.eval.order > max_order) throw ConfigError("eval.order exceeds the checkpoint's max_order");
  } else {
    points = constellation::Constellation::qam(max_order).normalized();
  }
  const auto samples = eval::papr_samples(points, max_order, s.eval.order, s.eval.papr_slots, symbols, subcarriers,
                                          s.eval.oversampling, s.eval.clip_rate, s.eval.seed);
  const auto c = eval::ccdf(samples, s.eval.papr_thresholds_db);
  auto csv = open_out(out_path(o, "papr_ccdf.csv"));
  eval::Json rows = eval::Json::array();
  csv << "threshold_db,ccdf\n";
  for (std::size_t i = 0; i < c.size(); ++i) {
    char line[64];
    std::snprintf(line, sizeof line, "%.17g,%.17g\n", s.eval.papr_thresholds_db[i], c[i]);
    csv << line;
    std::cout << line;
    rows.push_back({{"threshold_db", s.eval.papr_thresholds_db[i]}, {"ccdf", c[i]}});
  }
  eval::Json j;
  j["config"] = eval::to_json(s.eval);
  j["source"] = source;
  j["samples"] = samples.size();
  j["rows"] = rows;
  auto js = open_out(out_path(o, "papr_ccdf.json"));
  js << j.dump(2) << '\n';
  return 0;
}

int cmd_export(const Options& o) {
  auto s = configure(o, "export-constellation");
  const auto model = need_checkpoint(o);
  const int max_order = model.config.receiver.max_order;
  const auto points = eval::model_constellation(model);
  std::vector<int> orders = s.eval.orders;
  if (o.orders.empty()) {
    orders.clear();
    for (int m = 1; m <= max_order; ++m) orders.push_back(m);
  }
  auto all = open_out(out_path(o, "constellation.txt"));
  for (int m : orders) {
    if (m < 1 || m > max_order) throw ConfigError("order " + std::to_string(m) + " is outside 1.." + std::to_string(max_order));
    const auto view = constellation::subset(points, max_order, m);
    auto f = open_out(out_path(o, "constellation_M" + std::to_string(m) + ".txt"));
    constellation::write_table(f, view);
    constellation::write_table(all, view);
  }
  std::cout << out_path(o, "constellation.txt").string() << '\n';
  return 0;
}

int cmd_link_adapt(const Options& o) {
  auto s = configure(o, "link-adapt");
  auto model = need_checkpoint(o);
  s.eval.mode = "neural";
  std::vector<eval::SweepResult> per;
  for (int m : s.eval.orders) {
    auto e = s.eval;
    e.order = m;
    per.push_back(eval::evaluate(e, &model));
    write_sweep(o, "sweep_M" + std::to_string(m), per.back());
  }
  const auto choice = eval::select_orders(per, s.eval.bler_target);
  auto csv = open_out(out_path(o, "link_adapt.csv"));
  eval::Json rows = eval::Json::array();
  const char* header = "ebno_db,order,bler,throughput_bps,met_target\n";
  csv << header;
  std::cout << header;
  for (const auto& c : choice) {
    char line[128];
    std::snprintf(line, sizeof line, "%.17g,%d,%.17g,%.17g,%d\n", c.ebno_db, c.order, c.bler, c.throughput_bps,
                  c.met_target ? 1 : 0);
    csv << line;
    std::cout << line;
    rows.push_back({{"ebno_db", c.ebno_db},
                    {"order", c.order},
                    {"bler", c.bler},
                    {"throughput_bps", c.throughput_bps},
                    {"met_target", c.met_target}});
    if (!c.met_target)
      std::cerr << "warning: no order meets BLER " << s.eval.bler_target << " at " << c.ebno_db
                << " dB, reporting the lowest-BLER order\n";
  }
  eval::Json j;
  j["config"] = eval::to_json(s.eval);
  j["rows"] = rows;
  auto js = open_out(out_path(o, "link_adapt.json"));
  js << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Pilot-free OFDM link simulator with a trainable transmitter and neural receiver"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config, "key = value or JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "global seed");
  app.add_option("--out-dir", o.out_dir, "output directory");
  app.add_option("--checkpoint", o.checkpoint, "checkpoint file");
  app.add_option("--mode", o.mode, "evaluate: neural|baseline|perfect-csi; finetune: adapter_only|full");
  app.add_option("--ebno", o.ebno, "comma separated Eb/N0 list in dB");
  app.add_option("--speed", o.speed, "UE speed in km/h");
  app.add_option("--profile", o.profile, "channel profile");
  app.add_option("--pilot-layout", o.pilot_layout, "none|2sym");
  app.add_option("--cp", o.cp, "cyclic prefix length in samples");
  app.add_option("--noise-mismatch", o.noise_mismatch, "factor on the N0 given to the receiver");
  app.add_option("--clip-rate", o.clip_rate, "clipping level relative to rms, 0 disables");
  app.add_option("--order", o.order, "modulation order M");
  app.add_option("--orders", o.orders, "comma separated order list");
  app.add_option("--budget", o.budget, "fine-tuning updates");
  app.add_option("--set", o.set, "override key=value, repeatable");

  const std::vector<std::pair<std::string, int (*)(const Options&)>> verbs{
      {"train", cmd_train},     {"finetune", cmd_finetune},
      {"evaluate", cmd_evaluate}, {"papr", cmd_papr},
      {"export-constellation", cmd_export}, {"link-adapt", cmd_link_adapt}};
  for (const auto& [name, fn] : verbs) app.add_subcommand(name)->fallthrough();

  CLI11_PARSE(app, argc, argv);
  try {
    for (const auto& [name, fn] : verbs)
      if (app.got_subcommand(name)) return fn(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
