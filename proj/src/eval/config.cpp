#include "e2e/eval/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "e2e/error.hpp"

namespace e2e::eval {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw ConfigError("config key '" + key + "': " + what);
}

double as_double(const Json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "none") return std::numeric_limits<double>::infinity();
  }
  bad(key, "expected a number, got " + v.dump());
}

double as_finite(const Json& v, const std::string& key) {
  const double d = as_double(v, key);
  if (!std::isfinite(d)) bad(key, "expected a finite number");
  return d;
}

std::uint64_t as_uint(const Json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  bad(key, "expected a non-negative integer, got " + v.dump());
}

int as_int(const Json& v, const std::string& key) {
  if (v.is_number_integer()) return v.get<int>();
  bad(key, "expected an integer, got " + v.dump());
}

bool as_bool(const Json& v, const std::string& key) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "true" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "no" || s == "off") return false;
  }
  bad(key, "expected true or false, got " + v.dump());
}

std::string as_string(const Json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  bad(key, "expected a string, got " + v.dump());
}

Json as_array(const Json& v, const std::string& key) {
  if (v.is_array()) return v;
  if (v.is_number()) return Json::array({v});
  if (v.is_string()) {
    Json out = Json::array();
    std::stringstream ss(v.get<std::string>());
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        out.push_back(Json::parse(item));
      } catch (const Json::parse_error&) {
        bad(key, "list item '" + item + "' is not a number");
      }
    }
    return out;
  }
  bad(key, "expected a list, got " + v.dump());
}

std::vector<int> as_int_list(const Json& v, const std::string& key) {
  std::vector<int> out;
  for (const auto& x : as_array(v, key)) out.push_back(as_int(x, key));
  if (out.empty()) bad(key, "list must not be empty");
  return out;
}

std::vector<double> as_double_list(const Json& v, const std::string& key) {
  std::vector<double> out;
  for (const auto& x : as_array(v, key)) out.push_back(as_finite(x, key));
  if (out.empty()) bad(key, "list must not be empty");
  return out;
}

Json double_json(double d) { return std::isinf(d) ? Json("inf") : Json(d); }

template <class C>
struct Field {
  const char* key;
  std::function<void(C&, const Json&, const std::string&)> set;
  std::function<Json(const C&)> get;  // empty for set-only aliases
};

#define E2E_DOUBLE(name, member)                                                                         \
  Field<C> {                                                                                             \
    name, [](C& c, const Json& v, const std::string& k) { c.member = as_double(v, k); },               \
        [](const C& c) { return double_json(c.member); }                                                 \
  }
#define E2E_UINT(name, member)                                                                                       \
  Field<C> {                                                                                                         \
    name, [](C& c, const Json& v, const std::string& k) { c.member = static_cast<decltype(c.member)>(as_uint(v, k)); }, \
        [](const C& c) { return Json(c.member); }                                                                    \
  }
#define E2E_INT(name, member) \
  Field<C> { name, [](C& c, const Json& v, const std::string& k) { c.member = as_int(v, k); }, [](const C& c) { return Json(c.member); } }
#define E2E_BOOL(name, member) \
  Field<C> { name, [](C& c, const Json& v, const std::string& k) { c.member = as_bool(v, k); }, [](const C& c) { return Json(c.member); } }
#define E2E_STRING(name, member)                                                                   \
  Field<C> {                                                                                       \
    name, [](C& c, const Json& v, const std::string& k) { c.member = as_string(v, k); },         \
        [](const C& c) { return Json(c.member); }                                                  \
  }

const std::vector<Field<train::TrainConfig>>& train_fields() {
  using C = train::TrainConfig;
  static const std::vector<Field<C>> fields = {
      {"receiver.preset",
       [](C& c, const Json& v, const std::string& k) {
         const auto s = as_string(v, k);
         if (s == "desk") c.receiver = nrx::ReceiverConfig::desk();
         else if (s == "paper") c.receiver = nrx::ReceiverConfig::paper_scale();
         else bad(k, "expected desk or paper");
       },
       {}},
      E2E_UINT("receiver.rx_antennas", receiver.rx_antennas),
      E2E_UINT("receiver.symbols", receiver.symbols),
      E2E_UINT("receiver.subcarriers", receiver.subcarriers),
      E2E_UINT("receiver.channels", receiver.channels),
      E2E_INT("receiver.max_order", receiver.max_order),
      {"receiver.num_blocks",
       [](C& c, const Json& v, const std::string& k) { c.receiver.blocks = nrx::ReceiverConfig::reference_blocks(as_uint(v, k)); },
       {}},
      {"receiver.blocks",
       [](C& c, const Json& v, const std::string& k) {
         if (!v.is_array()) bad(k, "expected a list of [kh, kw, dh, dw]");
         c.receiver.blocks.clear();
         for (const auto& b : v) {
           if (!b.is_array() || b.size() != 4) bad(k, "each block is [kh, kw, dh, dw]");
           c.receiver.blocks.push_back({as_uint(b[0], k), as_uint(b[1], k), {as_uint(b[2], k), as_uint(b[3], k)}});
         }
       },
       [](const C& c) {
         Json a = Json::array();
         for (const auto& b : c.receiver.blocks) a.push_back({b.kh, b.kw, b.dilation.h, b.dilation.w});
         return a;
       }},
      E2E_BOOL("receiver.adapters", receiver.adapters),
      E2E_UINT("receiver.reduction", receiver.reduction),
      E2E_UINT("receiver.adapter_kernel", receiver.adapter_kernel),
      E2E_UINT("receiver.af_hidden", receiver.af_hidden),
      E2E_DOUBLE("receiver.ln_eps", receiver.ln_eps),
      E2E_DOUBLE("receiver.mask_init", receiver.mask_init),
      E2E_UINT("batch", batch),
      E2E_UINT("outer", outer),
      E2E_UINT("inner", inner),
      E2E_DOUBLE("lr", lr),
      E2E_DOUBLE("finetune_lr", finetune_lr),
      E2E_DOUBLE("constellation_lr_scale", constellation_lr_scale),
      E2E_DOUBLE("papr_target_db", papr_target_db),
      E2E_UINT("oversampling", oversampling),
      E2E_DOUBLE("lambda0", lambda0),
      E2E_DOUBLE("mu0", mu0),
      E2E_DOUBLE("tau", tau),
      E2E_DOUBLE("ebno_min_db", ebno_min_db),
      E2E_DOUBLE("ebno_max_db", ebno_max_db),
      E2E_DOUBLE("code_rate", code_rate),
      {"orders", [](C& c, const Json& v, const std::string& k) { c.orders = as_int_list(v, k); },
       [](const C& c) { return Json(c.orders); }},
      {"mode", [](C& c, const Json& v, const std::string& k) { c.mode = nrx::mode_from_string(as_string(v, k)); },
       [](const C& c) { return Json(nrx::to_string(c.mode)); }},
      E2E_BOOL("train_constellation", train_constellation),
      E2E_STRING("profile", profile),
      E2E_DOUBLE("speed_kmh", speed_kmh),
      E2E_DOUBLE("carrier_hz", carrier_hz),
      E2E_DOUBLE("delay_spread", delay_spread),
      E2E_DOUBLE("subcarrier_spacing", subcarrier_spacing),
      E2E_UINT("cp", cp),
      E2E_DOUBLE("clip_norm", clip_norm),
      E2E_UINT("papr_batch", papr_batch),
      E2E_UINT("seed", seed),
  };
  return fields;
}

const std::vector<Field<EvalConfig>>& eval_fields() {
  using C = EvalConfig;
  static const std::vector<Field<C>> fields = {
      E2E_STRING("mode", mode),
      {"ebno_db", [](C& c, const Json& v, const std::string& k) { c.ebno_db = as_double_list(v, k); },
       [](const C& c) { return Json(c.ebno_db); }},
      E2E_INT("order", order),
      {"orders", [](C& c, const Json& v, const std::string& k) { c.orders = as_int_list(v, k); },
       [](const C& c) { return Json(c.orders); }},
      E2E_DOUBLE("bler_target", bler_target),
      E2E_STRING("profile", profile),
      E2E_DOUBLE("speed_kmh", speed_kmh),
      E2E_DOUBLE("carrier_hz", carrier_hz),
      E2E_DOUBLE("delay_spread", delay_spread),
      E2E_DOUBLE("subcarrier_spacing", subcarrier_spacing),
      E2E_UINT("rx_antennas", rx_antennas),
      E2E_UINT("symbols", symbols),
      E2E_UINT("subcarriers", subcarriers),
      E2E_STRING("pilot_layout", pilot_layout),
      E2E_UINT("cp", cp),
      E2E_DOUBLE("noise_mismatch", noise_mismatch),
      E2E_DOUBLE("clip_rate", clip_rate),
      E2E_UINT("max_bits", max_bits),
      E2E_UINT("max_errors", max_errors),
      E2E_DOUBLE("slots_per_second", slots_per_second),
      E2E_INT("ldpc_iters", ldpc_iters),
      E2E_UINT("ldpc_seed", ldpc_seed),
      E2E_STRING("ldpc_cache", ldpc_cache),
      E2E_UINT("pilot_seed", pilot_seed),
      E2E_UINT("papr_slots", papr_slots),
      E2E_UINT("oversampling", oversampling),
      {"papr_thresholds_db", [](C& c, const Json& v, const std::string& k) { c.papr_thresholds_db = as_double_list(v, k); },
       [](const C& c) { return Json(c.papr_thresholds_db); }},
      E2E_UINT("seed", seed),
  };
  return fields;
}

#undef E2E_DOUBLE
#undef E2E_UINT
#undef E2E_INT
#undef E2E_BOOL
#undef E2E_STRING

template <class C>
void apply_field(const std::vector<Field<C>>& fields, C& c, const std::string& key, const std::string& shown,
                 const Json& value) {
  for (const auto& f : fields) {
    if (key == f.key) {
      f.set(c, value, shown);
      return;
    }
  }
  throw ConfigError("unknown config key '" + shown + "'");
}

template <class C>
Json dump_fields(const std::vector<Field<C>>& fields, const C& c) {
  Json j = Json::object();
  for (const auto& f : fields)
    if (f.get) j[f.key] = f.get(c);
  return j;
}

void flatten(const Json& j, const std::string& prefix, Layer& out) {
  for (const auto& [k, v] : j.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) flatten(v, key, out);
    else out.emplace_back(key, v);
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

Json parse_value(const std::string& raw) {
  const std::string v = trim(raw);
  try {
    return Json::parse(v);
  } catch (const Json::parse_error&) {
    return Json(v);
  }
}

}  // namespace

void EvalConfig::validate() const {
  if (mode != "neural" && mode != "baseline" && mode != "perfect-csi") {
    throw ConfigError("eval.mode must be neural, baseline or perfect-csi (got '" + mode + "')");
  }
  if (pilot_layout != "none" && pilot_layout != "2sym") throw ConfigError("eval.pilot_layout must be none or 2sym");
  if (mode == "baseline" && pilot_layout == "none") {
    throw ConfigError("baseline receiver needs pilots: set eval.pilot_layout=2sym");
  }
  if (ebno_db.empty()) throw ConfigError("eval.ebno_db must not be empty");
  if (order < 1 || order > 12) throw ConfigError("eval.order must lie in [1, 12]");
  if (!(noise_mismatch > 0.0)) throw ConfigError("eval.noise_mismatch must be positive");
  if (clip_rate < 0.0) throw ConfigError("eval.clip_rate must be non-negative");
  if (max_bits == 0 || max_errors == 0) throw ConfigError("eval.max_bits and eval.max_errors must be positive");
  if (!(bler_target >= 0.0 && bler_target <= 1.0)) throw ConfigError("eval.bler_target must lie in [0, 1]");
  if (cp >= subcarriers) throw ConfigError("eval.cp must be shorter than the symbol");
  if (oversampling == 0 || papr_slots == 0) throw ConfigError("eval.oversampling and eval.papr_slots must be positive");
  if (ldpc_iters < 1) throw ConfigError("eval.ldpc_iters must be positive");
}

Layer parse_layer(std::string_view text) {
  Layer out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') {
    Json j;
    try {
      j = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    flatten(j, "", out);
    return out;
  }
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(key, parse_value(line.substr(eq + 1)));
  }
  return out;
}

Layer read_layer(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_layer(ss.str());
}

std::pair<std::string, Json> parse_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + text + "'");
  return {trim(text.substr(0, eq)), parse_value(text.substr(eq + 1))};
}

void apply(train::TrainConfig& config, const std::string& key, const Json& value) {
  apply_field(train_fields(), config, key, key, value);
}

void apply(EvalConfig& config, const std::string& key, const Json& value) {
  apply_field(eval_fields(), config, key, "eval." + key, value);
}

void apply(const Layer& layer, train::TrainConfig& train, EvalConfig& eval) {
  for (const auto& [key, value] : layer) {
    if (key.starts_with("eval.")) apply(eval, key.substr(5), value);
    else apply(train, key, value);
  }
}

bool has_key(const Layer& layer, const std::string& key) {
  for (const auto& [k, v] : layer)
    if (k == key) return true;
  return false;
}

Json to_json(const train::TrainConfig& config) { return dump_fields(train_fields(), config); }
Json to_json(const EvalConfig& config) { return dump_fields(eval_fields(), config); }

train::TrainConfig train_config_from_json(const Json& j) {
  train::TrainConfig c;
  Layer layer;
  flatten(j, "", layer);
  for (const auto& [k, v] : layer) apply(c, k, v);
  return c;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const train::TrainConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(config).dump())));
  return buf;
}

}  // namespace e2e::eval
