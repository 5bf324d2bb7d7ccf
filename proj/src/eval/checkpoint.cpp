#include "e2e/eval/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "e2e/error.hpp"
#include "e2e/eval/config.hpp"

namespace e2e::eval {

namespace {

constexpr char kMagic[8] = {'E', '2', 'E', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kByteOrderMark = 0x01020304;

void put_le(std::ostream& os, std::uint64_t v, int bytes) {
  char buf[8];
  for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, bytes);
}

std::uint64_t get_le(std::istream& is, int bytes) {
  unsigned char buf[8] = {};
  if (!is.read(reinterpret_cast<char*>(buf), bytes)) throw FormatError("checkpoint: truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

struct Entry {
  const ad::Tensor* tensor;
  Json meta;
};

Json shape_json(const ad::Shape& s) { return Json(s); }

ad::Shape shape_from(const Json& j) {
  ad::Shape s;
  for (const auto& d : j) s.push_back(d.get<std::size_t>());
  return s;
}

}  // namespace

void save_checkpoint(const train::Model& model, std::ostream& os) {
  std::vector<Entry> entries;
  std::size_t offset = 0;
  auto add = [&](const ad::Tensor& t, Json meta) {
    meta["shape"] = shape_json(t.shape());
    meta["offset"] = offset;
    offset += t.size();
    entries.push_back({&t, std::move(meta)});
  };
  for (const auto& p : model.params.items()) {
    add(p.value, Json{{"name", p.name}, {"kind", "param"}, {"partition", ad::to_string(p.partition)}, {"trainable", p.trainable}});
  }
  for (const auto& [name, t] : model.state.m) add(t, Json{{"name", name}, {"kind", "adam_m"}});
  for (const auto& [name, t] : model.state.v) add(t, Json{{"name", name}, {"kind", "adam_v"}});

  const auto& st = model.state;
  Json manifest;
  manifest["format"] = "e2e-checkpoint";
  manifest["config"] = to_json(model.config);
  manifest["config_hash"] = config_hash(model.config);
  manifest["state"] = {{"lambda", st.lambda}, {"mu", st.mu},         {"tau", st.tau},        {"outer", st.outer},
                       {"step", st.step},     {"adam_t", st.adam_t}, {"last_lp", st.last_lp}};
  manifest["tensors"] = Json::array();
  for (const auto& e : entries) manifest["tensors"].push_back(e.meta);
  manifest["total_values"] = offset;
  const std::string text = manifest.dump(1);

  os.write(kMagic, sizeof kMagic);
  put_le(os, kCheckpointVersion, 4);
  put_le(os, kByteOrderMark, 4);
  put_le(os, text.size(), 8);
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& e : entries)
    for (double d : e.tensor->data()) put_le(os, std::bit_cast<std::uint64_t>(d), 8);
  if (!os) throw Error("checkpoint: write failed");
}

train::Model load_checkpoint(std::istream& is) {
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw FormatError("checkpoint: bad magic (not an e2e checkpoint)");
  }
  const auto version = get_le(is, 4);
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported format version " + std::to_string(version) + " (this build reads " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  if (get_le(is, 4) != kByteOrderMark) throw FormatError("checkpoint: bad byte-order mark");
  const auto len = get_le(is, 8);
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw FormatError("checkpoint: truncated manifest");

  Json manifest;
  try {
    manifest = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string("checkpoint: manifest is not valid JSON: ") + e.what());
  }

  train::Model model;
  try {
    model.config = train_config_from_json(manifest.at("config"));
    if (manifest.at("config_hash").get<std::string>() != config_hash(model.config)) {
      throw FormatError("checkpoint: config hash mismatch");
    }
    const auto& s = manifest.at("state");
    model.state.lambda = s.at("lambda").get<double>();
    model.state.mu = s.at("mu").get<double>();
    model.state.tau = s.at("tau").get<double>();
    model.state.outer = s.at("outer").get<std::size_t>();
    model.state.step = s.at("step").get<std::size_t>();
    model.state.adam_t = s.at("adam_t").get<std::size_t>();
    model.state.last_lp = s.at("last_lp").get<double>();

    const auto total = manifest.at("total_values").get<std::size_t>();
    std::vector<double> data(total);
    for (auto& d : data) {
      unsigned char buf[8];
      if (!is.read(reinterpret_cast<char*>(buf), 8)) throw FormatError("checkpoint: truncated tensor data");
      std::uint64_t v = 0;
      for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
      d = std::bit_cast<double>(v);
    }
    for (const auto& t : manifest.at("tensors")) {
      const ad::Shape shape = shape_from(t.at("shape"));
      const auto off = t.at("offset").get<std::size_t>();
      const auto n = ad::shape_size(shape);
      if (off + n > total) throw FormatError("checkpoint: tensor '" + t.at("name").get<std::string>() + "' out of range");
      ad::Tensor value(shape, std::vector<double>(data.begin() + off, data.begin() + off + n));
      const auto name = t.at("name").get<std::string>();
      const auto kind = t.at("kind").get<std::string>();
      if (kind == "param") {
        auto& p = model.params.add(name, ad::partition_from_string(t.at("partition").get<std::string>()), std::move(value));
        p.trainable = t.at("trainable").get<bool>();
      } else if (kind == "adam_m") {
        model.state.m.emplace(name, std::move(value));
      } else if (kind == "adam_v") {
        model.state.v.emplace(name, std::move(value));
      } else {
        throw FormatError("checkpoint: unknown tensor kind '" + kind + "'");
      }
    }
  } catch (const Json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: bad config: ") + e.what());
  }
  return model;
}

void save_checkpoint(const train::Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  save_checkpoint(model, out);
}

train::Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return fnv1a(ss.str());
}

std::uint64_t partition_hash(const ad::ParameterSet& params, ad::Partition partition) {
  std::string bytes;
  for (const auto& p : params.items()) {
    if (p.partition != partition) continue;
    bytes += p.name;
    bytes.push_back('\0');
    const auto d = p.value.data();
    bytes.append(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(double));
  }
  return fnv1a(bytes);
}

}  // namespace e2e::eval
