#pragma once

// Checkpoint files.
//
//   tinr-checkpoint
//   format-version <n>
//   kind <inr|factorized|ginr|mf>
//   meta <byte count>
//   <JSON metadata: config snapshot, shapes of things, counters>
//   tensors <count>
//   <records>
//   end <FNV-1a 64 of every preceding byte, 16 hex digits>
//
// A record is: u32 name length, name bytes, u32 rank, rank x u64 dims, then
// the values as IEEE-754 binary64, row-major. All integers and doubles are
// little-endian regardless of the host.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "tinr/baseline.hpp"
#include "tinr/config.hpp"
#include "tinr/encoding.hpp"
#include "tinr/error.hpp"
#include "tinr/field.hpp"
#include "tinr/ginr.hpp"
#include "tinr/inr.hpp"
#include "tinr/optim.hpp"
#include "tinr/tensor.hpp"

namespace tinr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// The raw container: kind, JSON metadata and named tensors in file order.
struct CheckpointFile {
  std::string kind;
  Json meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  void add(std::string name, Tensor t) { tensors.emplace_back(std::move(name), std::move(t)); }
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <class T>
void put_le(std::string& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t k = 0; k < sizeof(T); ++k) out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * k)) & 0xFF));
}

inline void put_f64(std::string& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

/// Bounds-checked little-endian reader; running off the end is corruption.
class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  std::size_t pos() const noexcept { return pos_; }
  bool at_end() const noexcept { return pos_ == bytes_.size(); }

  std::string_view take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) corrupt(std::string("truncated while reading ") + what);
    std::string_view out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  template <class T>
  T get_le(const char* what) {
    std::string_view b = take(sizeof(T), what);
    std::uint64_t v = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[k])) << (8 * k);
    return static_cast<T>(v);
  }

  double get_f64(const char* what) { return std::bit_cast<double>(get_le<std::uint64_t>(what)); }

  std::string_view line(const char* what) {
    const std::size_t nl = bytes_.find('\n', pos_);
    if (nl == std::string_view::npos) corrupt(std::string("truncated while reading ") + what);
    std::string_view out = bytes_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    return out;
  }

  /// "<key> <value>" header line; returns the value.
  std::string_view field(std::string_view key) {
    std::string_view l = line(std::string(key).c_str());
    if (l.substr(0, key.size()) != key || l.size() <= key.size() || l[key.size()] != ' ') {
      corrupt("expected header line '" + std::string(key) + " ...'");
    }
    return l.substr(key.size() + 1);
  }

  [[noreturn]] void corrupt(const std::string& why) const {
    throw FormatError(source_ + ": checkpoint is corrupted (" + why + ")");
  }

 private:
  std::string_view bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

inline std::uint64_t parse_count(std::string_view s, ByteReader& r, const char* what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) r.corrupt(std::string("bad ") + what + " '" + std::string(s) + "'");
  return v;
}

}  // namespace detail

inline std::string encode_checkpoint(const CheckpointFile& f) {
  std::string out = "tinr-checkpoint\nformat-version " + std::to_string(kCheckpointVersion) + "\nkind " + f.kind + "\n";
  const std::string meta = f.meta.dump();
  out += "meta " + std::to_string(meta.size()) + "\n" + meta + "\n";
  out += "tensors " + std::to_string(f.tensors.size()) + "\n";
  for (const auto& [name, t] : f.tensors) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) detail::put_le<std::uint64_t>(out, d);
    for (double v : t.values()) detail::put_f64(out, v);
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(detail::fnv1a(out)));
  out += "end " + std::string(hex) + "\n";
  return out;
}

inline CheckpointFile decode_checkpoint(std::string_view bytes, const std::string& source = "checkpoint") {
  detail::ByteReader r(bytes, source);
  if (bytes.substr(0, 16) != "tinr-checkpoint\n") {
    throw FormatError(source + ": not a checkpoint file (missing 'tinr-checkpoint' header)");
  }
  r.line("magic");
  const std::uint64_t version = detail::parse_count(r.field("format-version"), r, "format version");
  if (version != kCheckpointVersion) {
    throw FormatError(source + ": checkpoint format version " + std::to_string(version) +
                      " is not supported; this build reads version " + std::to_string(kCheckpointVersion));
  }
  CheckpointFile f;
  f.kind = std::string(r.field("kind"));
  const std::uint64_t meta_size = detail::parse_count(r.field("meta"), r, "metadata size");
  const std::string_view meta = r.take(meta_size, "metadata");
  if (r.take(1, "metadata") != "\n") r.corrupt("metadata is not terminated");
  try {
    f.meta = Json::parse(meta);
  } catch (const Json::parse_error&) {
    r.corrupt("metadata is not valid JSON");
  }
  const std::uint64_t count = detail::parse_count(r.field("tensors"), r, "tensor count");
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto name_len = r.get_le<std::uint32_t>("tensor name length");
    std::string name(r.take(name_len, "tensor name"));
    const auto rank = r.get_le<std::uint32_t>("tensor rank");
    if (rank > 2) r.corrupt("tensor '" + name + "' has rank " + std::to_string(rank));
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(r.get_le<std::uint64_t>("tensor shape"));
    std::size_t numel = 1;
    for (std::size_t d : shape) {
      if (d != 0 && numel > (bytes.size() / 8) / d) r.corrupt("tensor '" + name + "' is larger than the file");
      numel *= d;
    }
    std::vector<double> values(numel);
    for (double& v : values) v = r.get_f64("tensor data");
    f.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  const std::size_t body_end = r.pos();
  const std::string_view trailer = r.field("end");
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(detail::fnv1a(bytes.substr(0, body_end))));
  if (trailer != hex) r.corrupt("checksum mismatch");
  if (!r.at_end()) r.corrupt("trailing bytes after the end marker");
  return f;
}

inline void write_checkpoint_file(const CheckpointFile& f, const std::filesystem::path& path) {
  detail::write_text_file(path, encode_checkpoint(f));
}

inline CheckpointFile read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str(), path.string());
}

// ---------------------------------------------------------------------------
// Model-level checkpoints

using AnyModel = std::variant<InrModel, FactorizedModel, GinrState, MfModel>;

/// Everything a command needs to resume or query a trained model.
struct Checkpoint {
  RunConfig config;
  FieldDomain domain;
  AnyModel model;
  AdamState optimizer;             // single-model training (the GINR outer state lives in the model)
  std::vector<double> loss_tail;   // last logged losses, oldest first
  std::size_t steps_done = 0;
  std::vector<double> grid_x;      // mf: the grid the factors belong to
  std::vector<double> grid_t;

  ModelKind kind() const { return static_cast<ModelKind>(model.index()); }
};

static_assert(std::variant_size_v<AnyModel> == 4);

namespace detail {

/// Tensor lookup by name with clear errors for missing/extra records.
class TensorTable {
 public:
  TensorTable(std::vector<std::pair<std::string, Tensor>> records, std::string source) : source_(std::move(source)) {
    for (auto& [name, t] : records) {
      if (!table_.emplace(name, std::move(t)).second) {
        throw FormatError(source_ + ": checkpoint has duplicate tensor '" + name + "'");
      }
    }
  }

  Tensor take(const std::string& name) {
    auto it = table_.find(name);
    if (it == table_.end()) throw FormatError(source_ + ": checkpoint is missing tensor '" + name + "'");
    Tensor t = std::move(it->second);
    table_.erase(it);
    return t;
  }

  Tensor take(const std::string& name, const Shape& shape) {
    Tensor t = take(name);
    if (t.shape() != shape) {
      throw FormatError(source_ + ": tensor '" + name + "' has shape " + shape_string(t.shape()) + ", expected " +
                        shape_string(shape));
    }
    return t;
  }

  bool has(const std::string& name) const { return table_.count(name) != 0; }

  void finish() const {
    if (!table_.empty()) throw FormatError(source_ + ": unexpected tensor '" + table_.begin()->first + "'");
  }

 private:
  std::map<std::string, Tensor> table_;
  std::string source_;
};

inline Tensor vector_tensor(const std::vector<double>& v) { return Tensor(Shape{v.size()}, v); }

inline void put_bank(CheckpointFile& f, Json& meta, const std::string& name, const FourierFeatureBank& bank) {
  meta[name] = Json{{"c_in", bank.input_dim()}, {"width", bank.bank_width()}, {"seed", bank.seed()}};
  f.add(name + ".scales", vector_tensor(bank.scales()));
  for (std::size_t k = 0; k < bank.bank_count(); ++k) f.add(name + "." + std::to_string(k), bank.banks()[k]);
}

inline FourierFeatureBank get_bank(TensorTable& t, const Json& meta, const std::string& name) {
  const Json& m = meta.at(name);
  const auto c_in = m.at("c_in").get<std::size_t>();
  const auto width = m.at("width").get<std::size_t>();
  const Tensor scales = t.take(name + ".scales");
  std::vector<Tensor> banks;
  for (std::size_t k = 0; k < scales.size(); ++k) banks.push_back(t.take(name + "." + std::to_string(k)));
  try {
    return FourierFeatureBank(std::move(banks), scales.to_vector(), c_in, width, m.at("seed").get<std::uint64_t>());
  } catch (const Error& e) {
    throw FormatError(std::string("checkpoint Fourier bank '") + name + "': " + e.what());
  }
}

inline void put_net(CheckpointFile& f, Json& meta, const std::string& name, const InrParams& net) {
  Json acts = Json::array();
  for (const DenseLayer& l : net.layers) acts.push_back(activation_name(l.activation));
  meta[name] = Json{{"omega0", net.omega0}, {"activations", acts}};
  net.for_each_param(name + ".", [&](const std::string& n, const Tensor& t) { f.add(n, t); });
}

inline InrParams get_net(TensorTable& t, const Json& meta, const std::string& name) {
  const Json& m = meta.at(name);
  InrParams p;
  p.omega0 = m.at("omega0").get<double>();
  const Json& acts = m.at("activations");
  for (std::size_t l = 0; l < acts.size(); ++l) {
    DenseLayer layer;
    layer.activation = parse_activation(acts[l].get<std::string>());
    layer.weight = t.take(name + ".layer" + std::to_string(l) + ".weight");
    layer.bias = t.take(name + ".layer" + std::to_string(l) + ".bias");
    p.layers.push_back(std::move(layer));
  }
  try {
    p.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("checkpoint network '") + name + "': " + e.what());
  }
  return p;
}

inline void put_adam(CheckpointFile& f, Json& meta, const std::string& name, const AdamState& s) {
  meta[name] = Json{{"step", s.step}, {"slots", s.m.size()}};
  for (std::size_t k = 0; k < s.m.size(); ++k) {
    f.add(name + ".m." + std::to_string(k), s.m[k]);
    f.add(name + ".v." + std::to_string(k), s.v[k]);
  }
}

inline AdamState get_adam(TensorTable& t, const Json& meta, const std::string& name) {
  const Json& m = meta.at(name);
  AdamState s;
  s.step = m.at("step").get<std::size_t>();
  const auto slots = m.at("slots").get<std::size_t>();
  for (std::size_t k = 0; k < slots; ++k) {
    s.m.push_back(t.take(name + ".m." + std::to_string(k)));
    s.v.push_back(t.take(name + ".v." + std::to_string(k)));
  }
  return s;
}

}  // namespace detail

inline CheckpointFile to_checkpoint_file(const Checkpoint& c) {
  CheckpointFile f;
  f.kind = std::string(model_kind_name(c.kind()));
  Json meta;
  meta["config"] = to_json(c.config);
  meta["steps_done"] = c.steps_done;
  const FieldDomain& d = c.domain;
  f.add("domain", Tensor::vector({d.x.min, d.x.max, d.t.min, d.t.max, d.value.offset, d.value.scale}));
  f.add("log.loss_tail", detail::vector_tensor(c.loss_tail));
  detail::put_adam(f, meta, "adam", c.optimizer);

  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, InrModel>) {
          meta["has_bank"] = m.bank.has_value();
          if (m.bank) detail::put_bank(f, meta, "bank", *m.bank);
          detail::put_net(f, meta, "net", m.net);
        } else if constexpr (std::is_same_v<M, FactorizedModel>) {
          detail::put_bank(f, meta, "spatial_bank", m.spatial_bank);
          detail::put_bank(f, meta, "temporal_bank", m.temporal_bank);
          detail::put_net(f, meta, "spatial", m.params.spatial);
          detail::put_net(f, meta, "temporal", m.params.temporal);
          meta["train_middle"] = m.params.train_middle;
          f.add("middle", m.params.middle);
        } else if constexpr (std::is_same_v<M, GinrState>) {
          detail::put_bank(f, meta, "bank", m.bank);
          detail::put_net(f, meta, "base", m.base);
          meta["latent_dim"] = m.latent_dim;
          meta["hyper_layers"] = m.hyper.layers.size();
          for (std::size_t k = 0; k < m.hyper.layers.size(); ++k) {
            f.add("hyper.layer" + std::to_string(k) + ".weight", m.hyper.layers[k].weight);
            f.add("hyper.layer" + std::to_string(k) + ".bias", m.hyper.layers[k].bias);
          }
          meta["meta"] = Json{{"inner_rate", m.meta.inner_rate},
                              {"inner_steps", m.meta.inner_steps},
                              {"batch_size", m.meta.batch_size},
                              {"outer_lr", m.meta.outer.lr},
                              {"outer_beta1", m.meta.outer.beta1},
                              {"outer_beta2", m.meta.outer.beta2},
                              {"outer_eps", m.meta.outer.eps}};
          meta["outer_steps_done"] = m.outer_steps_done;
          Json ids = Json::array();
          for (const auto& [id, code] : m.codes) {
            ids.push_back(id);
            f.add("code." + std::to_string(id), code.phi);
          }
          meta["codes"] = ids;
          detail::put_adam(f, meta, "outer_adam", m.outer_state);
        } else {
          meta["rank"] = m.rank;
          meta["lambda"] = m.lambda;
          f.add("mf.u", m.u);
          f.add("mf.v", m.v);
          f.add("grid.x", detail::vector_tensor(c.grid_x));
          f.add("grid.t", detail::vector_tensor(c.grid_t));
        }
      },
      c.model);
  f.meta = std::move(meta);
  return f;
}

inline Checkpoint from_checkpoint_file(CheckpointFile f, const std::string& source = "checkpoint") {
  const ModelKind kind = [&] {
    try {
      return parse_model_kind(f.kind);
    } catch (const ConfigError&) {
      throw FormatError(source + ": unknown model kind '" + f.kind + "'");
    }
  }();
  detail::TensorTable t(std::move(f.tensors), source);
  const Json& meta = f.meta;
  try {
    Checkpoint c{parse_config(meta.at("config")), {}, InrModel{}, {}, {}, 0, {}, {}};
    c.steps_done = meta.at("steps_done").get<std::size_t>();
    const Tensor dom = t.take("domain", Shape{6});
    c.domain = FieldDomain{{dom[0], dom[1]}, {dom[2], dom[3]}, {dom[4], dom[5]}};
    c.loss_tail = t.take("log.loss_tail").to_vector();
    c.optimizer = detail::get_adam(t, meta, "adam");

    switch (kind) {
      case ModelKind::kInr: {
        InrModel m;
        if (meta.at("has_bank").get<bool>()) m.bank = detail::get_bank(t, meta, "bank");
        m.net = detail::get_net(t, meta, "net");
        m.validate();
        c.model = std::move(m);
        break;
      }
      case ModelKind::kFactorized: {
        FactorizedInrParams p;
        auto sb = detail::get_bank(t, meta, "spatial_bank");
        auto tb = detail::get_bank(t, meta, "temporal_bank");
        p.spatial = detail::get_net(t, meta, "spatial");
        p.temporal = detail::get_net(t, meta, "temporal");
        p.train_middle = meta.at("train_middle").get<bool>();
        p.middle = t.take("middle");
        FactorizedModel m{std::move(sb), std::move(tb), std::move(p)};
        m.validate();
        c.model = std::move(m);
        break;
      }
      case ModelKind::kGinr: {
        auto bank = detail::get_bank(t, meta, "bank");
        GinrState s{std::move(bank), detail::get_net(t, meta, "base"), {}, meta.at("latent_dim").get<std::size_t>(),
                    {}, {}, {}, meta.at("outer_steps_done").get<std::size_t>()};
        const auto layers = meta.at("hyper_layers").get<std::size_t>();
        for (std::size_t k = 0; k < layers; ++k) {
          s.hyper.layers.push_back({t.take("hyper.layer" + std::to_string(k) + ".weight"),
                                    t.take("hyper.layer" + std::to_string(k) + ".bias")});
        }
        const Json& mc = meta.at("meta");
        s.meta.inner_rate = mc.at("inner_rate").get<double>();
        s.meta.inner_steps = mc.at("inner_steps").get<std::size_t>();
        s.meta.batch_size = mc.at("batch_size").get<std::size_t>();
        s.meta.outer = AdamConfig{mc.at("outer_lr").get<double>(), mc.at("outer_beta1").get<double>(),
                                  mc.at("outer_beta2").get<double>(), mc.at("outer_eps").get<double>()};
        for (const Json& id : meta.at("codes")) {
          const auto n = id.get<std::size_t>();
          s.codes[n] = LatentCode{t.take("code." + std::to_string(n)), n};
        }
        s.outer_state = detail::get_adam(t, meta, "outer_adam");
        s.validate();
        c.model = std::move(s);
        break;
      }
      case ModelKind::kMf: {
        MfModel m;
        m.rank = meta.at("rank").get<std::size_t>();
        m.lambda = meta.at("lambda").get<double>();
        m.u = t.take("mf.u");
        m.v = t.take("mf.v");
        if (m.u.rank() != 2 || m.v.rank() != 2 || m.u.cols() != m.rank || m.v.cols() != m.rank) {
          throw FormatError(source + ": MF factors do not have rank " + std::to_string(m.rank));
        }
        c.grid_x = t.take("grid.x", Shape{m.u.rows()}).to_vector();
        c.grid_t = t.take("grid.t", Shape{m.v.rows()}).to_vector();
        c.model = std::move(m);
        break;
      }
    }
    t.finish();
    return c;
  } catch (const Json::exception& e) {
    throw FormatError(source + ": checkpoint metadata is incomplete: " + e.what());
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(source + ": inconsistent checkpoint: " + e.what());
  }
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  write_checkpoint_file(to_checkpoint_file(c), path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return from_checkpoint_file(read_checkpoint_file(path), path.string());
}

}  // namespace tinr
