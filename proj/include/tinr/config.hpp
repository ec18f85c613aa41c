#pragma once

// Run configuration: a JSON document with one section per concern. Every
// section is optional and falls back to library defaults; unknown keys are
// rejected so a typo never silently becomes a default.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"
#include "tinr/data.hpp"
#include "tinr/error.hpp"
#include "tinr/lwr.hpp"
#include "tinr/optim.hpp"

namespace tinr {

using Json = nlohmann::json;

enum class ModelKind { kInr, kFactorized, kGinr, kMf };

inline std::string_view model_kind_name(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::kInr: return "inr";
    case ModelKind::kFactorized: return "factorized";
    case ModelKind::kGinr: return "ginr";
    case ModelKind::kMf: return "mf";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "inr") return ModelKind::kInr;
  if (s == "factorized") return ModelKind::kFactorized;
  if (s == "ginr") return ModelKind::kGinr;
  if (s == "mf") return ModelKind::kMf;
  throw ConfigError("unknown model kind '" + std::string(s) + "' (expected inr, factorized, ginr or mf)");
}

struct EncodingConfig {
  std::size_t width = 64;                // d, per frequency matrix
  std::vector<double> scales{1.0, 10.0, 100.0};  // sigma_k^2; N_f = scales.size()
};

struct NetworkConfig {
  std::vector<std::size_t> hidden{256, 256, 256};
  double omega0 = 30.0;
};

struct FactorizedConfig {
  std::size_t d_x = 16;
  std::size_t d_t = 16;
  bool train_middle = true;
};

struct GinrConfig {
  std::size_t latent_dim = 64;
  double inner_rate = 0.01;
  std::size_t inner_steps = 3;
  std::size_t batch_size = 4;
  std::size_t epochs = 100;
};

struct TrainConfig {
  std::size_t steps = 2000;
  AdamConfig adam{};
};

struct MfSection {
  std::size_t rank = 4;
  double lambda = 1e-3;
  std::size_t sweeps = 50;
};

/// Mask generated when no mask file is supplied. Disabled means "all observed".
struct MaskConfig {
  bool enabled = false;
  MaskPattern pattern = MaskPattern::kRandom;
  double density = 0.5;
};

struct SynthConfig {
  LwrParams lwr{};
  PerturbationSpec perturbation{};
  std::size_t family = 1;
};

struct RunConfig {
  ModelKind kind = ModelKind::kInr;
  std::uint64_t seed = 0;
  std::string data;       // grid CSV (fit, adapt) or family directory (meta-fit)
  std::string mask_file;  // optional mask CSV matching `data`
  EncodingConfig encoding;
  NetworkConfig network;
  FactorizedConfig factorized;
  GinrConfig ginr;
  TrainConfig train;
  MfSection mf;
  MaskConfig mask;
  SynthConfig synth;
};

namespace detail {

/// Reads the keys of one JSON object, remembering which were consumed, so
/// leftovers can be reported with their full path.
class SectionReader {
 public:
  SectionReader(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  const Json* get(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  void read(const std::string& key, T& out) {
    const Json* j = get(key);
    if (!j) return;
    out = convert<T>(*j, child(key));
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + child(it.key()) + "'");
    }
  }

 private:
  template <class T>
  static T convert(const Json& j, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw ConfigError(path + " must be true or false");
      return j.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) throw ConfigError(path + " must be a string");
      return j.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!j.is_number()) throw ConfigError(path + " must be a number");
      return j.get<double>();
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!j.is_number_unsigned()) throw ConfigError(path + " must be a non-negative integer");
      return static_cast<T>(j.get<std::uint64_t>());
    } else {
      if (!j.is_array()) throw ConfigError(path + " must be an array");
      T out;
      for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(convert<typename T::value_type>(j[i], path + "[" + std::to_string(i) + "]"));
      }
      return out;
    }
  }

  std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

  const Json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
void read_section(SectionReader& parent, const std::string& key, F&& body) {
  const Json* j = parent.get(key);
  if (!j) return;
  SectionReader r(*j, parent.child(key));
  body(r);
  r.finish();
}

inline void read_profile(SectionReader& r, InitialProfile& p) {
  if (const Json* k = r.get("kind")) {
    if (!k->is_string()) throw ConfigError(r.child("kind") + " must be a string");
    const std::string s = k->get<std::string>();
    if (s == "uniform") p.kind = InitialProfile::Kind::kUniform;
    else if (s == "riemann") p.kind = InitialProfile::Kind::kRiemann;
    else if (s == "pulse") p.kind = InitialProfile::Kind::kPulse;
    else if (s == "random-steps") p.kind = InitialProfile::Kind::kRandomSteps;
    else throw ConfigError("unknown initial profile '" + s + "'");
  }
  r.read("level", p.level);
  r.read("left", p.left);
  r.read("right", p.right);
  r.read("split", p.split);
  r.read("amplitude", p.amplitude);
  r.read("center", p.center);
  r.read("width", p.width);
  r.read("high", p.high);
  r.read("segments", p.segments);
}

inline void read_boundary(SectionReader& r, BoundaryCondition& b) {
  if (const Json* k = r.get("kind")) {
    if (!k->is_string()) throw ConfigError(r.child("kind") + " must be a string");
    const std::string s = k->get<std::string>();
    if (s == "free") b.kind = BoundaryCondition::Kind::kFree;
    else if (s == "flux") b.kind = BoundaryCondition::Kind::kFlux;
    else throw ConfigError("unknown boundary kind '" + s + "'");
  }
  r.read("level", b.level);
  r.read("amplitude", b.amplitude);
  r.read("period", b.period);
  r.read("start", b.start);
  r.read("stop", b.stop);
}

inline std::string_view profile_name(InitialProfile::Kind k) {
  switch (k) {
    case InitialProfile::Kind::kUniform: return "uniform";
    case InitialProfile::Kind::kRiemann: return "riemann";
    case InitialProfile::Kind::kPulse: return "pulse";
    case InitialProfile::Kind::kRandomSteps: return "random-steps";
  }
  return "?";
}

}  // namespace detail

/// Checks every value a command may use. Throws ConfigError naming the key.
inline void validate(const RunConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  const auto& e = c.encoding;
  if (e.width < 2 || e.width % 2 != 0) fail("encoding.width must be even and >= 2");
  if (e.scales.empty()) fail("encoding.scales must list at least one variance");
  for (double s : e.scales) {
    if (!(s > 0.0) || !std::isfinite(s)) fail("encoding.scales entries must be positive");
  }
  if (c.network.hidden.empty()) fail("network.hidden must list at least one width");
  for (std::size_t w : c.network.hidden) {
    if (w == 0) fail("network.hidden widths must be positive");
  }
  if (!(c.network.omega0 > 0.0) || !std::isfinite(c.network.omega0)) fail("network.omega0 must be positive");
  if (c.factorized.d_x == 0 || c.factorized.d_t == 0) fail("factorized.d_x and factorized.d_t must be positive");
  if (!c.factorized.train_middle && c.factorized.d_x != c.factorized.d_t) {
    fail("factorized.train_middle = false needs d_x == d_t (the fixed middle transform is the identity)");
  }
  const auto& g = c.ginr;
  if (g.latent_dim == 0) fail("ginr.latent_dim must be positive");
  if (!(g.inner_rate > 0.0) || !std::isfinite(g.inner_rate)) fail("ginr.inner_rate must be positive");
  if (g.inner_steps == 0) fail("ginr.inner_steps must be at least 1");
  if (g.batch_size == 0) fail("ginr.batch_size must be positive");
  const auto& a = c.train.adam;
  if (!(a.lr > 0.0) || !std::isfinite(a.lr)) fail("train.lr must be positive");
  if (!(a.beta1 >= 0.0 && a.beta1 < 1.0)) fail("train.beta1 must lie in [0, 1)");
  if (!(a.beta2 >= 0.0 && a.beta2 < 1.0)) fail("train.beta2 must lie in [0, 1)");
  if (!(a.eps > 0.0)) fail("train.eps must be positive");
  if (c.mf.rank == 0) fail("mf.rank must be positive");
  if (!(c.mf.lambda >= 0.0) || !std::isfinite(c.mf.lambda)) fail("mf.lambda must be non-negative");
  if (!(c.mask.density > 0.0 && c.mask.density <= 1.0)) fail("mask.density must lie in (0, 1]");
  if (c.synth.family == 0) fail("synth.family must be at least 1");
  const auto& ps = c.synth.perturbation;
  for (double v : {ps.density, ps.position, ps.inflow, ps.bottleneck, ps.timing}) {
    if (!(v >= 0.0) || !std::isfinite(v)) fail("synth.perturbation amplitudes must be non-negative");
  }
  try {
    detail::validate_lwr(c.synth.lwr);
  } catch (const ContractError& err) {
    fail(std::string("synth: ") + err.what());
  }
}

inline RunConfig parse_config(const Json& root) {
  RunConfig c;
  detail::SectionReader r(root, "");
  if (const Json* k = r.get("kind")) {
    if (!k->is_string()) throw ConfigError("kind must be a string");
    c.kind = parse_model_kind(k->get<std::string>());
  }
  r.read("seed", c.seed);
  r.read("data", c.data);
  r.read("mask_file", c.mask_file);
  detail::read_section(r, "encoding", [&](auto& s) {
    s.read("width", c.encoding.width);
    s.read("scales", c.encoding.scales);
  });
  detail::read_section(r, "network", [&](auto& s) {
    s.read("hidden", c.network.hidden);
    s.read("omega0", c.network.omega0);
  });
  detail::read_section(r, "factorized", [&](auto& s) {
    s.read("d_x", c.factorized.d_x);
    s.read("d_t", c.factorized.d_t);
    s.read("train_middle", c.factorized.train_middle);
  });
  detail::read_section(r, "ginr", [&](auto& s) {
    s.read("latent_dim", c.ginr.latent_dim);
    s.read("inner_rate", c.ginr.inner_rate);
    s.read("inner_steps", c.ginr.inner_steps);
    s.read("batch_size", c.ginr.batch_size);
    s.read("epochs", c.ginr.epochs);
  });
  detail::read_section(r, "train", [&](auto& s) {
    s.read("steps", c.train.steps);
    s.read("lr", c.train.adam.lr);
    s.read("beta1", c.train.adam.beta1);
    s.read("beta2", c.train.adam.beta2);
    s.read("eps", c.train.adam.eps);
  });
  detail::read_section(r, "mf", [&](auto& s) {
    s.read("rank", c.mf.rank);
    s.read("lambda", c.mf.lambda);
    s.read("sweeps", c.mf.sweeps);
  });
  detail::read_section(r, "mask", [&](auto& s) {
    c.mask.enabled = true;
    s.read("enabled", c.mask.enabled);
    std::string pattern(mask_pattern_name(c.mask.pattern));
    s.read("pattern", pattern);
    c.mask.pattern = parse_mask_pattern(pattern);
    s.read("density", c.mask.density);
  });
  detail::read_section(r, "synth", [&](auto& s) {
    s.read("family", c.synth.family);
    LwrParams& p = c.synth.lwr;
    s.read("free_speed", p.free_speed);
    s.read("jam_density", p.jam_density);
    s.read("length", p.length);
    s.read("duration", p.duration);
    s.read("cells", p.cells);
    s.read("steps", p.steps);
    detail::read_section(s, "initial", [&](auto& q) { detail::read_profile(q, p.initial); });
    detail::read_section(s, "upstream", [&](auto& q) { detail::read_boundary(q, p.upstream); });
    detail::read_section(s, "downstream", [&](auto& q) { detail::read_boundary(q, p.downstream); });
    detail::read_section(s, "perturbation", [&](auto& q) {
      PerturbationSpec& ps = c.synth.perturbation;
      q.read("density", ps.density);
      q.read("position", ps.position);
      q.read("inflow", ps.inflow);
      q.read("bottleneck", ps.bottleneck);
      q.read("timing", ps.timing);
      q.read("reseed_profile", ps.reseed_profile);
    });
  });
  r.finish();
  return c;
}

inline RunConfig parse_config_text(const std::string& text, const std::string& source = "config") {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(source + ": not valid JSON: " + e.what());
  }
  return parse_config(j);
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

/// Full snapshot, every field written, so a checkpoint records exactly what ran.
inline Json to_json(const RunConfig& c) {
  auto profile = [](const InitialProfile& p) {
    return Json{{"kind", detail::profile_name(p.kind)}, {"level", p.level},   {"left", p.left},
                {"right", p.right},                     {"split", p.split},   {"amplitude", p.amplitude},
                {"center", p.center},                   {"width", p.width},   {"high", p.high},
                {"segments", p.segments}};
  };
  auto boundary = [](const BoundaryCondition& b) {
    return Json{{"kind", b.kind == BoundaryCondition::Kind::kFlux ? "flux" : "free"},
                {"level", b.level},
                {"amplitude", b.amplitude},
                {"period", b.period},
                {"start", b.start},
                {"stop", b.stop}};
  };
  const auto& p = c.synth.lwr;
  const auto& ps = c.synth.perturbation;
  return Json{
      {"kind", model_kind_name(c.kind)},
      {"seed", c.seed},
      {"data", c.data},
      {"mask_file", c.mask_file},
      {"encoding", {{"width", c.encoding.width}, {"scales", c.encoding.scales}}},
      {"network", {{"hidden", c.network.hidden}, {"omega0", c.network.omega0}}},
      {"factorized",
       {{"d_x", c.factorized.d_x}, {"d_t", c.factorized.d_t}, {"train_middle", c.factorized.train_middle}}},
      {"ginr",
       {{"latent_dim", c.ginr.latent_dim},
        {"inner_rate", c.ginr.inner_rate},
        {"inner_steps", c.ginr.inner_steps},
        {"batch_size", c.ginr.batch_size},
        {"epochs", c.ginr.epochs}}},
      {"train",
       {{"steps", c.train.steps},
        {"lr", c.train.adam.lr},
        {"beta1", c.train.adam.beta1},
        {"beta2", c.train.adam.beta2},
        {"eps", c.train.adam.eps}}},
      {"mf", {{"rank", c.mf.rank}, {"lambda", c.mf.lambda}, {"sweeps", c.mf.sweeps}}},
      {"mask",
       {{"enabled", c.mask.enabled}, {"pattern", mask_pattern_name(c.mask.pattern)}, {"density", c.mask.density}}},
      {"synth",
       {{"family", c.synth.family},
        {"free_speed", p.free_speed},
        {"jam_density", p.jam_density},
        {"length", p.length},
        {"duration", p.duration},
        {"cells", p.cells},
        {"steps", p.steps},
        {"initial", profile(p.initial)},
        {"upstream", boundary(p.upstream)},
        {"downstream", boundary(p.downstream)},
        {"perturbation",
         {{"density", ps.density},
          {"position", ps.position},
          {"inflow", ps.inflow},
          {"bottleneck", ps.bottleneck},
          {"timing", ps.timing},
          {"reseed_profile", ps.reseed_profile}}}}},
  };
}

}  // namespace tinr
