#pragma once

// The command-line verbs as library functions. Each one resolves and
// validates its whole configuration and loads every input before it creates
// an output, so a failing command leaves nothing behind.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <regex>
#include <string>
#include <vector>

#include "tinr/baseline.hpp"
#include "tinr/checkpoint.hpp"
#include "tinr/config.hpp"
#include "tinr/data.hpp"
#include "tinr/field.hpp"
#include "tinr/ginr.hpp"
#include "tinr/inr.hpp"
#include "tinr/lwr.hpp"
#include "tinr/random.hpp"
#include "tinr/train.hpp"

namespace tinr {

namespace fs = std::filesystem;

struct CommonOptions {
  std::string config;                 // JSON config path; empty = defaults
  std::optional<std::uint64_t> seed;  // overrides config "seed"
  std::string out;                    // output directory (file for query/eval)
};

struct SynthOptions {
  CommonOptions common;
  std::optional<std::size_t> family;
  std::optional<std::size_t> cells;  // S
  std::optional<std::size_t> steps;  // T
  std::optional<std::string> mask;   // pattern; enables mask files
  std::optional<double> density;
};

struct FitOptions {
  CommonOptions common;
  std::optional<std::string> kind;
  std::string data;
  std::string mask;
  std::optional<std::size_t> steps;  // training steps (mf: sweeps)
};

struct MetaFitOptions {
  CommonOptions common;
  std::string data;  // family directory
  std::optional<std::size_t> epochs;
};

struct AdaptOptions {
  CommonOptions common;
  std::string checkpoint;
  std::string data;
  std::string mask;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> id;
};

struct QueryOptions {
  CommonOptions common;
  std::string checkpoint;
  std::string code;
  std::size_t x_res = 0;
  std::size_t t_res = 0;
  std::optional<double> x_min, x_max, t_min, t_max;
  std::string like;  // take the exact axes of this Grid CSV instead
};

struct EvalOptions {
  CommonOptions common;
  std::string prediction;
  std::string truth;
  std::string mask;
  std::string scope = "all";
};

struct BaselineOptions {
  CommonOptions common;
  std::string data;
  std::string mask;
};

namespace detail {

inline RunConfig resolve_config(const CommonOptions& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  return c;
}

inline fs::path out_dir(const CommonOptions& o, const char* fallback) {
  return o.out.empty() ? fs::path(fallback) : fs::path(o.out);
}

inline void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
}

inline void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("no ") + what + " given");
  if (!fs::is_regular_file(path)) throw ConfigError(std::string(what) + " '" + path + "' does not exist");
}

/// Mask from a file, else from the config's mask section, else all observed.
inline ObservationMask resolve_mask(const RunConfig& c, const std::string& mask_file, const GridField& field,
                                    std::size_t index) {
  if (!mask_file.empty()) {
    require_file(mask_file, "mask file");
    return load_mask_csv(mask_file, field);
  }
  if (c.mask.enabled) {
    return make_mask(field, MaskSpec{c.mask.pattern, c.mask.density, derive_seed(c.seed, SeedStream::kMask, index), {}});
  }
  return ObservationMask::full(field.space_size(), field.time_size());
}

inline ValueScale observed_scale(const std::vector<const GridField*>& fields,
                                 const std::vector<const ObservationMask*>& masks) {
  std::vector<double> values;
  for (std::size_t n = 0; n < fields.size(); ++n) {
    const GridField& f = *fields[n];
    for (std::size_t i = 0; i < f.space_size(); ++i) {
      for (std::size_t j = 0; j < f.time_size(); ++j) {
        if (masks[n]->observed(i, j)) values.push_back(f.at(i, j));
      }
    }
  }
  return ValueScale::fit_range(values);
}

inline std::string loss_csv(const std::vector<double>& losses, const char* column = "loss") {
  std::string out = std::string("step,") + column + "\n";
  for (std::size_t k = 0; k < losses.size(); ++k) out += std::to_string(k) + "," + format_double(losses[k]) + "\n";
  return out;
}

inline std::vector<double> tail(const std::vector<double>& v, std::size_t n = 100) {
  return {v.end() - static_cast<std::ptrdiff_t>(std::min(n, v.size())), v.end()};
}

inline std::string code_line(const LatentCode& code) {
  std::string line = std::to_string(code.instance_id);
  for (double v : code.phi.values()) line += "\t" + format_double(v);
  return line + "\n";
}

inline LatentCode load_code_file(const fs::path& path, std::size_t latent_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open code file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw FormatError(path.string() + ": empty code file");
  const auto fields = split_tabs(line);
  const std::string where = path.filename().string() + " line 1";
  LatentCode code;
  std::uint64_t id = 0;
  auto [ptr, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), id);
  if (ec != std::errc() || ptr != fields[0].data() + fields[0].size()) {
    throw FormatError(where + ": instance id '" + std::string(fields[0]) + "' is not an integer");
  }
  code.instance_id = id;
  if (fields.size() != latent_dim + 1) {
    throw FormatError(where + ": code has " + std::to_string(fields.size() - 1) + " values, the model expects " +
                      std::to_string(latent_dim));
  }
  code.phi = Tensor(Shape{latent_dim});
  for (std::size_t k = 0; k < latent_dim; ++k) code.phi[k] = parse_double(fields[k + 1], where);
  return code;
}

/// instance_<n>.csv -> n, when the name follows the family convention.
inline std::optional<std::size_t> instance_index(const fs::path& p) {
  static const std::regex re(R"(instance_(\d+)\.csv)");
  std::smatch m;
  const std::string name = p.filename().string();
  if (!std::regex_match(name, m, re)) return std::nullopt;
  return static_cast<std::size_t>(std::stoull(m[1].str()));
}

struct FamilyMember {
  std::size_t id;
  GridField field;
  ObservationMask mask;
};

inline std::vector<FamilyMember> load_family(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("family directory '" + dir.string() + "' does not exist");
  std::map<std::size_t, fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (auto n = instance_index(entry.path())) files[*n] = entry.path();
  }
  if (files.empty()) throw FormatError(dir.string() + ": no instance_<n>.csv files");
  std::vector<FamilyMember> out;
  for (const auto& [n, path] : files) {
    GridField f = load_grid_csv(path);
    fs::path mask_path = path;
    mask_path.replace_extension(".mask.csv");
    ObservationMask m = fs::exists(mask_path) ? load_mask_csv(mask_path, f)
                                              : ObservationMask::full(f.space_size(), f.time_size());
    if (!out.empty() && (f.x_axis() != out.front().field.x_axis() || f.t_axis() != out.front().field.t_axis())) {
      throw FormatError(path.filename().string() + ": axes differ from the rest of the family");
    }
    out.push_back({n, std::move(f), std::move(m)});
  }
  return out;
}

/// Axes agree when they have the same length and every sample matches to
/// 1e-9 of the axis span (absorbs last-digit differences between generators).
inline bool same_axis(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  const double tol = 1e-9 * std::abs(b.back() - b.front());
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!(std::abs(a[k] - b[k]) <= tol)) return false;
  }
  return true;
}

inline std::string_view kind_of(const Checkpoint& c) { return model_kind_name(c.kind()); }

}  // namespace detail

// ---------------------------------------------------------------------------

inline void cmd_synth(const SynthOptions& o, std::ostream& log) {
  RunConfig c = detail::resolve_config(o.common);
  if (o.family) c.synth.family = *o.family;
  if (o.cells) c.synth.lwr.cells = *o.cells;
  if (o.steps) c.synth.lwr.steps = *o.steps;
  if (o.mask) {
    c.mask.enabled = true;
    c.mask.pattern = parse_mask_pattern(*o.mask);
  }
  if (o.density) c.mask.density = *o.density;
  validate(c);

  LwrParams base = c.synth.lwr;
  base.seed = derive_seed(c.seed, SeedStream::kSynth, 1);
  const auto fields = synth_family(base, c.synth.family, c.synth.perturbation, derive_seed(c.seed, SeedStream::kSynth, 0));
  std::vector<ObservationMask> masks;
  if (c.mask.enabled) {
    for (std::size_t n = 0; n < fields.size(); ++n) masks.push_back(detail::resolve_mask(c, "", fields[n], n));
  }

  const fs::path dir = detail::out_dir(o.common, "synth");
  detail::prepare_dir(dir);
  for (std::size_t n = 0; n < fields.size(); ++n) {
    const std::string stem = "instance_" + std::to_string(n);
    save_grid_csv(fields[n], dir / (stem + ".csv"));
    if (!masks.empty()) save_mask_csv(masks[n], fields[n], dir / (stem + ".mask.csv"));
  }
  log << "synth: wrote " << fields.size() << " instance(s) of " << base.cells << "x" << base.steps << " to "
      << dir.string() << "\n";
}

inline void cmd_fit(const FitOptions& o, std::ostream& log) {
  RunConfig c = detail::resolve_config(o.common);
  if (o.kind) c.kind = parse_model_kind(*o.kind);
  if (!o.data.empty()) c.data = o.data;
  if (!o.mask.empty()) c.mask_file = o.mask;
  if (o.steps) (c.kind == ModelKind::kMf ? c.mf.sweeps : c.train.steps) = *o.steps;
  validate(c);
  if (c.kind == ModelKind::kGinr) throw ConfigError("fit trains single models; use meta-fit for kind 'ginr'");
  detail::require_file(c.data, "data file");
  const GridField field = load_grid_csv(c.data);
  const ObservationMask mask = detail::resolve_mask(c, c.mask_file, field, 0);

  Checkpoint ck{c, {}, InrModel{}, {}, {}, 0, {}, {}};
  std::vector<double> losses;
  if (c.kind == ModelKind::kMf) {
    MfFit mf = fit_mf(field, mask, MfConfig{c.mf.rank, c.mf.lambda, c.mf.sweeps, derive_seed(c.seed, SeedStream::kMf)});
    ck.domain = FieldDomain::of(field);
    ck.grid_x = field.x_axis();
    ck.grid_t = field.t_axis();
    losses = mf.objective;
    ck.steps_done = c.mf.sweeps;
    ck.model = std::move(mf.model);
  } else {
    const ValueScale scale = detail::observed_scale({&field}, {&mask});
    ck.domain = FieldDomain::of(field, scale);
    const PairSet pairs = to_pairs(field, mask, 0, scale);
    const FitConfig fc{c.train.steps, c.train.adam};
    auto progress = [&](std::size_t step, double loss) {
      if (step % 250 == 0) log << "fit: step " << step << " loss " << format_double(loss) << "\n";
    };
    if (c.kind == ModelKind::kInr) {
      InrModel m;
      m.bank = sample_bank(2, c.encoding.width, c.encoding.scales, derive_seed(c.seed, SeedStream::kBank));
      std::vector<std::size_t> widths{m.bank->output_dim()};
      widths.insert(widths.end(), c.network.hidden.begin(), c.network.hidden.end());
      widths.push_back(1);
      m.net = init_inr(widths, c.network.omega0, derive_seed(c.seed, SeedStream::kInit));
      losses = fit(m, pairs, fc, ck.optimizer, progress).losses;
      ck.model = std::move(m);
    } else {
      FactorizedModel m = init_factorized(c.network.hidden, c.factorized.d_x, c.factorized.d_t, c.network.omega0,
                                          c.encoding.width, c.encoding.scales, c.factorized.train_middle,
                                          derive_seed(c.seed, SeedStream::kSpatialBank),
                                          derive_seed(c.seed, SeedStream::kTemporalBank),
                                          derive_seed(c.seed, SeedStream::kInit));
      losses = fit(m, pairs, fc, ck.optimizer, progress).losses;
      ck.model = std::move(m);
    }
    ck.steps_done = c.train.steps;
  }
  ck.loss_tail = detail::tail(losses);

  const fs::path dir = detail::out_dir(o.common, "fit");
  detail::prepare_dir(dir);
  save_checkpoint(ck, dir / "model.ckpt");
  detail::write_text_file(dir / "loss.csv", detail::loss_csv(losses, c.kind == ModelKind::kMf ? "objective" : "loss"));
  log << "fit: " << model_kind_name(c.kind) << " final " << (c.kind == ModelKind::kMf ? "objective " : "loss ")
      << format_double(losses.back()) << " -> " << (dir / "model.ckpt").string() << "\n";
}

inline void cmd_meta_fit(const MetaFitOptions& o, std::ostream& log) {
  RunConfig c = detail::resolve_config(o.common);
  c.kind = ModelKind::kGinr;
  if (!o.data.empty()) c.data = o.data;
  if (o.epochs) c.ginr.epochs = *o.epochs;
  validate(c);
  if (c.data.empty()) throw ConfigError("no family directory given");
  const auto family = detail::load_family(c.data);

  std::vector<const GridField*> fields;
  std::vector<const ObservationMask*> masks;
  for (const auto& m : family) {
    fields.push_back(&m.field);
    masks.push_back(&m.mask);
  }
  const ValueScale scale = detail::observed_scale(fields, masks);
  std::vector<PairSet> instances;
  for (const auto& m : family) instances.push_back(to_pairs(m.field, m.mask, m.id, scale));

  MetaConfig meta{c.ginr.inner_rate, c.ginr.inner_steps, c.train.adam, c.ginr.batch_size};
  GinrState state = init_ginr(sample_bank(2, c.encoding.width, c.encoding.scales, derive_seed(c.seed, SeedStream::kBank)),
                              c.network.hidden, 1, c.network.omega0, c.ginr.latent_dim, meta,
                              derive_seed(c.seed, SeedStream::kInit), derive_seed(c.seed, SeedStream::kHypernet));
  const MetaLog mlog = meta_fit(state, instances, c.ginr.epochs, [&](std::size_t step, double loss) {
    if (step % 50 == 0) log << "meta-fit: outer step " << step << " loss " << format_double(loss) << "\n";
  });

  Checkpoint ck{c, FieldDomain::of(family.front().field, scale), std::move(state), {}, detail::tail(mlog.outer_losses),
                mlog.outer_losses.size(), {}, {}};
  const fs::path dir = detail::out_dir(o.common, "meta-fit");
  detail::prepare_dir(dir);
  save_checkpoint(ck, dir / "model.ckpt");
  detail::write_text_file(dir / "loss.csv", detail::loss_csv(mlog.outer_losses));
  log << "meta-fit: " << family.size() << " instances, " << mlog.outer_losses.size() << " outer steps -> "
      << (dir / "model.ckpt").string() << "\n";
}

inline void cmd_adapt(const AdaptOptions& o, std::ostream& log) {
  if (!o.common.config.empty()) validate(detail::resolve_config(o.common));
  detail::require_file(o.checkpoint, "checkpoint");
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  if (ck.kind() != ModelKind::kGinr) {
    throw ConfigError("adapt needs a ginr checkpoint, got '" + std::string(detail::kind_of(ck)) + "'");
  }
  const GinrState& state = std::get<GinrState>(ck.model);
  detail::require_file(o.data, "data file");
  const GridField field = load_grid_csv(o.data);
  const ObservationMask mask = o.mask.empty() ? ObservationMask::full(field.space_size(), field.time_size())
                                              : (detail::require_file(o.mask, "mask file"), load_mask_csv(o.mask, field));
  if (field.x_normalization() != ck.domain.x || field.t_normalization() != ck.domain.t) {
    log << "adapt: warning: instance axes differ from the training domain; coordinates are normalized with the "
           "training domain\n";
  }
  const std::size_t id = o.id.value_or(detail::instance_index(o.data).value_or(0));

  // Normalize coordinates with the training domain rather than the instance's own axes.
  PairSet pairs = to_pairs(field, mask, id, ck.domain.value);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs.cells[k];
    pairs.coords.at(k, 0) = ck.domain.x.normalize(field.x_axis()[i]);
    pairs.coords.at(k, 1) = ck.domain.t.normalize(field.t_axis()[j]);
  }
  const AdaptReport rep = adapt_new(state, pairs, o.steps);

  const fs::path dir = detail::out_dir(o.common, "adapt");
  detail::prepare_dir(dir);
  detail::write_text_file(dir / "code.tsv", detail::code_line(rep.code));
  std::string report = "metric,value\ninstance_id," + std::to_string(id) + "\nsteps," +
                       std::to_string(rep.loss_trace.size() - 1) + "\ninner_rate," +
                       format_double(state.meta.inner_rate) + "\npre_loss," + format_double(rep.pre_loss) +
                       "\npost_loss," + format_double(rep.post_loss) + "\n";
  for (std::size_t k = 0; k < rep.loss_trace.size(); ++k) {
    report += "loss_step_" + std::to_string(k) + "," + format_double(rep.loss_trace[k]) + "\n";
  }
  detail::write_text_file(dir / "report.csv", report);
  log << "adapt: instance " << id << " loss " << format_double(rep.pre_loss) << " -> " << format_double(rep.post_loss)
      << "\n";
}

inline void cmd_query(const QueryOptions& o, std::ostream& log) {
  if (!o.common.config.empty()) validate(detail::resolve_config(o.common));
  const bool custom_range = o.x_min || o.x_max || o.t_min || o.t_max;
  if (!o.like.empty() && (custom_range || o.x_res || o.t_res)) {
    throw ConfigError("--like fixes the axes; it cannot be combined with resolutions or ranges");
  }
  if (o.like.empty() && (o.x_res < 2 || o.t_res < 2)) {
    throw ConfigError("query needs --x-res and --t-res of at least 2 (or --like)");
  }
  detail::require_file(o.checkpoint, "checkpoint");
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  std::vector<double> xs, ts;
  if (!o.like.empty()) {
    detail::require_file(o.like, "reference grid");
    const GridField ref = load_grid_csv(o.like);
    xs = ref.x_axis();
    ts = ref.t_axis();
  } else {
    const double x0 = o.x_min.value_or(ck.domain.x.min), x1 = o.x_max.value_or(ck.domain.x.max);
    const double t0 = o.t_min.value_or(ck.domain.t.min), t1 = o.t_max.value_or(ck.domain.t.max);
    if (!(x1 > x0) || !(t1 > t0)) throw ConfigError("query ranges must have max > min");
    xs = linspace(x0, x1, o.x_res);
    ts = linspace(t0, t1, o.t_res);
  }

  std::optional<LatentCode> code;
  if (ck.kind() == ModelKind::kGinr) {
    if (o.code.empty()) throw ConfigError("querying a ginr checkpoint needs --code (from adapt)");
    code = detail::load_code_file(o.code, std::get<GinrState>(ck.model).latent_dim);
  } else if (!o.code.empty()) {
    throw ConfigError("--code only applies to ginr checkpoints");
  }
  if (ck.kind() == ModelKind::kMf && (xs != ck.grid_x || ts != ck.grid_t) &&
      (custom_range || !o.like.empty() || xs.size() != ck.grid_x.size() || ts.size() != ck.grid_t.size())) {
    throw ConfigError("an mf checkpoint is tied to its " + std::to_string(ck.grid_x.size()) + "x" +
                      std::to_string(ck.grid_t.size()) + " training grid and cannot be resampled");
  }

  const fs::path out = o.common.out.empty() ? fs::path("query.csv") : fs::path(o.common.out);
  QueryResult result{GridField(Tensor(Shape{2, 2}), {0, 1}, {0, 1}), 0};
  switch (ck.kind()) {
    case ModelKind::kInr:
      result = query_grid(std::get<InrModel>(ck.model), xs, ts, ck.domain);
      break;
    case ModelKind::kFactorized:
      result = query_grid(std::get<FactorizedModel>(ck.model), xs, ts, ck.domain);
      break;
    case ModelKind::kGinr:
      result = query_grid(ModulatedField{&std::get<GinrState>(ck.model), code->phi}, xs, ts, ck.domain);
      break;
    case ModelKind::kMf: {
      Tensor values = std::get<MfModel>(ck.model).reconstruct();
      result = {GridField(std::move(values), ck.grid_x, ck.grid_t), 0};
      break;
    }
  }
  if (result.out_of_domain > 0) {
    log << "query: warning: " << result.out_of_domain << " of " << xs.size() * ts.size()
        << " points lie outside the training domain (extrapolated)\n";
  }
  if (out.has_parent_path()) detail::prepare_dir(out.parent_path());
  save_grid_csv(result.field, out);
  log << "query: " << xs.size() << "x" << ts.size() << " grid -> " << out.string() << "\n";
}

inline void cmd_eval(const EvalOptions& o, std::ostream& log) {
  if (!o.common.config.empty()) validate(detail::resolve_config(o.common));
  if (o.scope != "all" && o.scope != "observed" && o.scope != "unobserved") {
    throw ConfigError("--scope must be observed, unobserved or all, got '" + o.scope + "'");
  }
  if (o.scope != "all" && o.mask.empty()) throw ConfigError("--scope " + o.scope + " needs --mask");
  detail::require_file(o.prediction, "prediction file");
  detail::require_file(o.truth, "truth file");
  const GridField pred = load_grid_csv(o.prediction);
  const GridField truth = load_grid_csv(o.truth);
  if (!detail::same_axis(pred.x_axis(), truth.x_axis()) || !detail::same_axis(pred.t_axis(), truth.t_axis())) {
    throw FormatError("prediction and truth grids have different axes (query with --like <truth> first)");
  }
  ObservationMask scope = ObservationMask::full(truth.space_size(), truth.time_size());
  if (!o.mask.empty()) {
    detail::require_file(o.mask, "mask file");
    const ObservationMask m = load_mask_csv(o.mask, truth);
    if (o.scope == "observed") scope = m;
    if (o.scope == "unobserved") {
      if (m.observed_count() == m.rows() * m.cols()) {
        throw ConfigError("scope 'unobserved' is empty: the mask observes every cell");
      }
      scope = m.complement();
    }
  }
  const Metrics m = metrics(pred, truth, scope);
  const fs::path out = o.common.out.empty() ? fs::path("metrics.csv") : fs::path(o.common.out);
  if (out.has_parent_path()) detail::prepare_dir(out.parent_path());
  detail::write_text_file(out, metrics_csv(m));
  log << "eval: " << o.scope << " rmse " << format_double(m.rmse) << " -> " << out.string() << "\n";
}

/// Rank-r ALS on the observed cells; writes the reconstruction, the
/// objective per sweep and a checkpoint.
inline void cmd_baseline(const BaselineOptions& o, std::ostream& log) {
  RunConfig c = detail::resolve_config(o.common);
  c.kind = ModelKind::kMf;
  if (!o.data.empty()) c.data = o.data;
  if (!o.mask.empty()) c.mask_file = o.mask;
  validate(c);
  detail::require_file(c.data, "data file");
  const GridField field = load_grid_csv(c.data);
  const ObservationMask mask = detail::resolve_mask(c, c.mask_file, field, 0);
  MfFit mf = fit_mf(field, mask, MfConfig{c.mf.rank, c.mf.lambda, c.mf.sweeps, derive_seed(c.seed, SeedStream::kMf)});
  if (mf.underdetermined) log << "baseline: warning: fewer observations than factor entries\n";
  const GridField prediction(mf.model.reconstruct(), field.x_axis(), field.t_axis(), field.units());

  Checkpoint ck{c, FieldDomain::of(field), std::move(mf.model), {}, detail::tail(mf.objective), c.mf.sweeps,
                field.x_axis(), field.t_axis()};
  const fs::path dir = detail::out_dir(o.common, "baseline");
  detail::prepare_dir(dir);
  save_grid_csv(prediction, dir / "prediction.csv");
  detail::write_text_file(dir / "objective.csv", detail::loss_csv(mf.objective, "objective"));
  save_checkpoint(ck, dir / "model.ckpt");
  log << "baseline: rank " << c.mf.rank << " objective " << format_double(mf.objective.back()) << "\n";
}

}  // namespace tinr
