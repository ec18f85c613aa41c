#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "tinr/error.hpp"
#include "tinr/random.hpp"
#include "tinr/tensor.hpp"

namespace tinr {

/// Affine map of [min, max] onto [-1, 1]. Endpoints map exactly.
struct AxisNormalization {
  double min = -1.0;
  double max = 1.0;

  double normalize(double x) const noexcept { return -1.0 + 2.0 * ((x - min) / (max - min)); }
  double denormalize(double u) const noexcept { return min + ((u + 1.0) / 2.0) * (max - min); }
  bool operator==(const AxisNormalization&) const = default;
};

/// Affine map applied to field values before training: y' = (y - offset) / scale.
struct ValueScale {
  double offset = 0.0;
  double scale = 1.0;

  double normalize(double y) const noexcept { return (y - offset) / scale; }
  double denormalize(double y) const noexcept { return offset + scale * y; }

  /// Maps [lo, hi] of `values` onto [-1, 1]; constant data keeps unit scale.
  static ValueScale fit_range(std::span<const double> values) {
    if (values.empty()) return {};
    double lo = values[0];
    double hi = values[0];
    for (double v : values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double half = (hi - lo) / 2.0;
    return {lo + half, half > 0.0 ? half : 1.0};
  }
  bool operator==(const ValueScale&) const = default;
};

namespace detail {

inline void check_axis(const std::vector<double>& axis, const char* name) {
  if (axis.size() < 2) {
    throw FormatError(std::string(name) + "-axis needs at least 2 samples, got " + std::to_string(axis.size()));
  }
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (!std::isfinite(axis[i])) throw FormatError(std::string(name) + "-axis value " + std::to_string(i) + " is not finite");
    if (i > 0 && !(axis[i] > axis[i - 1])) {
      throw FormatError(std::string(name) + "-axis is not strictly increasing at index " + std::to_string(i));
    }
  }
}

}  // namespace detail

/// Dense space-time field: values[i, j] is the state at x_axis[i], t_axis[j].
class GridField {
 public:
  GridField(Tensor values, std::vector<double> x_axis, std::vector<double> t_axis, std::string units = "")
      : values_(std::move(values)), x_(std::move(x_axis)), t_(std::move(t_axis)), units_(std::move(units)) {
    detail::check_axis(x_, "x");
    detail::check_axis(t_, "t");
    if (values_.shape() != Shape{x_.size(), t_.size()}) {
      throw DimensionError("grid values " + shape_string(values_.shape()) + " do not match axes " +
                           std::to_string(x_.size()) + "x" + std::to_string(t_.size()));
    }
    if (!values_.all_finite()) throw FormatError("grid values contain NaN or infinity; express missing data with a mask");
  }

  const Tensor& values() const noexcept { return values_; }
  const std::vector<double>& x_axis() const noexcept { return x_; }
  const std::vector<double>& t_axis() const noexcept { return t_; }
  const std::string& units() const noexcept { return units_; }
  std::size_t space_size() const noexcept { return x_.size(); }
  std::size_t time_size() const noexcept { return t_.size(); }
  double at(std::size_t i, std::size_t j) const noexcept { return values_.at(i, j); }

  AxisNormalization x_normalization() const noexcept { return {x_.front(), x_.back()}; }
  AxisNormalization t_normalization() const noexcept { return {t_.front(), t_.back()}; }

 private:
  Tensor values_;
  std::vector<double> x_;
  std::vector<double> t_;
  std::string units_;
};

/// Evaluates f(x, t) on the Cartesian product of the axes.
inline GridField sample_field(const std::function<double(double, double)>& f, std::vector<double> xs,
                              std::vector<double> ts, std::string units = "") {
  Tensor values(Shape{xs.size(), ts.size()});
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < ts.size(); ++j) values.at(i, j) = f(xs[i], ts[j]);
  }
  return GridField(std::move(values), std::move(xs), std::move(ts), std::move(units));
}

/// n evenly spaced samples on [lo, hi], endpoints included.
inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = i + 1 == n ? hi : lo + (hi - lo) * (static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return out;
}

enum class MaskPattern { kRandom, kColumnDrop, kBlock, kSensorSubset };

inline std::string_view mask_pattern_name(MaskPattern p) noexcept {
  switch (p) {
    case MaskPattern::kRandom: return "random";
    case MaskPattern::kColumnDrop: return "column-drop";
    case MaskPattern::kBlock: return "block";
    case MaskPattern::kSensorSubset: return "sensor-subset";
  }
  return "?";
}

inline MaskPattern parse_mask_pattern(std::string_view s) {
  if (s == "random" || s == "random-p") return MaskPattern::kRandom;
  if (s == "column-drop") return MaskPattern::kColumnDrop;
  if (s == "block") return MaskPattern::kBlock;
  if (s == "sensor-subset") return MaskPattern::kSensorSubset;
  throw ConfigError("unknown mask pattern '" + std::string(s) + "'");
}

/// Boolean observation pattern over a grid; true = observed.
class ObservationMask {
 public:
  ObservationMask(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> observed, MaskPattern pattern)
      : rows_(rows), cols_(cols), observed_(std::move(observed)), pattern_(pattern) {
    if (observed_.size() != rows_ * cols_) throw DimensionError("mask storage does not match its shape");
    if (observed_count() == 0) throw ConfigError("observation mask has no observed entries");
  }

  static ObservationMask full(std::size_t rows, std::size_t cols) {
    return ObservationMask(rows, cols, std::vector<std::uint8_t>(rows * cols, 1), MaskPattern::kRandom);
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  MaskPattern pattern() const noexcept { return pattern_; }
  bool observed(std::size_t i, std::size_t j) const noexcept { return observed_[i * cols_ + j] != 0; }
  const std::vector<std::uint8_t>& cells() const noexcept { return observed_; }

  std::size_t observed_count() const noexcept {
    std::size_t n = 0;
    for (auto c : observed_) n += c != 0;
    return n;
  }

  /// Complement (unobserved cells); throws if the mask is full.
  ObservationMask complement() const {
    std::vector<std::uint8_t> inv(observed_.size());
    for (std::size_t k = 0; k < inv.size(); ++k) inv[k] = observed_[k] ? 0 : 1;
    return ObservationMask(rows_, cols_, std::move(inv), pattern_);
  }

  void check_matches(const GridField& field) const {
    if (rows_ != field.space_size() || cols_ != field.time_size()) {
      throw DimensionError("mask " + std::to_string(rows_) + "x" + std::to_string(cols_) + " does not match field " +
                           std::to_string(field.space_size()) + "x" + std::to_string(field.time_size()));
    }
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::uint8_t> observed_;
  MaskPattern pattern_;
};

struct MaskSpec {
  MaskPattern pattern = MaskPattern::kRandom;
  double density = 1.0;  // fraction of cells/columns/rows kept
  std::uint64_t seed = 0;
  std::vector<std::size_t> rows;  // explicit sensor rows; overrides density for sensor-subset
};

/// Builds an observation mask. `density` is the kept fraction:
///  - random: each cell observed independently with probability p
///  - column-drop: each time column kept with probability p
///  - sensor-subset: round(p*S) evenly spaced rows (first and last included), or `rows`
///  - block: one contiguous block covering about (1-p) of the grid is removed
inline ObservationMask make_mask(const GridField& field, const MaskSpec& spec) {
  const std::size_t S = field.space_size();
  const std::size_t T = field.time_size();
  const bool explicit_rows = spec.pattern == MaskPattern::kSensorSubset && !spec.rows.empty();
  if (!explicit_rows && !(spec.density > 0.0 && spec.density <= 1.0)) {
    throw ConfigError("mask density must lie in (0, 1], got " + std::to_string(spec.density));
  }
  std::vector<std::uint8_t> cells(S * T, 0);
  Rng rng(spec.seed);
  switch (spec.pattern) {
    case MaskPattern::kRandom:
      for (auto& c : cells) c = rng.bernoulli(spec.density) ? 1 : 0;
      break;
    case MaskPattern::kColumnDrop:
      for (std::size_t j = 0; j < T; ++j) {
        if (!rng.bernoulli(spec.density)) continue;
        for (std::size_t i = 0; i < S; ++i) cells[i * T + j] = 1;
      }
      break;
    case MaskPattern::kSensorSubset: {
      std::vector<std::size_t> rows = spec.rows;
      if (rows.empty()) {
        const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(spec.density * S)));
        for (std::size_t m = 0; m < k; ++m) {
          rows.push_back(k == 1 ? 0
                                : static_cast<std::size_t>(std::llround(static_cast<double>(m) * (S - 1) /
                                                                        static_cast<double>(k - 1))));
        }
      }
      for (std::size_t r : rows) {
        if (r >= S) throw ConfigError("sensor row " + std::to_string(r) + " outside grid of " + std::to_string(S) + " rows");
        for (std::size_t j = 0; j < T; ++j) cells[r * T + j] = 1;
      }
      break;
    }
    case MaskPattern::kBlock: {
      std::fill(cells.begin(), cells.end(), 1);
      const double side = std::sqrt(1.0 - spec.density);
      const auto bs = static_cast<std::size_t>(std::llround(side * S));
      const auto bt = static_cast<std::size_t>(std::llround(side * T));
      if (bs > 0 && bt > 0) {
        const std::size_t i0 = rng.below(S - bs + 1);
        const std::size_t j0 = rng.below(T - bt + 1);
        for (std::size_t i = i0; i < i0 + bs; ++i) {
          for (std::size_t j = j0; j < j0 + bt; ++j) cells[i * T + j] = 0;
        }
      }
      break;
    }
  }
  return ObservationMask(S, T, std::move(cells), spec.pattern);
}

/// Observed (coordinate, value) pairs of one instance. Coordinates are
/// normalized (x, t) in [-1, 1]^2; `cells` records the source grid index.
struct PairSet {
  Tensor coords;   // [M x 2]
  Tensor targets;  // [M x 1]
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  std::size_t instance_id = 0;

  std::size_t size() const noexcept { return coords.rows(); }
};

/// One pair per observed cell, row-major over the grid. Targets are passed
/// through `scale` (identity by default).
inline PairSet to_pairs(const GridField& field, const ObservationMask& mask, std::size_t instance_id = 0,
                        const ValueScale& scale = {}) {
  mask.check_matches(field);
  const std::size_t M = mask.observed_count();
  PairSet out;
  out.coords = Tensor(Shape{M, 2});
  out.targets = Tensor(Shape{M, 1});
  out.cells.reserve(M);
  out.instance_id = instance_id;
  const AxisNormalization nx = field.x_normalization();
  const AxisNormalization nt = field.t_normalization();
  std::size_t m = 0;
  for (std::size_t i = 0; i < field.space_size(); ++i) {
    const double u = nx.normalize(field.x_axis()[i]);
    for (std::size_t j = 0; j < field.time_size(); ++j) {
      if (!mask.observed(i, j)) continue;
      out.coords.at(m, 0) = u;
      out.coords.at(m, 1) = nt.normalize(field.t_axis()[j]);
      out.targets[m] = scale.normalize(field.at(i, j));
      out.cells.emplace_back(i, j);
      ++m;
    }
  }
  return out;
}

inline PairSet to_pairs(const GridField& field, std::size_t instance_id = 0, const ValueScale& scale = {}) {
  return to_pairs(field, ObservationMask::full(field.space_size(), field.time_size()), instance_id, scale);
}

/// Writes pair targets back to their grid cells; other cells get `fill`.
inline Tensor scatter(const PairSet& pairs, std::size_t rows, std::size_t cols, double fill = 0.0) {
  Tensor out(Shape{rows, cols}, fill);
  for (std::size_t m = 0; m < pairs.cells.size(); ++m) {
    const auto [i, j] = pairs.cells[m];
    if (i >= rows || j >= cols) throw DimensionError("pair cell outside scatter target");
    out.at(i, j) = pairs.targets[m];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid CSV
//
//   line 1:        x<TAB>t_0<TAB>...<TAB>t_{T-1}
//   lines 2..S+1:  x_i<TAB>v_i0<TAB>...<TAB>v_i,T-1
//
// Numbers are written in shortest round-trip form so save/load is bit-exact.

inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw FormatError("cannot format number");
  return std::string(buf, end);
}

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(std::string_view s, const std::string& where) {
  while (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw FormatError(where + ": cannot parse number '" + std::string(s) + "'");
  }
  if (std::isnan(v)) throw FormatError(where + ": NaN is not allowed; express missing data with a mask file");
  if (!std::isfinite(v)) throw FormatError(where + ": value is not finite");
  return v;
}

struct RawGrid {
  std::vector<double> x;
  std::vector<double> t;
  std::vector<double> cells;
};

inline RawGrid read_raw_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  const std::string name = path.filename().string();
  RawGrid g;
  std::string line;
  if (!std::getline(in, line)) throw FormatError(name + ": empty file");
  {
    auto fields = split_tabs(line);
    std::string_view head = fields[0];
    while (!head.empty() && head.back() == '\r') head.remove_suffix(1);
    if (head != "x") throw FormatError(name + " line 1: header must start with 'x'");
    for (std::size_t k = 1; k < fields.size(); ++k) {
      g.t.push_back(parse_double(fields[k], name + " line 1 column " + std::to_string(k + 1)));
    }
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_tabs(line);
    if (fields.size() != g.t.size() + 1) {
      throw FormatError(name + " line " + std::to_string(line_no) + " (row " + std::to_string(line_no - 2) + "): expected " +
                        std::to_string(g.t.size() + 1) + " fields, got " + std::to_string(fields.size()));
    }
    const std::string where = name + " line " + std::to_string(line_no);
    g.x.push_back(parse_double(fields[0], where));
    for (std::size_t k = 1; k < fields.size(); ++k) g.cells.push_back(parse_double(fields[k], where));
  }
  try {
    check_axis(g.x, "x");
    check_axis(g.t, "t");
  } catch (const FormatError& e) {
    throw FormatError(name + ": " + e.what());
  }
  return g;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

template <class Cell>
std::string grid_text(const std::vector<double>& x, const std::vector<double>& t, Cell&& cell) {
  std::string s = "x";
  for (double tv : t) {
    s += '\t';
    s += format_double(tv);
  }
  s += '\n';
  for (std::size_t i = 0; i < x.size(); ++i) {
    s += format_double(x[i]);
    for (std::size_t j = 0; j < t.size(); ++j) {
      s += '\t';
      s += cell(i, j);
    }
    s += '\n';
  }
  return s;
}

}  // namespace detail

inline std::string grid_to_csv(const GridField& field) {
  return detail::grid_text(field.x_axis(), field.t_axis(),
                           [&](std::size_t i, std::size_t j) { return format_double(field.at(i, j)); });
}

inline void save_grid_csv(const GridField& field, const std::filesystem::path& path) {
  detail::write_text_file(path, grid_to_csv(field));
}

inline GridField load_grid_csv(const std::filesystem::path& path, std::string units = "") {
  auto raw = detail::read_raw_grid(path);
  const std::size_t S = raw.x.size();
  const std::size_t T = raw.t.size();
  return GridField(Tensor(Shape{S, T}, std::move(raw.cells)), std::move(raw.x), std::move(raw.t), std::move(units));
}

inline void save_mask_csv(const ObservationMask& mask, const GridField& field, const std::filesystem::path& path) {
  mask.check_matches(field);
  detail::write_text_file(path, detail::grid_text(field.x_axis(), field.t_axis(), [&](std::size_t i, std::size_t j) {
                            return std::string(mask.observed(i, j) ? "1" : "0");
                          }));
}

/// Loads a 0/1 mask file and checks it against the field's shape and axes.
inline ObservationMask load_mask_csv(const std::filesystem::path& path, const GridField& field) {
  auto raw = detail::read_raw_grid(path);
  const std::string name = path.filename().string();
  if (raw.x != field.x_axis() || raw.t != field.t_axis()) {
    throw FormatError(name + ": mask axes do not match the data grid");
  }
  std::vector<std::uint8_t> cells(raw.cells.size());
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (raw.cells[k] != 0.0 && raw.cells[k] != 1.0) {
      throw FormatError(name + ": mask cell " + std::to_string(k) + " is neither 0 nor 1");
    }
    cells[k] = raw.cells[k] == 1.0 ? 1 : 0;
  }
  try {
    return ObservationMask(raw.x.size(), raw.t.size(), std::move(cells), MaskPattern::kRandom);
  } catch (const ConfigError&) {
    throw FormatError(name + ": mask has no observed entries");
  }
}

}  // namespace tinr
