#pragma once

// Synthetic corridor traffic: the LWR conservation law
//   d rho/dt + d q(rho)/dx = 0,   q(rho) = v_f rho (1 - rho / rho_max)
// discretised with first-order Godunov finite volumes. For the concave
// Greenshields flux the Godunov interface flux is min(demand(left), supply(right)).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "tinr/data.hpp"
#include "tinr/error.hpp"
#include "tinr/random.hpp"

namespace tinr {

/// Initial density, expressed as fractions of rho_max.
struct InitialProfile {
  enum class Kind { kUniform, kRiemann, kPulse, kRandomSteps };
  Kind kind = Kind::kUniform;
  double level = 0.2;         // uniform level; pulse base; random-steps lower bound
  double left = 0.2;          // riemann left state
  double right = 0.8;         // riemann right state
  double split = 0.5;         // riemann discontinuity, fraction of length
  double amplitude = 0.5;     // pulse height above `level`
  double center = 0.5;        // pulse center, fraction of length
  double width = 0.1;         // pulse half-width, fraction of length
  double high = 0.9;          // random-steps upper bound
  std::size_t segments = 4;   // random-steps piece count
};

/// Boundary behaviour. Upstream: `kFree` is zero-gradient, `kFlux` injects a
/// demand q_in(t) = capacity * (level + amplitude sin(2 pi t / period)).
/// Downstream: `kFree` is zero-gradient, `kFlux` caps the outflow at
/// capacity * level while start <= t < stop (a bottleneck), free otherwise.
struct BoundaryCondition {
  enum class Kind { kFree, kFlux };
  Kind kind = Kind::kFree;
  double level = 0.5;
  double amplitude = 0.0;
  double period = 60.0;  // seconds
  double start = 0.0;    // seconds
  double stop = 1e300;   // seconds
};

struct LwrParams {
  double free_speed = 30.0;   // m/s
  double jam_density = 0.12;  // veh/m
  double length = 5000.0;     // m
  double duration = 300.0;    // s
  std::size_t cells = 64;     // S
  std::size_t steps = 128;    // T (output snapshots, including t = 0)
  InitialProfile initial;
  BoundaryCondition upstream;
  BoundaryCondition downstream;
  std::uint64_t seed = 0;  // used by random-steps profiles
};

/// Field plus the per-interval boundary mass ledger, for conservation checks:
/// mass[j+1] - mass[j] == inflow[j] - outflow[j].
struct LwrResult {
  GridField field;
  std::vector<double> mass;     // T entries, sum(rho) * dx
  std::vector<double> inflow;   // T-1 entries (vehicles)
  std::vector<double> outflow;  // T-1 entries (vehicles)
  std::size_t substeps = 1;     // solver steps per output interval
};

class GreenshieldsFlux {
 public:
  GreenshieldsFlux(double free_speed, double jam_density) : vf_(free_speed), rho_max_(jam_density) {}

  double operator()(double rho) const noexcept { return vf_ * rho * (1.0 - rho / rho_max_); }
  double critical_density() const noexcept { return rho_max_ / 2.0; }
  double capacity() const noexcept { return vf_ * rho_max_ / 4.0; }
  double demand(double rho) const noexcept { return (*this)(std::min(rho, critical_density())); }
  double supply(double rho) const noexcept { return (*this)(std::max(rho, critical_density())); }
  double godunov(double left, double right) const noexcept { return std::min(demand(left), supply(right)); }

  /// Rankine-Hugoniot speed of a discontinuity between two states.
  double shock_speed(double left, double right) const noexcept {
    return ((*this)(right) - (*this)(left)) / (right - left);
  }

 private:
  double vf_;
  double rho_max_;
};

namespace detail {

inline void validate_lwr(const LwrParams& p) {
  auto bad = [](const std::string& what) { throw ContractError("LWR: " + what); };
  if (!(p.free_speed > 0.0) || !std::isfinite(p.free_speed)) bad("free speed must be positive");
  if (!(p.jam_density > 0.0) || !std::isfinite(p.jam_density)) bad("jam density must be positive");
  if (!(p.length > 0.0) || !(p.duration > 0.0)) bad("extents must be positive");
  if (p.cells < 2 || p.steps < 2) bad("need at least 2 cells and 2 time samples");
  auto fraction = [&](double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) bad(std::string(what) + " must be a fraction of jam density in [0, 1]");
  };
  const InitialProfile& ip = p.initial;
  fraction(ip.level, "initial level");
  fraction(ip.left, "riemann left state");
  fraction(ip.right, "riemann right state");
  fraction(ip.high, "random-steps upper bound");
  fraction(std::min(1.0, ip.level + ip.amplitude), "pulse peak");
  if (ip.kind == InitialProfile::Kind::kRandomSteps && (ip.segments == 0 || ip.high < ip.level)) {
    bad("random-steps needs segments >= 1 and high >= level");
  }
  if (ip.kind == InitialProfile::Kind::kPulse && !(ip.width > 0.0)) bad("pulse width must be positive");
  for (const BoundaryCondition* b : {&p.upstream, &p.downstream}) {
    if (b->kind == BoundaryCondition::Kind::kFlux) {
      if (!(b->level - std::abs(b->amplitude) >= 0.0) || !(b->level + std::abs(b->amplitude) <= 1.0)) {
        bad("boundary flux must stay within [0, capacity]");
      }
      if (!(b->period > 0.0)) bad("boundary period must be positive");
    }
  }
}

inline std::vector<double> initial_density(const LwrParams& p, const std::vector<double>& x) {
  const InitialProfile& ip = p.initial;
  std::vector<double> rho(x.size());
  Rng rng(p.seed);
  std::vector<double> pieces;
  if (ip.kind == InitialProfile::Kind::kRandomSteps) {
    for (std::size_t k = 0; k < ip.segments; ++k) pieces.push_back(rng.uniform(ip.level, ip.high));
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = x[i] / p.length;  // position as a fraction of the corridor
    double frac = ip.level;
    switch (ip.kind) {
      case InitialProfile::Kind::kUniform:
        frac = ip.level;
        break;
      case InitialProfile::Kind::kRiemann:
        frac = s < ip.split ? ip.left : ip.right;
        break;
      case InitialProfile::Kind::kPulse: {
        const double z = (s - ip.center) / ip.width;
        frac = ip.level + ip.amplitude * (std::abs(z) < 1.0 ? 0.5 * (1.0 + std::cos(std::numbers::pi * z)) : 0.0);
        break;
      }
      case InitialProfile::Kind::kRandomSteps: {
        const auto k = std::min(pieces.size() - 1, static_cast<std::size_t>(s * static_cast<double>(pieces.size())));
        frac = pieces[k];
        break;
      }
    }
    rho[i] = frac * p.jam_density;
  }
  return rho;
}

inline double upstream_demand(const BoundaryCondition& b, const GreenshieldsFlux& q, double t) {
  return q.capacity() * (b.level + b.amplitude * std::sin(2.0 * std::numbers::pi * t / b.period));
}

}  // namespace detail

/// Runs the Godunov solver and records the boundary mass ledger. The solver
/// sub-steps each output interval so that dt <= dx / v_f always holds.
inline LwrResult simulate_lwr(const LwrParams& p) {
  detail::validate_lwr(p);
  const GreenshieldsFlux q(p.free_speed, p.jam_density);
  const std::size_t S = p.cells;
  const std::size_t T = p.steps;
  const double dx = p.length / static_cast<double>(S);
  const double dt_out = p.duration / static_cast<double>(T - 1);
  const auto substeps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(dt_out * p.free_speed / dx)));
  const double dt = dt_out / static_cast<double>(substeps);
  const double ratio = dt / dx;

  std::vector<double> x(S);
  for (std::size_t i = 0; i < S; ++i) x[i] = (static_cast<double>(i) + 0.5) * dx;
  std::vector<double> t(T);
  for (std::size_t j = 0; j < T; ++j) t[j] = j + 1 == T ? p.duration : static_cast<double>(j) * dt_out;

  std::vector<double> rho = detail::initial_density(p, x);
  std::vector<double> flux(S + 1);
  Tensor values(Shape{S, T});
  LwrResult out{GridField(Tensor(Shape{2, 2}), {0.0, 1.0}, {0.0, 1.0}), {}, {}, {}, substeps};

  auto total_mass = [&] {
    double m = 0.0;
    for (double r : rho) m += r * dx;
    return m;
  };

  for (std::size_t j = 0; j < T; ++j) {
    for (std::size_t i = 0; i < S; ++i) values.at(i, j) = rho[i];
    out.mass.push_back(total_mass());
    if (j + 1 == T) break;
    double in_mass = 0.0;
    double out_mass = 0.0;
    for (std::size_t k = 0; k < substeps; ++k) {
      const double now = static_cast<double>(j) * dt_out + static_cast<double>(k) * dt;
      if (p.upstream.kind == BoundaryCondition::Kind::kFlux) {
        flux[0] = std::min(detail::upstream_demand(p.upstream, q, now), q.supply(rho[0]));
      } else {
        flux[0] = q(rho[0]);
      }
      for (std::size_t i = 1; i < S; ++i) flux[i] = q.godunov(rho[i - 1], rho[i]);
      const bool bottleneck = p.downstream.kind == BoundaryCondition::Kind::kFlux && now >= p.downstream.start &&
                              now < p.downstream.stop;
      flux[S] = bottleneck ? std::min(q.demand(rho[S - 1]), q.capacity() * p.downstream.level) : q(rho[S - 1]);
      for (std::size_t i = 0; i < S; ++i) rho[i] -= ratio * (flux[i + 1] - flux[i]);
      in_mass += dt * flux[0];
      out_mass += dt * flux[S];
    }
    out.inflow.push_back(in_mass);
    out.outflow.push_back(out_mass);
  }
  for (double v : values.values()) {
    if (!std::isfinite(v)) throw NumericalError("LWR solver produced a non-finite density");
  }
  out.field = GridField(std::move(values), std::move(x), std::move(t), "veh/m");
  return out;
}

inline GridField synth_lwr(const LwrParams& p) { return simulate_lwr(p).field; }

/// Per-instance jitter applied to a base corridor. All amplitudes are
/// absolute (fractions of rho_max or capacity, or fractions of the corridor
/// for positions); zero everywhere reproduces the base exactly.
struct PerturbationSpec {
  double density = 0.0;      // initial levels / riemann states / pulse amplitude
  double position = 0.0;     // riemann split / pulse center
  double inflow = 0.0;       // upstream level
  double bottleneck = 0.0;   // downstream capacity level
  double timing = 0.0;       // bottleneck start/stop, fraction of duration
  bool reseed_profile = false;  // fresh random-steps draw per instance

  bool is_zero() const noexcept {
    return density == 0.0 && position == 0.0 && inflow == 0.0 && bottleneck == 0.0 && timing == 0.0 &&
           !reseed_profile;
  }
};

inline LwrParams perturb(const LwrParams& base, const PerturbationSpec& spec, std::uint64_t seed) {
  LwrParams p = base;
  if (spec.is_zero()) return p;
  Rng rng(seed);
  auto jitter = [&](double v, double amp, double lo, double hi) {
    const double d = rng.uniform(-amp, amp);
    return amp > 0.0 ? std::clamp(v + d, lo, hi) : v;
  };
  InitialProfile& ip = p.initial;
  ip.level = jitter(ip.level, spec.density, 0.0, 1.0);
  ip.left = jitter(ip.left, spec.density, 0.0, 1.0);
  ip.right = jitter(ip.right, spec.density, 0.0, 1.0);
  ip.amplitude = jitter(ip.amplitude, spec.density, 0.0, 1.0 - ip.level);
  ip.high = jitter(ip.high, spec.density, ip.level, 1.0);
  ip.split = jitter(ip.split, spec.position, 0.05, 0.95);
  ip.center = jitter(ip.center, spec.position, 0.05, 0.95);
  if (p.upstream.kind == BoundaryCondition::Kind::kFlux) {
    const double a = std::abs(p.upstream.amplitude);
    p.upstream.level = jitter(p.upstream.level, spec.inflow, a, 1.0 - a);
  }
  if (p.downstream.kind == BoundaryCondition::Kind::kFlux) {
    p.downstream.level = jitter(p.downstream.level, spec.bottleneck, 0.0, 1.0);
    const double shift = rng.uniform(-spec.timing, spec.timing) * p.duration;
    if (spec.timing > 0.0) {
      p.downstream.start = std::max(0.0, p.downstream.start + shift);
      p.downstream.stop = p.downstream.stop + shift;
    }
  }
  if (spec.reseed_profile) p.seed = rng.below(~std::uint64_t{0});
  return p;
}

/// N fields sharing the base grid; instance n uses jitter seed derived from
/// (seed, n). Instance ids are the vector indices.
inline std::vector<GridField> synth_family(const LwrParams& base, std::size_t count, const PerturbationSpec& spec,
                                           std::uint64_t seed) {
  if (count == 0) throw ContractError("synth_family: need at least one instance");
  std::vector<GridField> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    out.push_back(synth_lwr(perturb(base, spec, derive_seed(seed, SeedStream::kFamily, n))));
  }
  return out;
}

}  // namespace tinr
