#pragma once

#include <array>
#include <cmath>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mlopf/error.hpp"
#include "mlopf/network.hpp"
#include "mlopf/sensitivity.hpp"

namespace mlopf {

struct VoltageSolution {
  std::vector<std::array<Complex, 3>> phasors;  ///< [bus][phase code], zero where absent
  std::vector<double> v;                        ///< squared magnitudes, flat order
  int sweeps = 0;
  double mismatch = 0.0;  ///< max |S_computed - S_specified| over bus/phases, p.u.
};

struct SweepOptions {
  double tolerance = 1e-8;
  int max_sweeps = 100;
};

/// Balanced substation phasors: magnitude sqrt(base), angles 0, -2pi/3, +2pi/3.
inline std::array<Complex, 3> substation_phasors(double base_v_squared) {
  const double mag = std::sqrt(base_v_squared);
  return {mag * omega_pow(0), mag * omega_pow(1), mag * omega_pow(2)};
}

/// Backward/forward sweep with constant-power injections p + iq (positive =
/// generation). Starts from the no-load profile; backward pass in post-order,
/// forward pass in pre-order.
inline VoltageSolution backward_forward_sweep(const Network& net, std::span<const double> p, std::span<const double> q,
                                              const SweepOptions& opt = {}) {
  const auto n = static_cast<std::size_t>(net.dim());
  require_size(p.size(), n, "sweep p");
  require_size(q.size(), n, "sweep q");
  for (std::size_t k = 0; k < n; ++k)
    if (!std::isfinite(p[k]) || !std::isfinite(q[k])) throw SolveError("sweep: non-finite injection at flat index " + std::to_string(k));

  const auto buses = static_cast<std::size_t>(net.bus_count());
  const auto& flat = net.flat_entries();
  const auto& order = net.preorder();
  const auto source = substation_phasors(net.base_v_squared());

  VoltageSolution sol;
  sol.phasors.assign(buses, {});
  for (int u : order) {
    const PhaseSet ph = net.phases(u);
    for (Phase f : kAllPhases)
      if (ph.contains(f)) sol.phasors[static_cast<std::size_t>(u)][static_cast<std::size_t>(code(f))] = source[static_cast<std::size_t>(code(f))];
  }

  std::vector<Complex> spec(n);
  for (std::size_t k = 0; k < n; ++k) spec[k] = {p[k], q[k]};
  std::vector<Complex> injected(n);
  std::vector<std::array<Complex, 3>> current(buses);
  auto phasor = [&](std::vector<std::array<Complex, 3>>& ph, std::size_t k) -> Complex& {
    return ph[static_cast<std::size_t>(flat[k].bus)][static_cast<std::size_t>(code(flat[k].phase))];
  };

  for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    for (std::size_t k = 0; k < n; ++k) {
      const Complex vk = phasor(sol.phasors, k);
      if (std::abs(vk) < 1e-9) throw SolveError("sweep: zero voltage at bus " + std::to_string(flat[k].bus));
      injected[k] = std::conj(spec[k] / vk);
    }
    // backward: current on the line into each bus, flowing away from the root
    for (auto& c : current) c = {};
    for (std::size_t k = 0; k < n; ++k)
      current[static_cast<std::size_t>(flat[k].bus)][static_cast<std::size_t>(code(flat[k].phase))] = -injected[k];
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if (*it == 0) continue;
      auto& up = current[static_cast<std::size_t>(net.parent(*it))];
      const auto& mine = current[static_cast<std::size_t>(*it)];
      for (std::size_t f = 0; f < 3; ++f) up[f] += mine[f];
    }
    // forward: voltage drop across each line
    std::vector<std::array<Complex, 3>> next = sol.phasors;
    for (int u : order) {
      if (u == 0) continue;
      const PhaseSet ph = net.phases(u);
      const PhaseMatrix& z = net.line_into(u).z;
      const auto& vp = next[static_cast<std::size_t>(net.parent(u))];
      const auto& j = current[static_cast<std::size_t>(u)];
      auto& vu = next[static_cast<std::size_t>(u)];
      for (Phase f : kAllPhases) {
        if (!ph.contains(f)) continue;
        Complex drop{};
        for (Phase g : kAllPhases)
          if (ph.contains(g)) drop += z(f, g) * j[static_cast<std::size_t>(code(g))];
        vu[static_cast<std::size_t>(code(f))] = vp[static_cast<std::size_t>(code(f))] - drop;
      }
    }
    double mismatch = 0.0;
    for (std::size_t k = 0; k < n; ++k) mismatch = std::max(mismatch, std::abs(phasor(next, k) * std::conj(injected[k]) - spec[k]));
    sol.phasors = std::move(next);
    sol.sweeps = sweep;
    sol.mismatch = mismatch;
    if (!std::isfinite(mismatch)) throw SolveError("sweep diverged at sweep " + std::to_string(sweep));
    if (mismatch < opt.tolerance) break;
  }
  if (!(sol.mismatch < opt.tolerance)) {
    throw SolveError("sweep did not converge in " + std::to_string(opt.max_sweeps) + " sweeps (mismatch " +
                     std::to_string(sol.mismatch) + " p.u.); loading may be excessive");
  }
  sol.v.resize(n);
  for (std::size_t k = 0; k < n; ++k) sol.v[k] = std::norm(phasor(sol.phasors, k));
  return sol;
}

struct ModelComparison {
  std::vector<double> v_linear;
  std::vector<double> v_nonlinear;
  std::vector<double> diff;  ///< nonlinear - linear
  double max_abs = 0.0;
  double rms = 0.0;
  double mean = 0.0;
};

inline ModelComparison compare_models(const Network& net, const SensitivityMatrices& s, std::span<const double> p,
                                      std::span<const double> q, const SweepOptions& opt = {}) {
  ModelComparison c;
  c.v_linear = voltage_linear(s, p, q);
  c.v_nonlinear = backward_forward_sweep(net, p, q, opt).v;
  const std::size_t n = c.v_linear.size();
  c.diff.resize(n);
  double sq = 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    c.diff[k] = c.v_nonlinear[k] - c.v_linear[k];
    c.max_abs = std::max(c.max_abs, std::abs(c.diff[k]));
    sq += c.diff[k] * c.diff[k];
    sum += c.diff[k];
  }
  if (n > 0) {
    c.rms = std::sqrt(sq / static_cast<double>(n));
    c.mean = sum / static_cast<double>(n);
  }
  return c;
}

inline void write_comparison_csv(const ModelComparison& c, std::ostream& os) {
  os << "flat_index,v_linear,v_nonlinear,diff\n";
  os.precision(17);
  for (std::size_t k = 0; k < c.diff.size(); ++k)
    os << k << ',' << c.v_linear[k] << ',' << c.v_nonlinear[k] << ',' << c.diff[k] << '\n';
}

}  // namespace mlopf
