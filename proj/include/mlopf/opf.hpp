#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mlopf/error.hpp"
#include "mlopf/network.hpp"

namespace mlopf {

/// Controllable injection at one bus/phase with a box feasible set and a
/// weighted quadratic deviation cost. Uncontrolled coordinates are modelled
/// as devices with a degenerate box and zero weights.
struct Device {
  int bus = 0;
  Phase phase = Phase::a;
  double p0 = 0.0;
  double q0 = 0.0;
  double pmin = 0.0;
  double pmax = 0.0;
  double qmin = 0.0;
  double qmax = 0.0;
  double wp = 1.0;
  double wq = 1.0;
};

struct CostGradient {
  double cost = 0.0;
  double dp = 0.0;
  double dq = 0.0;
};

inline CostGradient cost_and_gradient(const Device& d, double p, double q) {
  const double ep = p - d.p0;
  const double eq = q - d.q0;
  return {d.wp * ep * ep + d.wq * eq * eq, 2.0 * d.wp * ep, 2.0 * d.wq * eq};
}

inline std::pair<double, double> project_box(const Device& d, double p, double q) {
  return {std::clamp(p, d.pmin, d.pmax), std::clamp(q, d.qmin, d.qmax)};
}

/// Squared-magnitude voltage limits per flat index.
struct VoltageBounds {
  std::vector<double> lower;
  std::vector<double> upper;
};

struct DualState {
  std::vector<double> upper;  ///< multipliers of v <= v_upper
  std::vector<double> lower;  ///< multipliers of v_lower <= v

  static DualState zeros(int n) {
    return {std::vector<double>(static_cast<std::size_t>(n), 0.0), std::vector<double>(static_cast<std::size_t>(n), 0.0)};
  }
  std::vector<double> difference() const {
    std::vector<double> d(upper.size());
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = upper[k] - lower[k];
    return d;
  }
};

struct SolverConfig {
  double step_primal = 3.5e-4;
  double step_dual = 3.5e-3;
  double eta = 1e-4;
  int max_iters = 3000;
  double tolerance = 1e-8;
  int sweep_refresh = 1;  ///< nonlinear model: recompute every k iterations

  void validate() const {
    if (!(step_primal > 0.0) || !(step_dual > 0.0)) throw ValidationError("stepsizes must be positive");
    if (!(eta > 0.0)) throw ValidationError("eta must be positive");
    if (max_iters < 0) throw ValidationError("max_iters must be nonnegative");
    if (!(tolerance > 0.0)) throw ValidationError("tolerance must be positive");
    if (sweep_refresh < 1) throw ValidationError("sweep_refresh must be >= 1");
  }
};

/// OPF data laid out on the network's flat index space: one Device per
/// coordinate plus voltage bounds.
struct OpfProblem {
  std::vector<Device> coords;
  std::vector<char> controllable;
  VoltageBounds bounds;

  int dim() const { return static_cast<int>(coords.size()); }
  int device_count() const { return static_cast<int>(std::count(controllable.begin(), controllable.end(), 1)); }
};

// ---------------------------------------------------------------------------
// Device documents

struct Background {
  int bus = 0;
  Phase phase = Phase::a;
  double p = 0.0;
  double q = 0.0;
};

struct DeviceDocument {
  std::vector<Device> devices;
  std::vector<Background> background;
  double vmin = 0.95;  ///< magnitude, p.u.
  double vmax = 1.05;
};

inline void validate_device(const Device& d) {
  const std::string where = "device at bus " + std::to_string(d.bus) + " phase " + std::string(1, to_char(d.phase));
  for (double x : {d.p0, d.q0, d.pmin, d.pmax, d.qmin, d.qmax, d.wp, d.wq})
    if (!std::isfinite(x)) throw ValidationError(where + ": non-finite value");
  if (d.pmin > d.pmax || d.qmin > d.qmax) throw ValidationError(where + ": empty box");
  if (d.p0 < d.pmin || d.p0 > d.pmax || d.q0 < d.qmin || d.q0 > d.qmax)
    throw ValidationError(where + ": preference outside box");
  if (!(d.wp > 0.0) || !(d.wq > 0.0)) throw ValidationError(where + ": cost weights must be positive");
}

/// Builds per-coordinate data. Background injections at a device's
/// coordinate shift its preference and box, so the variable is always the
/// net injection at that coordinate.
inline OpfProblem make_problem(const Network& net, const DeviceDocument& doc) {
  if (!(doc.vmin > 0.0) || !(doc.vmin < doc.vmax)) throw ValidationError("voltage bounds need 0 < vmin < vmax");
  const auto n = static_cast<std::size_t>(net.dim());
  OpfProblem prob;
  prob.coords.resize(n);
  prob.controllable.assign(n, 0);
  std::vector<double> bg_p(n, 0.0), bg_q(n, 0.0);
  auto index_of = [&](int bus, Phase ph, const char* what) {
    if (bus <= 0 || bus >= net.bus_count() || !net.phases(bus).contains(ph))
      throw ValidationError(std::string(what) + " at bus " + std::to_string(bus) + " phase " + std::string(1, to_char(ph)) +
                            " is not a network coordinate");
    return static_cast<std::size_t>(net.flat_index(bus, ph));
  };
  for (const Background& b : doc.background) {
    const auto k = index_of(b.bus, b.phase, "background");
    bg_p[k] += b.p;
    bg_q[k] += b.q;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const FlatEntry& e = net.flat_entry(static_cast<int>(k));
    prob.coords[k] = Device{e.bus, e.phase, bg_p[k], bg_q[k], bg_p[k], bg_p[k], bg_q[k], bg_q[k], 0.0, 0.0};
  }
  for (const Device& d : doc.devices) {
    validate_device(d);
    const auto k = index_of(d.bus, d.phase, "device");
    if (prob.controllable[k]) throw ValidationError("two devices at bus " + std::to_string(d.bus) + " phase " + std::string(1, to_char(d.phase)));
    Device shifted = d;
    shifted.p0 += bg_p[k];
    shifted.pmin += bg_p[k];
    shifted.pmax += bg_p[k];
    shifted.q0 += bg_q[k];
    shifted.qmin += bg_q[k];
    shifted.qmax += bg_q[k];
    prob.coords[k] = shifted;
    prob.controllable[k] = 1;
  }
  prob.bounds.lower.assign(n, doc.vmin * doc.vmin);
  prob.bounds.upper.assign(n, doc.vmax * doc.vmax);
  return prob;
}

inline DeviceDocument device_document_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("devices document must be a JSON object");
  auto phase_of = [](const nlohmann::json& j, const std::string& where) {
    const auto s = detail::get_field<std::string>(j, "phase", where);
    auto p = s.size() == 1 ? phase_from_char(s[0]) : std::nullopt;
    if (!p) throw ParseError(where + ": bad phase \"" + s + "\"");
    return *p;
  };
  DeviceDocument out;
  if (doc.contains("devices")) {
    for (const auto& j : doc["devices"]) {
      Device d;
      d.bus = detail::get_field<int>(j, "bus", "device");
      d.phase = phase_of(j, "device");
      d.p0 = detail::get_field<double>(j, "p0", "device");
      d.q0 = detail::get_field<double>(j, "q0", "device");
      d.pmin = detail::get_field<double>(j, "pmin", "device");
      d.pmax = detail::get_field<double>(j, "pmax", "device");
      d.qmin = detail::get_field<double>(j, "qmin", "device");
      d.qmax = detail::get_field<double>(j, "qmax", "device");
      d.wp = j.value("wp", 1.0);
      d.wq = j.value("wq", 1.0);
      out.devices.push_back(d);
    }
  }
  if (doc.contains("background")) {
    for (const auto& j : doc["background"]) {
      Background b;
      b.bus = detail::get_field<int>(j, "bus", "background");
      b.phase = phase_of(j, "background");
      b.p = j.value("p", 0.0);
      b.q = j.value("q", 0.0);
      out.background.push_back(b);
    }
  }
  out.vmin = doc.value("vmin", 0.95);
  out.vmax = doc.value("vmax", 1.05);
  return out;
}

inline DeviceDocument load_devices(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open devices file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("devices file " + path + ": " + e.what());
  }
  return device_document_from_json(doc);
}

inline nlohmann::json to_json(const DeviceDocument& d) {
  nlohmann::json doc;
  auto& devs = doc["devices"] = nlohmann::json::array();
  for (const Device& x : d.devices) {
    devs.push_back({{"bus", x.bus}, {"phase", std::string(1, to_char(x.phase))}, {"p0", x.p0}, {"q0", x.q0},
                    {"pmin", x.pmin}, {"pmax", x.pmax}, {"qmin", x.qmin}, {"qmax", x.qmax}, {"wp", x.wp}, {"wq", x.wq}});
  }
  auto& bg = doc["background"] = nlohmann::json::array();
  for (const Background& b : d.background)
    bg.push_back({{"bus", b.bus}, {"phase", std::string(1, to_char(b.phase))}, {"p", b.p}, {"q", b.q}});
  doc["vmin"] = d.vmin;
  doc["vmax"] = d.vmax;
  return doc;
}

// ---------------------------------------------------------------------------
// Primal-dual building blocks

/// Projected dual ascent on the regularized Lagrangian, evaluated at v.
inline DualState dual_update(const DualState& mu, std::span<const double> v, const VoltageBounds& bounds,
                             double step, double eta) {
  const std::size_t n = mu.upper.size();
  require_size(mu.lower.size(), n, "dual_update mu_lower");
  require_size(v.size(), n, "dual_update v");
  require_size(bounds.lower.size(), n, "dual_update lower bounds");
  require_size(bounds.upper.size(), n, "dual_update upper bounds");
  DualState out{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.lower[k] = std::max(0.0, mu.lower[k] + step * (bounds.lower[k] - v[k] - eta * mu.lower[k]));
    out.upper[k] = std::max(0.0, mu.upper[k] + step * (v[k] - bounds.upper[k] - eta * mu.upper[k]));
  }
  return out;
}

inline DualState dual_update(const DualState& mu, std::span<const double> v, const VoltageBounds& bounds,
                             const SolverConfig& cfg) {
  return dual_update(mu, v, bounds, cfg.step_dual, cfg.eta);
}

inline double total_cost(const OpfProblem& prob, std::span<const double> p, std::span<const double> q) {
  double c = 0.0;
  for (std::size_t k = 0; k < prob.coords.size(); ++k) c += cost_and_gradient(prob.coords[k], p[k], q[k]).cost;
  return c;
}

/// sum C + mu_lo'(v_lo - v) + mu_up'(v - v_up) - eta/2 (|mu_up|^2 + |mu_lo|^2)
inline double lagrangian_value(const OpfProblem& prob, std::span<const double> p, std::span<const double> q,
                               const DualState& mu, std::span<const double> v, double eta) {
  const auto n = static_cast<std::size_t>(prob.dim());
  require_size(p.size(), n, "lagrangian p");
  require_size(q.size(), n, "lagrangian q");
  require_size(v.size(), n, "lagrangian v");
  require_size(mu.upper.size(), n, "lagrangian mu_upper");
  require_size(mu.lower.size(), n, "lagrangian mu_lower");
  double value = total_cost(prob, p, q);
  double norm2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    value += mu.lower[k] * (prob.bounds.lower[k] - v[k]) + mu.upper[k] * (v[k] - prob.bounds.upper[k]);
    norm2 += mu.upper[k] * mu.upper[k] + mu.lower[k] * mu.lower[k];
  }
  return value - 0.5 * eta * norm2;
}

/// Infinity norm of the projected-gradient fixed-point map. `g_p`, `g_q` are
/// the coupling terms R'(mu_up - mu_lo), X'(mu_up - mu_lo) at the current duals.
inline double saddle_residual(const OpfProblem& prob, std::span<const double> p, std::span<const double> q,
                              const DualState& mu, std::span<const double> v, std::span<const double> g_p,
                              std::span<const double> g_q, const SolverConfig& cfg) {
  const auto n = static_cast<std::size_t>(prob.dim());
  require_size(g_p.size(), n, "saddle_residual g_p");
  require_size(g_q.size(), n, "saddle_residual g_q");
  require_size(v.size(), n, "saddle_residual v");
  double r = 0.0;
  const double ep = cfg.step_primal;
  const double ed = cfg.step_dual;
  for (std::size_t k = 0; k < n; ++k) {
    const Device& d = prob.coords[k];
    const CostGradient cg = cost_and_gradient(d, p[k], q[k]);
    const auto [pp, qq] = project_box(d, p[k] - ep * (cg.dp + g_p[k]), q[k] - ep * (cg.dq + g_q[k]));
    r = std::max({r, std::abs(p[k] - pp) / ep, std::abs(q[k] - qq) / ep});
    const double lo = std::max(0.0, mu.lower[k] + ed * (prob.bounds.lower[k] - v[k] - cfg.eta * mu.lower[k]));
    const double up = std::max(0.0, mu.upper[k] + ed * (v[k] - prob.bounds.upper[k] - cfg.eta * mu.upper[k]));
    r = std::max({r, std::abs(mu.lower[k] - lo) / ed, std::abs(mu.upper[k] - up) / ed});
  }
  return r;
}

}  // namespace mlopf
