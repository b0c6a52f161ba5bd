#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mlopf/coupling.hpp"
#include "mlopf/opf.hpp"
#include "mlopf/powerflow.hpp"
#include "mlopf/sensitivity.hpp"

namespace mlopf {

// ---------------------------------------------------------------------------
// Voltage models

class VoltageModel {
 public:
  virtual ~VoltageModel() = default;
  virtual std::string name() const = 0;
  /// Squared voltages for injections (p, q) at iteration `t`.
  virtual std::vector<double> evaluate(std::span<const double> p, std::span<const double> q, int t) = 0;
};

/// The linear model evaluated through the tree in O(N).
class LinearVoltageModel final : public VoltageModel {
 public:
  explicit LinearVoltageModel(const Network& net) : tree_(net) {}
  std::string name() const override { return "linear"; }
  std::vector<double> evaluate(std::span<const double> p, std::span<const double> q, int) override { return tree_(p, q); }

 private:
  TreeLinearVoltage tree_;
};

class DenseLinearVoltageModel final : public VoltageModel {
 public:
  explicit DenseLinearVoltageModel(const SensitivityMatrices& s) : s_(&s) {}
  std::string name() const override { return "linear-dense"; }
  std::vector<double> evaluate(std::span<const double> p, std::span<const double> q, int) override {
    return voltage_linear(*s_, p, q);
  }

 private:
  const SensitivityMatrices* s_;
};

/// Nonlinear feedback: voltages come from a backward/forward sweep,
/// recomputed every `refresh` iterations and held in between.
class SweepVoltageModel final : public VoltageModel {
 public:
  SweepVoltageModel(const Network& net, SweepOptions opt = {}, int refresh = 1)
      : net_(&net), opt_(opt), refresh_(std::max(1, refresh)) {}
  std::string name() const override { return "sweep"; }
  std::vector<double> evaluate(std::span<const double> p, std::span<const double> q, int t) override {
    if (cached_.empty() || t % refresh_ == 0) {
      last_ = backward_forward_sweep(*net_, p, q, opt_);
      cached_ = last_.v;
    }
    return cached_;
  }
  const VoltageSolution& last_solution() const { return last_; }

 private:
  const Network* net_;
  SweepOptions opt_;
  int refresh_;
  VoltageSolution last_;
  std::vector<double> cached_;
};

// ---------------------------------------------------------------------------
// Iteration

struct SolverState {
  std::vector<double> p;
  std::vector<double> q;
  DualState mu;
  std::vector<double> v;
  int t = 0;
};

/// Preferences for every coordinate, zero duals, v from the model.
inline SolverState initial_state(const OpfProblem& prob, VoltageModel& model) {
  SolverState s;
  const auto n = static_cast<std::size_t>(prob.dim());
  s.p.resize(n);
  s.q.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    s.p[k] = prob.coords[k].p0;
    s.q[k] = prob.coords[k].q0;
  }
  s.mu = DualState::zeros(prob.dim());
  s.v = model.evaluate(s.p, s.q, 0);
  return s;
}

/// One primal-dual step given the coupling terms at the current duals. The
/// dual update reads the current v, the primal update the current duals.
inline SolverState step_with(const SolverState& s, const OpfProblem& prob, const CouplingResult& g, VoltageModel& model,
                             const SolverConfig& cfg) {
  const auto n = static_cast<std::size_t>(prob.dim());
  require_size(g.g_p.size(), n, "step coupling");
  SolverState next;
  next.p.resize(n);
  next.q.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Device& d = prob.coords[k];
    const CostGradient cg = cost_and_gradient(d, s.p[k], s.q[k]);
    const auto [pp, qq] =
        project_box(d, s.p[k] - cfg.step_primal * (cg.dp + g.g_p[k]), s.q[k] - cfg.step_primal * (cg.dq + g.g_q[k]));
    next.p[k] = pp;
    next.q[k] = qq;
  }
  next.mu = dual_update(s.mu, s.v, prob.bounds, cfg);
  next.t = s.t + 1;
  next.v = model.evaluate(next.p, next.q, next.t);
  return next;
}

inline SolverState step(const SolverState& s, const OpfProblem& prob, CouplingEngine& engine, VoltageModel& model,
                        const SolverConfig& cfg) {
  if (engine.dim() != prob.dim()) throw std::invalid_argument("engine dimension does not match problem");
  const CouplingResult g = engine.compute(s.mu.upper, s.mu.lower);
  return step_with(s, prob, g, model, cfg);
}

struct TraceRecord {
  int iter = 0;
  double objective = 0.0;
  double lagrangian = 0.0;
  double max_over_violation = 0.0;   ///< max(0, v - v_upper), p.u.^2
  double max_under_violation = 0.0;  ///< max(0, v_lower - v), p.u.^2
  double residual = 0.0;
  std::uint64_t coupling_ops = 0;
  std::int64_t step_ns = 0;
  std::int64_t coupling_ns = 0;
};

/// Record k describes state k; the last record is the final state.
struct Trace {
  std::vector<TraceRecord> records;
};

inline void write_trace_csv(const Trace& trace, std::ostream& os) {
  os << "iter,objective,lagrangian,max_over_violation,max_under_violation,residual,coupling_ops,step_ns\n";
  const auto old = os.precision(17);
  for (const auto& r : trace.records) {
    os << r.iter << ',' << r.objective << ',' << r.lagrangian << ',' << r.max_over_violation << ','
       << r.max_under_violation << ',' << r.residual << ',' << r.coupling_ops << ',' << r.step_ns << '\n';
  }
  os.precision(old);
}

inline std::pair<double, double> max_violations(const VoltageBounds& b, std::span<const double> v) {
  double over = 0.0;
  double under = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    over = std::max(over, v[k] - b.upper[k]);
    under = std::max(under, b.lower[k] - v[k]);
  }
  return {over, under};
}

enum class RunStatus { converged, max_iters };

struct RunResult {
  SolverState state;
  Trace trace;
  RunStatus status = RunStatus::max_iters;
  int iterations = 0;
  double final_residual = 0.0;
  std::uint64_t total_coupling_ops = 0;
  std::int64_t total_coupling_ns = 0;
  std::int64_t total_step_ns = 0;
};

/// Iterates until the saddle residual drops below cfg.tolerance or
/// cfg.max_iters steps have run.
inline RunResult run(SolverState state, const OpfProblem& prob, CouplingEngine& engine, VoltageModel& model,
                     const SolverConfig& cfg) {
  cfg.validate();
  if (engine.dim() != prob.dim()) throw std::invalid_argument("engine dimension does not match problem");
  using Clock = std::chrono::steady_clock;
  auto ns = [](Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count();
  };
  RunResult out;
  out.trace.records.reserve(static_cast<std::size_t>(cfg.max_iters) + 1);
  for (int it = 0;; ++it) {
    const auto t0 = Clock::now();
    const CouplingResult g = engine.compute(state.mu.upper, state.mu.lower);
    const auto t1 = Clock::now();
    TraceRecord rec;
    rec.iter = it;
    rec.objective = total_cost(prob, state.p, state.q);
    rec.lagrangian = lagrangian_value(prob, state.p, state.q, state.mu, state.v, cfg.eta);
    std::tie(rec.max_over_violation, rec.max_under_violation) = max_violations(prob.bounds, state.v);
    rec.residual = saddle_residual(prob, state.p, state.q, state.mu, state.v, g.g_p, g.g_q, cfg);
    rec.coupling_ops = g.op_count;
    rec.coupling_ns = ns(t0, t1);
    out.final_residual = rec.residual;
    if (rec.residual < cfg.tolerance) {
      out.status = RunStatus::converged;
      out.trace.records.push_back(rec);
      break;
    }
    if (it == cfg.max_iters) {
      out.trace.records.push_back(rec);
      break;
    }
    const auto t2 = Clock::now();
    state = step_with(state, prob, g, model, cfg);
    rec.step_ns = rec.coupling_ns + ns(t2, Clock::now());
    out.total_coupling_ops += g.op_count;
    out.total_coupling_ns += rec.coupling_ns;
    out.total_step_ns += rec.step_ns;
    out.trace.records.push_back(rec);
    ++out.iterations;
  }
  out.state = std::move(state);
  return out;
}

}  // namespace mlopf
