// Command-line front end: validate | partition | gen | solve | bench | compare.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "mlopf/mlopf.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mlopf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitValidation = 2;
constexpr int kExitSolve = 3;

struct Options {
  std::string network;
  std::string devices;
  std::string partition;
  std::string engine = "flat";
  std::string voltage_model = "linear";
  int iters = 3000;
  double step_primal = SolverConfig{}.step_primal;
  double step_dual = SolverConfig{}.step_dual;
  double eta = SolverConfig{}.eta;
  double tolerance = SolverConfig{}.tolerance;
  int sweep_refresh = 1;
  std::uint64_t seed = 1;
  std::string out;
  int threads = 1;
  bool audit = false;
  bool require_convergence = false;
  int repeat = 1;

  // partition
  int area_size = 0;
  int subarea_size = 0;

  // gen
  FeederSpec feeder;

  // bench
  std::vector<int> sizes;
  std::vector<std::string> engines{"flat", "bilevel", "trilevel"};
  int bench_subareas = 4;

  // compare
  std::vector<double> scales{1.0};

  std::vector<std::string> argv;
};

/// Failure with a machine-readable kind and an exit code.
struct CommandError : std::runtime_error {
  std::string kind;
  int code;
  CommandError(std::string k, int c, const std::string& msg) : std::runtime_error(msg), kind(std::move(k)), code(c) {}
};

[[noreturn]] void fail_validation(const std::string& msg) { throw CommandError("validation", kExitValidation, msg); }

std::string absolute_or_empty(const std::string& p) { return p.empty() ? p : fs::absolute(p).string(); }

SolverConfig raw_config(const Options& o) {
  SolverConfig c;
  c.step_primal = o.step_primal;
  c.step_dual = o.step_dual;
  c.eta = o.eta;
  c.max_iters = o.iters;
  c.tolerance = o.tolerance;
  c.sweep_refresh = o.sweep_refresh;
  return c;
}

SolverConfig solver_config(const Options& o) {
  const SolverConfig c = raw_config(o);
  try {
    c.validate();
  } catch (const ValidationError& e) {
    fail_validation(e.what());
  }
  return c;
}

json config_json(const SolverConfig& c) {
  return {{"step_primal", c.step_primal}, {"step_dual", c.step_dual}, {"eta", c.eta},
          {"max_iters", c.max_iters},     {"tolerance", c.tolerance}, {"sweep_refresh", c.sweep_refresh}};
}

fs::path prepare_out(const Options& o) {
  if (o.out.empty()) fail_validation("--out is required");
  fs::path dir(o.out);
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

json manifest(const std::string& command, const Options& o) {
  return {{"command", command},
          {"argv", o.argv},
          {"inputs", {{"network", absolute_or_empty(o.network)}, {"devices", absolute_or_empty(o.devices)}, {"partition", absolute_or_empty(o.partition)}}},
          {"engine", o.engine},
          {"voltage_model", o.voltage_model},
          {"config", config_json(raw_config(o))},
          {"seed", o.seed},
          {"threads", o.threads},
          {"audit", o.audit},
          {"require_convergence", o.require_convergence},
          {"out", absolute_or_empty(o.out)}};
}

Network need_network(const Options& o) {
  if (o.network.empty()) fail_validation("--network is required");
  return load_network(o.network);
}

DeviceDocument need_devices(const Options& o) {
  if (o.devices.empty()) fail_validation("--devices is required");
  return load_devices(o.devices);
}

/// Partition file if given, otherwise the automatic one sized near sqrt(buses).
PartitionHierarchy partition_for(const Options& o, const Network& net, EngineKind kind) {
  PartitionHierarchy part;
  if (!o.partition.empty()) {
    part = load_partition(net, o.partition);
  } else {
    const int area = std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(net.bus_count())))));
    const int sub = kind == EngineKind::trilevel ? std::max(1, area / 4) : 0;
    part = auto_partition(net, area, sub);
  }
  const auto rep = validate_partition(net, part);
  if (!rep.ok()) fail_validation("partition: " + rep.violations.front().kind + ": " + rep.violations.front().message);
  return part;
}

EngineKind engine_kind(const std::string& s) {
  try {
    return engine_from_string(s);
  } catch (const std::invalid_argument& e) {
    fail_validation(e.what());
  }
}

std::unique_ptr<VoltageModel> voltage_model(const Options& o, const Network& net, const SensitivityMatrices* sens) {
  if (o.voltage_model == "linear") {
    if (sens) return std::make_unique<DenseLinearVoltageModel>(*sens);
    return std::make_unique<LinearVoltageModel>(net);
  }
  if (o.voltage_model == "sweep") return std::make_unique<SweepVoltageModel>(net, SweepOptions{}, o.sweep_refresh);
  fail_validation("unknown voltage model \"" + o.voltage_model + "\" (expected linear or sweep)");
}

json report_json(const ValidationReport& rep) {
  json arr = json::array();
  for (const auto& v : rep.violations) arr.push_back({{"kind", v.kind}, {"message", v.message}, {"buses", v.buses}});
  return arr;
}

// ---------------------------------------------------------------------------

int cmd_validate(const Options& o) {
  json out;
  bool ok = true;
  const Network net = need_network(o);
  out["network"] = {{"buses", net.bus_count()}, {"dim", net.dim()}, {"ok", true}};
  if (!o.devices.empty()) {
    try {
      const OpfProblem prob = make_problem(net, load_devices(o.devices));
      out["devices"] = {{"ok", true}, {"controllable", prob.device_count()}};
    } catch (const ValidationError& e) {
      out["devices"] = {{"ok", false}, {"message", e.what()}};
      ok = false;
    }
  }
  if (!o.partition.empty()) {
    const PartitionHierarchy part = load_partition(net, o.partition);
    const auto rep = validate_partition(net, part);
    out["partition"] = {{"ok", rep.ok()}, {"areas", part.area_count()}, {"violations", report_json(rep)}};
    ok = ok && rep.ok();
  }
  out["ok"] = ok;
  std::cout << out.dump(2) << '\n';
  if (!ok) throw CommandError("validation", kExitValidation, "input validation failed");
  return kExitOk;
}

int cmd_partition(const Options& o) {
  const Network net = need_network(o);
  if (o.area_size < 1) fail_validation("--area-size must be >= 1");
  if (o.subarea_size < 0) fail_validation("--subarea-size must be >= 0");
  const PartitionHierarchy part = auto_partition(net, o.area_size, o.subarea_size);
  json doc = to_json(part);
  if (!o.out.empty()) {
    const fs::path dir = prepare_out(o);
    write_json(dir / "partition.json", doc);
    json m = manifest("partition", o);
    m["area_size"] = o.area_size;
    m["subarea_size"] = o.subarea_size;
    write_json(dir / "manifest.json", m);
  }
  json summary{{"areas", part.area_count()}, {"unclustered", part.unclustered.size()}};
  json sizes = json::array();
  for (const Area& a : part.areas) sizes.push_back({{"root", a.root}, {"members", a.members.size()}, {"subareas", a.subareas.size()}});
  summary["area_sizes"] = sizes;
  std::cout << summary.dump(2) << '\n';
  return kExitOk;
}

int cmd_gen(Options o) {
  o.feeder.seed = o.seed;
  try {
    o.feeder.validate();
  } catch (const ValidationError& e) {
    fail_validation(e.what());
  }
  const fs::path dir = prepare_out(o);
  const GeneratedFeeder f = generate(o.feeder);
  write_json(dir / "network.json", to_json(f.network));
  write_json(dir / "devices.json", to_json(f.devices));
  write_json(dir / "partition.json", to_json(f.partition));
  json m = manifest("gen", o);
  const FeederSpec& s = o.feeder;
  m["feeder"] = {{"buses", s.buses},           {"trunk_buses", s.trunk_buses},       {"laterals", s.laterals},
                 {"chain_prob", s.chain_prob}, {"phase_drop_prob", s.phase_drop_prob}, {"load_scale", s.load_scale},
                 {"device_density", s.device_density}, {"device_box", s.device_box},   {"target_indices", s.target_indices},
                 {"subareas_per_area", s.subareas_per_area}, {"seed", s.seed}};
  write_json(dir / "manifest.json", m);
  std::cout << json{{"buses", f.network.bus_count()}, {"dim", f.network.dim()}, {"devices", f.devices.devices.size()},
                    {"areas", f.partition.area_count()}}
                   .dump(2)
            << '\n';
  return kExitOk;
}

json setpoints_json(const Network& net, const OpfProblem& prob, const SolverState& s) {
  json arr = json::array();
  for (int k = 0; k < net.dim(); ++k) {
    const FlatEntry& e = net.flat_entry(k);
    const auto i = static_cast<std::size_t>(k);
    arr.push_back({{"bus", e.bus},
                   {"phase", std::string(1, to_char(e.phase))},
                   {"controllable", prob.controllable[i] != 0},
                   {"p", s.p[i]},
                   {"q", s.q[i]},
                   {"v", s.v[i]},
                   {"mu_upper", s.mu.upper[i]},
                   {"mu_lower", s.mu.lower[i]}});
  }
  return {{"iteration", s.t}, {"setpoints", arr}};
}

struct SolveInputs {
  Network net;
  OpfProblem prob;
  PartitionHierarchy part;
  EngineKind kind;
};

SolveInputs load_solve_inputs(const Options& o) {
  const EngineKind kind = engine_kind(o.engine);
  Network net = need_network(o);
  OpfProblem prob = make_problem(net, need_devices(o));
  PartitionHierarchy part = kind == EngineKind::flat && o.partition.empty() ? PartitionHierarchy{} : partition_for(o, net, kind);
  return {std::move(net), std::move(prob), std::move(part), kind};
}

int cmd_solve(const Options& o) {
  const SolverConfig cfg = solver_config(o);
  const fs::path dir = prepare_out(o);
  write_json(dir / "manifest.json", manifest("solve", o));
  const SolveInputs in = load_solve_inputs(o);
  const PathOracle paths(in.net);
  std::optional<SensitivityMatrices> sens;
  if (in.kind == EngineKind::flat) sens = build_sensitivity(in.net, paths);
  AuditLog log;
  auto engine = make_engine(in.kind, EngineContext{&in.net, &paths, sens ? &*sens : nullptr, &in.part}, o.audit ? &log : nullptr,
                            o.threads);
  auto model = voltage_model(o, in.net, nullptr);

  const auto t0 = std::chrono::steady_clock::now();
  SolverState x0 = initial_state(in.prob, *model);
  const RunResult res = run(std::move(x0), in.prob, *engine, *model, cfg);
  const auto wall = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();

  {
    std::ofstream f(dir / "trace.csv");
    write_trace_csv(res.trace, f);
  }
  write_json(dir / "setpoints.json", setpoints_json(in.net, in.prob, res.state));
  const TraceRecord& last = res.trace.records.back();
  json summary{{"engine", to_string(in.kind)},
               {"voltage_model", model->name()},
               {"dim", in.net.dim()},
               {"areas", in.part.area_count()},
               {"controllable", in.prob.device_count()},
               {"iterations", res.iterations},
               {"status", res.status == RunStatus::converged ? "converged" : "max_iters"},
               {"final_objective", last.objective},
               {"final_lagrangian", last.lagrangian},
               {"max_over_violation", last.max_over_violation},
               {"max_under_violation", last.max_under_violation},
               {"residual", res.final_residual},
               {"total_coupling_ops", res.total_coupling_ops},
               {"coupling_ns", res.total_coupling_ns},
               {"step_ns", res.total_step_ns},
               {"wall_ns", wall}};
  if (o.audit) {
    {
      std::ofstream f(dir / "audit.jsonl");
      log.write_lines(f);
    }
    const AuditReport rep = privacy_audit(log);
    json viol = json::array();
    for (const auto& v : rep.violations) viol.push_back({{"consumer", v.consumer}, {"kind", v.kind}, {"bus", v.bus}, {"owner", v.owner}});
    summary["audit"] = {{"records", rep.records},
                        {"foreign_dual_reads", rep.foreign_dual_reads},
                        {"foreign_topology_reads", rep.foreign_topology_reads},
                        {"global_access", rep.global_access},
                        {"clean", rep.clean()},
                        {"violations", viol}};
  }
  write_json(dir / "summary.json", summary);
  std::cout << summary.dump(2) << '\n';
  if (o.require_convergence && res.status != RunStatus::converged) {
    throw CommandError("nonconvergence", kExitSolve,
                       "residual " + std::to_string(res.final_residual) + " above tolerance after " + std::to_string(res.iterations) + " iterations");
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bench

struct BenchRow {
  int n = 0;
  int k = 0;
  std::string engine;
  int iters = 0;
  std::int64_t wall_ns = 0;
  std::int64_t coupling_ns = 0;
  std::uint64_t coupling_ops = 0;
  double time_ratio = 0.0;
  std::string error;
};

struct BenchCase {
  Network net;
  OpfProblem prob;
  PartitionHierarchy part;
};

std::int64_t median(std::vector<std::int64_t> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

std::vector<BenchRow> bench_case(const BenchCase& c, const Options& o, const SolverConfig& cfg) {
  const PathOracle paths(c.net);
  std::optional<SensitivityMatrices> sens;
  std::vector<BenchRow> rows;
  for (const std::string& name : o.engines) {
    BenchRow row;
    row.n = c.net.dim();
    row.k = c.part.area_count();
    row.engine = name;
    try {
      const EngineKind kind = engine_kind(name);
      if (kind == EngineKind::flat && !sens) sens = build_sensitivity(c.net, paths);
      PartitionHierarchy part = c.part;
      if (kind == EngineKind::bilevel)
        for (auto& a : part.areas) {
          a.subareas.clear();
          a.remainder = a.members;
        }
      auto engine = make_engine(kind, EngineContext{&c.net, &paths, sens ? &*sens : nullptr, &part}, nullptr, o.threads);
      // Fixed step count: a bench feeder may already sit at its fixed point.
      std::vector<std::int64_t> walls, couplings;
      for (int r = 0; r < std::max(1, o.repeat); ++r) {
        auto model = voltage_model(o, c.net, nullptr);
        SolverState x = initial_state(c.prob, *model);
        std::int64_t wall = 0, coupling = 0;
        std::uint64_t ops = 0;
        for (int it = 0; it < cfg.max_iters; ++it) {
          const auto t0 = std::chrono::steady_clock::now();
          const CouplingResult g = engine->compute(x.mu.upper, x.mu.lower);
          const auto t1 = std::chrono::steady_clock::now();
          x = step_with(x, c.prob, g, *model, cfg);
          const auto t2 = std::chrono::steady_clock::now();
          coupling += std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
          wall += std::chrono::duration_cast<std::chrono::nanoseconds>(t2 - t0).count();
          ops += g.op_count;
        }
        walls.push_back(wall);
        couplings.push_back(coupling);
        row.iters = cfg.max_iters;
        row.coupling_ops = ops;
      }
      row.wall_ns = median(walls);
      row.coupling_ns = median(couplings);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(row);
  }
  std::int64_t flat_ns = 0;
  for (const auto& r : rows)
    if (r.engine == "flat" && r.error.empty()) flat_ns = r.wall_ns;
  for (auto& r : rows)
    if (flat_ns > 0 && r.error.empty()) r.time_ratio = static_cast<double>(r.wall_ns) / static_cast<double>(flat_ns);
  return rows;
}

int cmd_bench(const Options& o) {
  const SolverConfig cfg = solver_config(o);
  const fs::path dir = prepare_out(o);
  json m = manifest("bench", o);
  m["sizes"] = o.sizes;
  m["engines"] = o.engines;
  m["subareas"] = o.bench_subareas;
  m["repeat"] = o.repeat;
  write_json(dir / "manifest.json", m);

  std::vector<BenchRow> rows;
  if (!o.network.empty()) {
    const SolveInputs in = [&] {
      Options copy = o;
      copy.engine = "trilevel";
      return load_solve_inputs(copy);
    }();
    const auto r = bench_case(BenchCase{in.net, in.prob, in.part}, o, cfg);
    rows.insert(rows.end(), r.begin(), r.end());
  } else {
    if (o.sizes.empty()) fail_validation("bench needs --sizes or --network/--devices");
    for (int n : o.sizes) {
      try {
        const GeneratedFeeder f = generate(balanced_feeder_spec(n, o.bench_subareas, o.seed));
        const auto r = bench_case(BenchCase{f.network, make_problem(f.network, f.devices), f.partition}, o, cfg);
        rows.insert(rows.end(), r.begin(), r.end());
      } catch (const std::exception& e) {
        for (const auto& name : o.engines) rows.push_back({n, 0, name, 0, 0, 0, 0, 0.0, e.what()});
      }
    }
  }

  std::ofstream csv(dir / "bench.csv");
  csv << "N,K,engine,iters,wall_ns,coupling_ns,coupling_ops,time_ratio_vs_flat,error\n";
  for (const auto& r : rows) {
    csv << r.n << ',' << r.k << ',' << r.engine << ',' << r.iters << ',' << r.wall_ns << ',' << r.coupling_ns << ','
        << r.coupling_ops << ',' << std::setprecision(6) << r.time_ratio << ',' << std::quoted(r.error) << '\n';
  }
  std::ostringstream table;
  table << std::left << std::setw(7) << "N" << std::setw(5) << "K" << std::setw(10) << "engine" << std::right << std::setw(7)
        << "iters" << std::setw(14) << "wall_s" << std::setw(14) << "coupling_s" << std::setw(16) << "coupling_ops"
        << std::setw(10) << "ratio" << '\n';
  for (const auto& r : rows) {
    table << std::left << std::setw(7) << r.n << std::setw(5) << r.k << std::setw(10) << r.engine << std::right
          << std::setw(7) << r.iters << std::setw(14) << std::fixed << std::setprecision(4) << r.wall_ns * 1e-9
          << std::setw(14) << r.coupling_ns * 1e-9 << std::setw(16) << r.coupling_ops << std::setw(10)
          << std::setprecision(3) << r.time_ratio;
    if (!r.error.empty()) table << "  error: " << r.error;
    table << '\n';
  }
  std::ofstream(dir / "bench.txt") << table.str();
  std::cout << table.str();
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_compare(const Options& o) {
  const fs::path dir = prepare_out(o);
  json m = manifest("compare", o);
  m["scales"] = o.scales;
  write_json(dir / "manifest.json", m);
  const Network net = need_network(o);
  const OpfProblem prob = make_problem(net, need_devices(o));
  const SensitivityMatrices sens = build_sensitivity(net);
  json scenarios = json::array();
  for (double scale : o.scales) {
    std::vector<double> p, q;
    for (const auto& d : prob.coords) {
      p.push_back(scale * d.p0);
      q.push_back(scale * d.q0);
    }
    std::ostringstream name;
    name << "compare_" << scale << ".csv";
    json rec{{"scale", scale}};
    try {
      const ModelComparison c = compare_models(net, sens, p, q);
      std::ofstream f(dir / (o.scales.size() == 1 ? std::string("compare.csv") : name.str()));
      write_comparison_csv(c, f);
      rec["max_abs"] = c.max_abs;
      rec["rms"] = c.rms;
      rec["mean"] = c.mean;
      rec["ok"] = true;
    } catch (const SolveError& e) {
      rec["ok"] = false;
      rec["error"] = e.what();
    }
    scenarios.push_back(rec);
  }
  const json summary{{"scenarios", scenarios}};
  write_json(dir / "summary.json", summary);
  std::cout << summary.dump(2) << '\n';
  return kExitOk;
}

void emit_error(const Options& o, const std::string& kind, const std::string& message) {
  const json rec{{"error", kind}, {"message", message}};
  std::cerr << rec.dump() << '\n';
  if (!o.out.empty()) {
    std::error_code ec;
    fs::create_directories(o.out, ec);
    std::ofstream f(fs::path(o.out) / "error.json");
    if (f) f << rec.dump(2) << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  o.argv.assign(argv, argv + argc);
  CLI::App app{"Multi-level primal-dual OPF solver for radial distribution feeders"};
  app.require_subcommand(1);

  app.add_option("--network", o.network, "network JSON");
  app.add_option("--devices", o.devices, "devices JSON");
  app.add_option("--partition", o.partition, "partition JSON");
  app.add_option("--engine", o.engine, "coupling engine")->check(CLI::IsMember({"flat", "bilevel", "trilevel"}));
  app.add_option("--voltage-model", o.voltage_model, "voltage model")->check(CLI::IsMember({"linear", "sweep"}));
  app.add_option("--iters", o.iters, "maximum iterations")->check(CLI::NonNegativeNumber);
  app.add_option("--step-primal", o.step_primal, "primal stepsize");
  app.add_option("--step-dual", o.step_dual, "dual stepsize");
  app.add_option("--eta", o.eta, "dual regularization");
  app.add_option("--tol", o.tolerance, "saddle residual tolerance");
  app.add_option("--sweep-refresh", o.sweep_refresh, "recompute the sweep every k iterations");
  app.add_option("--seed", o.seed, "random seed");
  app.add_option("--out", o.out, "output path");
  app.add_option("--threads", o.threads, "worker threads for multi-level engines")->check(CLI::PositiveNumber);
  app.add_flag("--audit", o.audit, "record and audit information flow");
  app.add_flag("--require-convergence", o.require_convergence, "exit 3 unless the residual reaches --tol");
  app.add_option("--repeat", o.repeat, "bench repetitions (median reported)")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "check network, devices and partition files");
  auto* partition = app.add_subcommand("partition", "automatic subtree partition");
  partition->add_option("--area-size", o.area_size, "target buses per area")->required();
  partition->add_option("--subarea-size", o.subarea_size, "target buses per subarea (0 = none)");
  auto* gen = app.add_subcommand("gen", "generate a synthetic feeder");
  gen->add_option("--buses", o.feeder.buses, "buses including the substation");
  gen->add_option("--trunk", o.feeder.trunk_buses, "three-phase trunk buses");
  gen->add_option("--laterals", o.feeder.laterals, "laterals hung off the trunk");
  gen->add_option("--chain-prob", o.feeder.chain_prob, "chance a lateral bus extends the newest one");
  gen->add_option("--phase-drop", o.feeder.phase_drop_prob, "phase drop probability");
  gen->add_option("--load-scale", o.feeder.load_scale, "background load multiplier");
  gen->add_option("--device-density", o.feeder.device_density, "devices per bus/phase");
  gen->add_option("--device-box", o.feeder.device_box, "device box half-width");
  gen->add_option("--target-indices", o.feeder.target_indices, "exact number of bus/phase indices");
  gen->add_option("--subareas", o.feeder.subareas_per_area, "suggested subareas per area");
  auto* solve = app.add_subcommand("solve", "run the primal-dual iteration");
  auto* bench = app.add_subcommand("bench", "time engines over a feeder-size sweep");
  bench->add_option("--sizes", o.sizes, "index counts of generated balanced feeders")->delimiter(',');
  bench->add_option("--engines", o.engines, "engines to run")->delimiter(',');
  bench->add_option("--subareas", o.bench_subareas, "subareas per area for generated feeders");
  auto* compare = app.add_subcommand("compare", "linear versus nonlinear voltages");
  compare->add_option("--scales", o.scales, "load scaling factors")->delimiter(',');
  for (auto* sub : {validate, partition, gen, solve, bench, compare}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    emit_error(o, "validation", e.what());
    return kExitValidation;
  }

  try {
    if (*validate) return cmd_validate(o);
    if (*partition) return cmd_partition(o);
    if (*gen) return cmd_gen(o);
    if (*solve) return cmd_solve(o);
    if (*bench) return cmd_bench(o);
    if (*compare) return cmd_compare(o);
  } catch (const CommandError& e) {
    emit_error(o, e.kind, e.what());
    return e.code;
  } catch (const ParseError& e) {
    emit_error(o, "validation", e.what());
    return kExitValidation;
  } catch (const ValidationError& e) {
    emit_error(o, "validation", e.what());
    return kExitValidation;
  } catch (const SolveError& e) {
    emit_error(o, "solve", e.what());
    return kExitSolve;
  } catch (const std::exception& e) {
    emit_error(o, "internal", e.what());
    return kExitInternal;
  }
  return kExitInternal;
}
