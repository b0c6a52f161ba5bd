#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

namespace mlopf {
namespace {

Device unit_device() { return Device{1, Phase::a, 0.0, 0.0, -1.0, 1.0, -1.0, 1.0, 1.0, 1.0}; }

TEST(Cost, Examples) {
  Device d = unit_device();
  d.p0 = 0.3;
  d.q0 = -0.1;
  const auto at_pref = cost_and_gradient(d, 0.3, -0.1);
  EXPECT_EQ(at_pref.cost, 0.0);
  EXPECT_EQ(at_pref.dp, 0.0);
  EXPECT_EQ(at_pref.dq, 0.0);

  const auto g = cost_and_gradient(unit_device(), 0.1, -0.2);
  EXPECT_NEAR(g.cost, 0.05, 1e-15);
  EXPECT_NEAR(g.dp, 0.2, 1e-15);
  EXPECT_NEAR(g.dq, -0.4, 1e-15);

  Device heavy = unit_device();
  heavy.wp = 2.0;
  const auto h = cost_and_gradient(heavy, 0.1, -0.2);
  EXPECT_NEAR(h.cost - 0.04, 2 * 0.01, 1e-15);
  EXPECT_NEAR(h.dp, 2 * g.dp, 1e-15);
  EXPECT_EQ(h.dq, g.dq);
}

TEST(Cost, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 200; ++k) {
    Device d{1, Phase::a, u(rng), u(rng), -2, 2, -2, 2, 0.1 + std::abs(u(rng)) * 5, 0.1 + std::abs(u(rng)) * 5};
    const double p = u(rng), q = u(rng), h = 1e-6;
    const auto g = cost_and_gradient(d, p, q);
    const double fdp = (cost_and_gradient(d, p + h, q).cost - cost_and_gradient(d, p - h, q).cost) / (2 * h);
    const double fdq = (cost_and_gradient(d, p, q + h).cost - cost_and_gradient(d, p, q - h).cost) / (2 * h);
    EXPECT_NEAR(fdp, g.dp, 1e-7 * std::max(1.0, std::abs(g.dp)));
    EXPECT_NEAR(fdq, g.dq, 1e-7 * std::max(1.0, std::abs(g.dq)));
  }
}

TEST(Project, Examples) {
  const Device d = unit_device();
  EXPECT_EQ(project_box(d, 0.2, -0.3), std::make_pair(0.2, -0.3));
  EXPECT_EQ(project_box(d, 1.5, -0.3).first, 1.0);
  EXPECT_EQ(project_box(d, 0.0, -7.0).second, -1.0);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int k = 0; k < 100; ++k) {
    const auto once = project_box(d, u(rng), u(rng));
    EXPECT_EQ(project_box(d, once.first, once.second), once);
  }
}

VoltageBounds bounds(std::size_t n, double lo = 0.95 * 0.95, double hi = 1.05 * 1.05) {
  return {std::vector<double>(n, lo), std::vector<double>(n, hi)};
}

TEST(DualUpdate, Examples) {
  const DualState mu{{0.0}, {0.25}};
  const auto b = bounds(1);
  const auto same = dual_update(mu, std::vector<double>{b.lower[0]}, b, 3.5e-3, 0.0);
  EXPECT_EQ(same.lower[0], 0.25);

  const DualState up{{0.1}, {0.0}};
  const auto next = dual_update(up, std::vector<double>{1.11}, b, 3.5e-3, 1e-4);
  EXPECT_NEAR(next.upper[0], 0.1 + 3.5e-3 * (1.11 - 1.1025 - 1e-4 * 0.1), 1e-15);
  EXPECT_NEAR(next.upper[0], 0.100026215, 1e-9);

  const auto clamped = dual_update(DualState::zeros(1), std::vector<double>{0.5}, b, 3.5e-3, 1e-4);
  EXPECT_EQ(clamped.upper[0], 0.0);
  EXPECT_THROW(dual_update(DualState::zeros(2), std::vector<double>{1.0}, bounds(2), 1e-3, 1e-4), DimensionError);
}

TEST(DualUpdate, NonnegativeForAnyInput) {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int k = 0; k < 500; ++k) {
    DualState mu{{std::abs(u(rng))}, {std::abs(u(rng))}};
    const auto b = bounds(1, 0.5 + std::abs(u(rng)) * 0.05, 1.5 + std::abs(u(rng)));
    const auto next = dual_update(mu, std::vector<double>{u(rng)}, b, std::abs(u(rng)), std::abs(u(rng)));
    EXPECT_GE(next.upper[0], 0.0);
    EXPECT_GE(next.lower[0], 0.0);
  }
}

OpfProblem one_device_problem() {
  OpfProblem prob;
  prob.coords = {Device{1, Phase::a, 0.2, -0.1, -1, 1, -1, 1, 2.0, 0.5}};
  prob.controllable = {1};
  prob.bounds = bounds(1);
  return prob;
}

TEST(Lagrangian, Examples) {
  const OpfProblem prob = one_device_problem();
  const std::vector<double> p{0.5}, q{0.3}, v{0.8};
  const double cost = total_cost(prob, p, q);
  EXPECT_EQ(lagrangian_value(prob, p, q, DualState::zeros(1), v, 1e-4), cost);
  EXPECT_EQ(lagrangian_value(prob, std::vector<double>{0.2}, std::vector<double>{-0.1}, DualState::zeros(1), v, 1e-4), 0.0);

  const DualState mu{{0.7}, {1.3}};
  const double eta = 0.01;
  const double by_terms = 2.0 * 0.3 * 0.3 + 0.5 * 0.4 * 0.4 + 1.3 * (0.9025 - 0.8) + 0.7 * (0.8 - 1.1025) -
                          0.5 * eta * (0.7 * 0.7 + 1.3 * 1.3);
  EXPECT_NEAR(lagrangian_value(prob, p, q, mu, v, eta), by_terms, 1e-14);
}

TEST(Lagrangian, StrictlyConcaveAlongDuals) {
  std::mt19937_64 rng(44);
  const OpfProblem prob = one_device_problem();
  std::uniform_real_distribution<double> u(0, 2);
  for (int k = 0; k < 100; ++k) {
    const DualState mu{{u(rng)}, {u(rng) + 0.01}};
    const std::vector<double> p{u(rng) - 1}, q{u(rng) - 1}, v{u(rng)};
    auto at = [&](double t) {
      DualState m{{mu.upper[0] * (1 + t)}, {mu.lower[0] * (1 + t)}};
      return lagrangian_value(prob, p, q, m, v, 1e-2);
    };
    const double h = 0.5;
    EXPECT_LT(at(h) - 2 * at(0) + at(-h), 0.0);
  }
}

SolverConfig config() {
  SolverConfig c;
  c.step_primal = 1e-2;
  c.step_dual = 1e-2;
  c.eta = 1e-4;
  return c;
}

TEST(Residual, ExactSaddleIsZero) {
  const OpfProblem prob = one_device_problem();
  // Preferred setpoint, feasible voltage, zero duals: no gradient anywhere.
  const std::vector<double> p{0.2}, q{-0.1}, v{1.0}, zero{0.0};
  EXPECT_EQ(saddle_residual(prob, p, q, DualState::zeros(1), v, zero, zero, config()), 0.0);
}

TEST(Residual, IsPure) {
  const OpfProblem prob = one_device_problem();
  const std::vector<double> p{0.5}, q{0.3}, v{1.2}, g{0.1};
  const DualState mu{{0.4}, {0.0}};
  const double r1 = saddle_residual(prob, p, q, mu, v, g, g, config());
  const double r2 = saddle_residual(prob, p, q, mu, v, g, g, config());
  EXPECT_EQ(r1, r2);
  EXPECT_GT(r1, 0.0);
}

TEST(Residual, InteriorDualFixedPoint) {
  OpfProblem prob;
  prob.coords = {Device{1, Phase::a, -0.3, -0.1, -0.3, -0.3, -0.1, -0.1, 0.0, 0.0}};
  prob.controllable = {0};
  prob.bounds = bounds(1);
  const SolverConfig cfg = config();
  const std::vector<double> v{1.11};
  const DualState mu{{std::max(0.0, (v[0] - prob.bounds.upper[0]) / cfg.eta)}, {0.0}};
  EXPECT_NEAR(mu.upper[0], 75.0, 1e-9);
  const std::vector<double> g{3.0};
  EXPECT_LT(saddle_residual(prob, std::vector<double>{-0.3}, std::vector<double>{-0.1}, mu, v, g, g, cfg), 1e-9);
  // The dual update leaves that state in place, and the cap holds.
  const auto next = dual_update(mu, v, prob.bounds, cfg);
  EXPECT_NEAR(next.upper[0], mu.upper[0], 1e-12);
  EXPECT_LE(mu.upper[0], (v[0] - prob.bounds.upper[0]) / cfg.eta + 1e-12);
}

TEST(Residual, FixedPointsRespectDualCap) {
  std::mt19937_64 rng(45);
  std::uniform_real_distribution<double> u(0.8, 1.3);
  const SolverConfig cfg = config();
  for (int k = 0; k < 100; ++k) {
    const auto n = std::size_t{5};
    const auto b = bounds(n);
    std::vector<double> v(n);
    for (auto& e : v) e = u(rng);
    DualState mu = DualState::zeros(static_cast<int>(n));
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mu.upper[i] = std::max(0.0, (v[i] - b.upper[i]) / cfg.eta);
      mu.lower[i] = std::max(0.0, (b.lower[i] - v[i]) / cfg.eta);
      worst = std::max({worst, v[i] - b.upper[i], b.lower[i] - v[i]});
    }
    const auto next = dual_update(mu, v, b, cfg);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(next.upper[i], mu.upper[i], 1e-9);
      EXPECT_NEAR(next.lower[i], mu.lower[i], 1e-9);
      EXPECT_LE(std::max(mu.upper[i], mu.lower[i]), worst / cfg.eta + 1e-9);
    }
  }
}

Network three_bus() {
  std::vector<Bus> buses{{0, PhaseSet::all(), std::nullopt}, {1, PhaseSet::all(), 0}, {2, PhaseSet{Phase::a, Phase::b}, 1}};
  PhaseMatrix z;
  z(Phase::a, Phase::a) = z(Phase::b, Phase::b) = z(Phase::c, Phase::c) = {0.01, 0.02};
  PhaseMatrix z2;
  z2(Phase::a, Phase::a) = z2(Phase::b, Phase::b) = {0.01, 0.02};
  return Network(1.0, buses, {{0, 1, z}, {1, 2, z2}});
}

TEST(Problem, BackgroundShiftsDevicesAndFillsGaps) {
  const Network net = three_bus();
  DeviceDocument doc;
  doc.background = {{1, Phase::a, -0.1, -0.05}, {2, Phase::b, -0.2, 0.0}};
  doc.devices = {Device{1, Phase::a, 0.0, 0.0, -0.5, 0.5, -0.5, 0.5, 1.0, 1.0}};
  doc.vmin = 0.9;
  doc.vmax = 1.1;
  const OpfProblem prob = make_problem(net, doc);
  ASSERT_EQ(prob.dim(), 5);
  EXPECT_EQ(prob.device_count(), 1);
  const Device& d = prob.coords[0];
  EXPECT_DOUBLE_EQ(d.p0, -0.1);
  EXPECT_DOUBLE_EQ(d.pmin, -0.6);
  EXPECT_DOUBLE_EQ(d.qmax, 0.45);
  const Device& fixed = prob.coords[static_cast<std::size_t>(net.flat_index(2, Phase::b))];
  EXPECT_EQ(fixed.pmin, -0.2);
  EXPECT_EQ(fixed.pmax, -0.2);
  EXPECT_EQ(fixed.wp, 0.0);
  EXPECT_DOUBLE_EQ(prob.bounds.lower[0], 0.81);
  EXPECT_DOUBLE_EQ(prob.bounds.upper[0], 1.21);
}

TEST(Problem, RejectsBadDocuments) {
  const Network net = three_bus();
  DeviceDocument dup;
  dup.devices = {unit_device(), unit_device()};
  EXPECT_THROW(make_problem(net, dup), ValidationError);
  DeviceDocument missing;
  missing.devices = {Device{2, Phase::c, 0, 0, -1, 1, -1, 1, 1, 1}};
  EXPECT_THROW(make_problem(net, missing), ValidationError);
  DeviceDocument outside;
  outside.devices = {Device{1, Phase::a, 2.0, 0, -1, 1, -1, 1, 1, 1}};
  EXPECT_THROW(make_problem(net, outside), ValidationError);
  DeviceDocument inverted;
  inverted.vmin = 1.1;
  inverted.vmax = 1.0;
  EXPECT_THROW(make_problem(net, inverted), ValidationError);
}

TEST(Problem, JsonRoundTrip) {
  DeviceDocument doc;
  doc.devices = {Device{1, Phase::b, 0.1, 0.0, -0.5, 0.5, -0.4, 0.4, 1.0, 2.0}};
  doc.background = {{2, Phase::a, -0.1, -0.05}};
  doc.vmin = 0.94;
  const auto back = device_document_from_json(to_json(doc));
  EXPECT_EQ(to_json(back).dump(), to_json(doc).dump());
  EXPECT_THROW(device_document_from_json(nlohmann::json::parse(R"({"devices": [{"bus": 1}]})")), ParseError);
}

}  // namespace
}  // namespace mlopf
