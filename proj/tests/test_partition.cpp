#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

namespace mlopf {
namespace {

using testing::LabelledFeeder;

Network star(int leaves) {
  std::vector<Bus> buses{{0, PhaseSet::all(), std::nullopt}};
  std::vector<Line> lines;
  for (int k = 1; k <= leaves; ++k) {
    buses.push_back({k, PhaseSet{Phase::a}, 0});
    lines.push_back({0, k, testing::single_phase_z({0.01, 0.02})});
  }
  return Network(1.0, buses, lines);
}

Network path_graph(int buses) {
  return testing::make_chain(std::vector<Complex>(static_cast<std::size_t>(buses - 1), Complex(0.01, 0.02)));
}

/// Every bus in exactly one of {areas, unclustered}; inside an area, in
/// exactly one of {subareas, remainder}.
void expect_cover(const Network& net, const PartitionHierarchy& part) {
  std::vector<int> count(static_cast<std::size_t>(net.bus_count()), 0);
  for (const Area& a : part.areas) {
    std::vector<int> inner(static_cast<std::size_t>(net.bus_count()), 0);
    for (int b : a.members) ++count[static_cast<std::size_t>(b)];
    for (const Subarea& s : a.subareas)
      for (int b : s.members) ++inner[static_cast<std::size_t>(b)];
    for (int b : a.remainder) ++inner[static_cast<std::size_t>(b)];
    for (int b : a.members) EXPECT_EQ(inner[static_cast<std::size_t>(b)], 1) << "bus " << b;
  }
  for (int b : part.unclustered) ++count[static_cast<std::size_t>(b)];
  EXPECT_EQ(count[0], 0);
  for (int b = 1; b < net.bus_count(); ++b) EXPECT_EQ(count[static_cast<std::size_t>(b)], 1) << "bus " << b;
}

TEST(Validate, EmptyPartitionIsValid) {
  const Network net = path_graph(6);
  const auto part = partition_from_roots(net, {});
  EXPECT_TRUE(validate_partition(net, part).ok());
  EXPECT_EQ(part.unclustered.size(), 5u);
}

TEST(Validate, HalfSubtreeBreaksClosure) {
  std::vector<Bus> buses{{0, PhaseSet::all(), std::nullopt}, {1, PhaseSet::all(), 0}, {2, PhaseSet::all(), 1}, {3, PhaseSet::all(), 1}};
  PhaseMatrix z;
  z(Phase::a, Phase::a) = z(Phase::b, Phase::b) = z(Phase::c, Phase::c) = {0.01, 0.02};
  const Network tree(1.0, buses, {{0, 1, z}, {1, 2, z}, {1, 3, z}});
  PartitionHierarchy part;
  part.areas.push_back({0, 1, {1, 2}, {}, {1, 2}});
  part.unclustered = {3};
  const auto rep = validate_partition(tree, part);
  EXPECT_FALSE(rep.ok());
  EXPECT_TRUE(rep.has("subtree closure"));
}

TEST(Validate, OverlapCoverageAndSubstation) {
  const Network net = path_graph(5);
  auto part = partition_from_roots(net, {{{2, {}}, {3, {}}}});
  EXPECT_TRUE(validate_partition(net, part).has("overlap"));

  auto missing = partition_from_roots(net, {{{3, {}}}});
  missing.unclustered.pop_back();
  EXPECT_TRUE(validate_partition(net, missing).has("coverage"));

  auto sub = partition_from_roots(net, {{{3, {}}}});
  sub.unclustered.push_back(0);
  EXPECT_TRUE(validate_partition(net, sub).has("substation"));

  auto unknown = partition_from_roots(net, {{{3, {}}}});
  unknown.unclustered.push_back(42);
  EXPECT_TRUE(validate_partition(net, unknown).has("unknown bus"));

  auto bad_sub = partition_from_roots(net, {{{3, {2}}}});
  EXPECT_FALSE(validate_partition(net, bad_sub).ok());
}

TEST(Validate, LabelledFeederPartition) {
  const auto f = testing::labelled_feeder();
  const auto id = &LabelledFeeder::id;
  const auto part = partition_from_roots(f.net, {{{id(17), {}}, {id(6), {}}, {id(21), {id(22), id(25)}}}});
  const auto rep = validate_partition(f.net, part);
  EXPECT_TRUE(rep.ok()) << (rep.ok() ? "" : rep.violations.front().message);
  ASSERT_EQ(part.areas.size(), 3u);
  EXPECT_EQ(part.areas[2].subareas.size(), 2u);
  EXPECT_EQ(part.areas[2].remainder, std::vector<int>{id(21)});
  expect_cover(f.net, part);
}

TEST(AutoPartition, PathGraphHoldsOneSubtreeArea) {
  // Full-subtree areas on a path are suffixes, so only the tail fits.
  const Network net = path_graph(41);
  const auto part = auto_partition(net, 10, 0);
  ASSERT_EQ(part.areas.size(), 1u);
  EXPECT_EQ(part.areas[0].root, 31);
  EXPECT_EQ(part.areas[0].members.size(), 10u);
  EXPECT_EQ(part.unclustered.size(), 30u);
  EXPECT_TRUE(validate_partition(net, part).ok());
}

TEST(AutoPartition, StarYieldsNoAreas) {
  const Network net = star(20);
  const auto part = auto_partition(net, 5, 0);
  EXPECT_TRUE(part.areas.empty());
  EXPECT_EQ(part.unclustered.size(), 20u);
  EXPECT_TRUE(validate_partition(net, part).ok());
}

TEST(AutoPartition, TargetOneMakesLeafAreas) {
  std::mt19937_64 rng(31);
  const Network net = testing::random_network(rng, {.buses = 30});
  const auto part = auto_partition(net, 1, 0);
  EXPECT_TRUE(validate_partition(net, part).ok());
  std::vector<int> leaves;
  for (int b = 1; b < net.bus_count(); ++b)
    if (net.children(b).empty()) leaves.push_back(b);
  std::vector<int> roots;
  for (const Area& a : part.areas) {
    EXPECT_EQ(a.members.size(), 1u);
    roots.push_back(a.root);
  }
  EXPECT_EQ(roots, leaves);
}

TEST(AutoPartition, BadTargets) {
  const Network net = path_graph(4);
  EXPECT_THROW(auto_partition(net, 0, 0), std::invalid_argument);
  EXPECT_THROW(auto_partition(net, 2, -1), std::invalid_argument);
}

TEST(AutoPartition, RandomTreesAreValidDeterministicAndSized) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 40; ++trial) {
    const Network net = testing::random_network(rng, {.buses = 20 + 5 * trial, .chain_prob = 0.2 + 0.015 * trial});
    const int target = 3 + trial % 9;
    const int sub_target = trial % 2 ? 0 : std::max(1, target / 3);
    const auto part = auto_partition(net, target, sub_target);
    const auto rep = validate_partition(net, part);
    ASSERT_TRUE(rep.ok()) << rep.violations.front().kind;
    expect_cover(net, part);
    for (const Area& a : part.areas) {
      EXPECT_GE(static_cast<int>(a.members.size()), (target + 1) / 2);
      EXPECT_LE(static_cast<int>(a.members.size()), 2 * target);
    }
    EXPECT_EQ(to_json(auto_partition(net, target, sub_target)).dump(), to_json(part).dump());
  }
}

TEST(AutoPartition, KeyAndExteriorIdentities) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    const Network net = testing::random_network(rng, {.buses = 60, .chain_prob = 0.4});
    const PathOracle paths(net);
    const auto part = auto_partition(net, 6, 0);
    for (const Area& k : part.areas) {
      for (const Area& h : part.areas) {
        if (k.index == h.index) continue;
        for (int i : k.members)
          for (int j : h.members)
            for (Phase f : kAllPhases)
              for (Phase g : kAllPhases)
                ASSERT_EQ(testing::brute_z(net, i, j, f, g), paths.common_path_impedance(k.root, h.root, f, g));
      }
      for (int i : k.members)
        for (int j : part.unclustered)
          for (Phase f : kAllPhases)
            for (Phase g : kAllPhases)
              ASSERT_EQ(testing::brute_z(net, i, j, f, g), paths.common_path_impedance(k.root, j, f, g));
    }
  }
}

TEST(Aggregates, ByHand) {
  const Network net = testing::make_chain({{0.01, 0.02}, {0.01, 0.02}, {0.01, 0.02}});
  const auto part = partition_from_roots(net, {{{1, {}}}});
  const std::vector<double> up{0.1, 0.2, 0.0};
  const std::vector<double> lo{0.0, 0.0, 0.3};
  const auto t = area_dual_aggregates(net, part, up, lo);
  ASSERT_EQ(t.area.size(), 1u);
  EXPECT_NEAR(t.area[0][0], 0.0, 1e-15);
  EXPECT_EQ(t.area[0][1], 0.0);
  const auto same = area_dual_aggregates(net, part, up, up);
  EXPECT_EQ(same.area[0][0], 0.0);
  EXPECT_THROW(area_dual_aggregates(net, part, up, std::vector<double>(2)), DimensionError);
}

TEST(Aggregates, ReconstructTotal) {
  std::mt19937_64 rng(34);
  const Network net = testing::random_network(rng, {.buses = 50, .chain_prob = 0.3});
  const auto part = testing::random_partition(rng, net, 4, 3);
  const auto n = static_cast<std::size_t>(net.dim());
  const auto up = testing::random_vector(rng, n, 0, 1);
  const auto lo = testing::random_vector(rng, n, 0, 1);
  const auto t = area_dual_aggregates(net, part, up, lo);
  PhaseSums expected{0, 0, 0}, got{0, 0, 0};
  for (std::size_t k = 0; k < n; ++k) expected[static_cast<std::size_t>(code(net.flat_entry(static_cast<int>(k)).phase))] += up[k] - lo[k];
  for (const auto& s : t.area)
    for (int f = 0; f < 3; ++f) got[static_cast<std::size_t>(f)] += s[static_cast<std::size_t>(f)];
  std::vector<double> diff(n);
  for (std::size_t k = 0; k < n; ++k) diff[k] = up[k] - lo[k];
  const auto rest = scope_sums(net, part.unclustered, diff);
  for (int f = 0; f < 3; ++f) EXPECT_NEAR(got[static_cast<std::size_t>(f)] + rest[static_cast<std::size_t>(f)], expected[static_cast<std::size_t>(f)], 1e-12);
  // Subarea sums plus remainder give the area sum.
  for (std::size_t a = 0; a < part.areas.size(); ++a) {
    PhaseSums s = scope_sums(net, part.areas[a].remainder, diff);
    for (const auto& sub : t.subarea[a])
      for (int f = 0; f < 3; ++f) s[static_cast<std::size_t>(f)] += sub[static_cast<std::size_t>(f)];
    for (int f = 0; f < 3; ++f) EXPECT_NEAR(s[static_cast<std::size_t>(f)], t.area[a][static_cast<std::size_t>(f)], 1e-12);
  }
}

TEST(PartitionJson, RoundTripAndErrors) {
  std::mt19937_64 rng(35);
  const Network net = testing::random_network(rng, {.buses = 40, .chain_prob = 0.3});
  const auto part = auto_partition(net, 8, 3);
  const auto back = partition_from_json(net, to_json(part));
  EXPECT_EQ(to_json(back).dump(), to_json(part).dump());
  EXPECT_EQ(back.unclustered, part.unclustered);
  EXPECT_THROW(partition_from_json(net, nlohmann::json::parse(R"({"areas": 3})")), ParseError);
  EXPECT_THROW(partition_from_json(net, nlohmann::json::parse(R"({"areas": [{"root": 999}]})")), std::out_of_range);
}

}  // namespace
}  // namespace mlopf
