#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dvmoss/feasinit.hpp"
#include "dvmoss/matching.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace dvmoss {
namespace {

constexpr double kB = 1e7;
constexpr double kNoise = 1e-13;

using oracle::blocking_pair_exists;

// ---- fixtures -------------------------------------------------------------

NetworkConfiguration manual(const std::vector<SatelliteId>& z, int K, std::size_t J) {
  NetworkConfiguration c(J);
  c.selected = z;
  c.bands = bandwidth_partition(z, K);
  return c;
}

void seat(NetworkConfiguration& c, std::size_t j, SatelliteId s, int k, double p) {
  c.serving[j] = s;
  c.subcarrier[j] = k;
  c.power[j] = p;
}

struct Instance {
  ChannelTable tbl;
  OptimizerLimits limits;
  NetworkConfiguration cfg;
};

Instance initialized(std::uint64_t seed, std::size_t J, int sats, int K) {
  Instance in{testing::random_table(sats, J, K, seed, 1e-13, 1e-11, kNoise), OptimizerLimits::uniform(sats, 5.0, 3e5, J),
              {}};
  const auto z = testing::ids(sats);
  in.cfg = initialize(z, bandwidth_partition(z, K), in.tbl, in.limits);
  return in;
}

// ---- preferences ----------------------------------------------------------

TEST(UePreference, MeanOfImprovingIncrements) {
  ChannelTable tbl(0.0, testing::ids(2), 1, 4, kB, kNoise);
  tbl.set_gain(0, 0, 1e-12);
  tbl.set_gain(1, 0, 2, 5e-13);  // worse than current
  tbl.set_gain(1, 0, 3, 4e-12);  // better
  auto c = manual(testing::ids(2), 4, 1);
  seat(c, 0, {1, 1}, 0, 1.0);
  const double r = kB * std::log2(1.0 + 1e-12 / kNoise);
  const double r3 = kB * std::log2(1.0 + 4e-12 / kNoise);
  EXPECT_NEAR(ue_ua_preference(0, {1, 2}, c, tbl), r3 - r, 1e-6);

  tbl.set_gain(1, 0, 2, 2e-12);
  const double r2 = kB * std::log2(1.0 + 2e-12 / kNoise);
  EXPECT_NEAR(ue_ua_preference(0, {1, 2}, c, tbl), 0.5 * ((r2 - r) + (r3 - r)), 1e-6);
}

TEST(UePreference, SelfJoinAndEmptySentinel) {
  ChannelTable tbl(0.0, testing::ids(2), 1, 2, kB, kNoise);
  tbl.set_gain(0, 0, 1e-12);
  tbl.set_gain(1, 0, 1e-14);
  auto c = manual(testing::ids(2), 2, 1);
  seat(c, 0, {1, 1}, 0, 1.0);
  EXPECT_EQ(ue_ua_preference(0, {1, 1}, c, tbl), 0.0);
  EXPECT_EQ(ue_ua_preference(0, {1, 2}, c, tbl), kNoPreference);
}

TEST(SatPreference, FormulaAndLimits) {
  ChannelTable tbl(0.0, testing::ids(1), 1, 2, kB, kNoise);
  tbl.set_gain(0, 0, 0, 1e-12);
  tbl.set_gain(0, 0, 1, 2e-12);
  auto c = manual(testing::ids(1), 2, 1);
  seat(c, 0, {1, 1}, 0, 0.3);
  MatchingParams mp;
  mp.phi_ua = 2.0;
  mp.interference_cost = 0.5;
  const auto limits = OptimizerLimits::uniform(1, 5.0, 3e5, 1);
  const double d = std::pow(2.0, 3e5 / kB) - 1.0;
  const double adv = (0.3 / d - kNoise / 1e-12) + (0.3 / d - kNoise / 2e-12);
  EXPECT_NEAR(sat_ua_preference({1, 1}, 0, c, tbl, limits, mp), 2.0 * adv - 2 * 0.5 * 0.3, 1e-9);

  c.power[0] = 0.0;
  EXPECT_NEAR(sat_ua_preference({1, 1}, 0, c, tbl, limits, mp), -2.0 * (kNoise / 1e-12 + kNoise / 2e-12), 1e-12);

  const auto lenient = OptimizerLimits::uniform(1, 5.0, 0.0, 1);
  c.power[0] = 0.3;
  EXPECT_EQ(sat_ua_preference({1, 1}, 0, c, tbl, lenient, mp), std::numeric_limits<double>::infinity());
}

TEST(MatchingParams, DefaultQuota) {
  MatchingParams p;
  EXPECT_EQ(p.quota_for(1), 1);
  EXPECT_EQ(p.quota_for(10), 2);
  EXPECT_EQ(p.quota_for(11), 3);
  EXPECT_EQ(p.quota_for(30), 6);
  p.quota = 0;
  EXPECT_EQ(p.quota_for(30), 0);
}

// ---- UA -------------------------------------------------------------------

// UE 0 on satellite 1 (k=0); satellite 2 offers a much better empty k=3;
// UE 1 occupies satellite 2 at power `p1`.
struct TwoSat {
  ChannelTable tbl{0.0, testing::ids(2), 2, 4, kB, kNoise};
  NetworkConfiguration cfg = manual(testing::ids(2), 4, 2);
  TwoSat(double p1) {
    tbl.set_gain(0, 0, 1e-12);
    tbl.set_gain(1, 0, 1e-10);
    tbl.set_gain(0, 1, 1e-12);
    tbl.set_gain(1, 1, 1e-12);
    seat(cfg, 0, {1, 1}, 0, 0.5);
    seat(cfg, 1, {1, 2}, 2, p1);
  }
};

TEST(UaRound, MovesToStrictlyBetterSatellite) {
  TwoSat f(1.0);
  const auto limits = OptimizerLimits::uniform(2, 2.0, 3e5, 2);
  auto st = MatchingState::make(2, {});
  const double before = sum_rate(f.cfg, f.tbl);
  EXPECT_EQ(ua_round(f.cfg, st, f.tbl, limits), 1);
  EXPECT_EQ(*f.cfg.serving[0], (SatelliteId{1, 2}));
  EXPECT_EQ(*f.cfg.subcarrier[0], 3);
  EXPECT_GT(oracle::total_rate(f.cfg, f.tbl), before);
  EXPECT_EQ(st.change_count[0], 1);
  ASSERT_EQ(st.pending.size(), 1u);
  EXPECT_EQ(*st.pending[0].from_satellite, (SatelliteId{1, 1}));
}

TEST(UaRound, ZeroQuotaChangesNothing) {
  TwoSat f(1.0);
  const auto limits = OptimizerLimits::uniform(2, 2.0, 3e5, 2);
  MatchingParams mp;
  mp.quota = 0;
  auto st = MatchingState::make(2, mp);
  const auto before = f.cfg;
  EXPECT_EQ(ua_round(f.cfg, st, f.tbl, limits, mp), 0);
  EXPECT_TRUE(f.cfg.same_assignment(before));
}

TEST(UaRound, BindingPowerBudgetRejects) {
  TwoSat f(1.0);
  const auto limits = OptimizerLimits::uniform(2, 1.0, 3e5, 2);
  auto st = MatchingState::make(2, {});
  EXPECT_EQ(ua_round(f.cfg, st, f.tbl, limits), 0);
  EXPECT_EQ(*f.cfg.serving[0], (SatelliteId{1, 1}));
  EXPECT_EQ(st.change_count[0], 0);
}

TEST(UaRound, ChangeLimitBlocksProposals) {
  TwoSat f(1.0);
  const auto limits = OptimizerLimits::uniform(2, 2.0, 3e5, 2);
  auto st = MatchingState::make(2, {});
  st.change_count[0] = st.change_limit;
  EXPECT_EQ(ua_round(f.cfg, st, f.tbl, limits), 0);
}

// ---- BA -------------------------------------------------------------------

TEST(BaRound, LoneUeMovesToBetterEmptySubcarrier) {
  ChannelTable tbl(0.0, testing::ids(1), 1, 2, kB, kNoise);
  tbl.set_gain(0, 0, 0, 1e-12);
  tbl.set_gain(0, 0, 1, 1e-11);
  auto c = manual(testing::ids(1), 2, 1);
  seat(c, 0, {1, 1}, 0, 1.0);
  const auto limits = OptimizerLimits::uniform(1, 5.0, 3e5, 1);
  const auto rates = user_rates(c, tbl);
  const double gain = kB * (std::log2(1.0 + 1e-11 / kNoise) - std::log2(1.0 + 1e-12 / kNoise));
  EXPECT_NEAR(detail::swap_score(c, tbl, 0, 1, rates), gain, 1e-6);
  EXPECT_EQ(detail::swap_score(c, tbl, 0, 0, rates), 0.0);
  EXPECT_FALSE(is_stable(c, MatchingState::make(1, {}), tbl, limits));

  auto st = MatchingState::make(1, {});
  const auto rep = ba_round(c, st, tbl, limits);
  EXPECT_EQ(rep.swaps, 1);
  EXPECT_EQ(*c.subcarrier[0], 1);
  EXPECT_TRUE(is_stable(c, st, tbl, limits));
}

// UE 0 (strong) moving onto incumbent UE 1's subcarrier raises the sum rate
// but pushes UE 1 far below a 1 Mbit/s floor.
TEST(BaRound, RefusesMoveBreakingIncumbentFloor) {
  ChannelTable tbl(0.0, testing::ids(1), 2, 2, kB, kNoise);
  tbl.set_gain(0, 0, 0, 1e-16);
  tbl.set_gain(0, 0, 1, 1e-9);
  tbl.set_gain(0, 1, 0, 1e-16);
  tbl.set_gain(0, 1, 1, 1e-11);
  auto c = manual(testing::ids(1), 2, 2);
  seat(c, 0, {1, 1}, 0, 1.0);
  seat(c, 1, {1, 1}, 1, 1e-3);
  auto moved = c;
  moved.subcarrier[0] = 1;
  ASSERT_GT(oracle::total_rate(moved, tbl), oracle::total_rate(c, tbl));

  OptimizerLimits strict = OptimizerLimits::uniform(1, 5.0, 0.0, 2);
  strict.min_rate_bps[1] = 1e6;
  auto st = MatchingState::make(2, {});
  auto guarded = c;
  EXPECT_EQ(ba_round(guarded, st, tbl, strict).swaps, 0);
  EXPECT_EQ(*guarded.subcarrier[0], 0);

  const auto lenient = OptimizerLimits::uniform(1, 5.0, 0.0, 2);
  auto st2 = MatchingState::make(2, {});
  EXPECT_GE(ba_round(c, st2, tbl, lenient).swaps, 1);
  EXPECT_EQ(*c.subcarrier[0], 1);  // UE 1 may then leave for k=0
}

TEST(BaRound, RevertsUnseatableMove) {
  // A pending move whose seat breaks a floor is undone.
  ChannelTable tbl(0.0, testing::ids(2), 2, 2, kB, kNoise);
  tbl.set_gain(0, 0, 1e-12);
  tbl.set_gain(1, 0, 1e-12);
  tbl.set_gain(0, 1, 1e-12);
  tbl.set_gain(1, 1, 1e-12);
  auto c = manual(testing::ids(2), 2, 2);
  seat(c, 0, {1, 2}, 1, 1.0);
  seat(c, 1, {1, 2}, 1, 1.0);
  const auto limits = OptimizerLimits::uniform(2, 5.0, 1e7, 2);
  auto st = MatchingState::make(2, {});
  st.change_count[0] = 1;
  st.pending.push_back({0, SatelliteId{1, 1}, 0});
  const auto rep = ba_round(c, st, tbl, limits);
  EXPECT_EQ(rep.reverted, 1);
  EXPECT_EQ(*c.serving[0], (SatelliteId{1, 1}));
  EXPECT_EQ(*c.subcarrier[0], 0);
  EXPECT_EQ(st.change_count[0], 0);
  EXPECT_TRUE(st.pending.empty());
}

// ---- stability ------------------------------------------------------------

TEST(Stability, SingleTrivialState) {
  auto tbl = testing::flat_table(1, 1, 1, 1e-12, kNoise);
  auto c = manual(testing::ids(1), 1, 1);
  seat(c, 0, {1, 1}, 0, 1.0);
  const auto limits = OptimizerLimits::uniform(1, 5.0, 3e5, 1);
  EXPECT_TRUE(is_stable(c, MatchingState::make(1, {}), tbl, limits));
  EXPECT_FALSE(blocking_pair_exists(c, MatchingState::make(1, {}), tbl, limits));
}

TEST(Stability, ConvergedStatesPassExhaustiveOracle) {
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const std::size_t J = 2 + seed % 3;  // 2..4 UEs
    Instance in;
    try {
      in = initialized(seed, J, 2, 4);
    } catch (const InitializationInfeasible&) {
      continue;
    }
    auto st = MatchingState::make(J, {});
    const auto rep = run_matching(in.cfg, st, in.tbl, in.limits);
    ASSERT_TRUE(rep.stable);
    EXPECT_TRUE(is_stable(in.cfg, st, in.tbl, in.limits));
    EXPECT_FALSE(blocking_pair_exists(in.cfg, st, in.tbl, in.limits)) << "seed " << seed;
    ++checked;
  }
  EXPECT_GE(checked, 30);
}

TEST(Stability, DeoptimizedStateIsUnstable) {
  // Two UEs on one satellite, each with its own good subcarrier.
  ChannelTable tbl(0.0, testing::ids(1), 2, 2, kB, kNoise);
  tbl.set_gain(0, 0, 0, 1e-11);
  tbl.set_gain(0, 0, 1, 1e-13);
  tbl.set_gain(0, 1, 0, 1e-13);
  tbl.set_gain(0, 1, 1, 1e-11);
  auto c = manual(testing::ids(1), 2, 2);
  seat(c, 0, {1, 1}, 0, 1.0);
  seat(c, 1, {1, 1}, 1, 1.0);
  const auto limits = OptimizerLimits::uniform(1, 5.0, 3e5, 2);
  const auto st = MatchingState::make(2, {});
  EXPECT_TRUE(is_stable(c, st, tbl, limits));
  EXPECT_FALSE(blocking_pair_exists(c, st, tbl, limits));

  c.subcarrier[0] = 1;  // crowd UE 0 onto UE 1's subcarrier
  EXPECT_FALSE(is_stable(c, st, tbl, limits));
  EXPECT_TRUE(blocking_pair_exists(c, st, tbl, limits));
}

// ---- round laws on the desk scenario ----------------------------------------

TEST(MatchingLaws, MonotoneQuotaAndPowerOnDesk) {
  const ScenarioConfig sc = testing::desk_config();
  int runs = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto slot = testing::desk_slot(seed, 60.0 * static_cast<double>(seed % 10));
    const auto pb = sc.problem(slot.table);
    std::vector<SatelliteId> z = slot.table.satellites();
    z.resize(std::min<std::size_t>(z.size(), static_cast<std::size_t>(pb.max_selection())));
    NetworkConfiguration cfg;
    try {
      cfg = initialize(z, bandwidth_partition(z, slot.table.num_subcarriers()), slot.table, pb.limits);
    } catch (const InitializationInfeasible&) {
      continue;
    }
    ++runs;
    auto st = MatchingState::make(cfg.num_ues(), {});
    double prev = sum_rate(cfg, slot.table);
    for (int r = 0; r < 50; ++r) {
      const int moved = ua_round(cfg, st, slot.table, pb.limits);
      EXPECT_LE(moved, st.quota);
      const auto ba = ba_round(cfg, st, slot.table, pb.limits);
      const double now = sum_rate(cfg, slot.table);
      EXPECT_GE(now, prev - 1e-9);
      prev = now;
      for (int u : st.change_count) EXPECT_LE(u, st.change_limit);
      for (const auto& [s, total] : satellite_power(cfg)) EXPECT_LE(total, pb.limits.max_power_w * (1.0 + 1e-12));
      EXPECT_TRUE(check_feasible(cfg, slot.table, pb.limits).feasible());
      if (moved - ba.reverted == 0 && ba.swaps == 0) break;
    }
  }
  EXPECT_GE(runs, 18);
}

}  // namespace
}  // namespace dvmoss
