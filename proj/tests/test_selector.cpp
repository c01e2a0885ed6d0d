#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "dvmoss/selector.hpp"
#include "test_support.hpp"

namespace dvmoss {
namespace {

TEST(TransitionProb, Examples) {
  EXPECT_DOUBLE_EQ(transition_prob(3.0, 3.0, 7.0), 0.5);
  EXPECT_NEAR(transition_prob(2.0, 1.0, 1.0), 1.0 / (1.0 + std::exp(1.0)), 1e-15);
  EXPECT_NEAR(transition_prob(2.0, 1.0, 1.0), 0.26894, 1e-5);
  EXPECT_DOUBLE_EQ(transition_prob(1.0, 9.0, 0.0), 0.5);
  // Saturates without overflow.
  EXPECT_EQ(transition_prob(0.0, 1e6, 10.0), 1.0);
  EXPECT_GE(transition_prob(1e6, 0.0, 10.0), 0.0);
  EXPECT_THROW(transition_prob(0.0, 1.0, -1.0), InvalidArgument);
}

TEST(TransitionProb, ComplementAndDetailedBalance) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> th(-5.0, 5.0), b(0.0, 4.0);
  for (int i = 0; i < 1000; ++i) {
    const double f = th(rng), t = th(rng), beta = b(rng);
    const double q = transition_prob(f, t, beta), back = transition_prob(t, f, beta);
    EXPECT_NEAR(q + back, 1.0, 1e-15);
    const double lhs = std::exp(beta * f) * q;
    const double rhs = std::exp(beta * t) * back;
    EXPECT_NEAR(lhs / rhs, 1.0, 1e-12);
  }
}

TEST(StationaryWeights, Softmax) {
  const std::vector<double> th{1.0, 2.0};
  const auto w = stationary_weights(th, 1.0);
  EXPECT_NEAR(w[0], 0.26894, 1e-5);
  EXPECT_NEAR(w[1], 0.73106, 1e-5);
  const std::vector<double> big{1000.0, 1001.0};
  const auto wb = stationary_weights(big, 1.0);
  EXPECT_NEAR(wb[1], w[1], 1e-12);
  EXPECT_TRUE(stationary_weights(std::vector<double>{}, 1.0).empty());
}

// With beta and nu held fixed the chain samples softmax(beta * theta).
TEST(MarkovChain, FourStateTotalVariation) {
  const std::vector<double> theta{0.0, 0.5, 1.0, 2.0};
  MarkovParams p;
  p.beta0 = 1.0;
  p.beta_step = 0.0;
  p.nu_step = 0.0;
  p.max_stages = 400000;
  std::mt19937_64 rng(12);
  std::vector<double> counts(4, 0.0);
  double n = 0.0;
  auto evaluate = [&](int s) -> std::optional<double> { return theta[static_cast<std::size_t>(s)]; };
  auto propose = [](std::mt19937_64& g) { return std::uniform_int_distribution<int>(0, 3)(g); };
  auto observe = [&](const ChainStage& st, int s) {
    if (st.exploration || st.stage < 1000) return;
    counts[static_cast<std::size_t>(s)] += 1.0;
    n += 1.0;
  };
  run_markov_chain<int>(evaluate, propose, p, rng, StageRule::Alternating, 1.0, observe);
  const auto pi = stationary_weights(theta, 1.0);
  double tv = 0.0;
  for (std::size_t i = 0; i < 4; ++i) tv += 0.5 * std::abs(counts[i] / n - pi[i]);
  EXPECT_LT(tv, 0.05);
}

TEST(MarkovChain, SingletonStateSpace) {
  MarkovParams p;
  std::mt19937_64 rng(1);
  auto res = run_markov_chain<int>([](int) -> std::optional<double> { return 4.0; },
                                   [](std::mt19937_64&) { return 0; }, p, rng);
  EXPECT_EQ(res.best, 0);
  EXPECT_EQ(res.last, 0);
  EXPECT_EQ(res.best_theta, 4.0);
  // nu drops by nu_step after every consolidation until it reaches zero.
  EXPECT_GE(res.trace.size(), 40u);
  EXPECT_LE(res.trace.size(), 42u);
  EXPECT_EQ(res.trace.back().nu, 0.0);
}

TEST(MarkovChain, NoFeasibleInitialState) {
  MarkovParams p;
  p.max_initial_draws = 5;
  std::mt19937_64 rng(1);
  int draws = 0;
  EXPECT_THROW(run_markov_chain<int>([](int) -> std::optional<double> { return std::nullopt; },
                                     [&](std::mt19937_64&) { return ++draws; }, p, rng),
               NoFeasibleConfiguration);
  EXPECT_EQ(draws, 5);
}

TEST(MarkovChain, BestSoFarMonotone) {
  MarkovParams p;
  std::mt19937_64 rng(8);
  std::vector<double> theta(20);
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = std::sin(static_cast<double>(i) * 1.7);
  auto res = run_markov_chain<int>(
      [&](int s) -> std::optional<double> {
        if (s % 7 == 3) return std::nullopt;
        return theta[static_cast<std::size_t>(s)];
      },
      [](std::mt19937_64& g) { return std::uniform_int_distribution<int>(0, 19)(g); }, p, rng,
      StageRule::Randomized);
  double prev = -1e9;
  for (const auto& st : res.trace) {
    EXPECT_GE(st.best_theta, prev);
    EXPECT_GE(st.best_theta, st.theta);
    prev = st.best_theta;
  }
  EXPECT_EQ(res.best_theta, theta[static_cast<std::size_t>(res.best)]);
  EXPECT_NE(res.best % 7, 3);
}

TEST(MarkovParams, Validate) {
  MarkovParams p;
  EXPECT_NO_THROW(p.validate());
  p.nu0 = 1.5;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = {};
  p.max_stages = 0;
  EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(RandomSubset, DeterministicSortedSubset) {
  const auto vis = testing::ids(9);
  std::mt19937_64 a(5), b(5);
  for (int n = 0; n <= 11; ++n) {
    const auto x = random_subset(std::span<const SatelliteId>(vis), n, a);
    const auto y = random_subset(std::span<const SatelliteId>(vis), n, b);
    EXPECT_EQ(x, y);
    EXPECT_EQ(x.size(), static_cast<std::size_t>(std::min(n, 9)));
    EXPECT_TRUE(std::is_sorted(x.begin(), x.end()));
    EXPECT_TRUE(std::includes(vis.begin(), vis.end(), x.begin(), x.end()));
  }
}

TEST(DrawSelection, SizeBounds) {
  const auto vis = testing::ids(6);
  std::mt19937_64 rng(2);
  std::set<std::size_t> sizes;
  for (int i = 0; i < 500; ++i) {
    const auto z = draw_selection(std::span<const SatelliteId>(vis), 4, rng);
    EXPECT_GE(z.size(), 1u);
    EXPECT_LE(z.size(), 4u);
    sizes.insert(z.size());
  }
  EXPECT_EQ(sizes.size(), 4u);
  EXPECT_THROW(draw_selection(std::span<const SatelliteId>{}, 4, rng), InvalidArgument);
}

TEST(KNearest, DistancesAndPermutationInvariance) {
  const Vec3 center{kEarthRadiusKm, 0.0, 0.0};
  const std::vector<double> dist{800.0, 600.0, 900.0, 700.0};
  auto tbl = testing::flat_table(4, 1, 4);
  for (std::size_t s = 0; s < 4; ++s) tbl.set_position(s, center + Vec3{dist[s], 0.0, 0.0});
  EXPECT_EQ(k_nearest(tbl, center, 1), (std::vector<SatelliteId>{{1, 2}}));
  EXPECT_EQ(k_nearest(tbl, center, 2), (std::vector<SatelliteId>{{1, 2}, {1, 4}}));
  EXPECT_EQ(k_nearest(tbl, center, 3), (std::vector<SatelliteId>{{1, 1}, {1, 2}, {1, 4}}));
  bool truncated = false;
  EXPECT_EQ(k_nearest(tbl, center, 6, &truncated).size(), 4u);
  EXPECT_TRUE(truncated);
  k_nearest(tbl, center, 4, &truncated);
  EXPECT_FALSE(truncated);

  // Same geometry, positions reassigned to other ids.
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  auto other = testing::flat_table(4, 1, 4);
  for (std::size_t s = 0; s < 4; ++s) other.set_position(perm[s], center + Vec3{dist[s], 0.0, 0.0});
  std::vector<SatelliteId> expect;
  for (const auto& id : k_nearest(tbl, center, 2)) expect.push_back({1, static_cast<int>(perm[id.slot - 1]) + 1});
  std::sort(expect.begin(), expect.end());
  EXPECT_EQ(k_nearest(other, center, 2), expect);
}

TEST(Centroid, Mean) {
  const std::vector<GeoState> ues{{{1.0, 2.0, 3.0}, 0.0}, {{3.0, 2.0, 1.0}, 0.0}};
  EXPECT_EQ(centroid(ues), (Vec3{2.0, 2.0, 2.0}));
}

TEST(Dvmoss, DeskOutcomeConsistent) {
  const ScenarioConfig sc = testing::desk_config();
  const auto slot = testing::desk_slot(3, 120.0);
  const auto pb = sc.problem(slot.table);
  std::mt19937_64 a(77), b(77);
  const auto x = run_dvmoss(pb, sc.markov, a);
  const auto y = run_dvmoss(pb, sc.markov, b);
  EXPECT_EQ(x.selection, y.selection);
  EXPECT_EQ(x.theta_bps(), y.theta_bps());
  EXPECT_GE(x.selection.size(), 1u);
  EXPECT_LE(x.selection.size(), static_cast<std::size_t>(pb.max_selection()));
  EXPECT_TRUE(check_feasible(x.result.config, slot.table, pb.limits).feasible());
  ASSERT_FALSE(x.trace.empty());
  EXPECT_EQ(x.trace.back().best_theta, x.theta_bps());
  for (const auto& st : x.trace) EXPECT_LE(st.theta, x.theta_bps());

  const auto fixed = run_fixed_selection(pb, x.selection);
  EXPECT_EQ(fixed.theta_bps(), x.theta_bps());
}

TEST(Baselines, NearestAndRandomOnDesk) {
  const ScenarioConfig sc = testing::desk_config();
  const auto slot = testing::desk_slot(1, 0.0);
  const auto pb = sc.problem(slot.table);
  const auto near = run_nearest_selection(pb, slot.ues, 2);
  EXPECT_EQ(near.selection, k_nearest(slot.table, centroid(slot.ues), 2));
  EXPECT_FALSE(near.truncated);
  std::mt19937_64 rng(4);
  const auto rnd = run_random_selection(pb, 2, rng);
  EXPECT_EQ(rnd.selection.size(), 2u);
  EXPECT_TRUE(rnd.trace.empty());
  const auto big = run_nearest_selection(pb, slot.ues, 1000);
  EXPECT_TRUE(big.truncated);
}

}  // namespace
}  // namespace dvmoss
