#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "hyspec/sync.hpp"
#include "support.hpp"

using namespace hyspec;
using testing_support::Rng;

namespace {

TickSeries series(std::vector<double> t) {
  std::vector<double> x(t.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.01 * static_cast<double>(i * i);
  return TickSeries("S" + std::to_string(t.size()), std::move(t), std::move(x));
}

TickPanel pair_panel(std::vector<double> tx, std::vector<double> ty) {
  auto x = series(std::move(tx));
  auto y = series(std::move(ty));
  return TickPanel(std::max(x.times().back(), y.times().back()),
                   {TickSeries("X", x.times(), x.log_prices()), TickSeries("Y", y.times(), y.log_prices())});
}

/// Overlap by the per-configuration branches, written out literally.
double overlap_by_config(const Interval& x, const Interval& y, int config) {
  switch (config) {
    case 1: return y.end - y.start;
    case 2: return y.end - x.start;
    case 3: return x.end - y.start;
    default: return x.end - x.start;
  }
}

Interval random_interval(Rng& rng) {
  double a = std::floor(10 * rng.uniform()), b = std::floor(10 * rng.uniform());
  if (rng.below(3) == 0) {
    a = 10 * rng.uniform();
    b = 10 * rng.uniform();
  }
  if (a > b) std::swap(a, b);
  return {a, b};
}

}  // namespace

TEST(RefreshTimes, HandEnumeratedExample) {
  const auto panel = pair_panel({0, 1, 3, 5, 7, 9}, {0, 2, 6, 10});
  const auto grid = refresh_times(panel);
  EXPECT_EQ(grid.times, (std::vector<double>{2, 6, 10}));
  std::vector<double> xt, yt;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    xt.push_back(panel[0].times()[grid.index[0][j]]);
    yt.push_back(panel[1].times()[grid.index[1][j]]);
  }
  EXPECT_EQ(xt, (std::vector<double>{1, 5, 9}));
  EXPECT_EQ(yt, (std::vector<double>{2, 6, 10}));
}

TEST(RefreshTimes, SynchronousPanelKeepsEveryTick) {
  const auto grid = refresh_times(pair_panel({0, 1, 2, 3}, {0, 1, 2, 3}));
  EXPECT_EQ(grid.times, (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(grid.index[0], (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(grid.index[1], (std::vector<std::size_t>{1, 2, 3}));
}

TEST(RefreshTimes, SingleRefresh) {
  const auto grid = refresh_times(pair_panel({0, 1}, {0, 0.5}));
  EXPECT_EQ(grid.times, (std::vector<double>{1}));
}

TEST(RefreshTimes, GridInvariants) {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<TickSeries> s;
    const std::size_t p = 1 + rng.below(5);
    for (std::size_t a = 0; a < p; ++a) s.push_back(testing_support::random_series(rng, "A" + std::to_string(a), 15));
    const TickPanel panel(40.0, s);
    const auto grid = refresh_times(panel);
    for (std::size_t j = 1; j < grid.size(); ++j) EXPECT_LT(grid.times[j - 1], grid.times[j]);
    for (std::size_t a = 0; a < p; ++a) {
      const auto& t = panel[a].times();
      for (std::size_t j = 0; j < grid.size(); ++j) {
        const std::size_t k = grid.index[a][j];
        EXPECT_LE(t[k], grid.times[j]);
        if (k + 1 < t.size()) EXPECT_GT(t[k + 1], grid.times[j]);
      }
    }
  }
}

TEST(RefreshTimes, InvariantToAssetOrder) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TickSeries> s;
    const std::size_t p = 2 + rng.below(4);
    for (std::size_t a = 0; a < p; ++a) s.push_back(testing_support::random_series(rng, "A" + std::to_string(a), 15));
    const auto g1 = refresh_times(TickPanel(40.0, s));
    std::vector<std::size_t> perm(p);
    for (std::size_t i = 0; i < p; ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<TickSeries> shuffled;
    for (std::size_t i : perm) shuffled.push_back(s[i]);
    const auto g2 = refresh_times(TickPanel(40.0, shuffled));
    ASSERT_EQ(g1.times, g2.times);
    for (std::size_t i = 0; i < p; ++i) EXPECT_EQ(g2.index[i], g1.index[perm[i]]);
  }
}

TEST(PairwiseSyncA0, HandEnumeratedExample) {
  const auto sp = pairwise_sync_a0(series({0, 1, 3, 5, 7, 9}), series({0, 2, 6, 10}));
  std::vector<std::pair<double, double>> times;
  for (const auto& e : sp.entries()) times.emplace_back(e.x_time, e.y_time);
  EXPECT_EQ(times, (std::vector<std::pair<double, double>>{{0, 0}, {1, 2}, {5, 6}, {9, 10}}));
  EXPECT_EQ(sp.returns().size(), 3u);
}

TEST(PairwiseSyncA0, IdenticalSeriesSelfPair) {
  const auto x = series({0, 0.5, 1.5, 2, 4});
  const auto sp = pairwise_sync_a0(x, x);
  ASSERT_EQ(sp.returns().size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& r = sp.returns()[i];
    EXPECT_EQ(r.x_interval, x.interval(i));
    EXPECT_EQ(r.overlap, r.x_interval.length());
    EXPECT_EQ(r.weight, 1.0);
    EXPECT_EQ(r.config, 1);
  }
}

TEST(PairwiseSyncA0, LongIntervalAgainstLastPriorTick) {
  const auto sp = pairwise_sync_a0(series({0, 4}), series({0, 1, 3}));
  ASSERT_EQ(sp.returns().size(), 1u);
  const auto& r = sp.returns()[0];
  EXPECT_EQ(r.x_interval, (Interval{0, 4}));
  EXPECT_EQ(r.y_interval, (Interval{0, 3}));
}

TEST(PairwiseSyncA0, AgreesWithRefreshSampling) {
  Rng rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto panel = testing_support::random_pair(rng);
    const auto grid = refresh_times(panel);
    const auto sp = pairwise_sync_a0(panel[0], panel[1]);
    ASSERT_EQ(sp.entries().size(), grid.size() + 1);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      EXPECT_EQ(sp.entries()[j + 1].x_time, panel[0].times()[grid.index[0][j]]);
      EXPECT_EQ(sp.entries()[j + 1].y_time, panel[1].times()[grid.index[1][j]]);
    }
  }
}

TEST(PairwiseSyncA0, WeightsAtLeastOneEqualityIffSameInterval) {
  Rng rng(22);
  for (int trial = 0; trial < 500; ++trial) {
    const auto panel = testing_support::random_pair(rng);
    const auto sp = pairwise_sync_a0(panel[0], panel[1]);
    for (const auto& r : sp.returns()) {
      EXPECT_GE(r.weight, 1.0);
      EXPECT_GT(r.overlap, 0.0);
      EXPECT_LE(r.overlap, std::min(r.x_interval.length(), r.y_interval.length()));
      if (r.x_interval == r.y_interval) EXPECT_EQ(r.weight, 1.0);
      else EXPECT_GT(r.weight, 1.0);
    }
  }
}

TEST(ClassifyConfig, Examples) {
  EXPECT_EQ(classify_config({0, 4}, {1, 3}), 1);
  EXPECT_EQ(classify_config({1, 5}, {0, 3}), 2);
  EXPECT_EQ(classify_config({1, 5}, {2, 6}), 3);
  EXPECT_EQ(classify_config({2, 3}, {0, 4}), 4);
  EXPECT_THROW(classify_config({0, 1}, {1, 2}), ContractError);
  EXPECT_THROW(classify_config({0, 1}, {2, 3}), ContractError);
  EXPECT_THROW(classify_config({1, 1}, {0, 3}), ContractError);
}

TEST(OverlapLength, Examples) {
  EXPECT_EQ(overlap_length({0, 4}, {1, 3}), 2.0);
  EXPECT_EQ(overlap_length({1, 5}, {2, 6}), 3.0);
  EXPECT_EQ(overlap_length({0, 2}, {0, 2}), 2.0);
  EXPECT_EQ(overlap_length({0, 1}, {1, 2}), 0.0);
  EXPECT_FALSE(intervals_overlap({0, 1}, {1, 2}));
}

TEST(OverlapLength, MatchesConfigurationBranches) {
  Rng rng(23);
  int seen[5] = {};
  for (int trial = 0; trial < 5000; ++trial) {
    const Interval x = random_interval(rng), y = random_interval(rng);
    if (!(x.length() > 0) || !(y.length() > 0) || !intervals_overlap(x, y)) continue;
    const int c = classify_config(x, y);
    ++seen[c];
    EXPECT_EQ(overlap_length(x, y), overlap_by_config(x, y, c));
  }
  for (int c = 1; c <= 4; ++c) EXPECT_GT(seen[c], 0) << "configuration " << c << " never drawn";
}

TEST(SyncPairs, RejectsNonIncreasingTimes) {
  EXPECT_THROW(SyncPairs({{0, 0, 0, 0}, {1, 0, 0, 0}}), ValidationError);
  EXPECT_THROW(SyncPairs({{0, 0, 0, 0}}), InsufficientDataError);
}
