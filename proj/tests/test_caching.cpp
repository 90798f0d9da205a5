#include <algorithm>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "cscache/basis.hpp"
#include "cscache/caching.hpp"
#include "oracles.hpp"

using namespace cscache;

namespace {

DataMatrix ramp_data(std::size_t n, std::size_t w) {
  DataMatrix x;
  x.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(w));
  for (Eigen::Index j = 0; j < x.values.cols(); ++j)
    for (Eigen::Index i = 0; i < x.values.rows(); ++i) x.values(i, j) = 1000.0 * j + i;
  x.end_time = w - 1;
  return x;
}

}  // namespace

TEST(Coverage, FourCachesSplitQuadrants) {
  const auto field = generate_deployment(100, 1);
  const auto layout = assign_coverage(field, 4);
  ASSERT_EQ(layout.n_caches(), 4u);
  for (const auto& cov : layout.coverage) EXPECT_EQ(cov.size(), 25u);
  // sensor 0 is the top-left block, sensor 99 the bottom-right
  EXPECT_EQ(layout.coverage[0].front(), 0u);
  EXPECT_EQ(layout.coverage[3].back(), 99u);
  for (std::size_t n : layout.coverage[1]) {
    EXPECT_GE(n % 10, 5u);
    EXPECT_LT(n / 10, 5u);
  }
}

TEST(Coverage, SingleCacheCoversAll) {
  const auto layout = assign_coverage(generate_deployment(100, 1), 1);
  ASSERT_EQ(layout.n_caches(), 1u);
  EXPECT_EQ(layout.coverage[0].size(), 100u);
  EXPECT_TRUE(layout.neighbors[0].empty());
}

TEST(Coverage, NonSquareCountsTileRectangles) {
  const auto field = generate_deployment(100, 1);
  const auto two = assign_coverage(field, 2);
  EXPECT_EQ(two.coverage[0].size(), 50u);
  for (std::size_t n : two.coverage[0]) EXPECT_LT(n % 10, 5u);
  const auto ten = assign_coverage(field, 10);
  for (const auto& cov : ten.coverage) EXPECT_EQ(cov.size(), 10u);
  EXPECT_THROW(assign_coverage(field, 3), std::invalid_argument);
  EXPECT_THROW(assign_coverage(field, 7), std::invalid_argument);
}

TEST(Coverage, PartitionAndCompleteGraph) {
  const auto layout = assign_coverage(generate_deployment(100, 2), 4);
  std::vector<int> hits(100, 0);
  for (const auto& cov : layout.coverage)
    for (std::size_t n : cov) ++hits[n];
  for (int h : hits) EXPECT_EQ(h, 1);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(layout.neighbors[c].size(), 3u);
  EXPECT_TRUE(is_connected(layout.neighbors));
}

TEST(Layout, ValidatesInput) {
  EXPECT_THROW(make_layout(4, {{0, 1}, {2}}, {{1}, {0}}), std::invalid_argument);  // 3 uncovered
  EXPECT_THROW(make_layout(4, {{0, 1}, {2, 3}}, {{1}, {}}), std::invalid_argument);  // asymmetric
  EXPECT_THROW(make_layout(4, {{0, 1}, {2, 3}}, {{0}, {}}), std::invalid_argument);  // self loop
  const auto ok = make_layout(4, {{1, 0}, {3, 2}}, {{}, {}});
  EXPECT_EQ(ok.coverage[0], (IndexList{0, 1}));
  EXPECT_FALSE(is_connected(ok.neighbors));
}

TEST(Sampling, FullCoverageSingleSlotIsPermutation) {
  const auto layout = assign_coverage(generate_deployment(100, 1), 4);
  const auto meas = sample_measurements(layout, ramp_data(100, 1), 25, 5);
  for (std::size_t c = 0; c < 4; ++c) {
    IndexList got = meas.caches[c].selected[0];
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, layout.coverage[c]);
  }
}

TEST(Sampling, ZeroMeasurementsGiveEmptyVectors) {
  const auto layout = assign_coverage(generate_deployment(100, 1), 4);
  const auto meas = sample_measurements(layout, ramp_data(100, 4), 0, 5);
  for (const auto& cm : meas.caches) EXPECT_EQ(cm.y.size(), 0);
}

TEST(Sampling, RejectsTooManyMeasurements) {
  const auto layout = assign_coverage(generate_deployment(100, 1), 4);
  EXPECT_THROW(sample_measurements(layout, ramp_data(100, 4), 26, 5), std::invalid_argument);
}

TEST(Sampling, SelectionMatrixStructure) {
  const auto layout = assign_coverage(generate_deployment(16, 1), 4);
  const auto data = ramp_data(16, 3);
  const auto meas = sample_measurements(layout, data, 2, 8);
  const Eigen::VectorXd x = data.vec();
  for (std::size_t c = 0; c < 4; ++c) {
    const auto& cm = meas.caches[c];
    const Eigen::MatrixXd phi = selection_matrix(cm.rows(16), 48);
    EXPECT_TRUE((phi * phi.transpose()).isIdentity(0.0));
    EXPECT_EQ(phi * x, cm.y);
    // block-diagonal: row block j only touches time slot j, and only covered sensors
    for (std::size_t j = 0; j < 3; ++j) {
      ASSERT_EQ(cm.selected[j].size(), 2u);
      EXPECT_NE(cm.selected[j][0], cm.selected[j][1]);
      for (std::size_t r = 0; r < 2; ++r) {
        const auto row = static_cast<Eigen::Index>(j * 2 + r);
        Eigen::Index col = 0;
        phi.row(row).maxCoeff(&col);
        EXPECT_EQ(static_cast<std::size_t>(col) / 16, j);
        EXPECT_TRUE(std::binary_search(layout.coverage[c].begin(), layout.coverage[c].end(),
                                       static_cast<std::size_t>(col) % 16));
      }
    }
  }
}

TEST(Sampling, ScheduleIsSharedByOverlappingWindows) {
  const auto layout = assign_coverage(generate_deployment(16, 1), 4);
  const auto sched = sample_schedule(layout, 6, 2, 3);
  Eigen::MatrixXd series = Eigen::MatrixXd::Random(16, 6);
  const auto a = measure_window(sched, window_of(series, 3, 3));
  const auto b = measure_window(sched, window_of(series, 4, 3));
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(a.caches[c].selected[1], b.caches[c].selected[0]);
    EXPECT_EQ(a.caches[c].selected[2], b.caches[c].selected[1]);
  }
}

TEST(Sampling, SeedDeterminism) {
  const auto layout = assign_coverage(generate_deployment(100, 1), 4);
  const auto a = sample_schedule(layout, 5, 10, 77);
  const auto b = sample_schedule(layout, 5, 10, 77);
  EXPECT_EQ(a.picks, b.picks);
}

TEST(Anchors, GlobalSharesOneSet) {
  const auto layout = assign_coverage(generate_deployment(100, 1), 4);
  const auto plan = select_anchors(layout, AnchorStrategy::kGlobal, 10, 3);
  const auto first = plan.shared(0, 1);
  ASSERT_NE(first, nullptr);
  EXPECT_EQ(first->size(), 10u);
  for (const auto& [pair, set] : plan.pairs()) EXPECT_EQ(set, first);
}

TEST(Anchors, PairwiseSetsAreSymmetricAndDistinct) {
  const auto layout = assign_coverage(generate_deployment(100, 1), 4);
  const auto plan = select_anchors(layout, AnchorStrategy::kPairwiseGlobal, 10, 3);
  EXPECT_EQ(plan.pairs().size(), 6u);
  EXPECT_EQ(plan.shared(0, 2), plan.shared(2, 0));
  std::set<IndexList> distinct;
  for (const auto& [pair, set] : plan.pairs()) distinct.insert(*set);
  EXPECT_GT(distinct.size(), 1u);
}

TEST(Anchors, UnionStrategyStaysInUnion) {
  const auto layout = assign_coverage(generate_deployment(100, 1), 4);
  const auto plan = select_anchors(layout, AnchorStrategy::kPairwiseUnion, 30, 3);
  for (const auto& [pair, set] : plan.pairs()) {
    EXPECT_EQ(set->size(), 30u);
    for (std::size_t n : *set) {
      const bool in_a = std::binary_search(layout.coverage[pair.first].begin(),
                                           layout.coverage[pair.first].end(), n);
      const bool in_b = std::binary_search(layout.coverage[pair.second].begin(),
                                           layout.coverage[pair.second].end(), n);
      EXPECT_TRUE(in_a || in_b);
    }
  }
}

TEST(Anchors, FullUnionAndOversizedRequests) {
  const auto layout = assign_coverage(generate_deployment(100, 1), 4);
  EXPECT_EQ(union_size(layout, 0, 1), 50u);
  const auto plan = select_anchors(layout, AnchorStrategy::kPairwiseUnion, 50, 3);
  IndexList expected;
  std::set_union(layout.coverage[0].begin(), layout.coverage[0].end(), layout.coverage[1].begin(),
                 layout.coverage[1].end(), std::back_inserter(expected));
  EXPECT_EQ(plan.anchors(0, 1), expected);
  EXPECT_THROW(select_anchors(layout, AnchorStrategy::kPairwiseUnion, 51, 3), std::invalid_argument);
  EXPECT_THROW(select_anchors(layout, AnchorStrategy::kGlobal, 101, 3), std::invalid_argument);
  const auto none = select_anchors(layout, AnchorStrategy::kPairwiseGlobal, 0, 3);
  EXPECT_TRUE(none.anchors(1, 2).empty());
}

TEST(Anchors, RowsSelectSynthesizedObservations) {
  const auto layout = assign_coverage(generate_deployment(16, 1), 4);
  const auto plan = select_anchors(layout, AnchorStrategy::kPairwiseUnion, 3, 6);
  const SparsifyingBasis basis(16, 2);
  const IndexList rows = plan.rows(0, 1, 16, 2);
  ASSERT_EQ(rows.size(), 6u);
  const Eigen::MatrixXd gamma = selection_matrix(rows, 32);
  const Eigen::VectorXd z = Eigen::VectorXd::LinSpaced(32, -1.0, 1.0);
  const Eigen::VectorXd x = basis.synthesize(z);
  const Eigen::VectorXd via_matrix = gamma * basis.dense() * z;
  for (std::size_t i = 0; i < rows.size(); ++i)
    EXPECT_NEAR(via_matrix(static_cast<Eigen::Index>(i)), x(static_cast<Eigen::Index>(rows[i])), 1e-12);
}

TEST(Anchors, StrategyNamesRoundTrip) {
  for (auto s : {AnchorStrategy::kGlobal, AnchorStrategy::kPairwiseGlobal, AnchorStrategy::kPairwiseUnion})
    EXPECT_EQ(parse_strategy(to_string(s)), s);
  EXPECT_THROW(parse_strategy("nearest"), std::invalid_argument);
}

TEST(Anchors, ExportListsEveryPair) {
  const auto layout = assign_coverage(generate_deployment(16, 1), 4);
  std::ostringstream os;
  write_anchor_plan(os, select_anchors(layout, AnchorStrategy::kGlobal, 2, 1));
  const std::string text = os.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2 + 6);
}
