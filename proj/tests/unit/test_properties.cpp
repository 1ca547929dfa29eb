// Randomised property checks over the metric and segmentation code.

#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace exposure;
using namespace exposure::testing;

namespace {

std::vector<double> random_distribution(std::mt19937_64& engine, bool allow_zeros) {
  std::vector<double> v(3);
  double total = 0;
  for (auto& x : v) {
    x = allow_zeros && uniform_unit(engine) < 0.3 ? 0.0 : uniform_unit(engine);
    total += x;
  }
  if (total == 0) v[uniform_index(engine, 3)] = total = 1;
  for (auto& x : v) x /= total;
  return v;
}

}  // namespace

TEST(JsdProperties, SymmetricBoundedIdentityFinite) {
  std::mt19937_64 engine(2024);
  for (int trial = 0; trial < 5000; ++trial) {
    const auto p = random_distribution(engine, true);
    const auto q = random_distribution(engine, true);
    const double pq = jensen_shannon(p, q);
    ASSERT_TRUE(std::isfinite(pq));
    ASSERT_NEAR(pq, jensen_shannon(q, p), 1e-12);
    ASSERT_GE(pq, 0.0);
    ASSERT_LE(pq, 1.0);
    ASSERT_EQ(jensen_shannon(p, p), 0.0);
    ASSERT_NEAR(pq, oracle::jsd({p[0], p[1], p[2]}, {q[0], q[1], q[2]}), 1e-12);
  }
}

TEST(SpdProperties, BoundedByTwoThirds) {
  std::mt19937_64 engine(7);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto q = random_distribution(engine, true);
    const auto p = random_distribution(engine, true);
    const auto spd = compute_spd({q, p}).spd;
    ASSERT_GE(spd, 0.0);
    ASSERT_LE(spd, 2.0 / 3.0 + 1e-15);
    ASSERT_NEAR(spd, oracle::spd(q, p), 1e-15);
  }
}

TEST(SegmentationProperties, MinimalPrefixAndSuffix) {
  std::mt19937_64 engine(99);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 3 + uniform_index(engine, 200);
    std::vector<std::size_t> masses(n);
    for (auto& m : masses) m = 1 + uniform_index(engine, 1 + uniform_index(engine, 1000));
    const auto part = pareto_partition(masses, 0.2, 0.2);
    double total = 0;
    for (auto m : masses) total += static_cast<double>(m);
    const auto mass = [&](const std::vector<std::uint32_t>& g) {
      double s = 0;
      for (auto k : g) s += static_cast<double>(masses[k]);
      return s;
    };
    const auto& head = part.groups[0];
    const auto& tail = part.groups[2];
    ASSERT_FALSE(head.empty());
    ASSERT_GE(mass(head) / total, 0.2);
    ASSERT_LT((mass(head) - static_cast<double>(masses[head.back()])) / total, 0.2);
    if (!part.groups[1].empty()) {
      ASSERT_GE(mass(tail) / total, 0.2);
      ASSERT_LT((mass(tail) - static_cast<double>(masses[tail.front()])) / total, 0.2);
    }
    ASSERT_EQ(head.size() + part.groups[1].size() + tail.size(), n);
    // every head item is at least as heavy as every non-head item
    for (auto h : head) {
      for (auto k : part.groups[1]) ASSERT_GE(masses[h], masses[k]);
    }
  }
}

TEST(MetricBounds, RandomTablesStayInRange) {
  const auto synthetic = generate_synthetic(SyntheticSpec{.n_users = 150, .n_items = 200, .n_suppliers = 25});
  const auto split = split_train_test(synthetic.ratings, 0.2, 5);
  const auto& train = split.train;
  const auto seg = segment_items_pareto(compute_item_popularity(train));
  const auto groups = group_users_by_propensity(train, seg, 3);
  const auto join = join_suppliers(train, synthetic.suppliers);
  const auto supplier_groups = group_suppliers_pareto(train, join.suppliers);
  std::mt19937_64 engine(13);
  for (int trial = 0; trial < 20; ++trial) {
    RecommendationTable table;
    table.list_size = 10;
    for (UserIndex u = 0; u < train.n_users(); ++u) {
      UserRecommendations row{u, {}};
      for (int k = 0; k < 10; ++k) row.items.push_back({static_cast<ItemIndex>(uniform_index(engine, train.n_items())), 1.0});
      table.rows.push_back(row);
    }
    EvaluationInputs inputs{table, train, split.test, seg, groups, &join.suppliers, &supplier_groups, 10, std::nullopt};
    const auto report = evaluate(inputs);
    EXPECT_GE(report.upd, 0.0);
    EXPECT_LE(report.upd, 1.0);
    EXPECT_GE(report.spd->spd, 0.0);
    EXPECT_LE(report.spd->spd, 2.0 / 3.0);
    EXPECT_GE(report.precision.precision, 0.0);
    EXPECT_LE(report.precision.precision, 1.0);
    EXPECT_GE(report.coverage, 0.0);
    EXPECT_LE(report.coverage, 1.0);
  }
}
