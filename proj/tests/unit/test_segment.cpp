#include <gtest/gtest.h>

#include <cstdio>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace exposure;
using namespace exposure::testing;

namespace {

std::string padded(char prefix, int n) {
  char buffer[16];
  std::snprintf(buffer, sizeof buffer, "%c%05d", prefix, n);
  return buffer;
}

// One distinct user per rating so item counts equal the given masses.
RatingDataset dataset_with_counts(const std::vector<std::pair<std::string, int>>& counts) {
  std::vector<RatingRecord> records;
  int next_user = 0;
  for (const auto& [id, n] : counts) {
    for (int k = 0; k < n; ++k) records.push_back({padded('u', next_user++), id, 3.0});
  }
  return RatingDataset::from_records(records);
}

std::set<std::string> ids_of(const RatingDataset& data, const std::vector<ItemIndex>& members) {
  std::set<std::string> out;
  for (auto i : members) out.insert(data.items().id(i));
  return out;
}

}  // namespace

TEST(Popularity, UserFraction) {
  std::vector<RatingRecord> records;
  for (int u = 0; u < 100; ++u) {
    records.push_back({padded('u', u), "other", 2.0});
    if (u < 60) records.push_back({padded('u', u), "hit", 4.0});
  }
  const auto data = RatingDataset::from_records(records);
  const auto pop = compute_item_popularity(data);
  EXPECT_DOUBLE_EQ(pop.user_fraction[item(data, "hit")], 0.6);
  EXPECT_EQ(pop.rating_count[item(data, "hit")], 60u);
  EXPECT_EQ(pop.total_ratings, 160u);
  EXPECT_EQ(pop.rating_count.size(), 2u);
}

TEST(Popularity, MatchesRecountOnSynthetic) {
  SyntheticSpec spec;
  spec.n_users = 300;
  spec.n_items = 200;
  const auto data = generate_synthetic(spec).ratings;
  const auto pop = compute_item_popularity(data);
  std::map<std::string, std::size_t> recount;
  for (const auto& r : data.records()) ++recount[r.item];
  for (const auto& [id, n] : recount) EXPECT_EQ(pop.rating_count[item(data, id)], n);
}

TEST(Pareto, TenItemExample) {
  const auto data = dataset_with_counts({{"i01", 20}, {"i02", 20}, {"i03", 15}, {"i04", 15}, {"i05", 10},
                                         {"i06", 5}, {"i07", 5}, {"i08", 4}, {"i09", 3}, {"i10", 3}});
  const auto seg = segment_items_pareto(compute_item_popularity(data));
  EXPECT_EQ(ids_of(data, seg.members[0]), (std::set<std::string>{"i01"}));
  EXPECT_EQ(ids_of(data, seg.members[1]), (std::set<std::string>{"i02", "i03", "i04", "i05"}));
  EXPECT_EQ(ids_of(data, seg.members[2]), (std::set<std::string>{"i06", "i07", "i08", "i09", "i10"}));
  EXPECT_DOUBLE_EQ(seg.mass_share[0], 0.2);
  EXPECT_DOUBLE_EQ(seg.mass_share[1], 0.6);
  EXPECT_DOUBLE_EQ(seg.mass_share[2], 0.2);
}

TEST(Pareto, HeadHasPriority) {
  const auto data = dataset_with_counts({{"i1", 6}, {"i2", 3}, {"i3", 1}});
  const auto seg = segment_items_pareto(compute_item_popularity(data));
  EXPECT_EQ(ids_of(data, seg.members[0]), (std::set<std::string>{"i1"}));
  EXPECT_TRUE(seg.members[1].empty());
  EXPECT_EQ(ids_of(data, seg.members[2]), (std::set<std::string>{"i2", "i3"}));
}

TEST(Pareto, SingleItem) {
  const auto data = dataset_with_counts({{"only", 4}});
  const auto seg = segment_items_pareto(compute_item_popularity(data));
  EXPECT_EQ(seg.members[0].size(), 1u);
  EXPECT_TRUE(seg.members[1].empty());
  EXPECT_TRUE(seg.members[2].empty());
}

TEST(Pareto, RejectsSharesThatLeaveNoMiddle) {
  const std::vector<std::size_t> masses{3, 2, 1};
  EXPECT_THROW(pareto_partition(masses, 0.5, 0.5), ConfigError);
  EXPECT_THROW(pareto_partition(masses, -0.1, 0.2), ConfigError);
  EXPECT_TRUE(pareto_partition(std::vector<std::size_t>{}, 0.2, 0.2).order.empty());
}

TEST(Pareto, AgreesWithCumulativeOracle) {
  std::mt19937_64 engine(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + uniform_index(engine, 60);
    std::vector<std::size_t> masses(n);
    std::vector<std::pair<std::string, std::size_t>> named;
    for (std::size_t k = 0; k < n; ++k) {
      masses[k] = 1 + uniform_index(engine, trial % 2 ? 5 : 200);
      named.emplace_back(padded('x', static_cast<int>(k)), masses[k]);
    }
    const double head = 0.05 + 0.4 * uniform_unit(engine);
    const double tail = 0.05 + 0.4 * uniform_unit(engine);
    const auto got = pareto_partition(masses, head, tail);
    const auto expected = oracle::pareto(named, head, tail);
    for (int g = 0; g < 3; ++g) {
      for (auto k : got.groups[g]) ASSERT_EQ(expected.at(named[k].first), g) << "trial " << trial;
    }
    EXPECT_EQ(got.groups[0].size() + got.groups[1].size() + got.groups[2].size(), n);
  }
}

TEST(UserGroups, BinSizes) {
  std::vector<RatingRecord> records;
  for (int u = 0; u < 10; ++u) {
    for (int k = 0; k <= u; ++k) records.push_back({padded('u', u), padded('i', k), 3.0});
  }
  const auto data = RatingDataset::from_records(records);
  const auto seg = segment_items_pareto(compute_item_popularity(data));
  const auto groups = group_users_by_propensity(data, seg, 3);
  ASSERT_EQ(groups.n_groups(), 3u);
  EXPECT_EQ(groups.groups[0].size(), 4u);
  EXPECT_EQ(groups.groups[1].size(), 3u);
  EXPECT_EQ(groups.groups[2].size(), 3u);
  for (std::size_t g = 0; g + 1 < 3; ++g) {
    for (auto a : groups.groups[g]) {
      for (auto b : groups.groups[g + 1]) EXPECT_GE(groups.propensity[a], groups.propensity[b]);
    }
  }
  EXPECT_THROW(group_users_by_propensity(data, seg, 11), ConfigError);
  EXPECT_THROW(group_users_by_propensity(data, seg, 0), ConfigError);
}

TEST(UserGroups, ThreeSortedUsers) {
  // H-fractions {0.8, 0.5, 0.1} -> one user per group, in that order.
  std::vector<RatingRecord> records;
  const auto add = [&](const std::string& u, int head, int tail) {
    for (int k = 0; k < head; ++k) records.push_back({u, "H" + std::to_string(k), 3.0});
    for (int k = 0; k < tail; ++k) records.push_back({u, "T" + std::to_string(k), 3.0});
  };
  add("x", 8, 2);
  add("y", 5, 5);
  add("z", 1, 9);
  const auto data = RatingDataset::from_records(records);
  ItemSegmentation seg;
  seg.category.resize(data.n_items());
  for (ItemIndex i = 0; i < data.n_items(); ++i) {
    const bool head = data.items().id(i)[0] == 'H';
    seg.category[i] = head ? Category::Head : Category::Tail;
    seg.members[head ? 0 : 2].push_back(i);
  }
  const auto groups = group_users_by_propensity(data, seg, 3);
  EXPECT_EQ(groups.groups[0], std::vector<UserIndex>{user(data, "x")});
  EXPECT_EQ(groups.groups[1], std::vector<UserIndex>{user(data, "y")});
  EXPECT_EQ(groups.groups[2], std::vector<UserIndex>{user(data, "z")});
  EXPECT_DOUBLE_EQ(groups.propensity[user(data, "x")], 0.8);
}

TEST(UserGroups, RatingWeightedMode) {
  const auto data = make_dataset({{"u", "H", 4}, {"u", "T", 1}});
  ItemSegmentation seg;
  seg.category = {Category::Head, Category::Tail};
  seg.members[0] = {0};
  seg.members[2] = {1};
  const auto weighted = group_users_by_propensity(data, seg, 1, PropensityMode::RatingWeighted);
  EXPECT_DOUBLE_EQ(weighted.propensity[0], 0.8);
  const auto counted = group_users_by_propensity(data, seg, 1, PropensityMode::HeadFraction);
  EXPECT_DOUBLE_EQ(counted.propensity[0], 0.5);
}

TEST(UserGroups, SyntheticGroupsDecreaseInHeadFraction) {
  SyntheticSpec spec;
  spec.n_users = 300;
  spec.n_items = 300;
  const auto data = generate_synthetic(spec).ratings;
  const auto seg = segment_items_pareto(compute_item_popularity(data));
  const auto groups = group_users_by_propensity(data, seg, 3);
  const auto mean = [&](std::size_t g) {
    double sum = 0;
    for (auto u : groups.groups[g]) sum += groups.propensity[u];
    return sum / static_cast<double>(groups.groups[g].size());
  };
  EXPECT_GT(mean(0), mean(1));
  EXPECT_GT(mean(1), mean(2));
}

TEST(SupplierGroups, ThreeSuppliers) {
  std::vector<RatingRecord> records;
  const auto add = [&](const std::string& item_id, int n) {
    for (int k = 0; k < n; ++k) records.push_back({padded('u', k), item_id, 3.0});
  };
  add("a", 50);
  add("b", 30);
  add("c", 20);
  const auto data = RatingDataset::from_records(records);
  const SupplierMap map({{"a", "s1"}, {"b", "s2"}, {"c", "s3"}});
  const auto groups = group_suppliers_pareto(data, map);
  const auto s = [&](std::string_view id) { return groups.suppliers.find(id).value(); };
  EXPECT_EQ(groups.groups[0], std::vector<SupplierIndex>{s("s1")});
  EXPECT_EQ(groups.groups[1], std::vector<SupplierIndex>{s("s2")});
  EXPECT_EQ(groups.groups[2], std::vector<SupplierIndex>{s("s3")});
  EXPECT_TRUE(groups.warnings.empty());
}

TEST(SupplierGroups, SingleSupplierWarns) {
  const auto data = make_dataset({{"u", "a", 3}, {"v", "b", 2}});
  const auto groups = group_suppliers_pareto(data, SupplierMap(std::map<std::string, std::string>{{"a", "s"}, {"b", "s"}}));
  EXPECT_EQ(groups.groups[0].size(), 1u);
  EXPECT_TRUE(groups.groups[1].empty());
  EXPECT_TRUE(groups.groups[2].empty());
  EXPECT_FALSE(groups.warnings.empty());
}

TEST(SupplierGroups, FewPopularSuppliersOnSynthetic) {
  const auto synthetic = generate_synthetic(SyntheticSpec{});
  const auto groups = group_suppliers_pareto(synthetic.ratings, synthetic.suppliers);
  EXPECT_LT(groups.groups[0].size() * 3, groups.groups[2].size());
}

TEST(SegmentFiles, RoundTrip) {
  TempDir dir;
  const auto synthetic = generate_synthetic(SyntheticSpec{.n_users = 120, .n_items = 150, .n_suppliers = 20});
  const auto& data = synthetic.ratings;
  const auto seg = segment_items_pareto(compute_item_popularity(data));
  const auto users = group_users_by_propensity(data, seg, 3);
  const auto suppliers = group_suppliers_pareto(data, synthetic.suppliers);
  write_item_categories(dir / "items.csv", data, seg);
  write_user_groups(dir / "users.csv", data, users);
  write_supplier_groups(dir / "suppliers.csv", suppliers);
  const auto seg2 = read_item_categories(dir / "items.csv", data);
  const auto users2 = read_user_groups(dir / "users.csv", data);
  const auto suppliers2 = read_supplier_groups(dir / "suppliers.csv", data, synthetic.suppliers);
  EXPECT_EQ(seg.category, seg2.category);
  EXPECT_EQ(users.group_of, users2.group_of);
  EXPECT_EQ(suppliers.group_of, suppliers2.group_of);
}

TEST(SegmentFiles, MissingItemRejected) {
  TempDir dir;
  const auto data = make_dataset({{"u", "a", 3}, {"u", "b", 2}});
  write_text(dir / "items.csv", "item,category\na,H\n");
  EXPECT_THROW(read_item_categories(dir / "items.csv", data), Error);
  write_text(dir / "bad.csv", "item,category\na,H\nb,Q\n");
  EXPECT_THROW(read_item_categories(dir / "bad.csv", data), Error);
}
