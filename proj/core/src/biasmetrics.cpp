#include "exposure/biasmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include <fmt/core.h>

namespace exposure {

CategoryDistribution profile_category_distribution(std::span<const RatingEntry> profile,
                                                   const ItemSegmentation& segmentation) {
  if (profile.empty()) throw ConfigError("profile distribution needs a non-empty profile");
  CategoryDistribution mass{};
  double total = 0.0;
  for (const auto& entry : profile) {
    mass[static_cast<std::size_t>(segmentation.of(entry.index))] += entry.value;
    total += entry.value;
  }
  if (!(total > 0.0)) throw ConfigError("profile ratings sum to zero");
  for (auto& m : mass) m /= total;
  return mass;
}

CategoryDistribution profile_category_distribution(UserIndex user, const RatingDataset& train,
                                                   const ItemSegmentation& segmentation) {
  return profile_category_distribution(train.profile(user), segmentation);
}

CategoryDistribution list_category_distribution(std::span<const ItemIndex> list,
                                                const ItemSegmentation& segmentation) {
  if (list.empty()) throw ConfigError("list distribution needs a non-empty list");
  CategoryDistribution mass{};
  for (auto item : list) mass[static_cast<std::size_t>(segmentation.of(item))] += 1.0;
  for (auto& m : mass) m /= static_cast<double>(list.size());
  return mass;
}

CategoryDistribution list_category_distribution(std::span<const ScoredItem> list,
                                                const ItemSegmentation& segmentation) {
  std::vector<ItemIndex> items;
  items.reserve(list.size());
  for (const auto& slot : list) items.push_back(slot.item);
  return list_category_distribution(items, segmentation);
}

double jensen_shannon(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw ConfigError(fmt::format("distributions have different supports ({} vs {})", p.size(), q.size()));
  }
  double divergence = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double mixture = 0.5 * (p[k] + q[k]);
    if (p[k] > 0.0) divergence += 0.5 * p[k] * std::log2(p[k] / mixture);
    if (q[k] > 0.0) divergence += 0.5 * q[k] * std::log2(q[k] / mixture);
  }
  return std::clamp(divergence, 0.0, 1.0);
}

UpdResult compute_upd(const RecommendationTable& recommendations, const RatingDataset& train,
                      const ItemSegmentation& segmentation, const UserGroups& groups) {
  if (groups.n_groups() == 0) throw ConfigError("UPD needs at least one user group");
  UpdResult result;
  result.user_jsd.assign(train.n_users(), 0.0);
  double sum_of_means = 0.0;
  for (std::size_t g = 0; g < groups.n_groups(); ++g) {
    const auto& members = groups.groups[g];
    if (members.empty()) throw ConfigError(fmt::format("user group G{} is empty", g + 1));
    double sum = 0.0;
    for (auto user : members) {
      const auto* list = recommendations.find(user);
      if (list == nullptr || list->empty()) {
        throw ConfigError(fmt::format("user '{}' has no recommendation list", train.users().id(user)));
      }
      const auto p = profile_category_distribution(train.profile(user), segmentation);
      const auto q = list_category_distribution(*list, segmentation);
      const double jsd = jensen_shannon(p, q);
      result.user_jsd[user] = jsd;
      sum += jsd;
    }
    const double mean = sum / static_cast<double>(members.size());
    result.group_means.push_back(mean);
    sum_of_means += mean;
  }
  result.upd = sum_of_means / static_cast<double>(groups.n_groups());
  return result;
}

SupplierExposure supplier_exposure(const RecommendationTable& recommendations, const RatingDataset& train,
                                   std::span<const std::size_t> item_groups, std::size_t n_groups) {
  if (item_groups.size() != train.n_items()) throw ConfigError("supplier groups do not cover the train catalog");
  SupplierExposure exposure;
  exposure.q.assign(n_groups, 0.0);
  exposure.p.assign(n_groups, 0.0);
  for (ItemIndex i = 0; i < train.n_items(); ++i) {
    exposure.p.at(item_groups[i]) += static_cast<double>(train.item_count(i));
  }
  std::size_t slots = 0;
  for (const auto& row : recommendations.rows) {
    for (const auto& slot : row.items) {
      exposure.q.at(item_groups[slot.item]) += 1.0;
      ++slots;
    }
  }
  for (auto& value : exposure.p) value /= static_cast<double>(train.n_ratings());
  if (slots > 0) {
    for (auto& value : exposure.q) value /= static_cast<double>(slots);
  }
  return exposure;
}

SupplierExposure supplier_exposure(const RecommendationTable& recommendations, const RatingDataset& train,
                                   const SupplierGroups& groups, const SupplierMap& suppliers) {
  const auto item_groups = item_supplier_groups(train, suppliers, groups);
  return supplier_exposure(recommendations, train, item_groups, groups.n_groups());
}

SpdResult compute_spd(const SupplierExposure& exposure) {
  if (exposure.p.size() != exposure.q.size() || exposure.p.empty()) {
    throw ConfigError("supplier exposure vectors must be non-empty and aligned");
  }
  double gap = 0.0;
  for (std::size_t s = 0; s < exposure.p.size(); ++s) gap += std::abs(exposure.q[s] - exposure.p[s]);
  SpdResult result;
  result.spd = gap / static_cast<double>(exposure.p.size());
  result.fairness = 1.0 - result.spd;
  return result;
}

PrecisionResult precision_at_n(const RecommendationTable& recommendations, const RatingDataset& train,
                               const RatingDataset& test, std::size_t n, std::optional<double> relevance_threshold) {
  if (n < 1) throw ConfigError("precision needs n >= 1");
  PrecisionResult result;
  double sum = 0.0;
  std::unordered_set<ItemIndex> relevant;
  for (const auto& row : recommendations.rows) {
    if (test.empty()) break;
    const auto test_user = test.users().find(train.users().id(row.user));
    if (!test_user) continue;
    relevant.clear();
    bool any_relevant = false;
    for (const auto& entry : test.profile(*test_user)) {
      if (relevance_threshold && entry.value < *relevance_threshold) continue;
      any_relevant = true;
      if (auto item = train.items().find(test.items().id(entry.index))) relevant.insert(*item);
    }
    if (!any_relevant) continue;
    std::size_t hits = 0;
    for (const auto& slot : row.items) hits += relevant.contains(slot.item) ? 1 : 0;
    sum += static_cast<double>(hits) / static_cast<double>(n);
    ++result.evaluated_users;
  }
  if (result.evaluated_users == 0) throw ConfigError("no user has relevant test ratings; precision is undefined");
  result.precision = sum / static_cast<double>(result.evaluated_users);
  return result;
}

double catalog_coverage(const RecommendationTable& recommendations, std::size_t catalog_size) {
  if (catalog_size == 0) throw ConfigError("coverage needs a non-empty catalog");
  std::vector<bool> seen(catalog_size, false);
  std::size_t unique = 0;
  for (const auto& row : recommendations.rows) {
    for (const auto& slot : row.items) {
      if (slot.item < catalog_size && !seen[slot.item]) {
        seen[slot.item] = true;
        ++unique;
      }
    }
  }
  return static_cast<double>(unique) / static_cast<double>(catalog_size);
}

CategoryDistribution slot_category_share(const RecommendationTable& recommendations,
                                         const ItemSegmentation& segmentation) {
  CategoryDistribution share{};
  std::size_t slots = 0;
  for (const auto& row : recommendations.rows) {
    for (const auto& slot : row.items) {
      share[static_cast<std::size_t>(segmentation.of(slot.item))] += 1.0;
      ++slots;
    }
  }
  if (slots > 0) {
    for (auto& value : share) value /= static_cast<double>(slots);
  }
  return share;
}

namespace {

double pearson(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  if (x.size() < 2) return 0.0;
  const double mean_x = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double mean_y = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mean_x) * (y[k] - mean_y);
    sxx += (x[k] - mean_x) * (x[k] - mean_x);
    syy += (y[k] - mean_y) * (y[k] - mean_y);
  }
  if (!(sxx > 0.0 && syy > 0.0)) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

PopularityScatter popularity_scatter(const RecommendationTable& recommendations, const RatingDataset& train) {
  PopularityScatter scatter;
  std::vector<std::size_t> received(train.n_items(), 0);
  for (const auto& row : recommendations.rows) {
    for (const auto& slot : row.items) ++received.at(slot.item);
  }
  const auto n_users = static_cast<double>(train.n_users());
  std::vector<double> data(train.n_items());
  std::vector<double> rec(train.n_items());
  scatter.points.reserve(train.n_items());
  for (ItemIndex i = 0; i < train.n_items(); ++i) {
    data[i] = static_cast<double>(train.item_count(i)) / n_users;
    rec[i] = static_cast<double>(received[i]) / n_users;
    scatter.points.push_back({i, data[i], rec[i]});
  }
  scatter.correlation = pearson(data, rec);
  return scatter;
}

std::vector<GroupCategoryShare> group_popularity_report(const RecommendationTable& recommendations,
                                                        const RatingDataset& train, const UserGroups& groups,
                                                        const ItemSegmentation& segmentation) {
  std::vector<GroupCategoryShare> rows;
  for (std::size_t g = 0; g < groups.n_groups(); ++g) {
    CategoryDistribution profile_sum{};
    CategoryDistribution list_sum{};
    std::size_t profiles = 0;
    std::size_t lists = 0;
    for (auto user : groups.groups[g]) {
      const auto p = profile_category_distribution(train.profile(user), segmentation);
      for (std::size_t c = 0; c < kCategoryCount; ++c) profile_sum[c] += p[c];
      ++profiles;
      const auto* list = recommendations.find(user);
      if (list == nullptr || list->empty()) continue;
      const auto q = list_category_distribution(*list, segmentation);
      for (std::size_t c = 0; c < kCategoryCount; ++c) list_sum[c] += q[c];
      ++lists;
    }
    for (std::size_t c = 0; c < kCategoryCount; ++c) {
      rows.push_back({g, kCategories[c], profiles > 0 ? profile_sum[c] / static_cast<double>(profiles) : 0.0,
                      lists > 0 ? list_sum[c] / static_cast<double>(lists) : 0.0});
    }
  }
  return rows;
}

std::vector<SupplierRankRow> supplier_rank_report(const RecommendationTable& recommendations,
                                                  const RatingDataset& train, const SupplierMap& suppliers) {
  const auto dictionary = suppliers.suppliers_in(train);
  const auto owner = suppliers.resolve(train, dictionary);
  std::vector<std::size_t> data(dictionary.size(), 0);
  std::vector<std::size_t> rec(dictionary.size(), 0);
  for (ItemIndex i = 0; i < train.n_items(); ++i) data[owner[i]] += train.item_count(i);
  std::size_t slots = 0;
  for (const auto& row : recommendations.rows) {
    for (const auto& slot : row.items) {
      ++rec[owner[slot.item]];
      ++slots;
    }
  }
  std::vector<SupplierIndex> order(dictionary.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](SupplierIndex a, SupplierIndex b) { return data[a] > data[b]; });
  std::vector<SupplierRankRow> rows;
  rows.reserve(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto s = order[r];
    rows.push_back({dictionary.id(s), r + 1, static_cast<double>(data[s]) / static_cast<double>(train.n_ratings()),
                    slots > 0 ? static_cast<double>(rec[s]) / static_cast<double>(slots) : 0.0});
  }
  return rows;
}

MetricsReport evaluate(const EvaluationInputs& inputs, std::string algorithm, std::string provenance) {
  const auto& table = inputs.recommendations;
  const auto& train = inputs.train;
  MetricsReport report;
  report.algorithm = std::move(algorithm);
  report.provenance = std::move(provenance);
  report.list_size = inputs.list_size;
  report.n_users = train.n_users();
  report.n_items = train.n_items();
  report.short_lists = table.short_lists.size();

  const auto upd = compute_upd(table, train, inputs.segmentation, inputs.user_groups);
  report.upd = upd.upd;
  report.upd_group_means = upd.group_means;

  if (inputs.suppliers != nullptr && inputs.supplier_groups != nullptr) {
    report.exposure = supplier_exposure(table, train, *inputs.supplier_groups, *inputs.suppliers);
    report.spd = compute_spd(*report.exposure);
    report.supplier_rank = supplier_rank_report(table, train, *inputs.suppliers);
  }

  report.precision = precision_at_n(table, train, inputs.test, inputs.list_size, inputs.relevance_threshold);
  report.coverage = catalog_coverage(table, train.n_items());
  report.slot_share = slot_category_share(table, inputs.segmentation);
  for (std::size_t c = 0; c < kCategoryCount; ++c) report.rating_share[c] = inputs.segmentation.mass_share[c];

  const auto scatter = popularity_scatter(table, train);
  report.popularity_correlation = scatter.correlation;
  report.scatter.reserve(scatter.points.size());
  for (const auto& point : scatter.points) report.scatter.emplace_back(train.items().id(point.item), point);

  report.group_popularity = group_popularity_report(table, train, inputs.user_groups, inputs.segmentation);

  for (std::size_t g = 0; g < inputs.user_groups.n_groups(); ++g) {
    for (auto user : inputs.user_groups.groups[g]) {
      UserCalibration row;
      row.user = train.users().id(user);
      row.group = g;
      row.profile = profile_category_distribution(train.profile(user), inputs.segmentation);
      row.recommended = list_category_distribution(*table.find(user), inputs.segmentation);
      row.jsd = upd.user_jsd[user];
      report.user_calibration.push_back(std::move(row));
    }
  }
  return report;
}

}  // namespace exposure
