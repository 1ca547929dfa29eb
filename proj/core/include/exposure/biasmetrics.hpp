#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "exposure/common.hpp"
#include "exposure/ingest.hpp"
#include "exposure/recsys.hpp"
#include "exposure/segment.hpp"

namespace exposure {

// Probability mass over {H, M, T}.
using CategoryDistribution = std::array<double, kCategoryCount>;

// p(c|u): rating-weighted share of the profile in each category.
CategoryDistribution profile_category_distribution(std::span<const RatingEntry> profile,
                                                   const ItemSegmentation& segmentation);
CategoryDistribution profile_category_distribution(UserIndex user, const RatingDataset& train,
                                                   const ItemSegmentation& segmentation);

// q(c|u): share of list items in each category.
CategoryDistribution list_category_distribution(std::span<const ScoredItem> list,
                                                const ItemSegmentation& segmentation);
CategoryDistribution list_category_distribution(std::span<const ItemIndex> list,
                                                const ItemSegmentation& segmentation);

// Jensen-Shannon divergence with base-2 logarithms, so the result lies in
// [0, 1]. Zero entries contribute nothing.
double jensen_shannon(std::span<const double> p, std::span<const double> q);

struct UpdResult {
  double upd = 0.0;
  std::vector<double> group_means;  // mean JSD per user group
  std::vector<double> user_jsd;     // by train user index
};

// Mean over groups of the mean per-user JSD between profile and list distributions.
UpdResult compute_upd(const RecommendationTable& recommendations, const RatingDataset& train,
                      const ItemSegmentation& segmentation, const UserGroups& groups);

struct SupplierExposure {
  std::vector<double> q;  // share of recommendation slots per supplier group
  std::vector<double> p;  // share of train ratings per supplier group
};

// item_groups gives the supplier group of every train item.
SupplierExposure supplier_exposure(const RecommendationTable& recommendations, const RatingDataset& train,
                                   std::span<const std::size_t> item_groups, std::size_t n_groups);
SupplierExposure supplier_exposure(const RecommendationTable& recommendations, const RatingDataset& train,
                                   const SupplierGroups& groups, const SupplierMap& suppliers);

struct SpdResult {
  double spd = 0.0;
  double fairness = 1.0;  // 1 - SPD
};

SpdResult compute_spd(const SupplierExposure& exposure);

struct PrecisionResult {
  double precision = 0.0;
  std::size_t evaluated_users = 0;
};

// Hits are list items found in the user's test ratings (at or above the
// threshold when one is given). Users without relevant test items are skipped.
PrecisionResult precision_at_n(const RecommendationTable& recommendations, const RatingDataset& train,
                               const RatingDataset& test, std::size_t n,
                               std::optional<double> relevance_threshold = std::nullopt);

double catalog_coverage(const RecommendationTable& recommendations, std::size_t catalog_size);

// Share of all emitted slots that land in each of H, M, T.
CategoryDistribution slot_category_share(const RecommendationTable& recommendations,
                                         const ItemSegmentation& segmentation);

struct ScatterPoint {
  ItemIndex item = 0;
  double pop_data = 0.0;  // share of users who rated the item
  double pop_rec = 0.0;   // share of users who were recommended the item
};

struct PopularityScatter {
  std::vector<ScatterPoint> points;  // every catalog item, by index
  double correlation = 0.0;          // Pearson over items; 0 when undefined
};

PopularityScatter popularity_scatter(const RecommendationTable& recommendations, const RatingDataset& train);

struct GroupCategoryShare {
  std::size_t group = 0;
  Category category = Category::Head;
  double profile_share = 0.0;
  double recommendation_share = 0.0;
};

// Mean p(c|u) and q(c|u) per user group.
std::vector<GroupCategoryShare> group_popularity_report(const RecommendationTable& recommendations,
                                                        const RatingDataset& train, const UserGroups& groups,
                                                        const ItemSegmentation& segmentation);

struct SupplierRankRow {
  std::string supplier;
  std::size_t rank = 0;  // 1 = most rated in train
  double data_share = 0.0;
  double recommendation_share = 0.0;
};

std::vector<SupplierRankRow> supplier_rank_report(const RecommendationTable& recommendations,
                                                  const RatingDataset& train, const SupplierMap& suppliers);

struct UserCalibration {
  std::string user;
  std::size_t group = 0;
  CategoryDistribution profile{};
  CategoryDistribution recommended{};
  double jsd = 0.0;
};

struct MetricsReport {
  std::string algorithm;
  std::string provenance;  // JSON object text, may be empty
  std::size_t list_size = 0;
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t short_lists = 0;

  double upd = 0.0;
  std::vector<double> upd_group_means;
  std::optional<SupplierExposure> exposure;
  std::optional<SpdResult> spd;
  PrecisionResult precision;
  double coverage = 0.0;
  double popularity_correlation = 0.0;
  CategoryDistribution slot_share{};    // recommendation slots per category
  CategoryDistribution rating_share{};  // train rating mass per category

  std::vector<std::pair<std::string, ScatterPoint>> scatter;  // item id + point
  std::vector<GroupCategoryShare> group_popularity;
  std::vector<SupplierRankRow> supplier_rank;
  std::vector<UserCalibration> user_calibration;
};

struct EvaluationInputs {
  const RecommendationTable& recommendations;
  const RatingDataset& train;
  const RatingDataset& test;
  const ItemSegmentation& segmentation;
  const UserGroups& user_groups;
  const SupplierMap* suppliers = nullptr;  // optional
  const SupplierGroups* supplier_groups = nullptr;
  std::size_t list_size = 10;
  std::optional<double> relevance_threshold;
};

MetricsReport evaluate(const EvaluationInputs& inputs, std::string algorithm = {}, std::string provenance = {});

}  // namespace exposure
