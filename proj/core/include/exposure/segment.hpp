#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "exposure/common.hpp"
#include "exposure/ingest.hpp"

namespace exposure {

// Item popularity category. Values double as array indices.
enum class Category : std::uint8_t { Head = 0, Mid = 1, Tail = 2 };
inline constexpr std::size_t kCategoryCount = 3;
inline constexpr std::array<Category, kCategoryCount> kCategories{Category::Head, Category::Mid, Category::Tail};

std::string_view category_label(Category category);
std::optional<Category> parse_category(std::string_view label);

struct ItemPopularity {
  std::vector<std::size_t> rating_count;  // by train item index
  std::vector<double> user_fraction;      // rating_count / n_users
  std::size_t total_ratings = 0;
};

ItemPopularity compute_item_popularity(const RatingDataset& train);

// Three-way split of a mass-ranked population. `order` lists indices by
// descending mass, ties by ascending index. groups[0] is the minimal prefix
// of `order` reaching head_share of the total mass, groups[2] the minimal
// suffix of the rest reaching tail_share, groups[1] whatever is left.
struct ParetoPartition {
  std::vector<std::uint32_t> order;
  std::array<std::vector<std::uint32_t>, 3> groups;
  std::array<double, 3> mass_share{};
};

ParetoPartition pareto_partition(std::span<const std::size_t> masses, double head_share, double tail_share);

struct ItemSegmentation {
  std::vector<Category> category;  // by train item index
  std::array<std::vector<ItemIndex>, kCategoryCount> members;
  std::array<double, kCategoryCount> mass_share{};

  Category of(ItemIndex item) const { return category.at(item); }
};

ItemSegmentation segment_items_pareto(const ItemPopularity& popularity, double head_share = 0.2,
                                      double tail_share = 0.2);

enum class PropensityMode {
  HeadFraction,   // share of distinct profile items in H
  RatingWeighted  // rating-weighted share of the profile in H
};

PropensityMode parse_propensity_mode(std::string_view name);
std::string_view propensity_mode_name(PropensityMode mode);

struct UserGroups {
  std::vector<std::vector<UserIndex>> groups;  // G1 (most popularity-focused) first
  std::vector<double> propensity;              // by train user index
  std::vector<std::size_t> group_of;           // by train user index

  std::size_t n_groups() const { return groups.size(); }
};

UserGroups group_users_by_propensity(const RatingDataset& train, const ItemSegmentation& segmentation,
                                     std::size_t n_groups = 3, PropensityMode mode = PropensityMode::HeadFraction);

struct SupplierGroups {
  IdDictionary suppliers;                   // suppliers owning at least one train item
  std::vector<std::size_t> mass;            // train ratings per supplier
  std::array<std::vector<SupplierIndex>, 3> groups;
  std::array<double, 3> mass_share{};
  std::vector<std::size_t> group_of;        // by supplier index
  std::vector<std::string> warnings;

  std::size_t n_groups() const { return groups.size(); }
};

SupplierGroups group_suppliers_pareto(const RatingDataset& train, const SupplierMap& suppliers,
                                      std::array<double, 3> shares = {0.2, 0.6, 0.2});

// Supplier group of every train item.
std::vector<std::size_t> item_supplier_groups(const RatingDataset& train, const SupplierMap& suppliers,
                                              const SupplierGroups& groups);

// --- files --------------------------------------------------------------------

void write_item_categories(const std::filesystem::path& path, const RatingDataset& train,
                           const ItemSegmentation& segmentation);
void write_user_groups(const std::filesystem::path& path, const RatingDataset& train, const UserGroups& groups);
void write_supplier_groups(const std::filesystem::path& path, const SupplierGroups& groups);
// Long-tail curve: rank (1-based) and user fraction, most popular first.
void write_longtail(const std::filesystem::path& path, const ItemPopularity& popularity);

// Readers resolve ids against the train catalog and fail on any train
// item/user/supplier that is missing from the file.
ItemSegmentation read_item_categories(const std::filesystem::path& path, const RatingDataset& train);
UserGroups read_user_groups(const std::filesystem::path& path, const RatingDataset& train);
SupplierGroups read_supplier_groups(const std::filesystem::path& path, const RatingDataset& train,
                                    const SupplierMap& suppliers);

}  // namespace exposure
