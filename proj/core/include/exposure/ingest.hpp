#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "exposure/common.hpp"

namespace exposure {

struct RatingScale {
  double min = 1.0;
  double max = 5.0;

  bool contains(double value) const { return value >= min && value <= max; }
  double midpoint() const { return 0.5 * (min + max); }
};

// One raw implicit-feedback aggregate: how many times a user interacted with an item.
struct Interaction {
  std::string user;
  std::string item;
  std::uint64_t count = 1;
};

struct RatingRecord {
  std::string user;
  std::string item;
  double value = 0.0;
};

// A (dense index, rating) pair. In a profile the index is an item, in a
// rater list it is a user.
struct RatingEntry {
  std::uint32_t index = 0;
  double value = 0.0;
};

// Immutable sparse user x item rating matrix. Every indexed user and item
// has at least one rating. Rows are sorted by index.
class RatingDataset {
 public:
  RatingDataset() = default;

  // Duplicate (user, item) pairs keep the last occurrence. Values outside
  // the scale are rejected.
  static RatingDataset from_records(std::span<const RatingRecord> records, RatingScale scale = {});

  std::size_t n_users() const { return users_.size(); }
  std::size_t n_items() const { return items_.size(); }
  std::size_t n_ratings() const { return profile_entries_.size(); }
  bool empty() const { return profile_entries_.empty(); }
  const RatingScale& scale() const { return scale_; }

  const IdDictionary& users() const { return users_; }
  const IdDictionary& items() const { return items_; }

  // rho_u: items rated by the user, ascending item index.
  std::span<const RatingEntry> profile(UserIndex user) const;
  // Users who rated the item, ascending user index.
  std::span<const RatingEntry> raters(ItemIndex item) const;
  std::size_t item_count(ItemIndex item) const { return raters(item).size(); }

  std::optional<double> rating(UserIndex user, ItemIndex item) const;
  double global_mean() const;

  // All ratings ordered by (user id, item id).
  std::vector<RatingRecord> records() const;

 private:
  RatingScale scale_;
  IdDictionary users_;
  IdDictionary items_;
  std::vector<std::size_t> profile_offsets_{0};
  std::vector<RatingEntry> profile_entries_;
  std::vector<std::size_t> rater_offsets_{0};
  std::vector<RatingEntry> rater_entries_;
};

enum class RatingFormat { ExplicitCsv, ImplicitCsv };

RatingFormat parse_rating_format(std::string_view name);
std::string_view rating_format_name(RatingFormat format);

struct LoadOptions {
  // Empty selects "::", tab or "," from the first line.
  std::string delimiter;
  RatingScale scale;
};

// Reads user,item,value[,timestamp] rows. A first line whose value column
// is not numeric is treated as a header.
RatingDataset load_ratings(const std::filesystem::path& path, const LoadOptions& options = {});

// Reads user,item[,count[,timestamp]] rows and sums counts per (user, item).
// A missing count column counts the row as one event. Output is sorted by (user, item).
std::vector<Interaction> load_interactions(const std::filesystem::path& path, const LoadOptions& options = {});

// Per-user min-max scaling of counts onto the rating scale. A user whose
// counts are all equal gets the scale midpoint.
RatingDataset implicit_to_explicit(std::span<const Interaction> interactions, RatingScale scale = {});

// Drops users with fewer than min_ratings ratings (single pass).
RatingDataset filter_min_profile(const RatingDataset& dataset, std::size_t min_ratings = 20);

struct SplitPair {
  RatingDataset train;
  RatingDataset test;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

// Per-user random split. Each user sends round(test_fraction * |profile|)
// ratings to test, clamped so that at least one rating stays in train.
SplitPair split_train_test(const RatingDataset& dataset, double test_fraction = 0.2, std::uint64_t seed = 42);

// The A(.) function: item id -> supplier id.
class SupplierMap {
 public:
  SupplierMap() = default;
  explicit SupplierMap(std::map<std::string, std::string> item_to_supplier);

  std::optional<std::string_view> supplier_of(std::string_view item) const;
  std::size_t n_items() const { return item_to_supplier_.size(); }
  std::size_t n_suppliers() const;
  const std::map<std::string, std::string, std::less<>>& entries() const { return item_to_supplier_; }

  // Per item index of the dataset, the supplier's index in suppliers().
  // Throws ConflictError if a dataset item has no supplier.
  std::vector<SupplierIndex> resolve(const RatingDataset& dataset, const IdDictionary& suppliers) const;
  // Suppliers that own at least one item of the dataset.
  IdDictionary suppliers_in(const RatingDataset& dataset) const;

 private:
  std::map<std::string, std::string, std::less<>> item_to_supplier_;
};

// Reads item,supplier rows. The same item mapped to two different
// suppliers raises ConflictError.
SupplierMap read_supplier_map(const std::filesystem::path& path, const LoadOptions& options = {});

struct SupplierJoin {
  RatingDataset dataset;
  SupplierMap suppliers;  // restricted to the surviving catalog
  std::size_t dropped_items = 0;
  std::size_t dropped_ratings = 0;
};

// Restricts the dataset to items with a known supplier.
SupplierJoin join_suppliers(const RatingDataset& dataset, const SupplierMap& suppliers);
SupplierJoin load_supplier_map(const std::filesystem::path& path, const RatingDataset& dataset,
                               const LoadOptions& options = {});

void write_ratings_csv(const std::filesystem::path& path, const RatingDataset& dataset);
void write_supplier_csv(const std::filesystem::path& path, const SupplierMap& suppliers);

}  // namespace exposure
