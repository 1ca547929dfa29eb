#include "exposure/segment.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <fmt/core.h>

namespace exposure {

std::string_view category_label(Category category) {
  switch (category) {
    case Category::Head: return "H";
    case Category::Mid: return "M";
    case Category::Tail: return "T";
  }
  return "?";
}

std::optional<Category> parse_category(std::string_view label) {
  if (label == "H") return Category::Head;
  if (label == "M") return Category::Mid;
  if (label == "T") return Category::Tail;
  return std::nullopt;
}

PropensityMode parse_propensity_mode(std::string_view name) {
  if (name == "head_fraction") return PropensityMode::HeadFraction;
  if (name == "rating_weighted") return PropensityMode::RatingWeighted;
  throw ConfigError(fmt::format("unknown propensity mode '{}'", name));
}

std::string_view propensity_mode_name(PropensityMode mode) {
  return mode == PropensityMode::HeadFraction ? "head_fraction" : "rating_weighted";
}

ItemPopularity compute_item_popularity(const RatingDataset& train) {
  if (train.empty()) throw EmptyDatasetError("item popularity needs a non-empty train set");
  ItemPopularity popularity;
  popularity.rating_count.resize(train.n_items());
  popularity.user_fraction.resize(train.n_items());
  const auto n_users = static_cast<double>(train.n_users());
  for (ItemIndex i = 0; i < train.n_items(); ++i) {
    const auto count = train.item_count(i);
    popularity.rating_count[i] = count;
    popularity.user_fraction[i] = static_cast<double>(count) / n_users;
    popularity.total_ratings += count;
  }
  return popularity;
}

ParetoPartition pareto_partition(std::span<const std::size_t> masses, double head_share, double tail_share) {
  if (head_share < 0.0 || tail_share < 0.0 || !(head_share + tail_share < 1.0)) {
    throw ConfigError(fmt::format("head share {} and tail share {} must be non-negative and sum below 1",
                                  head_share, tail_share));
  }
  ParetoPartition partition;
  partition.order.resize(masses.size());
  std::iota(partition.order.begin(), partition.order.end(), 0u);
  std::sort(partition.order.begin(), partition.order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (masses[a] != masses[b]) return masses[a] > masses[b];
    return a < b;
  });
  const double total = static_cast<double>(std::accumulate(masses.begin(), masses.end(), std::size_t{0}));
  if (masses.empty() || total <= 0.0) return partition;

  std::size_t head_end = 0;
  std::size_t cumulative = 0;
  while (head_end < partition.order.size()) {
    cumulative += masses[partition.order[head_end]];
    ++head_end;
    if (static_cast<double>(cumulative) / total >= head_share) break;
  }

  std::size_t tail_begin = partition.order.size();
  cumulative = 0;
  while (tail_begin > head_end) {
    --tail_begin;
    cumulative += masses[partition.order[tail_begin]];
    if (static_cast<double>(cumulative) / total >= tail_share) break;
  }

  const auto slice = [&](std::size_t begin, std::size_t end) {
    return std::vector<std::uint32_t>(partition.order.begin() + static_cast<std::ptrdiff_t>(begin),
                                      partition.order.begin() + static_cast<std::ptrdiff_t>(end));
  };
  partition.groups[0] = slice(0, head_end);
  partition.groups[1] = slice(head_end, tail_begin);
  partition.groups[2] = slice(tail_begin, partition.order.size());
  for (std::size_t g = 0; g < 3; ++g) {
    std::size_t mass = 0;
    for (auto index : partition.groups[g]) mass += masses[index];
    partition.mass_share[g] = static_cast<double>(mass) / total;
  }
  return partition;
}

ItemSegmentation segment_items_pareto(const ItemPopularity& popularity, double head_share, double tail_share) {
  if (popularity.rating_count.empty()) throw EmptyDatasetError("cannot segment an empty catalog");
  auto partition = pareto_partition(popularity.rating_count, head_share, tail_share);
  ItemSegmentation segmentation;
  segmentation.category.resize(popularity.rating_count.size(), Category::Mid);
  for (std::size_t c = 0; c < kCategoryCount; ++c) {
    segmentation.members[c] = std::move(partition.groups[c]);
    std::sort(segmentation.members[c].begin(), segmentation.members[c].end());
    for (auto item : segmentation.members[c]) segmentation.category[item] = kCategories[c];
  }
  segmentation.mass_share = partition.mass_share;
  return segmentation;
}

namespace {

std::vector<std::vector<UserIndex>> bin_users(std::vector<UserIndex> ranked, std::size_t n_groups) {
  std::vector<std::vector<UserIndex>> groups(n_groups);
  const std::size_t base = ranked.size() / n_groups;
  const std::size_t extra = ranked.size() % n_groups;
  std::size_t cursor = 0;
  for (std::size_t g = 0; g < n_groups; ++g) {
    const std::size_t size = base + (g < extra ? 1 : 0);
    groups[g].assign(ranked.begin() + static_cast<std::ptrdiff_t>(cursor),
                     ranked.begin() + static_cast<std::ptrdiff_t>(cursor + size));
    cursor += size;
  }
  return groups;
}

}  // namespace

UserGroups group_users_by_propensity(const RatingDataset& train, const ItemSegmentation& segmentation,
                                     std::size_t n_groups, PropensityMode mode) {
  if (n_groups == 0) throw ConfigError("n_groups must be at least 1");
  if (n_groups > train.n_users()) {
    throw ConfigError(fmt::format("cannot form {} groups from {} users", n_groups, train.n_users()));
  }
  if (segmentation.category.size() != train.n_items()) {
    throw ConfigError("segmentation does not cover the train catalog");
  }
  UserGroups result;
  result.propensity.resize(train.n_users());
  for (UserIndex u = 0; u < train.n_users(); ++u) {
    double head = 0.0;
    double total = 0.0;
    for (const auto& entry : train.profile(u)) {
      const double weight = mode == PropensityMode::HeadFraction ? 1.0 : entry.value;
      total += weight;
      if (segmentation.of(entry.index) == Category::Head) head += weight;
    }
    result.propensity[u] = total > 0.0 ? head / total : 0.0;
  }
  std::vector<UserIndex> ranked(train.n_users());
  std::iota(ranked.begin(), ranked.end(), 0u);
  std::sort(ranked.begin(), ranked.end(), [&](UserIndex a, UserIndex b) {
    if (result.propensity[a] != result.propensity[b]) return result.propensity[a] > result.propensity[b];
    return a < b;
  });
  result.groups = bin_users(std::move(ranked), n_groups);
  result.group_of.resize(train.n_users());
  for (std::size_t g = 0; g < n_groups; ++g) {
    for (auto u : result.groups[g]) result.group_of[u] = g;
  }
  return result;
}

SupplierGroups group_suppliers_pareto(const RatingDataset& train, const SupplierMap& suppliers,
                                      std::array<double, 3> shares) {
  SupplierGroups result;
  result.suppliers = suppliers.suppliers_in(train);
  const auto owner = suppliers.resolve(train, result.suppliers);
  result.mass.assign(result.suppliers.size(), 0);
  for (ItemIndex i = 0; i < train.n_items(); ++i) result.mass[owner[i]] += train.item_count(i);

  auto partition = pareto_partition(result.mass, shares[0], shares[2]);
  result.group_of.assign(result.suppliers.size(), 0);
  for (std::size_t g = 0; g < 3; ++g) {
    result.groups[g] = std::move(partition.groups[g]);
    for (auto s : result.groups[g]) result.group_of[s] = g;
  }
  result.mass_share = partition.mass_share;
  if (result.suppliers.size() < 3) {
    result.warnings.push_back(
        fmt::format("only {} supplier(s); some supplier groups are empty", result.suppliers.size()));
  }
  return result;
}

std::vector<std::size_t> item_supplier_groups(const RatingDataset& train, const SupplierMap& suppliers,
                                              const SupplierGroups& groups) {
  const auto owner = suppliers.resolve(train, groups.suppliers);
  std::vector<std::size_t> out(owner.size());
  for (std::size_t i = 0; i < owner.size(); ++i) out[i] = groups.group_of.at(owner[i]);
  return out;
}

// --- files ------------------------------------------------------------------

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

// Minimal reader for the comma-separated files this module writes.
template <typename RowFn>
void read_csv(const std::filesystem::path& path, std::size_t expected_fields, RowFn&& on_row) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::string line;
  std::size_t line_number = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_number;
    const auto body = trim(line);
    if (body.empty()) continue;
    if (std::exchange(header, false)) continue;
    const auto fields = split_fields(body, ",");
    if (fields.size() != expected_fields) {
      throw ParseError(path.string(), line_number,
                       fmt::format("expected {} fields, found {}", expected_fields, fields.size()));
    }
    on_row(fields, line_number);
  }
}

std::optional<std::size_t> parse_group_label(std::string_view label, char prefix) {
  if (label.size() < 2 || label.front() != prefix) return std::nullopt;
  const auto number = parse_uint(label.substr(1));
  if (!number || *number == 0) return std::nullopt;
  return static_cast<std::size_t>(*number - 1);
}

}  // namespace

void write_item_categories(const std::filesystem::path& path, const RatingDataset& train,
                           const ItemSegmentation& segmentation) {
  auto out = open_output(path);
  out << "item,category\n";
  for (ItemIndex i = 0; i < train.n_items(); ++i) {
    out << train.items().id(i) << ',' << category_label(segmentation.of(i)) << '\n';
  }
}

void write_user_groups(const std::filesystem::path& path, const RatingDataset& train, const UserGroups& groups) {
  auto out = open_output(path);
  out << "user,group,propensity\n";
  for (std::size_t g = 0; g < groups.n_groups(); ++g) {
    for (auto u : groups.groups[g]) {
      out << train.users().id(u) << ",G" << (g + 1) << ',' << format_double(groups.propensity[u]) << '\n';
    }
  }
}

void write_supplier_groups(const std::filesystem::path& path, const SupplierGroups& groups) {
  auto out = open_output(path);
  out << "supplier,group,mass_share\n";
  const double total = static_cast<double>(std::accumulate(groups.mass.begin(), groups.mass.end(), std::size_t{0}));
  for (std::size_t g = 0; g < groups.n_groups(); ++g) {
    for (auto s : groups.groups[g]) {
      out << groups.suppliers.id(s) << ",S" << (g + 1) << ','
          << format_double(static_cast<double>(groups.mass[s]) / total) << '\n';
    }
  }
}

void write_longtail(const std::filesystem::path& path, const ItemPopularity& popularity) {
  auto out = open_output(path);
  out << "rank,user_fraction\n";
  std::vector<double> fractions = popularity.user_fraction;
  std::sort(fractions.begin(), fractions.end(), std::greater<>());
  for (std::size_t r = 0; r < fractions.size(); ++r) out << (r + 1) << ',' << format_double(fractions[r]) << '\n';
}

ItemSegmentation read_item_categories(const std::filesystem::path& path, const RatingDataset& train) {
  ItemSegmentation segmentation;
  segmentation.category.resize(train.n_items(), Category::Mid);
  std::vector<bool> seen(train.n_items(), false);
  read_csv(path, 2, [&](const std::vector<std::string_view>& fields, std::size_t line) {
    const auto item = train.items().find(fields[0]);
    if (!item) return;  // not part of the train catalog
    const auto category = parse_category(fields[1]);
    if (!category) throw ParseError(path.string(), line, fmt::format("unknown category '{}'", fields[1]));
    segmentation.category[*item] = *category;
    seen[*item] = true;
  });
  std::array<std::size_t, kCategoryCount> mass{};
  std::size_t total = 0;
  for (ItemIndex i = 0; i < train.n_items(); ++i) {
    if (!seen[i]) {
      throw ParseError(path.string(), 0, fmt::format("train item '{}' has no category", train.items().id(i)));
    }
    const auto c = static_cast<std::size_t>(segmentation.category[i]);
    segmentation.members[c].push_back(i);
    mass[c] += train.item_count(i);
    total += train.item_count(i);
  }
  for (std::size_t c = 0; c < kCategoryCount; ++c) {
    segmentation.mass_share[c] = total > 0 ? static_cast<double>(mass[c]) / static_cast<double>(total) : 0.0;
  }
  return segmentation;
}

UserGroups read_user_groups(const std::filesystem::path& path, const RatingDataset& train) {
  UserGroups result;
  result.propensity.assign(train.n_users(), 0.0);
  result.group_of.assign(train.n_users(), 0);
  std::vector<bool> seen(train.n_users(), false);
  std::vector<std::pair<std::size_t, UserIndex>> order;  // keeps file order within groups
  read_csv(path, 3, [&](const std::vector<std::string_view>& fields, std::size_t line) {
    const auto user = train.users().find(fields[0]);
    if (!user) throw ParseError(path.string(), line, fmt::format("user '{}' is not in train", fields[0]));
    const auto group = parse_group_label(fields[1], 'G');
    const auto propensity = parse_double(fields[2]);
    if (!group || !propensity) throw ParseError(path.string(), line, "malformed group row");
    if (seen[*user]) throw ParseError(path.string(), line, fmt::format("user '{}' listed twice", fields[0]));
    seen[*user] = true;
    result.group_of[*user] = *group;
    result.propensity[*user] = *propensity;
    if (*group >= result.groups.size()) result.groups.resize(*group + 1);
    result.groups[*group].push_back(*user);
  });
  for (UserIndex u = 0; u < train.n_users(); ++u) {
    if (!seen[u]) {
      throw ParseError(path.string(), 0, fmt::format("train user '{}' has no group", train.users().id(u)));
    }
  }
  for (std::size_t g = 0; g < result.groups.size(); ++g) {
    if (result.groups[g].empty()) throw ParseError(path.string(), 0, fmt::format("group G{} is empty", g + 1));
  }
  return result;
}

SupplierGroups read_supplier_groups(const std::filesystem::path& path, const RatingDataset& train,
                                    const SupplierMap& suppliers) {
  SupplierGroups result;
  result.suppliers = suppliers.suppliers_in(train);
  const auto owner = suppliers.resolve(train, result.suppliers);
  result.mass.assign(result.suppliers.size(), 0);
  for (ItemIndex i = 0; i < train.n_items(); ++i) result.mass[owner[i]] += train.item_count(i);
  result.group_of.assign(result.suppliers.size(), 0);
  std::vector<bool> seen(result.suppliers.size(), false);
  read_csv(path, 3, [&](const std::vector<std::string_view>& fields, std::size_t line) {
    const auto supplier = result.suppliers.find(fields[0]);
    if (!supplier) return;  // owns nothing in train
    const auto group = parse_group_label(fields[1], 'S');
    if (!group || *group >= 3) throw ParseError(path.string(), line, fmt::format("bad group '{}'", fields[1]));
    result.group_of[*supplier] = *group;
    seen[*supplier] = true;
  });
  std::array<std::size_t, 3> mass{};
  std::size_t total = 0;
  for (SupplierIndex s = 0; s < result.suppliers.size(); ++s) {
    if (!seen[s]) {
      throw ParseError(path.string(), 0,
                       fmt::format("supplier '{}' has no group", result.suppliers.id(s)));
    }
    result.groups[result.group_of[s]].push_back(s);
    mass[result.group_of[s]] += result.mass[s];
    total += result.mass[s];
  }
  for (std::size_t g = 0; g < 3; ++g) {
    result.mass_share[g] = total > 0 ? static_cast<double>(mass[g]) / static_cast<double>(total) : 0.0;
  }
  return result;
}

}  // namespace exposure
