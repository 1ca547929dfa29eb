#include "exposure/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <unordered_map>

#include <fmt/core.h>

namespace exposure {

namespace {

struct RowReader {
  std::ifstream in;
  std::string path;
  std::string delimiter;
  std::size_t line_number = 0;
  bool first_data_line = true;

  RowReader(const std::filesystem::path& file, const std::string& requested_delimiter)
      : in(file), path(file.string()), delimiter(requested_delimiter) {
    if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  }

  // Returns false at end of file. Blank and '#' lines are skipped.
  bool next(std::string& line, std::vector<std::string_view>& fields) {
    while (std::getline(in, line)) {
      ++line_number;
      const auto body = trim(line);
      if (body.empty() || body.front() == '#') continue;
      if (delimiter.empty()) delimiter = detect_delimiter(body);
      fields = split_fields(body, delimiter);
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(path, line_number, what); }
};

}  // namespace

// --- RatingDataset ---------------------------------------------------------

RatingDataset RatingDataset::from_records(std::span<const RatingRecord> records, RatingScale scale) {
  if (!(scale.min < scale.max)) throw ConfigError("rating scale requires min < max");
  RatingDataset dataset;
  dataset.scale_ = scale;

  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  user_ids.reserve(records.size());
  item_ids.reserve(records.size());
  for (const auto& record : records) {
    if (!std::isfinite(record.value) || !scale.contains(record.value)) {
      throw ConfigError(fmt::format("rating {} for ({}, {}) is outside [{}, {}]", record.value, record.user,
                                    record.item, scale.min, scale.max));
    }
    user_ids.push_back(record.user);
    item_ids.push_back(record.item);
  }
  dataset.users_ = IdDictionary(std::move(user_ids));
  dataset.items_ = IdDictionary(std::move(item_ids));

  struct Triple {
    UserIndex user;
    ItemIndex item;
    std::size_t order;
    double value;
  };
  std::vector<Triple> triples;
  triples.reserve(records.size());
  for (std::size_t k = 0; k < records.size(); ++k) {
    triples.push_back({*dataset.users_.find(records[k].user), *dataset.items_.find(records[k].item), k,
                       records[k].value});
  }
  std::sort(triples.begin(), triples.end(), [](const Triple& a, const Triple& b) {
    if (a.user != b.user) return a.user < b.user;
    if (a.item != b.item) return a.item < b.item;
    return a.order < b.order;
  });
  // Keep the last occurrence of every (user, item).
  std::vector<Triple> unique;
  unique.reserve(triples.size());
  for (std::size_t k = 0; k < triples.size(); ++k) {
    const bool last = k + 1 == triples.size() || triples[k + 1].user != triples[k].user ||
                      triples[k + 1].item != triples[k].item;
    if (last) unique.push_back(triples[k]);
  }

  const std::size_t n_users = dataset.users_.size();
  const std::size_t n_items = dataset.items_.size();
  dataset.profile_offsets_.assign(n_users + 1, 0);
  dataset.rater_offsets_.assign(n_items + 1, 0);
  for (const auto& t : unique) {
    ++dataset.profile_offsets_[t.user + 1];
    ++dataset.rater_offsets_[t.item + 1];
  }
  for (std::size_t u = 0; u < n_users; ++u) dataset.profile_offsets_[u + 1] += dataset.profile_offsets_[u];
  for (std::size_t i = 0; i < n_items; ++i) dataset.rater_offsets_[i + 1] += dataset.rater_offsets_[i];

  dataset.profile_entries_.resize(unique.size());
  dataset.rater_entries_.resize(unique.size());
  std::vector<std::size_t> profile_cursor(dataset.profile_offsets_.begin(), dataset.profile_offsets_.end() - 1);
  std::vector<std::size_t> rater_cursor(dataset.rater_offsets_.begin(), dataset.rater_offsets_.end() - 1);
  // unique is sorted by (user, item), so both CSR layouts come out sorted.
  for (const auto& t : unique) {
    dataset.profile_entries_[profile_cursor[t.user]++] = {t.item, t.value};
    dataset.rater_entries_[rater_cursor[t.item]++] = {t.user, t.value};
  }
  return dataset;
}

std::span<const RatingEntry> RatingDataset::profile(UserIndex user) const {
  const auto begin = profile_offsets_.at(user);
  const auto end = profile_offsets_.at(user + 1);
  return std::span<const RatingEntry>(profile_entries_).subspan(begin, end - begin);
}

std::span<const RatingEntry> RatingDataset::raters(ItemIndex item) const {
  const auto begin = rater_offsets_.at(item);
  const auto end = rater_offsets_.at(item + 1);
  return std::span<const RatingEntry>(rater_entries_).subspan(begin, end - begin);
}

std::optional<double> RatingDataset::rating(UserIndex user, ItemIndex item) const {
  const auto row = profile(user);
  auto it = std::lower_bound(row.begin(), row.end(), item,
                             [](const RatingEntry& entry, ItemIndex key) { return entry.index < key; });
  if (it == row.end() || it->index != item) return std::nullopt;
  return it->value;
}

double RatingDataset::global_mean() const {
  if (profile_entries_.empty()) return scale_.midpoint();
  double sum = 0.0;
  for (const auto& entry : profile_entries_) sum += entry.value;
  return sum / static_cast<double>(profile_entries_.size());
}

std::vector<RatingRecord> RatingDataset::records() const {
  std::vector<RatingRecord> out;
  out.reserve(n_ratings());
  for (UserIndex u = 0; u < n_users(); ++u) {
    for (const auto& entry : profile(u)) out.push_back({users_.id(u), items_.id(entry.index), entry.value});
  }
  return out;
}

// --- loading ----------------------------------------------------------------

RatingFormat parse_rating_format(std::string_view name) {
  if (name == "explicit_csv") return RatingFormat::ExplicitCsv;
  if (name == "implicit_csv") return RatingFormat::ImplicitCsv;
  throw ConfigError(fmt::format("unknown rating format '{}' (expected explicit_csv or implicit_csv)", name));
}

std::string_view rating_format_name(RatingFormat format) {
  return format == RatingFormat::ExplicitCsv ? "explicit_csv" : "implicit_csv";
}

RatingDataset load_ratings(const std::filesystem::path& path, const LoadOptions& options) {
  RowReader reader(path, options.delimiter);
  std::vector<RatingRecord> records;
  std::string line;
  std::vector<std::string_view> fields;
  while (reader.next(line, fields)) {
    const bool first = std::exchange(reader.first_data_line, false);
    if (fields.size() < 3 || fields.size() > 4) {
      reader.fail(fmt::format("expected user, item, value[, timestamp] but found {} fields", fields.size()));
    }
    const auto value = parse_double(fields[2]);
    if (!value) {
      if (first) continue;  // header
      reader.fail(fmt::format("rating value '{}' is not a number", fields[2]));
    }
    if (fields[0].empty() || fields[1].empty()) reader.fail("empty user or item id");
    if (!options.scale.contains(*value)) {
      reader.fail(fmt::format("rating {} outside scale [{}, {}]", *value, options.scale.min, options.scale.max));
    }
    records.push_back({std::string(fields[0]), std::string(fields[1]), *value});
  }
  if (records.empty()) throw EmptyDatasetError(fmt::format("'{}' contains no ratings", path.string()));
  return RatingDataset::from_records(records, options.scale);
}

std::vector<Interaction> load_interactions(const std::filesystem::path& path, const LoadOptions& options) {
  RowReader reader(path, options.delimiter);
  std::map<std::pair<std::string, std::string>, std::uint64_t> counts;
  std::string line;
  std::vector<std::string_view> fields;
  bool any = false;
  while (reader.next(line, fields)) {
    const bool first = std::exchange(reader.first_data_line, false);
    if (fields.size() < 2 || fields.size() > 4) {
      reader.fail(fmt::format("expected user, item[, count[, timestamp]] but found {} fields", fields.size()));
    }
    std::uint64_t count = 1;
    if (fields.size() >= 3) {
      const auto parsed = parse_uint(fields[2]);
      if (!parsed) {
        if (first) continue;  // header
        reader.fail(fmt::format("interaction count '{}' is not a positive integer", fields[2]));
      }
      count = *parsed;
    }
    if (count == 0) reader.fail("interaction count must be at least 1");
    if (fields[0].empty() || fields[1].empty()) reader.fail("empty user or item id");
    counts[{std::string(fields[0]), std::string(fields[1])}] += count;
    any = true;
  }
  if (!any) throw EmptyDatasetError(fmt::format("'{}' contains no interactions", path.string()));
  std::vector<Interaction> out;
  out.reserve(counts.size());
  for (auto& [key, count] : counts) out.push_back({key.first, key.second, count});
  return out;
}

RatingDataset implicit_to_explicit(std::span<const Interaction> interactions, RatingScale scale) {
  if (interactions.empty()) throw EmptyDatasetError("no interactions to convert");
  std::unordered_map<std::string, std::pair<std::uint64_t, std::uint64_t>> range;
  for (const auto& interaction : interactions) {
    if (interaction.count == 0) throw ConfigError("interaction counts must be at least 1");
    auto [it, inserted] = range.try_emplace(interaction.user, interaction.count, interaction.count);
    if (!inserted) {
      it->second.first = std::min(it->second.first, interaction.count);
      it->second.second = std::max(it->second.second, interaction.count);
    }
  }
  std::vector<RatingRecord> records;
  records.reserve(interactions.size());
  const double span = scale.max - scale.min;
  for (const auto& interaction : interactions) {
    const auto [lo, hi] = range.at(interaction.user);
    double value = scale.midpoint();
    if (hi != lo) {
      value = scale.min + span * static_cast<double>(interaction.count - lo) / static_cast<double>(hi - lo);
    }
    records.push_back({interaction.user, interaction.item, value});
  }
  return RatingDataset::from_records(records, scale);
}

RatingDataset filter_min_profile(const RatingDataset& dataset, std::size_t min_ratings) {
  if (min_ratings < 1) throw ConfigError("min_ratings must be at least 1");
  std::vector<RatingRecord> kept;
  kept.reserve(dataset.n_ratings());
  for (UserIndex u = 0; u < dataset.n_users(); ++u) {
    const auto row = dataset.profile(u);
    if (row.size() < min_ratings) continue;
    for (const auto& entry : row) {
      kept.push_back({dataset.users().id(u), dataset.items().id(entry.index), entry.value});
    }
  }
  if (kept.empty()) {
    throw EmptyDatasetError(fmt::format("no user has at least {} ratings", min_ratings));
  }
  return RatingDataset::from_records(kept, dataset.scale());
}

SplitPair split_train_test(const RatingDataset& dataset, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
  if (dataset.empty()) throw EmptyDatasetError("cannot split an empty dataset");
  SplitPair split;
  split.seed = seed;
  std::mt19937_64 engine(seed);
  std::vector<RatingRecord> train;
  std::vector<RatingRecord> test;
  std::vector<std::size_t> order;
  for (UserIndex u = 0; u < dataset.n_users(); ++u) {
    const auto row = dataset.profile(u);
    const std::size_t size = row.size();
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(size)));
    if (size == 1) {
      n_test = 0;
      split.warnings.push_back(
          fmt::format("user '{}' has a single rating; kept in train", dataset.users().id(u)));
    }
    n_test = std::min(n_test, size - 1);

    order.resize(size);
    for (std::size_t k = 0; k < size; ++k) order[k] = k;
    // Partial Fisher-Yates: the first n_test positions become the test sample.
    for (std::size_t k = 0; k < n_test; ++k) {
      const auto pick = k + uniform_index(engine, size - k);
      std::swap(order[k], order[pick]);
    }
    std::vector<bool> is_test(size, false);
    for (std::size_t k = 0; k < n_test; ++k) is_test[order[k]] = true;
    for (std::size_t k = 0; k < size; ++k) {
      RatingRecord record{dataset.users().id(u), dataset.items().id(row[k].index), row[k].value};
      (is_test[k] ? test : train).push_back(std::move(record));
    }
  }
  split.train = RatingDataset::from_records(train, dataset.scale());
  if (!test.empty()) split.test = RatingDataset::from_records(test, dataset.scale());
  return split;
}

// --- suppliers --------------------------------------------------------------

SupplierMap::SupplierMap(std::map<std::string, std::string> item_to_supplier)
    : item_to_supplier_(item_to_supplier.begin(), item_to_supplier.end()) {}

std::optional<std::string_view> SupplierMap::supplier_of(std::string_view item) const {
  auto it = item_to_supplier_.find(item);
  if (it == item_to_supplier_.end()) return std::nullopt;
  return std::string_view(it->second);
}

std::size_t SupplierMap::n_suppliers() const {
  std::vector<std::string> ids;
  for (const auto& [item, supplier] : item_to_supplier_) ids.push_back(supplier);
  return IdDictionary(std::move(ids)).size();
}

IdDictionary SupplierMap::suppliers_in(const RatingDataset& dataset) const {
  std::vector<std::string> ids;
  ids.reserve(dataset.n_items());
  for (const auto& item : dataset.items().ids()) {
    if (auto supplier = supplier_of(item)) ids.emplace_back(*supplier);
  }
  return IdDictionary(std::move(ids));
}

std::vector<SupplierIndex> SupplierMap::resolve(const RatingDataset& dataset, const IdDictionary& suppliers) const {
  std::vector<SupplierIndex> out(dataset.n_items());
  for (ItemIndex i = 0; i < dataset.n_items(); ++i) {
    const auto& item = dataset.items().id(i);
    const auto supplier = supplier_of(item);
    if (!supplier) throw ConflictError(fmt::format("item '{}' has no supplier", item));
    const auto index = suppliers.find(*supplier);
    if (!index) throw ConflictError(fmt::format("supplier '{}' of item '{}' is unknown", *supplier, item));
    out[i] = *index;
  }
  return out;
}

SupplierMap read_supplier_map(const std::filesystem::path& path, const LoadOptions& options) {
  RowReader reader(path, options.delimiter);
  std::map<std::string, std::string> mapping;
  std::string line;
  std::vector<std::string_view> fields;
  while (reader.next(line, fields)) {
    const bool first = std::exchange(reader.first_data_line, false);
    if (fields.size() < 2) reader.fail("expected item, supplier");
    if (first && fields[0] == "item") continue;  // header
    if (fields[0].empty() || fields[1].empty()) reader.fail("empty item or supplier id");
    auto [it, inserted] = mapping.try_emplace(std::string(fields[0]), std::string(fields[1]));
    if (!inserted && it->second != fields[1]) {
      throw ConflictError(fmt::format("{}:{}: item '{}' mapped to both '{}' and '{}'", path.string(),
                                      reader.line_number, it->first, it->second, fields[1]));
    }
  }
  return SupplierMap(std::move(mapping));
}

SupplierJoin join_suppliers(const RatingDataset& dataset, const SupplierMap& suppliers) {
  SupplierJoin join;
  std::vector<RatingRecord> kept;
  kept.reserve(dataset.n_ratings());
  std::map<std::string, std::string> restricted;
  for (ItemIndex i = 0; i < dataset.n_items(); ++i) {
    const auto& item = dataset.items().id(i);
    const auto supplier = suppliers.supplier_of(item);
    if (!supplier) {
      ++join.dropped_items;
      join.dropped_ratings += dataset.item_count(i);
      continue;
    }
    restricted.emplace(item, std::string(*supplier));
  }
  for (UserIndex u = 0; u < dataset.n_users(); ++u) {
    for (const auto& entry : dataset.profile(u)) {
      const auto& item = dataset.items().id(entry.index);
      if (restricted.contains(item)) kept.push_back({dataset.users().id(u), item, entry.value});
    }
  }
  if (kept.empty()) throw EmptyDatasetError("no rated item has a supplier");
  join.dataset = RatingDataset::from_records(kept, dataset.scale());
  join.suppliers = SupplierMap(std::move(restricted));
  return join;
}

SupplierJoin load_supplier_map(const std::filesystem::path& path, const RatingDataset& dataset,
                               const LoadOptions& options) {
  return join_suppliers(dataset, read_supplier_map(path, options));
}

void write_ratings_csv(const std::filesystem::path& path, const RatingDataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << "user,item,value\n";
  for (UserIndex u = 0; u < dataset.n_users(); ++u) {
    for (const auto& entry : dataset.profile(u)) {
      out << dataset.users().id(u) << ',' << dataset.items().id(entry.index) << ','
          << format_double(entry.value) << '\n';
    }
  }
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

void write_supplier_csv(const std::filesystem::path& path, const SupplierMap& suppliers) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << "item,supplier\n";
  for (const auto& [item, supplier] : suppliers.entries()) out << item << ',' << supplier << '\n';
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

}  // namespace exposure
