#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "exposure/harness.hpp"

namespace exposure::testing {

using Row = std::tuple<const char*, const char*, double>;

inline RatingDataset make_dataset(std::initializer_list<Row> rows, RatingScale scale = {}) {
  std::vector<RatingRecord> records;
  for (const auto& [user, item, value] : rows) records.push_back({user, item, value});
  return RatingDataset::from_records(records, scale);
}

inline std::vector<UserIndex> all_users(const RatingDataset& data) {
  std::vector<UserIndex> users(data.n_users());
  for (std::size_t u = 0; u < users.size(); ++u) users[u] = static_cast<UserIndex>(u);
  return users;
}

inline ItemIndex item(const RatingDataset& data, std::string_view id) { return data.items().find(id).value(); }
inline UserIndex user(const RatingDataset& data, std::string_view id) { return data.users().find(id).value(); }

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(std::string_view tag = "t") {
    static std::atomic<int> counter{0};
    std::random_device device;
    path_ = std::filesystem::temp_directory_path() /
            ("exposure-" + std::string(tag) + "-" + std::to_string(device()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ignored;
    std::filesystem::remove_all(path_, ignored);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// A table built by hand: user id -> item ids in rank order.
inline RecommendationTable make_table(const RatingDataset& train,
                                      std::initializer_list<std::pair<const char*, std::vector<const char*>>> lists,
                                      std::size_t list_size) {
  RecommendationTable table;
  table.list_size = list_size;
  for (const auto& [user_id, items] : lists) {
    UserRecommendations row;
    row.user = user(train, user_id);
    double score = static_cast<double>(items.size());
    for (const char* item_id : items) row.items.push_back({item(train, item_id), score--});
    table.rows.push_back(std::move(row));
  }
  std::sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) { return a.user < b.user; });
  return table;
}

}  // namespace exposure::testing
