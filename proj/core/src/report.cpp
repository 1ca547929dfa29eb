#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>

#include <fmt/core.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "exposure/harness.hpp"

namespace exposure {

namespace {

using nlohmann::json;

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

json group_labels(std::size_t n, char prefix) {
  json labels = json::array();
  for (std::size_t g = 0; g < n; ++g) labels.push_back(fmt::format("{}{}", prefix, g + 1));
  return labels;
}

}  // namespace

std::string report_to_json(const MetricsReport& report) {
  json document;
  document["schema_version"] = kReportSchemaVersion;
  document["algorithm"] = report.algorithm;
  document["provenance"] = report.provenance.empty() ? json(nullptr) : json::parse(report.provenance);
  document["list_size"] = report.list_size;
  document["n_users"] = report.n_users;
  document["n_items"] = report.n_items;
  document["short_lists"] = report.short_lists;
  document["upd"] = report.upd;
  document["upd_groups"] = group_labels(report.upd_group_means.size(), 'G');
  document["upd_group_means"] = report.upd_group_means;
  if (report.spd) {
    document["spd"] = report.spd->spd;
    document["supplier_fairness"] = report.spd->fairness;
    document["supplier_exposure"] = {{"groups", group_labels(report.exposure->q.size(), 'S')},
                                     {"q", report.exposure->q},
                                     {"p", report.exposure->p}};
  } else {
    document["spd"] = nullptr;
    document["supplier_fairness"] = nullptr;
    document["supplier_exposure"] = nullptr;
  }
  document["precision"] = report.precision.precision;
  document["precision_users"] = report.precision.evaluated_users;
  document["coverage"] = report.coverage;
  document["popularity_correlation"] = report.popularity_correlation;
  document["category_share"] = {{"categories", {"H", "M", "T"}},
                                {"recommendation", report.slot_share},
                                {"ratings", report.rating_share}};
  return document.dump(2) + "\n";
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}' for hashing", path.string()));
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> context(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!context || EVP_DigestInit_ex(context.get(), EVP_sha256(), nullptr) != 1) {
    throw IoError("cannot initialise SHA-256");
  }
  std::vector<char> buffer(1 << 16);
  while (in) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(context.get(), buffer.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_DigestFinal_ex(context.get(), digest, &length);
  std::string hex;
  for (unsigned int k = 0; k < length; ++k) hex += fmt::format("{:02x}", digest[k]);
  return hex;
}

void write_manifest(const std::filesystem::path& dir, std::span<const std::string> stages,
                    std::span<const std::string> files, std::span<const std::string> omissions) {
  auto out = open_output(dir / "MANIFEST");
  out << "# exposure-audit manifest v1\n";
  for (const auto& stage : stages) out << "stage " << stage << '\n';
  for (const auto& file : files) out << "file " << sha256_file(dir / file) << ' ' << file << '\n';
  for (const auto& omission : omissions) out << "omitted " << omission << '\n';
}

std::vector<std::string> emit_report(const MetricsReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", out_dir.string(), ec.message()));

  std::vector<std::string> files;
  std::vector<std::string> omissions;
  {
    auto out = open_output(out_dir / "report.json");
    out << report_to_json(report);
    files.emplace_back("report.json");
  }
  {
    auto out = open_output(out_dir / "scatter.csv");
    out << "item,pop_data,pop_rec\n";
    for (const auto& [item, point] : report.scatter) {
      out << item << ',' << format_double(point.pop_data) << ',' << format_double(point.pop_rec) << '\n';
    }
    files.emplace_back("scatter.csv");
  }
  {
    auto out = open_output(out_dir / "group_popularity.csv");
    out << "group,category,side,proportion\n";
    for (const auto& row : report.group_popularity) {
      out << 'G' << (row.group + 1) << ',' << category_label(row.category) << ",profile,"
          << format_double(row.profile_share) << '\n';
      out << 'G' << (row.group + 1) << ',' << category_label(row.category) << ",recommendation,"
          << format_double(row.recommendation_share) << '\n';
    }
    files.emplace_back("group_popularity.csv");
  }
  {
    auto out = open_output(out_dir / "user_propensity.csv");
    out << "user,group,profile_H,profile_M,profile_T,rec_H,rec_M,rec_T,jsd\n";
    for (const auto& row : report.user_calibration) {
      out << row.user << ",G" << (row.group + 1);
      for (double value : row.profile) out << ',' << format_double(value);
      for (double value : row.recommended) out << ',' << format_double(value);
      out << ',' << format_double(row.jsd) << '\n';
    }
    files.emplace_back("user_propensity.csv");
  }
  if (report.spd) {
    auto out = open_output(out_dir / "supplier_rank.csv");
    out << "supplier,rank,data_share,rec_share\n";
    for (const auto& row : report.supplier_rank) {
      out << row.supplier << ',' << row.rank << ',' << format_double(row.data_share) << ','
          << format_double(row.recommendation_share) << '\n';
    }
    files.emplace_back("supplier_rank.csv");
  } else {
    std::error_code ignored;
    std::filesystem::remove(out_dir / "supplier_rank.csv", ignored);
    omissions.emplace_back("supplier_rank.csv no supplier map supplied");
  }
  const std::vector<std::string> stages{"evaluate"};
  write_manifest(out_dir, stages, files, omissions);
  files.emplace_back("MANIFEST");
  return files;
}

void write_summary(std::span<const MetricsReport> reports, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "algorithm,upd,spd,precision,coverage\n";
  for (const auto& report : reports) {
    out << report.algorithm << ',' << format_double(report.upd) << ','
        << (report.spd ? format_double(report.spd->spd) : std::string("")) << ','
        << format_double(report.precision.precision) << ',' << format_double(report.coverage) << '\n';
  }
}

namespace {

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t start = 0;
  while (start < order.size()) {
    std::size_t end = start;
    while (end + 1 < order.size() && values[order[end + 1]] == values[order[start]]) ++end;
    const double rank = 0.5 * static_cast<double>(start + end) + 1.0;
    for (std::size_t k = start; k <= end; ++k) ranks[order[k]] = rank;
    start = end + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("spearman needs equally long series");
  if (x.size() < 2) return 0.0;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t k = 0; k < rx.size(); ++k) {
    sxy += (rx[k] - mean) * (ry[k] - mean);
    sxx += (rx[k] - mean) * (rx[k] - mean);
    syy += (ry[k] - mean) * (ry[k] - mean);
  }
  if (!(sxx > 0.0 && syy > 0.0)) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace exposure
