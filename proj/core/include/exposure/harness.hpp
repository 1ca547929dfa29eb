#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "exposure/biasmetrics.hpp"
#include "exposure/ingest.hpp"
#include "exposure/recsys.hpp"
#include "exposure/segment.hpp"

namespace exposure {

// --- synthetic long-tail data ---------------------------------------------------

struct SyntheticSpec {
  std::size_t n_users = 1000;
  std::size_t n_items = 1000;
  std::size_t n_suppliers = 100;
  double zipf_exponent = 0.8;           // item popularity ~ 1 / rank^exponent
  double supplier_zipf_exponent = 1.0;  // item ownership ~ 1 / supplier_rank^exponent
  // Each user draws an affinity uniformly from [affinity_min, affinity_max].
  // A profile item comes from the popularity-proportional component with
  // probability equal to the affinity, otherwise uniformly from the catalog.
  double affinity_min = 0.6;
  double affinity_max = 1.0;
  std::size_t min_profile = 20;
  std::size_t max_profile = 60;
  int latent_dimensions = 2;
  double rating_noise = 0.5;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SyntheticData {
  RatingDataset ratings;
  SupplierMap suppliers;
  std::vector<double> affinity;  // by user index
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// --- stages -------------------------------------------------------------------

struct IngestOptions {
  std::filesystem::path ratings;
  RatingFormat format = RatingFormat::ExplicitCsv;
  std::optional<std::filesystem::path> suppliers;
  LoadOptions load;
  std::size_t min_ratings = 20;
  double test_fraction = 0.2;
  std::uint64_t seed = 42;
  std::filesystem::path out;
};

struct IngestStats {
  std::size_t raw_users = 0;
  std::size_t raw_items = 0;
  std::size_t raw_ratings = 0;
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t ratings = 0;
  std::optional<std::size_t> suppliers;
  std::size_t dropped_items = 0;
  std::size_t dropped_ratings = 0;
  std::size_t train_ratings = 0;
  std::size_t test_ratings = 0;
  std::vector<std::string> warnings;
};

// Writes train.csv, test.csv, suppliers.csv (when a map is given) and stats.json.
IngestStats run_ingest(const IngestOptions& options);
// Same outputs from an in-memory dataset, used for synthetic data.
IngestStats run_ingest(const RatingDataset& dataset, const SupplierMap* suppliers, std::size_t min_ratings,
                       double test_fraction, std::uint64_t seed, const std::filesystem::path& out);

std::string ingest_stats_to_json(const IngestStats& stats);

struct SegmentOptions {
  std::filesystem::path train;
  std::optional<std::filesystem::path> suppliers;
  RatingScale scale;
  double head_share = 0.2;
  double tail_share = 0.2;
  std::size_t n_groups = 3;
  PropensityMode propensity = PropensityMode::HeadFraction;
  std::filesystem::path out;
};

// Writes item_categories.csv, user_groups.csv, longtail.csv and, with a
// supplier map, supplier_groups.csv. Returns the warnings raised.
std::vector<std::string> run_segment(const SegmentOptions& options);

void run_train(const std::filesystem::path& train, const ModelConfig& config, const std::filesystem::path& model_out,
               RatingScale scale = {});

// Writes the list file plus a provenance sidecar (<out>.provenance.json)
// holding the model config.
void run_recommend(const std::filesystem::path& model, std::size_t n, const std::filesystem::path& out);

struct EvaluateOptions {
  std::filesystem::path train;
  std::filesystem::path test;
  std::filesystem::path recommendations;
  std::filesystem::path item_categories;
  std::filesystem::path user_groups;
  std::optional<std::filesystem::path> supplier_groups;
  std::optional<std::filesystem::path> suppliers;
  std::size_t list_size = 10;
  std::optional<double> relevance_threshold;
  RatingScale scale;
  std::string algorithm;
  std::filesystem::path out;  // directory receiving report.json and the series
};

MetricsReport run_evaluate(const EvaluateOptions& options);

// --- reports ------------------------------------------------------------------

inline constexpr int kReportSchemaVersion = 1;

std::string report_to_json(const MetricsReport& report);

// report.json, scatter.csv, group_popularity.csv, user_propensity.csv and,
// when supplier data exists, supplier_rank.csv; then a MANIFEST with a
// SHA-256 digest per file. Returns the files written (relative names).
std::vector<std::string> emit_report(const MetricsReport& report, const std::filesystem::path& out_dir);

// algorithm,upd,spd,precision,coverage rows.
void write_summary(std::span<const MetricsReport> reports, const std::filesystem::path& path);

std::string sha256_file(const std::filesystem::path& path);

// Writes MANIFEST: one "stage <name>" line per completed stage, one
// "file <digest> <path>" line per file, "omitted <path> <reason>" lines.
void write_manifest(const std::filesystem::path& dir, std::span<const std::string> stages,
                    std::span<const std::string> files, std::span<const std::string> omissions = {});

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

// --- experiments ----------------------------------------------------------------

struct ExperimentConfig {
  std::optional<std::filesystem::path> ratings;
  RatingFormat format = RatingFormat::ExplicitCsv;
  std::optional<std::filesystem::path> suppliers;
  std::string delimiter;
  RatingScale scale;
  std::optional<SyntheticSpec> synthetic;  // used when no ratings path is given

  std::size_t min_ratings = 20;
  double test_fraction = 0.2;
  std::uint64_t seed = 42;

  double head_share = 0.2;
  double tail_share = 0.2;
  std::size_t n_groups = 3;
  PropensityMode propensity = PropensityMode::HeadFraction;

  std::vector<ModelConfig> algorithms;
  std::size_t list_size = 10;
  std::optional<double> relevance_threshold;

  std::filesystem::path out = "experiment-out";

  void validate() const;
};

ExperimentConfig parse_experiment_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ExperimentResult {
  std::vector<MetricsReport> reports;
  std::vector<std::string> warnings;
};

// ingest -> segment -> (train -> recommend -> evaluate) per algorithm ->
// summary.csv. Every stage reads the files written by the previous one.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Picks the candidate with the best precision on a validation split.
struct TuningResult {
  ModelConfig best;
  std::vector<std::pair<ModelConfig, double>> scores;
};
TuningResult tune_by_precision(const RatingDataset& train, const RatingDataset& validation,
                               std::span<const ModelConfig> candidates);

}  // namespace exposure
