#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "exposure/harness.hpp"

namespace exposure {

namespace {

using nlohmann::json;

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

RatingDataset load_stage_ratings(const std::filesystem::path& path, RatingScale scale) {
  LoadOptions options;
  options.delimiter = ",";
  options.scale = scale;
  return load_ratings(path, options);
}

SupplierMap load_stage_suppliers(const std::filesystem::path& path) {
  LoadOptions options;
  options.delimiter = ",";
  return read_supplier_map(path, options);
}

std::filesystem::path provenance_path(const std::filesystem::path& recommendations) {
  auto path = recommendations;
  path += ".provenance.json";
  return path;
}

}  // namespace

// --- ingest -----------------------------------------------------------------

std::string ingest_stats_to_json(const IngestStats& stats) {
  json document{{"raw_users", stats.raw_users},
                {"raw_items", stats.raw_items},
                {"raw_ratings", stats.raw_ratings},
                {"users", stats.users},
                {"items", stats.items},
                {"ratings", stats.ratings},
                {"suppliers", stats.suppliers ? json(*stats.suppliers) : json(nullptr)},
                {"dropped_items", stats.dropped_items},
                {"dropped_ratings", stats.dropped_ratings},
                {"train_ratings", stats.train_ratings},
                {"test_ratings", stats.test_ratings},
                {"warnings", stats.warnings}};
  return document.dump(2) + "\n";
}

IngestStats run_ingest(const RatingDataset& dataset, const SupplierMap* suppliers, std::size_t min_ratings,
                       double test_fraction, std::uint64_t seed, const std::filesystem::path& out) {
  IngestStats stats;
  stats.raw_users = dataset.n_users();
  stats.raw_items = dataset.n_items();
  stats.raw_ratings = dataset.n_ratings();

  auto filtered = filter_min_profile(dataset, min_ratings);
  std::optional<SupplierMap> joined_suppliers;
  if (suppliers != nullptr) {
    auto join = join_suppliers(filtered, *suppliers);
    filtered = std::move(join.dataset);
    stats.dropped_items = join.dropped_items;
    stats.dropped_ratings = join.dropped_ratings;
    stats.suppliers = join.suppliers.n_suppliers();
    joined_suppliers = std::move(join.suppliers);
  }
  stats.users = filtered.n_users();
  stats.items = filtered.n_items();
  stats.ratings = filtered.n_ratings();

  auto split = split_train_test(filtered, test_fraction, seed);
  stats.train_ratings = split.train.n_ratings();
  stats.test_ratings = split.test.n_ratings();
  stats.warnings = split.warnings;

  ensure_directory(out);
  write_ratings_csv(out / "train.csv", split.train);
  write_ratings_csv(out / "test.csv", split.test);
  if (joined_suppliers) write_supplier_csv(out / "suppliers.csv", *joined_suppliers);
  write_text(out / "stats.json", ingest_stats_to_json(stats));
  return stats;
}

IngestStats run_ingest(const IngestOptions& options) {
  RatingDataset dataset;
  if (options.format == RatingFormat::ExplicitCsv) {
    dataset = load_ratings(options.ratings, options.load);
  } else {
    dataset = implicit_to_explicit(load_interactions(options.ratings, options.load), options.load.scale);
  }
  std::optional<SupplierMap> suppliers;
  if (options.suppliers) {
    LoadOptions supplier_options;
    supplier_options.delimiter = options.load.delimiter;
    suppliers = read_supplier_map(*options.suppliers, supplier_options);
  }
  return run_ingest(dataset, suppliers ? &*suppliers : nullptr, options.min_ratings, options.test_fraction,
                    options.seed, options.out);
}

// --- segment ----------------------------------------------------------------

std::vector<std::string> run_segment(const SegmentOptions& options) {
  const auto train = load_stage_ratings(options.train, options.scale);
  const auto popularity = compute_item_popularity(train);
  const auto segmentation = segment_items_pareto(popularity, options.head_share, options.tail_share);
  const auto groups = group_users_by_propensity(train, segmentation, options.n_groups, options.propensity);

  ensure_directory(options.out);
  write_item_categories(options.out / "item_categories.csv", train, segmentation);
  write_user_groups(options.out / "user_groups.csv", train, groups);
  write_longtail(options.out / "longtail.csv", popularity);
  std::vector<std::string> warnings;
  if (options.suppliers) {
    const auto suppliers = load_stage_suppliers(*options.suppliers);
    const auto supplier_groups =
        group_suppliers_pareto(train, suppliers, {options.head_share, 1.0 - options.head_share - options.tail_share,
                                                  options.tail_share});
    write_supplier_groups(options.out / "supplier_groups.csv", supplier_groups);
    warnings = supplier_groups.warnings;
  }
  return warnings;
}

// --- train / recommend --------------------------------------------------------

void run_train(const std::filesystem::path& train_path, const ModelConfig& config,
               const std::filesystem::path& model_out, RatingScale scale) {
  const auto train = load_stage_ratings(train_path, scale);
  const auto model = fit(train, config);
  if (model_out.has_parent_path()) ensure_directory(model_out.parent_path());
  model.save(model_out);
}

void run_recommend(const std::filesystem::path& model_path, std::size_t n, const std::filesystem::path& out) {
  const auto model = TrainedModel::load(model_path);
  const auto table = generate_recommendations(model, n);
  if (out.has_parent_path()) ensure_directory(out.parent_path());
  write_recommendations(out, table, model.train());
  json provenance{{"algorithm", algorithm_name(model.algorithm())},
                  {"config", json::parse(model_config_to_json(model.config()))},
                  {"list_size", n}};
  write_text(provenance_path(out), provenance.dump(2) + "\n");
}

// --- evaluate -----------------------------------------------------------------

MetricsReport run_evaluate(const EvaluateOptions& options) {
  const auto train = load_stage_ratings(options.train, options.scale);
  RatingDataset test;
  try {
    test = load_stage_ratings(options.test, options.scale);
  } catch (const EmptyDatasetError&) {
    // an empty test split makes precision undefined; reported below
  }
  const auto table = read_recommendations(options.recommendations, train);
  const auto segmentation = read_item_categories(options.item_categories, train);
  const auto user_groups = read_user_groups(options.user_groups, train);

  std::optional<SupplierMap> suppliers;
  std::optional<SupplierGroups> supplier_groups;
  if (options.suppliers && options.supplier_groups) {
    suppliers = load_stage_suppliers(*options.suppliers);
    supplier_groups = read_supplier_groups(*options.supplier_groups, train, *suppliers);
  }

  std::string algorithm = options.algorithm;
  std::string provenance;
  const auto sidecar = provenance_path(options.recommendations);
  if (std::filesystem::exists(sidecar)) {
    const auto document = json::parse(read_text(sidecar));
    provenance = document.dump();
    if (algorithm.empty()) algorithm = document.value("algorithm", std::string());
  }

  EvaluationInputs inputs{table,
                          train,
                          test,
                          segmentation,
                          user_groups,
                          suppliers ? &*suppliers : nullptr,
                          supplier_groups ? &*supplier_groups : nullptr,
                          options.list_size,
                          options.relevance_threshold};
  auto report = evaluate(inputs, algorithm, provenance);
  emit_report(report, options.out);
  return report;
}

// --- experiment config ------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (!ratings && !synthetic) throw ConfigError("experiment needs either a ratings path or a synthetic spec");
  if (algorithms.empty()) throw ConfigError("experiment needs at least one algorithm");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
  if (min_ratings < 1) throw ConfigError("min_ratings must be at least 1");
  if (n_groups < 1) throw ConfigError("n_groups must be at least 1");
  if (list_size < 1) throw ConfigError("n must be at least 1");
  if (ratings && !std::filesystem::exists(*ratings)) {
    throw ConfigError(fmt::format("ratings file '{}' does not exist", ratings->string()));
  }
  if (suppliers && !std::filesystem::exists(*suppliers)) {
    throw ConfigError(fmt::format("supplier file '{}' does not exist", suppliers->string()));
  }
  for (const auto& algorithm : algorithms) algorithm.validate();
  if (synthetic) synthetic->validate();
}

namespace {

SyntheticSpec synthetic_from(const json& object) {
  SyntheticSpec spec;
  for (const auto& [key, value] : object.items()) {
    if (key == "n_users") spec.n_users = value.get<std::size_t>();
    else if (key == "n_items") spec.n_items = value.get<std::size_t>();
    else if (key == "n_suppliers") spec.n_suppliers = value.get<std::size_t>();
    else if (key == "zipf_exponent") spec.zipf_exponent = value.get<double>();
    else if (key == "supplier_zipf_exponent") spec.supplier_zipf_exponent = value.get<double>();
    else if (key == "affinity_min") spec.affinity_min = value.get<double>();
    else if (key == "affinity_max") spec.affinity_max = value.get<double>();
    else if (key == "min_profile") spec.min_profile = value.get<std::size_t>();
    else if (key == "max_profile") spec.max_profile = value.get<std::size_t>();
    else if (key == "latent_dimensions") spec.latent_dimensions = value.get<int>();
    else if (key == "rating_noise") spec.rating_noise = value.get<double>();
    else if (key == "seed") spec.seed = value.get<std::uint64_t>();
    else throw ConfigError(fmt::format("unknown synthetic key '{}'", key));
  }
  return spec;
}

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path path(value);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json document;
  try {
    document = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("invalid experiment JSON: {}", e.what()));
  }
  if (!document.is_object()) throw ConfigError("experiment config must be a JSON object");
  ExperimentConfig config;
  std::vector<json> algorithm_entries;
  for (const auto& [raw_key, value] : document.items()) {
    // Keys mirror the CLI flags, so "min-ratings" and "min_ratings" are the same.
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '-', '_');
    try {
      if (key == "ratings") config.ratings = resolve_path(base_dir, value.get<std::string>());
      else if (key == "format") config.format = parse_rating_format(value.get<std::string>());
      else if (key == "suppliers") config.suppliers = resolve_path(base_dir, value.get<std::string>());
      else if (key == "delimiter") config.delimiter = value.get<std::string>();
      else if (key == "rating_min") config.scale.min = value.get<double>();
      else if (key == "rating_max") config.scale.max = value.get<double>();
      else if (key == "synthetic") config.synthetic = synthetic_from(value);
      else if (key == "min_ratings") config.min_ratings = value.get<std::size_t>();
      else if (key == "test_fraction") config.test_fraction = value.get<double>();
      else if (key == "seed") config.seed = value.get<std::uint64_t>();
      else if (key == "head_share" || key == "head") config.head_share = value.get<double>();
      else if (key == "tail_share" || key == "tail") config.tail_share = value.get<double>();
      else if (key == "n_groups" || key == "groups") config.n_groups = value.get<std::size_t>();
      else if (key == "propensity") config.propensity = parse_propensity_mode(value.get<std::string>());
      else if (key == "n" || key == "list_size") config.list_size = value.get<std::size_t>();
      else if (key == "relevance_threshold") config.relevance_threshold = value.get<double>();
      else if (key == "out") config.out = resolve_path(base_dir, value.get<std::string>());
      else if (key == "algorithms") algorithm_entries = value.get<std::vector<json>>();
      else throw ConfigError(fmt::format("unknown experiment key '{}'", key));
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("experiment key '{}': {}", key, e.what()));
    }
  }
  for (const auto& entry : algorithm_entries) {
    json object = entry.is_string() ? json{{"algorithm", entry.get<std::string>()}} : entry;
    if (!object.contains("list_size") && !object.contains("n")) object["list_size"] = config.list_size;
    if (!object.contains("seed")) object["seed"] = config.seed;
    config.algorithms.push_back(model_config_from_json(object.dump()));
  }
  config.validate();
  return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_text(path), path.parent_path());
}

// --- run ------------------------------------------------------------------------

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  const auto& out = config.out;
  ensure_directory(out);

  std::vector<std::string> stages;
  std::vector<std::string> files;
  const auto record = [&](const std::filesystem::path& relative) { files.push_back(relative.generic_string()); };
  const auto flush_manifest = [&] {
    std::vector<std::string> present;
    for (const auto& file : files) {
      if (std::filesystem::exists(out / file)) present.push_back(file);
    }
    write_manifest(out, stages, present);
  };

  std::string stage;
  try {
    // ingest
    stage = config.synthetic && !config.ratings ? "synth" : "ingest";
    const auto data_dir = out / "data";
    IngestStats stats;
    if (config.ratings) {
      IngestOptions options;
      options.ratings = *config.ratings;
      options.format = config.format;
      options.suppliers = config.suppliers;
      options.load.delimiter = config.delimiter;
      options.load.scale = config.scale;
      options.min_ratings = config.min_ratings;
      options.test_fraction = config.test_fraction;
      options.seed = config.seed;
      options.out = data_dir;
      stats = run_ingest(options);
    } else {
      const auto synthetic = generate_synthetic(*config.synthetic);
      stats = run_ingest(synthetic.ratings, &synthetic.suppliers, config.min_ratings, config.test_fraction,
                         config.seed, data_dir);
    }
    result.warnings.insert(result.warnings.end(), stats.warnings.begin(), stats.warnings.end());
    for (const char* name : {"train.csv", "test.csv", "suppliers.csv", "stats.json"}) {
      record(std::filesystem::path("data") / name);
    }
    stages.push_back(stage);
    const bool have_suppliers = std::filesystem::exists(data_dir / "suppliers.csv");

    // segment
    stage = "segment";
    SegmentOptions segment;
    segment.train = data_dir / "train.csv";
    if (have_suppliers) segment.suppliers = data_dir / "suppliers.csv";
    segment.scale = config.scale;
    segment.head_share = config.head_share;
    segment.tail_share = config.tail_share;
    segment.n_groups = config.n_groups;
    segment.propensity = config.propensity;
    segment.out = out / "segments";
    const auto segment_warnings = run_segment(segment);
    result.warnings.insert(result.warnings.end(), segment_warnings.begin(), segment_warnings.end());
    for (const char* name : {"item_categories.csv", "user_groups.csv", "supplier_groups.csv", "longtail.csv"}) {
      record(std::filesystem::path("segments") / name);
    }
    stages.push_back(stage);

    std::map<std::string, int> seen;
    for (const auto& model_config : config.algorithms) {
      std::string label(algorithm_name(model_config.algorithm));
      if (const int count = ++seen[label]; count > 1) label += fmt::format("_{}", count);
      const auto model_dir = out / label;

      stage = "train:" + label;
      run_train(data_dir / "train.csv", model_config, model_dir / "model.json", config.scale);
      record(std::filesystem::path(label) / "model.json");
      stages.push_back(stage);

      stage = "recommend:" + label;
      run_recommend(model_dir / "model.json", static_cast<std::size_t>(model_config.list_size),
                    model_dir / "recs.csv");
      record(std::filesystem::path(label) / "recs.csv");
      record(std::filesystem::path(label) / "recs.csv.provenance.json");
      stages.push_back(stage);

      stage = "evaluate:" + label;
      EvaluateOptions evaluate_options;
      evaluate_options.train = data_dir / "train.csv";
      evaluate_options.test = data_dir / "test.csv";
      evaluate_options.recommendations = model_dir / "recs.csv";
      evaluate_options.item_categories = out / "segments" / "item_categories.csv";
      evaluate_options.user_groups = out / "segments" / "user_groups.csv";
      if (have_suppliers) {
        evaluate_options.suppliers = data_dir / "suppliers.csv";
        evaluate_options.supplier_groups = out / "segments" / "supplier_groups.csv";
      }
      evaluate_options.list_size = static_cast<std::size_t>(model_config.list_size);
      evaluate_options.relevance_threshold = config.relevance_threshold;
      evaluate_options.scale = config.scale;
      evaluate_options.algorithm = label;
      evaluate_options.out = model_dir / "report";
      auto report = run_evaluate(evaluate_options);
      for (const char* name : {"report.json", "scatter.csv", "group_popularity.csv", "user_propensity.csv",
                               "supplier_rank.csv", "MANIFEST"}) {
        record(std::filesystem::path(label) / "report" / name);
      }
      stages.push_back(stage);
      result.reports.push_back(std::move(report));
    }

    stage = "summary";
    write_summary(result.reports, out / "summary.csv");
    record("summary.csv");
    stages.push_back(stage);
  } catch (const std::exception& e) {
    try {
      flush_manifest();
    } catch (...) {
    }
    throw StageError(stage, e.what());
  }
  flush_manifest();
  return result;
}

TuningResult tune_by_precision(const RatingDataset& train, const RatingDataset& validation,
                               std::span<const ModelConfig> candidates) {
  if (candidates.empty()) throw ConfigError("tuning needs at least one candidate");
  TuningResult result;
  double best = -1.0;
  for (const auto& candidate : candidates) {
    const auto model = fit(train, candidate);
    const auto table = generate_recommendations(model, static_cast<std::size_t>(candidate.list_size));
    const double precision =
        precision_at_n(table, train, validation, static_cast<std::size_t>(candidate.list_size)).precision;
    result.scores.emplace_back(candidate, precision);
    if (precision > best) {
      best = precision;
      result.best = candidate;
    }
  }
  return result;
}

}  // namespace exposure
