// exposure-audit: trains classic recommenders on rating data and audits the
// popularity exposure they give users and suppliers.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "exposure/harness.hpp"

namespace {

using namespace exposure;

std::optional<std::filesystem::path> optional_path(const std::string& value) {
  if (value.empty()) return std::nullopt;
  return std::filesystem::path(value);
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& warning : warnings) std::cerr << "warning: " << warning << '\n';
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Popularity and exposure bias audit for collaborative-filtering recommenders"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run a full experiment from a JSON config");
  std::string config_path;
  std::string run_out;
  std::optional<std::uint64_t> run_seed;
  run->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "Override the output directory");
  run->add_option("--seed", run_seed, "Override the split and model seed");
  std::optional<std::string> run_ratings, run_suppliers;
  std::optional<std::size_t> run_min_ratings, run_groups, run_n;
  std::optional<double> run_test_fraction, run_head, run_tail;
  run->add_option("--ratings", run_ratings, "Override the ratings file");
  run->add_option("--suppliers", run_suppliers, "Override the supplier map");
  run->add_option("--min-ratings", run_min_ratings);
  run->add_option("--test-fraction", run_test_fraction);
  run->add_option("--head", run_head);
  run->add_option("--tail", run_tail);
  run->add_option("--groups", run_groups);
  run->add_option("--n", run_n, "Override the list size of every algorithm");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Load, filter and split ratings");
  IngestOptions ingest_options;
  std::string ingest_format = "explicit_csv";
  std::string ingest_suppliers;
  std::string ingest_out;
  ingest->add_option("--ratings", ingest_options.ratings, "Ratings file")->required()->check(CLI::ExistingFile);
  ingest->add_option("--format", ingest_format, "explicit_csv or implicit_csv")
      ->check(CLI::IsMember({"explicit_csv", "implicit_csv"}));
  ingest->add_option("--suppliers", ingest_suppliers, "item,supplier mapping file");
  ingest->add_option("--delimiter", ingest_options.load.delimiter, "Field delimiter (default: detect)");
  ingest->add_option("--rating-min", ingest_options.load.scale.min, "Lowest rating");
  ingest->add_option("--rating-max", ingest_options.load.scale.max, "Highest rating");
  ingest->add_option("--min-ratings", ingest_options.min_ratings, "Drop users with fewer ratings");
  ingest->add_option("--test-fraction", ingest_options.test_fraction, "Per-user test share");
  ingest->add_option("--seed", ingest_options.seed, "Split seed");
  ingest->add_option("--out", ingest_out, "Output directory")->required();

  // segment
  auto* segment = app.add_subcommand("segment", "Build H/M/T, user and supplier groups from train data");
  SegmentOptions segment_options;
  std::string segment_suppliers;
  std::string segment_out;
  std::string propensity = "head_fraction";
  segment->add_option("--train", segment_options.train, "train.csv")->required()->check(CLI::ExistingFile);
  segment->add_option("--suppliers", segment_suppliers, "suppliers.csv");
  segment->add_option("--head", segment_options.head_share, "Head rating-mass share");
  segment->add_option("--tail", segment_options.tail_share, "Tail rating-mass share");
  segment->add_option("--groups", segment_options.n_groups, "Number of user groups");
  segment->add_option("--propensity", propensity, "head_fraction or rating_weighted");
  segment->add_option("--out", segment_out, "Output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "Fit one recommender");
  std::string algo;
  std::string train_path;
  std::string model_config_path;
  std::string model_out;
  train->add_option("--algo", algo, "biased_mf, user_knn, item_knn or most_popular")->required();
  train->add_option("--train", train_path, "train.csv")->required()->check(CLI::ExistingFile);
  train->add_option("--config", model_config_path, "Model config JSON")->check(CLI::ExistingFile);
  train->add_option("--model-out", model_out, "Model file")->required();

  // recommend
  auto* recommend = app.add_subcommand("recommend", "Produce top-N lists from a fitted model");
  std::string model_path;
  std::size_t list_size = 10;
  std::string recs_out;
  recommend->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  recommend->add_option("--n", list_size, "List size");
  recommend->add_option("--out", recs_out, "Output CSV")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Compute UPD, SPD, precision, coverage and figure series");
  EvaluateOptions evaluate_options;
  std::string supplier_groups_path;
  std::string evaluate_suppliers;
  std::string evaluate_out;
  std::optional<double> threshold;
  evaluate->add_option("--train", evaluate_options.train)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--test", evaluate_options.test)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--recs", evaluate_options.recommendations)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--item-categories", evaluate_options.item_categories)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--user-groups", evaluate_options.user_groups)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--supplier-groups", supplier_groups_path);
  evaluate->add_option("--suppliers", evaluate_suppliers, "suppliers.csv (needed for SPD)");
  evaluate->add_option("--n", evaluate_options.list_size, "List size used for precision");
  evaluate->add_option("--relevance-threshold", threshold, "Minimum test rating counted as relevant");
  evaluate->add_option("--algorithm", evaluate_options.algorithm, "Label stored in the report");
  evaluate->add_option("--out", evaluate_out, "report.json path or output directory")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic long-tail dataset");
  SyntheticSpec spec;
  std::string synth_out;
  synth->add_option("--users", spec.n_users);
  synth->add_option("--items", spec.n_items);
  synth->add_option("--suppliers", spec.n_suppliers);
  synth->add_option("--exponent", spec.zipf_exponent, "Zipf exponent of item popularity");
  synth->add_option("--affinity-min", spec.affinity_min);
  synth->add_option("--affinity-max", spec.affinity_max);
  synth->add_option("--min-profile", spec.min_profile);
  synth->add_option("--max-profile", spec.max_profile);
  synth->add_option("--noise", spec.rating_noise);
  synth->add_option("--seed", spec.seed);
  synth->add_option("--out", synth_out, "Output directory (ratings.csv, suppliers.csv)")->required();

  CLI11_PARSE(app, argc, argv);

  std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (*run) {
      auto config = load_experiment_config(config_path);
      if (!run_out.empty()) config.out = run_out;
      if (run_seed) {
        config.seed = *run_seed;
        for (auto& model : config.algorithms) model.seed = *run_seed;
      }
      if (run_ratings) config.ratings = *run_ratings;
      if (run_suppliers) config.suppliers = *run_suppliers;
      if (run_min_ratings) config.min_ratings = *run_min_ratings;
      if (run_test_fraction) config.test_fraction = *run_test_fraction;
      if (run_head) config.head_share = *run_head;
      if (run_tail) config.tail_share = *run_tail;
      if (run_groups) config.n_groups = *run_groups;
      if (run_n) {
        config.list_size = *run_n;
        for (auto& model : config.algorithms) model.list_size = static_cast<int>(*run_n);
      }
      config.validate();
      const auto result = run_experiment(config);
      print_warnings(result.warnings);
      std::cout << "algorithm,upd,spd,precision,coverage\n";
      for (const auto& report : result.reports) {
        std::cout << report.algorithm << ',' << format_double(report.upd) << ','
                  << (report.spd ? format_double(report.spd->spd) : "") << ','
                  << format_double(report.precision.precision) << ',' << format_double(report.coverage) << '\n';
      }
    } else if (*ingest) {
      ingest_options.format = parse_rating_format(ingest_format);
      ingest_options.suppliers = optional_path(ingest_suppliers);
      ingest_options.out = ingest_out;
      const auto stats = run_ingest(ingest_options);
      print_warnings(stats.warnings);
      std::cout << ingest_stats_to_json(stats);
    } else if (*segment) {
      segment_options.suppliers = optional_path(segment_suppliers);
      segment_options.propensity = parse_propensity_mode(propensity);
      segment_options.out = segment_out;
      print_warnings(run_segment(segment_options));
    } else if (*train) {
      ModelConfig config;
      if (!model_config_path.empty()) config = model_config_from_json(read_file(model_config_path));
      config.algorithm = parse_algorithm(algo);
      run_train(train_path, config, model_out);
    } else if (*recommend) {
      run_recommend(model_path, list_size, recs_out);
    } else if (*evaluate) {
      evaluate_options.supplier_groups = optional_path(supplier_groups_path);
      evaluate_options.suppliers = optional_path(evaluate_suppliers);
      evaluate_options.relevance_threshold = threshold;
      std::filesystem::path out(evaluate_out);
      evaluate_options.out = out.extension() == ".json" ? out.parent_path() : out;
      if (evaluate_options.out.empty()) evaluate_options.out = ".";
      const auto report = run_evaluate(evaluate_options);
      std::cout << report_to_json(report);
    } else if (*synth) {
      const auto data = generate_synthetic(spec);
      const std::filesystem::path out(synth_out);
      std::filesystem::create_directories(out);
      write_ratings_csv(out / "ratings.csv", data.ratings);
      write_supplier_csv(out / "suppliers.csv", data.suppliers);
      std::cout << "wrote " << data.ratings.n_ratings() << " ratings by " << data.ratings.n_users() << " users on "
                << data.ratings.n_items() << " items\n";
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error [" << stage << "]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
