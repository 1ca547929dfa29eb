#include <fstream>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "exposure/recsys.hpp"

namespace exposure {

namespace {

using nlohmann::json;

constexpr std::string_view kModelFormat = "exposure-audit-model";
constexpr int kModelVersion = 1;

json config_json(const ModelConfig& config) {
  return json{{"algorithm", algorithm_name(config.algorithm)},
              {"factors", config.factors},
              {"learning_rate", config.learning_rate},
              {"regularization", config.regularization},
              {"epochs", config.epochs},
              {"init_stddev", config.init_stddev},
              {"neighbors", config.neighbors},
              {"similarity", similarity_name(config.similarity)},
              {"shrinkage", config.shrinkage},
              {"min_support", config.min_support},
              {"knn_ranking", knn_ranking_name(config.knn_ranking)},
              {"list_size", config.list_size},
              {"seed", config.seed}};
}

ModelConfig config_from(const json& object) {
  if (!object.is_object()) throw ConfigError("model config must be a JSON object");
  ModelConfig config;
  for (const auto& [key, value] : object.items()) {
    try {
      if (key == "algorithm") config.algorithm = parse_algorithm(value.get<std::string>());
      else if (key == "factors") config.factors = value.get<int>();
      else if (key == "learning_rate") config.learning_rate = value.get<double>();
      else if (key == "regularization") config.regularization = value.get<double>();
      else if (key == "epochs") config.epochs = value.get<int>();
      else if (key == "init_stddev") config.init_stddev = value.get<double>();
      else if (key == "neighbors" || key == "k") config.neighbors = value.get<int>();
      else if (key == "similarity") config.similarity = parse_similarity(value.get<std::string>());
      else if (key == "shrinkage") config.shrinkage = value.get<double>();
      else if (key == "min_support") config.min_support = value.get<int>();
      else if (key == "knn_ranking") config.knn_ranking = parse_knn_ranking(value.get<std::string>());
      else if (key == "list_size" || key == "n") config.list_size = value.get<int>();
      else if (key == "seed") config.seed = value.get<std::uint64_t>();
      else throw ConfigError(fmt::format("unknown model config key '{}'", key));
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("model config key '{}': {}", key, e.what()));
    }
  }
  config.validate();
  return config;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& config) { return config_json(config).dump(); }

ModelConfig model_config_from_json(std::string_view text) {
  json object;
  try {
    object = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("invalid model config JSON: {}", e.what()));
  }
  return config_from(object);
}

void TrainedModel::save(const std::filesystem::path& path) const {
  const auto& data = *train_;
  json document;
  document["format"] = kModelFormat;
  document["version"] = kModelVersion;
  document["config"] = config_json(config_);
  document["scale"] = {data.scale().min, data.scale().max};
  document["users"] = std::vector<std::string>(data.users().ids().begin(), data.users().ids().end());
  document["items"] = std::vector<std::string>(data.items().ids().begin(), data.items().ids().end());
  json ratings = json::array();
  for (UserIndex u = 0; u < data.n_users(); ++u) {
    for (const auto& entry : data.profile(u)) ratings.push_back({u, entry.index, entry.value});
  }
  document["ratings"] = std::move(ratings);

  json state;
  if (const auto* mf = std::get_if<BiasedMfState>(&state_)) {
    state = {{"kind", "biased_mf"},        {"factors", mf->factors},
             {"global_mean", mf->global_mean}, {"user_bias", mf->user_bias},
             {"item_bias", mf->item_bias},     {"user_factors", mf->user_factors},
             {"item_factors", mf->item_factors}, {"epoch_loss", mf->epoch_loss}};
  } else if (const auto* knn = std::get_if<KnnState>(&state_)) {
    json rows = json::array();
    for (const auto& row : knn->neighbors) {
      json list = json::array();
      for (const auto& neighbor : row) list.push_back({neighbor.index, neighbor.similarity});
      rows.push_back(std::move(list));
    }
    state = {{"kind", "knn"}, {"neighbors", std::move(rows)}};
  } else {
    state = {{"kind", "most_popular"}, {"ranking", std::get<PopularityState>(state_).ranking}};
  }
  document["state"] = std::move(state);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write model '{}'", path.string()));
  out << document.dump() << '\n';
  if (!out) throw IoError(fmt::format("failed writing model '{}'", path.string()));
}

TrainedModel TrainedModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open model '{}'", path.string()));
  json document;
  try {
    document = json::parse(in);
    if (document.at("format").get<std::string>() != kModelFormat) {
      throw ConfigError(fmt::format("'{}' is not a model file", path.string()));
    }
    const int version = document.at("version").get<int>();
    if (version != kModelVersion) {
      throw ConfigError(fmt::format("model version {} is not supported (expected {})", version, kModelVersion));
    }
    const ModelConfig config = config_from(document.at("config"));
    const RatingScale scale{document.at("scale").at(0).get<double>(), document.at("scale").at(1).get<double>()};
    const auto users = document.at("users").get<std::vector<std::string>>();
    const auto items = document.at("items").get<std::vector<std::string>>();
    std::vector<RatingRecord> records;
    for (const auto& triple : document.at("ratings")) {
      records.push_back({users.at(triple.at(0).get<std::size_t>()), items.at(triple.at(1).get<std::size_t>()),
                         triple.at(2).get<double>()});
    }
    auto train = RatingDataset::from_records(records, scale);
    if (train.n_users() != users.size() || train.n_items() != items.size()) {
      throw ConfigError("model dictionaries do not match its ratings");
    }

    const auto& state = document.at("state");
    const auto kind = state.at("kind").get<std::string>();
    if (kind == "biased_mf") {
      BiasedMfState mf;
      mf.factors = state.at("factors").get<int>();
      mf.global_mean = state.at("global_mean").get<double>();
      mf.user_bias = state.at("user_bias").get<std::vector<double>>();
      mf.item_bias = state.at("item_bias").get<std::vector<double>>();
      mf.user_factors = state.at("user_factors").get<std::vector<double>>();
      mf.item_factors = state.at("item_factors").get<std::vector<double>>();
      mf.epoch_loss = state.at("epoch_loss").get<std::vector<double>>();
      const auto f = static_cast<std::size_t>(mf.factors);
      if (mf.user_bias.size() != users.size() || mf.item_bias.size() != items.size() ||
          mf.user_factors.size() != users.size() * f || mf.item_factors.size() != items.size() * f) {
        throw ConfigError("biased_mf state has inconsistent dimensions");
      }
      return TrainedModel(config, std::move(train), std::move(mf));
    }
    if (kind == "knn") {
      KnnState knn;
      for (const auto& row : state.at("neighbors")) {
        std::vector<Neighbor> list;
        for (const auto& pair : row) list.push_back({pair.at(0).get<std::uint32_t>(), pair.at(1).get<double>()});
        knn.neighbors.push_back(std::move(list));
      }
      const auto expected = config.algorithm == Algorithm::UserKnn ? users.size() : items.size();
      if (knn.neighbors.size() != expected) throw ConfigError("knn state has inconsistent dimensions");
      return TrainedModel(config, std::move(train), std::move(knn));
    }
    if (kind == "most_popular") {
      PopularityState popularity;
      popularity.ranking = state.at("ranking").get<std::vector<ItemIndex>>();
      return TrainedModel(config, std::move(train), std::move(popularity));
    }
    throw ConfigError(fmt::format("unknown model state '{}'", kind));
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("malformed model '{}': {}", path.string(), e.what()));
  }
}

}  // namespace exposure
