#include "exposure/recsys.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include <fmt/core.h>

namespace exposure {

Algorithm parse_algorithm(std::string_view name) {
  if (name == "biased_mf") return Algorithm::BiasedMf;
  if (name == "user_knn") return Algorithm::UserKnn;
  if (name == "item_knn") return Algorithm::ItemKnn;
  if (name == "most_popular") return Algorithm::MostPopular;
  throw ConfigError(fmt::format("unknown algorithm '{}'", name));
}

std::string_view algorithm_name(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::BiasedMf: return "biased_mf";
    case Algorithm::UserKnn: return "user_knn";
    case Algorithm::ItemKnn: return "item_knn";
    case Algorithm::MostPopular: return "most_popular";
  }
  return "unknown";
}

Similarity parse_similarity(std::string_view name) {
  if (name == "cosine") return Similarity::Cosine;
  if (name == "pearson") return Similarity::Pearson;
  throw ConfigError(fmt::format("unknown similarity '{}'", name));
}

std::string_view similarity_name(Similarity similarity) {
  return similarity == Similarity::Cosine ? "cosine" : "pearson";
}

KnnRanking parse_knn_ranking(std::string_view name) {
  if (name == "similarity_sum") return KnnRanking::SimilaritySum;
  if (name == "prediction") return KnnRanking::Prediction;
  throw ConfigError(fmt::format("unknown knn ranking '{}'", name));
}

std::string_view knn_ranking_name(KnnRanking ranking) {
  return ranking == KnnRanking::SimilaritySum ? "similarity_sum" : "prediction";
}

void ModelConfig::validate() const {
  if (list_size < 1) throw ConfigError("list_size must be at least 1");
  if (factors < 1) throw ConfigError("factors must be at least 1");
  if (neighbors < 1) throw ConfigError("neighbors must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (regularization < 0.0) throw ConfigError("regularization must be non-negative");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (init_stddev < 0.0) throw ConfigError("init_stddev must be non-negative");
  if (shrinkage < 0.0) throw ConfigError("shrinkage must be non-negative");
  if (min_support < 1) throw ConfigError("min_support must be at least 1");
}

// --- Biased MF --------------------------------------------------------------

double BiasedMfState::predict(UserIndex u, ItemIndex i) const {
  const auto p = user_vector(u);
  const auto q = item_vector(i);
  return global_mean + user_bias[u] + item_bias[i] + std::inner_product(p.begin(), p.end(), q.begin(), 0.0);
}

namespace {

// Writes the gradient of one rating's term; returns the residual.
double sample_gradient_into(const BiasedMfState& state, UserIndex u, ItemIndex i, double rating,
                            double regularization, double& d_user_bias, double& d_item_bias,
                            std::span<double> d_user, std::span<double> d_item) {
  const double error = rating - state.predict(u, i);
  const auto p = state.user_vector(u);
  const auto q = state.item_vector(i);
  d_user_bias = -error + regularization * state.user_bias[u];
  d_item_bias = -error + regularization * state.item_bias[i];
  for (int f = 0; f < state.factors; ++f) {
    d_user[f] = -error * q[f] + regularization * p[f];
    d_item[f] = -error * p[f] + regularization * q[f];
  }
  return error;
}

}  // namespace

double biased_mf_objective(const BiasedMfState& state, const RatingDataset& train, double regularization) {
  double total = 0.0;
  for (UserIndex u = 0; u < train.n_users(); ++u) {
    const auto p = state.user_vector(u);
    const double user_norm = std::inner_product(p.begin(), p.end(), p.begin(), 0.0);
    for (const auto& entry : train.profile(u)) {
      const auto q = state.item_vector(entry.index);
      const double error = entry.value - state.predict(u, entry.index);
      const double penalty = state.user_bias[u] * state.user_bias[u] +
                             state.item_bias[entry.index] * state.item_bias[entry.index] + user_norm +
                             std::inner_product(q.begin(), q.end(), q.begin(), 0.0);
      total += 0.5 * (error * error + regularization * penalty);
    }
  }
  return total;
}

MfSampleGradient biased_mf_sample_gradient(const BiasedMfState& state, UserIndex u, ItemIndex i, double rating,
                                           double regularization) {
  MfSampleGradient gradient;
  gradient.user_factors.resize(state.factors);
  gradient.item_factors.resize(state.factors);
  sample_gradient_into(state, u, i, rating, regularization, gradient.user_bias, gradient.item_bias,
                       gradient.user_factors, gradient.item_factors);
  return gradient;
}

BiasedMfState biased_mf_gradient(const BiasedMfState& state, const RatingDataset& train, double regularization) {
  BiasedMfState gradient;
  gradient.factors = state.factors;
  gradient.user_bias.assign(state.user_bias.size(), 0.0);
  gradient.item_bias.assign(state.item_bias.size(), 0.0);
  gradient.user_factors.assign(state.user_factors.size(), 0.0);
  gradient.item_factors.assign(state.item_factors.size(), 0.0);
  std::vector<double> d_user(state.factors);
  std::vector<double> d_item(state.factors);
  for (UserIndex u = 0; u < train.n_users(); ++u) {
    for (const auto& entry : train.profile(u)) {
      double d_user_bias = 0.0;
      double d_item_bias = 0.0;
      sample_gradient_into(state, u, entry.index, entry.value, regularization, d_user_bias, d_item_bias, d_user,
                           d_item);
      gradient.user_bias[u] += d_user_bias;
      gradient.item_bias[entry.index] += d_item_bias;
      for (int f = 0; f < state.factors; ++f) {
        gradient.user_factors[static_cast<std::size_t>(u) * state.factors + f] += d_user[f];
        gradient.item_factors[static_cast<std::size_t>(entry.index) * state.factors + f] += d_item[f];
      }
    }
  }
  return gradient;
}

TrainedModel fit_biased_mf(const RatingDataset& train, const ModelConfig& config) {
  config.validate();
  if (train.empty()) throw EmptyDatasetError("cannot train on an empty dataset");
  BiasedMfState state;
  state.factors = config.factors;
  state.global_mean = train.global_mean();
  state.user_bias.assign(train.n_users(), 0.0);
  state.item_bias.assign(train.n_items(), 0.0);
  state.user_factors.resize(train.n_users() * static_cast<std::size_t>(config.factors));
  state.item_factors.resize(train.n_items() * static_cast<std::size_t>(config.factors));

  std::mt19937_64 engine(config.seed);
  std::normal_distribution<double> init(0.0, config.init_stddev);
  for (auto& value : state.user_factors) value = init(engine);
  for (auto& value : state.item_factors) value = init(engine);

  struct Sample {
    UserIndex user;
    ItemIndex item;
    double value;
  };
  std::vector<Sample> samples;
  samples.reserve(train.n_ratings());
  for (UserIndex u = 0; u < train.n_users(); ++u) {
    for (const auto& entry : train.profile(u)) samples.push_back({u, entry.index, entry.value});
  }

  const auto diverged = [&](int epoch) {
    return TrainingDivergedError(fmt::format(
        "biased_mf diverged in epoch {} (learning_rate={}, regularization={}, factors={}); lower the learning rate",
        epoch, config.learning_rate, config.regularization, config.factors));
  };

  const double lr = config.learning_rate;
  std::vector<double> d_user(config.factors);
  std::vector<double> d_item(config.factors);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t k = samples.size(); k > 1; --k) {
      std::swap(samples[k - 1], samples[uniform_index(engine, k)]);
    }
    for (const auto& sample : samples) {
      double d_user_bias = 0.0;
      double d_item_bias = 0.0;
      const double error = sample_gradient_into(state, sample.user, sample.item, sample.value,
                                                config.regularization, d_user_bias, d_item_bias, d_user, d_item);
      if (!std::isfinite(error)) throw diverged(epoch);
      state.user_bias[sample.user] -= lr * d_user_bias;
      state.item_bias[sample.item] -= lr * d_item_bias;
      double* p = state.user_factors.data() + static_cast<std::size_t>(sample.user) * config.factors;
      double* q = state.item_factors.data() + static_cast<std::size_t>(sample.item) * config.factors;
      for (int f = 0; f < config.factors; ++f) {
        p[f] -= lr * d_user[f];
        q[f] -= lr * d_item[f];
      }
    }
    const double loss = biased_mf_objective(state, train, config.regularization);
    if (!std::isfinite(loss)) throw diverged(epoch);
    state.epoch_loss.push_back(loss);
  }
  return TrainedModel(config, train, std::move(state));
}

// --- most popular / kNN -----------------------------------------------------------

TrainedModel fit_most_popular(const RatingDataset& train, const ModelConfig& config) {
  config.validate();
  if (train.empty()) throw EmptyDatasetError("cannot train on an empty dataset");
  PopularityState state;
  state.ranking.resize(train.n_items());
  std::iota(state.ranking.begin(), state.ranking.end(), 0u);
  std::stable_sort(state.ranking.begin(), state.ranking.end(),
                   [&](ItemIndex a, ItemIndex b) { return train.item_count(a) > train.item_count(b); });
  return TrainedModel(config, train, std::move(state));
}

namespace {

KnnState build_neighbors(const RatingDataset& train, Orientation orientation, const ModelConfig& config) {
  SimilarityEngine engine(train, orientation, config.similarity, config.shrinkage, config.min_support);
  KnnState state;
  state.neighbors.resize(engine.size());
  const auto k = static_cast<std::size_t>(config.neighbors);
  std::vector<Neighbor> candidates;
  for (std::uint32_t row = 0; row < engine.size(); ++row) {
    const auto similarities = engine.against_all(row);
    candidates.clear();
    for (std::uint32_t other = 0; other < similarities.size(); ++other) {
      if (similarities[other] > 0.0) candidates.push_back({other, similarities[other]});
    }
    const auto better = [](const Neighbor& a, const Neighbor& b) {
      if (a.similarity != b.similarity) return a.similarity > b.similarity;
      return a.index < b.index;
    };
    const auto keep = std::min(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      better);
    state.neighbors[row].assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  return state;
}

}  // namespace

TrainedModel fit_user_knn(const RatingDataset& train, const ModelConfig& config) {
  config.validate();
  if (train.empty()) throw EmptyDatasetError("cannot train on an empty dataset");
  return TrainedModel(config, train, build_neighbors(train, Orientation::Users, config));
}

TrainedModel fit_item_knn(const RatingDataset& train, const ModelConfig& config) {
  config.validate();
  if (train.empty()) throw EmptyDatasetError("cannot train on an empty dataset");
  return TrainedModel(config, train, build_neighbors(train, Orientation::Items, config));
}

TrainedModel fit(const RatingDataset& train, const ModelConfig& config) {
  switch (config.algorithm) {
    case Algorithm::BiasedMf: return fit_biased_mf(train, config);
    case Algorithm::UserKnn: return fit_user_knn(train, config);
    case Algorithm::ItemKnn: return fit_item_knn(train, config);
    case Algorithm::MostPopular: return fit_most_popular(train, config);
  }
  throw ConfigError("unknown algorithm");
}

// --- TrainedModel -----------------------------------------------------------------

TrainedModel::TrainedModel(ModelConfig config, RatingDataset train, State state)
    : config_(std::move(config)),
      train_(std::make_shared<const RatingDataset>(std::move(train))),
      state_(std::move(state)) {
  const bool matches = config_.algorithm == Algorithm::BiasedMf      ? std::holds_alternative<BiasedMfState>(state_)
                       : config_.algorithm == Algorithm::MostPopular ? std::holds_alternative<PopularityState>(state_)
                                                                     : std::holds_alternative<KnnState>(state_);
  if (!matches) throw ConfigError(fmt::format("state does not match algorithm {}", algorithm_name(config_.algorithm)));
  const auto& data = *train_;
  user_mean_.resize(data.n_users());
  item_mean_.resize(data.n_items());
  for (UserIndex u = 0; u < data.n_users(); ++u) {
    double sum = 0.0;
    for (const auto& entry : data.profile(u)) sum += entry.value;
    user_mean_[u] = sum / static_cast<double>(data.profile(u).size());
  }
  for (ItemIndex i = 0; i < data.n_items(); ++i) {
    double sum = 0.0;
    for (const auto& entry : data.raters(i)) sum += entry.value;
    item_mean_[i] = sum / static_cast<double>(data.raters(i).size());
  }
  if (config_.algorithm == Algorithm::ItemKnn) build_reverse_neighbors();
}

void TrainedModel::build_reverse_neighbors() {
  const auto& neighbors = knn().neighbors;
  reverse_neighbors_.assign(neighbors.size(), {});
  for (std::uint32_t item = 0; item < neighbors.size(); ++item) {
    for (const auto& neighbor : neighbors[item]) {
      reverse_neighbors_[neighbor.index].push_back({item, neighbor.similarity});
    }
  }
}

double TrainedModel::knn_user_predict(UserIndex user, ItemIndex item) const {
  const auto& data = *train_;
  double numerator = 0.0;
  double weight = 0.0;
  for (const auto& neighbor : knn().neighbors[user]) {
    const auto rating = data.rating(neighbor.index, item);
    if (!rating) continue;
    const double centred = config_.similarity == Similarity::Pearson ? *rating - user_mean_[neighbor.index] : *rating;
    numerator += neighbor.similarity * centred;
    weight += neighbor.similarity;
  }
  double prediction = user_mean_[user];
  if (weight > 0.0) {
    prediction = config_.similarity == Similarity::Pearson ? user_mean_[user] + numerator / weight
                                                           : numerator / weight;
  }
  return std::clamp(prediction, data.scale().min, data.scale().max);
}

double TrainedModel::knn_item_predict(UserIndex user, ItemIndex item) const {
  const auto& data = *train_;
  double numerator = 0.0;
  double weight = 0.0;
  for (const auto& neighbor : knn().neighbors[item]) {
    const auto rating = data.rating(user, neighbor.index);
    if (!rating) continue;
    const double centred = config_.similarity == Similarity::Pearson ? *rating - item_mean_[neighbor.index] : *rating;
    numerator += neighbor.similarity * centred;
    weight += neighbor.similarity;
  }
  double prediction = user_mean_[user];
  if (weight > 0.0) {
    prediction = config_.similarity == Similarity::Pearson ? item_mean_[item] + numerator / weight
                                                           : numerator / weight;
  }
  return std::clamp(prediction, data.scale().min, data.scale().max);
}

double TrainedModel::predict(UserIndex user, ItemIndex item) const {
  switch (config_.algorithm) {
    case Algorithm::BiasedMf: return mf().predict(user, item);
    case Algorithm::UserKnn: return knn_user_predict(user, item);
    case Algorithm::ItemKnn: return knn_item_predict(user, item);
    case Algorithm::MostPopular: return static_cast<double>(train_->item_count(item));
  }
  return 0.0;
}

double TrainedModel::predict(std::string_view user_id, std::string_view item_id) const {
  const auto& data = *train_;
  const auto user = data.users().find(user_id);
  const auto item = data.items().find(item_id);
  if (user && item) return predict(*user, *item);
  switch (config_.algorithm) {
    case Algorithm::BiasedMf: {
      const auto& state = mf();
      double score = state.global_mean;
      if (item) score += state.item_bias[*item];
      if (user) score += state.user_bias[*user];
      return score;
    }
    case Algorithm::UserKnn:
    case Algorithm::ItemKnn:
      if (item) return item_mean_[*item];
      if (user) return user_mean_[*user];
      return data.global_mean();
    case Algorithm::MostPopular:
      return item ? static_cast<double>(data.item_count(*item)) : 0.0;
  }
  return 0.0;
}

std::vector<double> TrainedModel::score_items(UserIndex user) const {
  const auto& data = *train_;
  const std::size_t n_items = data.n_items();
  std::vector<double> scores(n_items, 0.0);
  switch (config_.algorithm) {
    case Algorithm::BiasedMf: {
      for (ItemIndex i = 0; i < n_items; ++i) scores[i] = mf().predict(user, i);
      return scores;
    }
    case Algorithm::MostPopular: {
      for (ItemIndex i = 0; i < n_items; ++i) scores[i] = static_cast<double>(data.item_count(i));
      return scores;
    }
    case Algorithm::UserKnn:
    case Algorithm::ItemKnn:
      break;
  }

  const bool pearson = config_.similarity == Similarity::Pearson;
  std::vector<double> numerator(n_items, 0.0);
  std::vector<double> weight(n_items, 0.0);
  if (config_.algorithm == Algorithm::UserKnn) {
    for (const auto& neighbor : knn().neighbors[user]) {
      for (const auto& entry : data.profile(neighbor.index)) {
        const double centred = pearson ? entry.value - user_mean_[neighbor.index] : entry.value;
        numerator[entry.index] += neighbor.similarity * centred;
        weight[entry.index] += neighbor.similarity;
      }
    }
  } else {
    for (const auto& entry : data.profile(user)) {
      const double centred = pearson ? entry.value - item_mean_[entry.index] : entry.value;
      for (const auto& target : reverse_neighbors_[entry.index]) {
        numerator[target.index] += target.similarity * centred;
        weight[target.index] += target.similarity;
      }
    }
  }
  if (config_.knn_ranking == KnnRanking::SimilaritySum) return weight;

  for (ItemIndex i = 0; i < n_items; ++i) {
    double prediction = user_mean_[user];
    if (weight[i] > 0.0) {
      const double base = !pearson ? 0.0 : (config_.algorithm == Algorithm::UserKnn ? user_mean_[user] : item_mean_[i]);
      prediction = base + numerator[i] / weight[i];
    }
    scores[i] = std::clamp(prediction, data.scale().min, data.scale().max);
  }
  return scores;
}

// --- recommendation lists -------------------------------------------------------

const std::vector<ScoredItem>* RecommendationTable::find(UserIndex user) const {
  auto it = std::lower_bound(rows.begin(), rows.end(), user,
                             [](const UserRecommendations& row, UserIndex key) { return row.user < key; });
  if (it == rows.end() || it->user != user) return nullptr;
  return &it->items;
}

std::size_t RecommendationTable::total_slots() const {
  std::size_t total = 0;
  for (const auto& row : rows) total += row.items.size();
  return total;
}

RecommendationTable generate_recommendations(const TrainedModel& model, std::span<const UserIndex> users,
                                             std::size_t n) {
  if (n < 1) throw ConfigError("list size must be at least 1");
  const auto& train = model.train();
  RecommendationTable table;
  table.list_size = n;
  std::vector<UserIndex> ordered(users.begin(), users.end());
  std::sort(ordered.begin(), ordered.end());
  ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());

  std::vector<bool> rated(train.n_items(), false);
  std::vector<ItemIndex> candidates;
  for (auto user : ordered) {
    if (user >= train.n_users()) throw ConfigError(fmt::format("user index {} is outside the train set", user));
    const auto scores = model.score_items(user);
    const auto profile = train.profile(user);
    for (const auto& entry : profile) rated[entry.index] = true;
    candidates.clear();
    for (ItemIndex i = 0; i < train.n_items(); ++i) {
      if (!rated[i]) candidates.push_back(i);
    }
    for (const auto& entry : profile) rated[entry.index] = false;

    const auto keep = std::min(n, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      [&](ItemIndex a, ItemIndex b) {
                        if (scores[a] != scores[b]) return scores[a] > scores[b];
                        return a < b;
                      });
    UserRecommendations row{user, {}};
    row.items.reserve(keep);
    for (std::size_t k = 0; k < keep; ++k) row.items.push_back({candidates[k], scores[candidates[k]]});
    if (keep < n) table.short_lists.push_back(user);
    table.rows.push_back(std::move(row));
  }
  return table;
}

RecommendationTable generate_recommendations(const TrainedModel& model, std::size_t n) {
  std::vector<UserIndex> users(model.train().n_users());
  std::iota(users.begin(), users.end(), 0u);
  return generate_recommendations(model, users, n);
}

void write_recommendations(const std::filesystem::path& path, const RecommendationTable& table,
                           const RatingDataset& train) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << "user,item,rank,score\n";
  for (const auto& row : table.rows) {
    for (std::size_t r = 0; r < row.items.size(); ++r) {
      out << train.users().id(row.user) << ',' << train.items().id(row.items[r].item) << ',' << (r + 1) << ','
          << format_double(row.items[r].score) << '\n';
    }
  }
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

RecommendationTable read_recommendations(const std::filesystem::path& path, const RatingDataset& train) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  struct Slot {
    std::size_t rank;
    ItemIndex item;
    double score;
  };
  std::map<UserIndex, std::vector<Slot>> lists;
  std::string line;
  std::size_t line_number = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_number;
    const auto body = trim(line);
    if (body.empty()) continue;
    if (std::exchange(header, false)) continue;
    const auto fields = split_fields(body, ",");
    if (fields.size() != 4) throw ParseError(path.string(), line_number, "expected user,item,rank,score");
    const auto user = train.users().find(fields[0]);
    const auto item = train.items().find(fields[1]);
    const auto rank = parse_uint(fields[2]);
    const auto score = parse_double(fields[3]);
    if (!user) throw ParseError(path.string(), line_number, fmt::format("unknown user '{}'", fields[0]));
    if (!item) throw ParseError(path.string(), line_number, fmt::format("unknown item '{}'", fields[1]));
    if (!rank || *rank == 0 || !score) throw ParseError(path.string(), line_number, "bad rank or score");
    lists[*user].push_back({static_cast<std::size_t>(*rank), *item, *score});
  }
  RecommendationTable table;
  for (auto& [user, slots] : lists) {
    std::sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) { return a.rank < b.rank; });
    UserRecommendations row{user, {}};
    for (std::size_t k = 0; k < slots.size(); ++k) {
      if (slots[k].rank != k + 1) {
        throw ParseError(path.string(), 0,
                         fmt::format("ranks of user '{}' are not 1..{}", train.users().id(user), slots.size()));
      }
      row.items.push_back({slots[k].item, slots[k].score});
    }
    std::vector<ItemIndex> distinct;
    for (const auto& slot : row.items) distinct.push_back(slot.item);
    std::sort(distinct.begin(), distinct.end());
    if (std::adjacent_find(distinct.begin(), distinct.end()) != distinct.end()) {
      throw ParseError(path.string(), 0, fmt::format("user '{}' has a repeated item", train.users().id(user)));
    }
    table.list_size = std::max(table.list_size, row.items.size());
    table.rows.push_back(std::move(row));
  }
  for (const auto& row : table.rows) {
    if (row.items.size() < table.list_size) table.short_lists.push_back(row.user);
  }
  return table;
}

}  // namespace exposure
