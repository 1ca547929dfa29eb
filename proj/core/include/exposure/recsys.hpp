#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "exposure/common.hpp"
#include "exposure/ingest.hpp"

namespace exposure {

enum class Algorithm { BiasedMf, UserKnn, ItemKnn, MostPopular };
enum class Similarity { Cosine, Pearson };

// How kNN models order candidates when building top-N lists.
enum class KnnRanking {
  SimilaritySum,  // total similarity of the neighbours that support the item
  Prediction      // the clamped rating prediction
};

Algorithm parse_algorithm(std::string_view name);
std::string_view algorithm_name(Algorithm algorithm);
Similarity parse_similarity(std::string_view name);
std::string_view similarity_name(Similarity similarity);
KnnRanking parse_knn_ranking(std::string_view name);
std::string_view knn_ranking_name(KnnRanking ranking);

struct ModelConfig {
  Algorithm algorithm = Algorithm::MostPopular;
  // Biased-MF
  int factors = 50;
  double learning_rate = 0.005;
  double regularization = 0.02;
  int epochs = 30;
  double init_stddev = 0.1;
  // kNN
  int neighbors = 50;
  Similarity similarity = Similarity::Cosine;
  double shrinkage = 0.0;
  int min_support = 1;
  KnnRanking knn_ranking = KnnRanking::SimilaritySum;
  // lists
  int list_size = 10;
  std::uint64_t seed = 42;

  void validate() const;
};

// --- Biased matrix factorisation --------------------------------------------

// r(u,i) ~ mu + b_u + b_i + p_u . q_i
struct BiasedMfState {
  int factors = 0;
  double global_mean = 0.0;
  std::vector<double> user_bias;
  std::vector<double> item_bias;
  std::vector<double> user_factors;  // n_users x factors, row-major
  std::vector<double> item_factors;  // n_items x factors, row-major
  std::vector<double> epoch_loss;    // objective after each epoch

  std::span<const double> user_vector(UserIndex u) const {
    return std::span<const double>(user_factors).subspan(static_cast<std::size_t>(u) * factors, factors);
  }
  std::span<const double> item_vector(ItemIndex i) const {
    return std::span<const double>(item_factors).subspan(static_cast<std::size_t>(i) * factors, factors);
  }
  double predict(UserIndex u, ItemIndex i) const;
};

// Regularised objective minimised by SGD:
//   1/2 * sum over ratings of [ e^2 + reg * (b_u^2 + b_i^2 + |p_u|^2 + |q_i|^2) ]
// with e = r - prediction. The global mean is fixed, not learned.
double biased_mf_objective(const BiasedMfState& state, const RatingDataset& train, double regularization);

// Gradient of one rating's objective term. Layout matches the state:
// d_user_bias, d_item_bias, d_user_factors[factors], d_item_factors[factors].
struct MfSampleGradient {
  double user_bias = 0.0;
  double item_bias = 0.0;
  std::vector<double> user_factors;
  std::vector<double> item_factors;
};
MfSampleGradient biased_mf_sample_gradient(const BiasedMfState& state, UserIndex u, ItemIndex i, double rating,
                                           double regularization);

// Full-batch gradient, the sum of sample gradients, laid out like the state
// vectors (user_bias, item_bias, user_factors, item_factors).
BiasedMfState biased_mf_gradient(const BiasedMfState& state, const RatingDataset& train, double regularization);

// --- neighbourhood models ------------------------------------------------------

struct Neighbor {
  std::uint32_t index = 0;
  double similarity = 0.0;
};

struct KnnState {
  // Top-k positively similar users (user kNN) or items (item kNN), by
  // descending similarity then ascending index.
  std::vector<std::vector<Neighbor>> neighbors;
};

struct PopularityState {
  std::vector<ItemIndex> ranking;  // descending count, ascending id
};

enum class Orientation { Users, Items };

// Pairwise similarity over one side of the rating matrix: rows are user
// profiles (Orientation::Users) or item rater lists (Orientation::Items).
// Cosine uses full-row norms over the co-rated dot product. Pearson centres
// every row on its own mean and sums over co-rated entries only. Pairs with
// fewer than min_support co-rated entries (two for Pearson) score 0, and
// shrinkage scales a score by n / (n + shrinkage).
class SimilarityEngine {
 public:
  SimilarityEngine(const RatingDataset& data, Orientation orientation, Similarity similarity, double shrinkage = 0.0,
                   int min_support = 1);

  std::size_t size() const { return means_.size(); }
  std::span<const RatingEntry> row(std::uint32_t index) const;
  double mean(std::uint32_t index) const { return means_[index]; }

  // Direct merge over the two sorted rows.
  double pair(std::uint32_t a, std::uint32_t b) const;
  // Similarity of `index` against every row through the inverted index; self scores 0.
  std::vector<double> against_all(std::uint32_t index) const;

 private:
  double finish(double dot, double norm_a, double norm_b, std::size_t support) const;

  const RatingDataset& data_;
  Orientation orientation_;
  Similarity similarity_;
  double shrinkage_;
  int min_support_;
  std::vector<double> means_;
  std::vector<double> norms_;  // cosine only
};

class TrainedModel {
 public:
  using State = std::variant<BiasedMfState, KnnState, PopularityState>;

  TrainedModel(ModelConfig config, RatingDataset train, State state);

  Algorithm algorithm() const { return config_.algorithm; }
  const ModelConfig& config() const { return config_; }
  const RatingDataset& train() const { return *train_; }
  const State& state() const { return state_; }

  const BiasedMfState& mf() const { return std::get<BiasedMfState>(state_); }
  const KnnState& knn() const { return std::get<KnnState>(state_); }
  const PopularityState& popularity() const { return std::get<PopularityState>(state_); }

  double user_mean(UserIndex u) const { return user_mean_.at(u); }
  double item_mean(ItemIndex i) const { return item_mean_.at(i); }

  // Finite prediction for a known user and item.
  double predict(UserIndex user, ItemIndex item) const;
  // Handles ids outside the train set through the cold-start fallbacks.
  double predict(std::string_view user, std::string_view item) const;

  // Ranking score of every catalog item for the user (items already rated included).
  std::vector<double> score_items(UserIndex user) const;

  void save(const std::filesystem::path& path) const;
  static TrainedModel load(const std::filesystem::path& path);

 private:
  double knn_user_predict(UserIndex user, ItemIndex item) const;
  double knn_item_predict(UserIndex user, ItemIndex item) const;
  void build_reverse_neighbors();

  ModelConfig config_;
  std::shared_ptr<const RatingDataset> train_;
  State state_;
  std::vector<double> user_mean_;
  std::vector<double> item_mean_;
  // Item kNN: for item j, the items whose neighbour lists contain j.
  std::vector<std::vector<Neighbor>> reverse_neighbors_;
};

TrainedModel fit_most_popular(const RatingDataset& train, const ModelConfig& config);
TrainedModel fit_biased_mf(const RatingDataset& train, const ModelConfig& config);
TrainedModel fit_user_knn(const RatingDataset& train, const ModelConfig& config);
TrainedModel fit_item_knn(const RatingDataset& train, const ModelConfig& config);
TrainedModel fit(const RatingDataset& train, const ModelConfig& config);

// --- recommendation lists --------------------------------------------------------

struct ScoredItem {
  ItemIndex item = 0;
  double score = 0.0;
};

struct UserRecommendations {
  UserIndex user = 0;
  std::vector<ScoredItem> items;  // rank order
};

// Top-N lists keyed by train user index. Rows are ordered by user.
struct RecommendationTable {
  std::size_t list_size = 0;
  std::vector<UserRecommendations> rows;
  std::vector<UserIndex> short_lists;  // users whose candidate pool was smaller than list_size

  const std::vector<ScoredItem>* find(UserIndex user) const;
  std::size_t total_slots() const;
};

// Ranks unrated catalog items by score (ties: ascending item id) and keeps the top n.
RecommendationTable generate_recommendations(const TrainedModel& model, std::span<const UserIndex> users,
                                             std::size_t n);
RecommendationTable generate_recommendations(const TrainedModel& model, std::size_t n);

// user,item,rank,score with 1-based ranks.
void write_recommendations(const std::filesystem::path& path, const RecommendationTable& table,
                           const RatingDataset& train);
// Resolves ids against the train catalog; unknown users or items are errors.
RecommendationTable read_recommendations(const std::filesystem::path& path, const RatingDataset& train);

// Serialises the config to the flat JSON object used by config files.
std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(std::string_view json);

}  // namespace exposure
