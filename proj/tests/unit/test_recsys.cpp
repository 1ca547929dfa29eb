#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "fixtures.hpp"

using namespace exposure;
using namespace exposure::testing;

namespace {

ModelConfig config_for(Algorithm algorithm) {
  ModelConfig config;
  config.algorithm = algorithm;
  return config;
}

RatingDataset small_world() {
  return make_dataset({{"u1", "a", 5}, {"u1", "b", 3}, {"u1", "c", 4},
                       {"u2", "a", 4}, {"u2", "b", 2}, {"u2", "d", 5},
                       {"u3", "b", 1}, {"u3", "c", 5}, {"u3", "d", 2}, {"u3", "e", 4},
                       {"u4", "a", 2}, {"u4", "e", 3}});
}

double cosine_oracle(const RatingDataset& data, UserIndex a, UserIndex b) {
  std::map<ItemIndex, double> ra, rb;
  for (const auto& e : data.profile(a)) ra[e.index] = e.value;
  for (const auto& e : data.profile(b)) rb[e.index] = e.value;
  double dot = 0, na = 0, nb = 0;
  for (const auto& [i, v] : ra) {
    na += v * v;
    if (rb.count(i)) dot += v * rb[i];
  }
  for (const auto& [i, v] : rb) nb += v * v;
  return dot / std::sqrt(na * nb);
}

}  // namespace

TEST(Config, ValidatesInvariants) {
  ModelConfig config;
  EXPECT_NO_THROW(config.validate());
  config.list_size = 0;
  EXPECT_THROW(config.validate(), ConfigError);
  config = {};
  config.factors = 0;
  EXPECT_THROW(config.validate(), ConfigError);
  config = {};
  config.neighbors = 0;
  EXPECT_THROW(config.validate(), ConfigError);
  config = {};
  config.learning_rate = 0;
  EXPECT_THROW(config.validate(), ConfigError);
}

TEST(Config, JsonRoundTripAndAliases) {
  ModelConfig config;
  config.algorithm = Algorithm::ItemKnn;
  config.similarity = Similarity::Pearson;
  config.neighbors = 7;
  config.shrinkage = 12.5;
  config.seed = 99;
  const auto back = model_config_from_json(model_config_to_json(config));
  EXPECT_EQ(back.algorithm, Algorithm::ItemKnn);
  EXPECT_EQ(back.similarity, Similarity::Pearson);
  EXPECT_EQ(back.neighbors, 7);
  EXPECT_EQ(back.shrinkage, 12.5);
  EXPECT_EQ(back.seed, 99u);
  const auto alias = model_config_from_json(R"({"algorithm":"user_knn","k":3,"n":5})");
  EXPECT_EQ(alias.neighbors, 3);
  EXPECT_EQ(alias.list_size, 5);
  EXPECT_THROW(model_config_from_json(R"({"algorithm":"user_knn","neighbours":3})"), ConfigError);
  EXPECT_THROW(model_config_from_json(R"({"algorithm":"svd"})"), ConfigError);
  EXPECT_THROW(model_config_from_json("not json"), ConfigError);
}

TEST(MostPopular, RanksByCountThenId) {
  const auto data = make_dataset({{"u1", "i1", 1}, {"u2", "i1", 1}, {"u3", "i1", 1}, {"u4", "i1", 1},
                                  {"u5", "i1", 1}, {"u1", "i2", 1}, {"u2", "i2", 1}, {"u3", "i2", 1},
                                  {"u1", "i3", 1}, {"u9", "i0", 2}, {"u8", "i4", 2}});
  const auto model = fit_most_popular(data, config_for(Algorithm::MostPopular));
  std::vector<std::string> order;
  for (auto i : model.popularity().ranking) order.push_back(data.items().id(i));
  EXPECT_EQ(order, (std::vector<std::string>{"i1", "i2", "i0", "i3", "i4"}));
  EXPECT_EQ(model.predict(user(data, "u9"), item(data, "i1")), 5.0);
}

TEST(MostPopular, RankingMatchesSortOracle) {
  const auto data = generate_synthetic(SyntheticSpec{.n_users = 200, .n_items = 150}).ratings;
  const auto model = fit_most_popular(data, config_for(Algorithm::MostPopular));
  std::vector<std::pair<std::size_t, std::string>> oracle;
  std::map<std::string, std::size_t> counts;
  for (const auto& r : data.records()) ++counts[r.item];
  for (const auto& [id, n] : counts) oracle.emplace_back(n, id);
  std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  ASSERT_EQ(oracle.size(), model.popularity().ranking.size());
  for (std::size_t k = 0; k < oracle.size(); ++k) {
    EXPECT_EQ(data.items().id(model.popularity().ranking[k]), oracle[k].second);
  }
}

TEST(MostPopular, ExcludesRatedItemsAndBackfills) {
  std::vector<RatingRecord> records;
  // item "p00" is rated by 40 users, "p01" by 39, and so on.
  for (int i = 0; i < 15; ++i) {
    for (int u = 0; u < 40 - i; ++u) {
      char item_id[8], user_id[8];
      std::snprintf(item_id, sizeof item_id, "p%02d", i);
      std::snprintf(user_id, sizeof user_id, "u%02d", u + 1);
      records.push_back({user_id, item_id, 3.0});
    }
  }
  records.push_back({"fan", "p00", 5.0});
  records.push_back({"niche", "zz", 5.0});
  const auto data = RatingDataset::from_records(records);
  const auto model = fit_most_popular(data, config_for(Algorithm::MostPopular));
  const auto table = generate_recommendations(model, 10);
  const auto* fan = table.find(user(data, "fan"));
  ASSERT_NE(fan, nullptr);
  for (int k = 0; k < 10; ++k) EXPECT_EQ(data.items().id((*fan)[k].item), "p" + std::string(k + 1 < 10 ? "0" : "") + std::to_string(k + 1));
  const auto* niche = table.find(user(data, "niche"));
  for (int k = 0; k < 10; ++k) EXPECT_EQ((*niche)[k].item, model.popularity().ranking[k]);
}

TEST(BiasedMf, PredictionFormula) {
  BiasedMfState state;
  state.factors = 2;
  state.global_mean = 3.5;
  state.user_bias = {0.2};
  state.item_bias = {-0.1};
  state.user_factors = {0.5, 1.0};
  state.item_factors = {0.2, 0.2};
  EXPECT_NEAR(state.predict(0, 0), 3.9, 1e-12);
}

TEST(BiasedMf, GradientMatchesFiniteDifferences) {
  std::vector<RatingRecord> records;
  std::mt19937_64 engine(4);
  for (int u = 0; u < 5; ++u) {
    for (int i = 0; i < 5; ++i) {
      if ((u * 5 + i) % 4 == 3) continue;
      records.push_back({"u" + std::to_string(u), "i" + std::to_string(i), 1.0 + static_cast<double>(uniform_index(engine, 5))});
    }
  }
  const auto data = RatingDataset::from_records(records);
  BiasedMfState state;
  state.factors = 3;
  state.global_mean = data.global_mean();
  const auto fill = [&](std::vector<double>& v, std::size_t n) {
    v.resize(n);
    for (auto& x : v) x = uniform_unit(engine) - 0.5;
  };
  fill(state.user_bias, 5);
  fill(state.item_bias, 5);
  fill(state.user_factors, 15);
  fill(state.item_factors, 15);
  const double reg = 0.05;
  const auto grad = biased_mf_gradient(state, data, reg);
  const double h = 1e-5;
  double worst = 0;
  const auto check = [&](std::vector<double> BiasedMfState::*member, const std::vector<double>& analytic) {
    for (std::size_t k = 0; k < analytic.size(); ++k) {
      auto plus = state;
      auto minus = state;
      (plus.*member)[k] += h;
      (minus.*member)[k] -= h;
      const double numeric =
          (biased_mf_objective(plus, data, reg) - biased_mf_objective(minus, data, reg)) / (2 * h);
      const double scale = std::max({std::abs(numeric), std::abs(analytic[k]), 1e-6});
      worst = std::max(worst, std::abs(numeric - analytic[k]) / scale);
    }
  };
  check(&BiasedMfState::user_bias, grad.user_bias);
  check(&BiasedMfState::item_bias, grad.item_bias);
  check(&BiasedMfState::user_factors, grad.user_factors);
  check(&BiasedMfState::item_factors, grad.item_factors);
  EXPECT_LT(worst, 1e-4);
}

TEST(BiasedMf, SampleGradientsSumToFullGradient) {
  const auto data = small_world();
  auto config = config_for(Algorithm::BiasedMf);
  config.factors = 2;
  config.epochs = 2;
  const auto model = fit_biased_mf(data, config);
  const auto& state = model.mf();
  const auto full = biased_mf_gradient(state, data, 0.1);
  std::vector<double> user_bias(data.n_users(), 0.0);
  for (UserIndex u = 0; u < data.n_users(); ++u) {
    for (const auto& e : data.profile(u)) user_bias[u] += biased_mf_sample_gradient(state, u, e.index, e.value, 0.1).user_bias;
  }
  for (UserIndex u = 0; u < data.n_users(); ++u) EXPECT_NEAR(full.user_bias[u], user_bias[u], 1e-12);
}

TEST(BiasedMf, RecoversRankOneRatings) {
  std::vector<RatingRecord> records;
  std::mt19937_64 engine(8);
  std::vector<double> p(40), q(40);
  for (auto& x : p) x = 0.5 + uniform_unit(engine);
  for (auto& x : q) x = 0.5 + uniform_unit(engine);
  for (int u = 0; u < 40; ++u) {
    for (int i = 0; i < 40; ++i) {
      if (uniform_unit(engine) < 0.3) continue;
      records.push_back({"u" + std::to_string(u), "i" + std::to_string(i), 2.0 + p[u] * q[i]});
    }
  }
  const auto data = RatingDataset::from_records(records);
  auto config = config_for(Algorithm::BiasedMf);
  config.factors = 2;
  config.learning_rate = 0.02;
  config.regularization = 1e-4;
  config.epochs = 400;
  const auto model = fit_biased_mf(data, config);
  double se = 0;
  for (UserIndex u = 0; u < data.n_users(); ++u) {
    for (const auto& e : data.profile(u)) se += std::pow(model.predict(u, e.index) - e.value, 2);
  }
  EXPECT_LT(std::sqrt(se / static_cast<double>(data.n_ratings())), 0.05);
}

TEST(BiasedMf, LossDecreasesAndIsDeterministic) {
  const auto data = generate_synthetic(SyntheticSpec{.n_users = 200, .n_items = 150}).ratings;
  auto config = config_for(Algorithm::BiasedMf);
  config.factors = 10;
  config.epochs = 20;
  const auto a = fit_biased_mf(data, config);
  const auto b = fit_biased_mf(data, config);
  const auto& loss = a.mf().epoch_loss;
  ASSERT_EQ(loss.size(), 20u);
  for (std::size_t e = 3; e + 1 < loss.size(); ++e) EXPECT_LE(loss[e + 1], loss[e] * 1.01);
  EXPECT_EQ(a.mf().user_factors, b.mf().user_factors);
  EXPECT_EQ(a.mf().epoch_loss, b.mf().epoch_loss);
}

TEST(BiasedMf, DivergenceNamesHyperparameters) {
  const auto data = small_world();
  auto config = config_for(Algorithm::BiasedMf);
  config.learning_rate = 50.0;
  config.epochs = 50;
  try {
    fit_biased_mf(data, config);
    FAIL() << "expected divergence";
  } catch (const TrainingDivergedError& e) {
    EXPECT_NE(std::string(e.what()).find("learning_rate"), std::string::npos);
  }
}

TEST(BiasedMf, ColdStartFallbacks) {
  const auto data = small_world();
  auto config = config_for(Algorithm::BiasedMf);
  config.factors = 3;
  const auto model = fit_biased_mf(data, config);
  const auto& s = model.mf();
  EXPECT_DOUBLE_EQ(model.predict("stranger", "a"), s.global_mean + s.item_bias[item(data, "a")]);
  EXPECT_DOUBLE_EQ(model.predict("u1", "new"), s.global_mean + s.user_bias[user(data, "u1")]);
  EXPECT_DOUBLE_EQ(model.predict("stranger", "new"), s.global_mean);
  EXPECT_DOUBLE_EQ(model.predict("u2", "c"), s.predict(user(data, "u2"), item(data, "c")));
}

TEST(Similarity, CosineBasics) {
  const auto data = make_dataset({{"a", "x", 4}, {"a", "y", 2}, {"b", "x", 4}, {"b", "y", 2},
                                  {"c", "z", 5}, {"d", "x", 1}, {"d", "z", 3}});
  SimilarityEngine engine(data, Orientation::Users, Similarity::Cosine);
  EXPECT_NEAR(engine.pair(0, 1), 1.0, 1e-12);
  EXPECT_EQ(engine.pair(0, 2), 0.0);
  for (UserIndex a = 0; a < 4; ++a) {
    const auto all = engine.against_all(a);
    for (UserIndex b = 0; b < 4; ++b) {
      if (a == b) continue;
      EXPECT_NEAR(all[b], engine.pair(a, b), 1e-12);
      EXPECT_NEAR(engine.pair(a, b), cosine_oracle(data, a, b), 1e-12);
    }
  }
}

TEST(Similarity, PearsonAndShrinkage) {
  const auto data = make_dataset({{"a", "x", 5}, {"a", "y", 1}, {"a", "z", 3},
                                  {"b", "x", 4}, {"b", "y", 2}, {"b", "z", 3},
                                  {"c", "x", 1}, {"c", "y", 5}});
  SimilarityEngine plain(data, Orientation::Users, Similarity::Pearson);
  EXPECT_NEAR(plain.pair(0, 1), 1.0, 1e-12);
  EXPECT_NEAR(plain.pair(0, 2), -1.0, 1e-12);
  SimilarityEngine shrunk(data, Orientation::Users, Similarity::Pearson, 3.0);
  EXPECT_NEAR(shrunk.pair(0, 1), 0.5, 1e-12);
  SimilarityEngine strict(data, Orientation::Users, Similarity::Pearson, 0.0, 3);
  EXPECT_EQ(strict.pair(0, 2), 0.0);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      EXPECT_LE(std::abs(plain.pair(a, b)), 1.0 + 1e-12);
    }
  }
}

TEST(UserKnn, HandFixturePredictions) {
  const auto data = small_world();
  auto config = config_for(Algorithm::UserKnn);
  config.neighbors = 2;
  const auto model = fit_user_knn(data, config);
  // Oracle: two most similar positive neighbours of each user, then the
  // similarity-weighted average over the neighbours who rated the item.
  for (UserIndex u = 0; u < data.n_users(); ++u) {
    std::vector<std::pair<double, UserIndex>> sims;
    for (UserIndex v = 0; v < data.n_users(); ++v) {
      if (v == u) continue;
      const double s = cosine_oracle(data, u, v);
      if (s > 0) sims.emplace_back(s, v);
    }
    std::sort(sims.begin(), sims.end(), [](const auto& x, const auto& y) {
      return x.first != y.first ? x.first > y.first : x.second < y.second;
    });
    if (sims.size() > 2) sims.resize(2);
    ASSERT_EQ(model.knn().neighbors[u].size(), sims.size());
    for (ItemIndex i = 0; i < data.n_items(); ++i) {
      double num = 0, den = 0;
      for (const auto& [s, v] : sims) {
        if (const auto r = data.rating(v, i)) {
          num += s * *r;
          den += s;
        }
      }
      double mean = 0;
      for (const auto& e : data.profile(u)) mean += e.value;
      mean /= static_cast<double>(data.profile(u).size());
      const double expected = den > 0 ? num / den : mean;
      EXPECT_NEAR(model.predict(u, i), expected, 1e-9) << u << "," << i;
    }
  }
}

TEST(ItemKnn, PredictionsAreClampedWeightedAverages) {
  const auto data = small_world();
  auto config = config_for(Algorithm::ItemKnn);
  config.neighbors = 2;
  config.similarity = Similarity::Pearson;
  const auto model = fit_item_knn(data, config);
  for (UserIndex u = 0; u < data.n_users(); ++u) {
    for (ItemIndex i = 0; i < data.n_items(); ++i) {
      const double p = model.predict(u, i);
      EXPECT_GE(p, 1.0);
      EXPECT_LE(p, 5.0);
    }
  }
  for (const auto& row : model.knn().neighbors) {
    EXPECT_LE(row.size(), 2u);
    for (const auto& n : row) {
      EXPECT_GT(n.similarity, 0.0);
      EXPECT_LE(n.similarity, 1.0 + 1e-12);
    }
  }
}

TEST(Knn, ColdStartFallbacks) {
  const auto data = small_world();
  const auto model = fit_user_knn(data, config_for(Algorithm::UserKnn));
  EXPECT_DOUBLE_EQ(model.predict("stranger", "a"), model.item_mean(item(data, "a")));
  EXPECT_DOUBLE_EQ(model.predict("u1", "new"), model.user_mean(user(data, "u1")));
  EXPECT_DOUBLE_EQ(model.predict("stranger", "new"), data.global_mean());
}

class EveryAlgorithm : public ::testing::TestWithParam<Algorithm> {};

TEST_P(EveryAlgorithm, ListsAreValid) {
  const auto data = generate_synthetic(SyntheticSpec{.n_users = 150, .n_items = 120}).ratings;
  auto config = config_for(GetParam());
  config.epochs = 5;
  config.factors = 8;
  const auto model = fit(data, config);
  const auto table = generate_recommendations(model, 10);
  ASSERT_EQ(table.rows.size(), data.n_users());
  for (const auto& row : table.rows) {
    std::set<ItemIndex> profile;
    for (const auto& e : data.profile(row.user)) profile.insert(e.index);
    std::set<ItemIndex> seen;
    ASSERT_EQ(row.items.size(), 10u);
    for (std::size_t k = 0; k < row.items.size(); ++k) {
      EXPECT_FALSE(profile.count(row.items[k].item));
      EXPECT_TRUE(seen.insert(row.items[k].item).second);
      EXPECT_TRUE(std::isfinite(row.items[k].score));
      if (k > 0) {
        EXPECT_GE(row.items[k - 1].score, row.items[k].score);
        if (row.items[k - 1].score == row.items[k].score) { EXPECT_LT(row.items[k - 1].item, row.items[k].item); }
      }
    }
  }
  const auto again = generate_recommendations(fit(data, config), 10);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(table.rows[r].items[k].item, again.rows[r].items[k].item);
  }
}

TEST_P(EveryAlgorithm, SaveLoadRoundTrip) {
  TempDir dir;
  const auto data = small_world();
  auto config = config_for(GetParam());
  config.factors = 3;
  config.epochs = 3;
  const auto model = fit(data, config);
  model.save(dir / "model.json");
  const auto back = TrainedModel::load(dir / "model.json");
  EXPECT_EQ(back.algorithm(), GetParam());
  for (UserIndex u = 0; u < data.n_users(); ++u) {
    for (ItemIndex i = 0; i < data.n_items(); ++i) EXPECT_EQ(model.predict(u, i), back.predict(u, i));
  }
}

INSTANTIATE_TEST_SUITE_P(Recsys, EveryAlgorithm,
                         ::testing::Values(Algorithm::BiasedMf, Algorithm::UserKnn, Algorithm::ItemKnn,
                                           Algorithm::MostPopular),
                         [](const auto& info) { return std::string(algorithm_name(info.param)); });

TEST(Lists, ShortListsAreFlagged) {
  const auto data = make_dataset({{"u1", "a", 5}, {"u1", "b", 3}, {"u2", "c", 4}});
  const auto model = fit_most_popular(data, config_for(Algorithm::MostPopular));
  const auto table = generate_recommendations(model, 2);
  EXPECT_EQ(table.find(user(data, "u1"))->size(), 1u);
  EXPECT_EQ(table.short_lists, std::vector<UserIndex>{user(data, "u1")});
  EXPECT_EQ(table.total_slots(), 3u);
}

TEST(Lists, FileRoundTripAndValidation) {
  TempDir dir;
  const auto data = small_world();
  const auto model = fit_item_knn(data, config_for(Algorithm::ItemKnn));
  const auto table = generate_recommendations(model, 2);
  write_recommendations(dir / "recs.csv", table, data);
  const auto back = read_recommendations(dir / "recs.csv", data);
  ASSERT_EQ(back.rows.size(), table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t k = 0; k < table.rows[r].items.size(); ++k) {
      EXPECT_EQ(back.rows[r].items[k].item, table.rows[r].items[k].item);
    }
  }
  write_text(dir / "bad.csv", "user,item,rank,score\nu1,zzz,1,1\n");
  EXPECT_THROW(read_recommendations(dir / "bad.csv", data), Error);
  write_text(dir / "dup.csv", "user,item,rank,score\nu1,d,1,1\nu1,d,2,1\n");
  EXPECT_THROW(read_recommendations(dir / "dup.csv", data), Error);
}

TEST(Lists, CorruptModelFileRejected) {
  TempDir dir;
  write_text(dir / "m.json", R"({"format":"something-else","version":1})");
  EXPECT_THROW(TrainedModel::load(dir / "m.json"), Error);
  write_text(dir / "n.json", "{");
  EXPECT_THROW(TrainedModel::load(dir / "n.json"), Error);
}
