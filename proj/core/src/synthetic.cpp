#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <fmt/core.h>

#include "exposure/harness.hpp"

namespace exposure {

void SyntheticSpec::validate() const {
  if (n_users == 0 || n_items == 0 || n_suppliers == 0) throw ConfigError("synthetic sizes must be positive");
  if (!(zipf_exponent > 0.0) || !(supplier_zipf_exponent > 0.0)) {
    throw ConfigError("synthetic Zipf exponents must be positive");
  }
  if (affinity_min < 0.0 || affinity_max > 1.0 || affinity_min > affinity_max) {
    throw ConfigError("affinity range must satisfy 0 <= min <= max <= 1");
  }
  if (min_profile == 0 || min_profile > max_profile) throw ConfigError("profile size range is invalid");
  if (max_profile > n_items) throw ConfigError("max_profile cannot exceed n_items");
  if (latent_dimensions < 1) throw ConfigError("latent_dimensions must be at least 1");
  if (rating_noise < 0.0) throw ConfigError("rating_noise must be non-negative");
}

namespace {

class ZipfSampler {
 public:
  ZipfSampler(std::size_t n, double exponent) : cumulative_(n) {
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      total += 1.0 / std::pow(static_cast<double>(r + 1), exponent);
      cumulative_[r] = total;
    }
    for (auto& value : cumulative_) value /= total;
  }

  // Returns a 0-based popularity rank.
  template <typename Engine>
  std::size_t operator()(Engine& engine) const {
    const double u = uniform_unit(engine);
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
  }

 private:
  std::vector<double> cumulative_;
};

std::string padded(char prefix, std::size_t value, std::size_t count) {
  const auto width = fmt::format("{}", count).size();
  return fmt::format("{}{:0{}}", prefix, value, width);
}

template <typename Engine>
std::vector<std::size_t> shuffled_range(std::size_t n, Engine& engine) {
  std::vector<std::size_t> values(n);
  for (std::size_t k = 0; k < n; ++k) values[k] = k;
  for (std::size_t k = n; k > 1; --k) std::swap(values[k - 1], values[uniform_index(engine, k)]);
  return values;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 engine(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Popularity rank r is owned by item id item_label[r], so ids carry no
  // popularity information.
  const auto item_label = shuffled_range(spec.n_items, engine);
  const auto supplier_label = shuffled_range(spec.n_suppliers, engine);
  const ZipfSampler item_sampler(spec.n_items, spec.zipf_exponent);
  const ZipfSampler supplier_sampler(spec.n_suppliers, spec.supplier_zipf_exponent);

  std::map<std::string, std::string> ownership;
  for (std::size_t r = 0; r < spec.n_items; ++r) {
    ownership.emplace(padded('i', item_label[r], spec.n_items),
                      padded('s', supplier_label[supplier_sampler(engine)], spec.n_suppliers));
  }

  const auto d = static_cast<std::size_t>(spec.latent_dimensions);
  const double factor_scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> item_bias(spec.n_items);
  std::vector<double> item_factors(spec.n_items * d);
  for (std::size_t r = 0; r < spec.n_items; ++r) {
    item_bias[r] = 0.4 * normal(engine);
    for (std::size_t f = 0; f < d; ++f) item_factors[r * d + f] = factor_scale * normal(engine);
  }

  SyntheticData data;
  data.affinity.resize(spec.n_users);
  std::vector<RatingRecord> records;
  std::vector<bool> chosen(spec.n_items, false);
  std::vector<std::size_t> profile;
  std::vector<double> user_factors(d);
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    const double affinity = spec.affinity_min + (spec.affinity_max - spec.affinity_min) * uniform_unit(engine);
    const auto size = spec.min_profile + uniform_index(engine, spec.max_profile - spec.min_profile + 1);
    const double user_bias = 0.3 * normal(engine);
    for (auto& value : user_factors) value = factor_scale * normal(engine);

    profile.clear();
    std::size_t attempts = 0;
    while (profile.size() < size && attempts < 100 * size) {
      ++attempts;
      const std::size_t rank =
          uniform_unit(engine) < affinity ? item_sampler(engine) : uniform_index(engine, spec.n_items);
      if (chosen[rank]) continue;
      chosen[rank] = true;
      profile.push_back(rank);
    }
    for (std::size_t rank = 0; profile.size() < size && rank < spec.n_items; ++rank) {
      if (!chosen[rank]) {
        chosen[rank] = true;
        profile.push_back(rank);
      }
    }

    const auto user_id = padded('u', u, spec.n_users);
    for (auto rank : profile) {
      chosen[rank] = false;
      double value = 3.4 + user_bias + item_bias[rank] + spec.rating_noise * normal(engine);
      for (std::size_t f = 0; f < d; ++f) value += user_factors[f] * item_factors[rank * d + f];
      value = std::clamp(std::round(value), 1.0, 5.0);
      records.push_back({user_id, padded('i', item_label[rank], spec.n_items), value});
    }
    data.affinity[u] = affinity;
  }

  data.ratings = RatingDataset::from_records(records, RatingScale{1.0, 5.0});
  // Keep only the suppliers of items that were actually rated.
  std::map<std::string, std::string> rated_ownership;
  for (const auto& item : data.ratings.items().ids()) rated_ownership.emplace(item, ownership.at(item));
  data.suppliers = SupplierMap(std::move(rated_ownership));
  return data;
}

}  // namespace exposure
