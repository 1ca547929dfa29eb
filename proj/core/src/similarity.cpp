#include <algorithm>
#include <cmath>

#include "exposure/recsys.hpp"

namespace exposure {

SimilarityEngine::SimilarityEngine(const RatingDataset& data, Orientation orientation, Similarity similarity,
                                   double shrinkage, int min_support)
    : data_(data),
      orientation_(orientation),
      similarity_(similarity),
      shrinkage_(shrinkage),
      min_support_(min_support) {
  const std::size_t n = orientation == Orientation::Users ? data.n_users() : data.n_items();
  means_.resize(n);
  norms_.resize(n);
  for (std::uint32_t k = 0; k < n; ++k) {
    double sum = 0.0;
    double squares = 0.0;
    for (const auto& entry : row(k)) {
      sum += entry.value;
      squares += entry.value * entry.value;
    }
    const auto size = row(k).size();
    means_[k] = size > 0 ? sum / static_cast<double>(size) : 0.0;
    norms_[k] = std::sqrt(squares);
  }
}

std::span<const RatingEntry> SimilarityEngine::row(std::uint32_t index) const {
  return orientation_ == Orientation::Users ? data_.profile(index) : data_.raters(index);
}

double SimilarityEngine::finish(double numerator, double denom_a, double denom_b, std::size_t support) const {
  if (support < static_cast<std::size_t>(min_support_)) return 0.0;
  if (similarity_ == Similarity::Pearson && support < 2) return 0.0;
  const double denominator = similarity_ == Similarity::Cosine ? denom_a * denom_b : std::sqrt(denom_a * denom_b);
  if (!(denominator > 0.0)) return 0.0;
  double score = numerator / denominator;
  if (shrinkage_ > 0.0) score *= static_cast<double>(support) / (static_cast<double>(support) + shrinkage_);
  return std::clamp(score, -1.0, 1.0);
}

double SimilarityEngine::pair(std::uint32_t a, std::uint32_t b) const {
  const auto row_a = row(a);
  const auto row_b = row(b);
  double numerator = 0.0;
  double squares_a = 0.0;
  double squares_b = 0.0;
  std::size_t support = 0;
  std::size_t x = 0;
  std::size_t y = 0;
  while (x < row_a.size() && y < row_b.size()) {
    if (row_a[x].index < row_b[y].index) {
      ++x;
    } else if (row_b[y].index < row_a[x].index) {
      ++y;
    } else {
      if (similarity_ == Similarity::Cosine) {
        numerator += row_a[x].value * row_b[y].value;
      } else {
        const double da = row_a[x].value - means_[a];
        const double db = row_b[y].value - means_[b];
        numerator += da * db;
        squares_a += da * da;
        squares_b += db * db;
      }
      ++support;
      ++x;
      ++y;
    }
  }
  if (similarity_ == Similarity::Cosine) return finish(numerator, norms_[a], norms_[b], support);
  return finish(numerator, squares_a, squares_b, support);
}

std::vector<double> SimilarityEngine::against_all(std::uint32_t index) const {
  const std::size_t n = size();
  std::vector<double> numerator(n, 0.0);
  std::vector<double> squares_a;
  std::vector<double> squares_b;
  if (similarity_ == Similarity::Pearson) {
    squares_a.assign(n, 0.0);
    squares_b.assign(n, 0.0);
  }
  std::vector<std::uint32_t> support(n, 0);
  std::vector<std::uint32_t> touched;

  const auto column = [&](std::uint32_t c) {
    return orientation_ == Orientation::Users ? data_.raters(c) : data_.profile(c);
  };
  for (const auto& own : row(index)) {
    for (const auto& other : column(own.index)) {
      if (other.index == index) continue;
      if (support[other.index]++ == 0) touched.push_back(other.index);
      if (similarity_ == Similarity::Cosine) {
        numerator[other.index] += own.value * other.value;
      } else {
        const double da = own.value - means_[index];
        const double db = other.value - means_[other.index];
        numerator[other.index] += da * db;
        squares_a[other.index] += da * da;
        squares_b[other.index] += db * db;
      }
    }
  }
  std::vector<double> out(n, 0.0);
  for (auto other : touched) {
    out[other] = similarity_ == Similarity::Cosine
                     ? finish(numerator[other], norms_[index], norms_[other], support[other])
                     : finish(numerator[other], squares_a[other], squares_b[other], support[other]);
  }
  return out;
}

}  // namespace exposure
