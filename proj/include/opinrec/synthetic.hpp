#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "opinrec/corpus.hpp"

namespace opinrec {

/// Planted user-bias corpus. Users belong to taste groups; each group has a
/// rating offset and its own style vocabulary. Products have a base score and
/// a topic with its own vocabulary. A review's score is
///   clamp(base(product) + offset(user) + N(0, noise^2), 0, 5)
/// and its text mixes the author's style words, the product's topic words and
/// sentiment words tied to the rounded score.
struct SyntheticConfig {
  std::size_t users = 200;
  std::size_t products = 50;
  std::size_t groups = 4;
  std::size_t topics = 5;
  std::size_t min_reviews_per_user = 6;
  std::size_t max_reviews_per_user = 10;
  std::size_t pairs_per_user = 3;
  double group_offset_spread = 1.2;  // offsets evenly spaced in [-spread, spread]
  double user_jitter = 0.15;
  double noise = 0.3;
  double base_low = 2.0;
  double base_high = 4.0;
  double dev_fraction = 0.1;
  double test_fraction = 0.2;
  std::uint64_t seed = 1;
};

struct SyntheticUser {
  std::string id;
  std::size_t group = 0;
  double offset = 0.0;
};

struct SyntheticProduct {
  std::string id;
  std::size_t topic = 0;
  double base = 0.0;
};

struct SyntheticCorpus {
  std::vector<Review> reviews;
  std::vector<HeldOutPair> pairs;
  std::vector<SyntheticUser> users;
  std::vector<SyntheticProduct> products;
};

SyntheticCorpus generate_synthetic(const SyntheticConfig& config);

}  // namespace opinrec
