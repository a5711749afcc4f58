#pragma once

#include <random>

#include "opinrec/model.hpp"

namespace opinrec::testing {

inline ModelConfig tiny_config(std::size_t vocab = 20, std::size_t dim = 8, std::size_t hops = 2,
                               std::uint64_t seed = 1) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.embedding_dim = dim;
  c.hidden_dim = dim;
  c.hops = hops;
  c.max_decode_len = 12;
  c.seed = seed;
  return c;
}

inline EncodedReview random_review(std::size_t vocab, std::mt19937_64& rng, std::size_t max_len = 6) {
  EncodedReview r;
  std::size_t n = 1 + rng() % max_len;
  for (std::size_t i = 0; i < n; ++i) r.tokens.push_back(4 + static_cast<int>(rng() % (vocab - 4)));
  r.score = static_cast<double>(1 + rng() % 5);
  return r;
}

/// Instance with random token ids drawn from the non-special part of the vocabulary.
inline EncodedInstance random_instance(std::size_t vocab, std::uint64_t seed, std::size_t n_target = 3,
                                       std::size_t n_user = 3, std::size_t n_neighbor = 2) {
  std::mt19937_64 rng(seed);
  EncodedInstance inst;
  inst.id = "u" + std::to_string(seed) + "|p";
  for (std::size_t i = 0; i < n_target; ++i) inst.target.push_back(random_review(vocab, rng));
  for (std::size_t i = 0; i < n_user; ++i) inst.user.push_back(random_review(vocab, rng));
  for (std::size_t i = 0; i < n_neighbor; ++i) inst.neighbor.push_back(random_review(vocab, rng));
  inst.gold = {1};
  for (int t : random_review(vocab, rng, 5).tokens) inst.gold.push_back(t);
  inst.gold.push_back(2);
  inst.gold_score = static_cast<double>(1 + rng() % 5);
  return inst;
}

}  // namespace opinrec::testing
