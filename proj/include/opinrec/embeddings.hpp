#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "opinrec/corpus.hpp"
#include "opinrec/nn.hpp"

namespace opinrec {

struct SkipGramConfig {
  std::size_t dim = 128;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
};

struct SkipGramResult {
  nn::Tensor input;    // |V| x dim, the word embeddings
  nn::Tensor context;  // |V| x dim, output vectors used only while training
  std::vector<double> epoch_loss;  // mean negative-sampling loss per (center, context) pair
  std::vector<std::string> warnings;
};

/// Skip-gram with negative sampling over token-id sentences. Negatives are
/// drawn from unigram^0.75; no subsampling. Single threaded and
/// deterministic for a given seed.
SkipGramResult train_skipgram(const std::vector<std::vector<int>>& corpus, std::size_t vocab_size,
                              const SkipGramConfig& config);

/// Mean of the token embeddings, e_r^d. An empty review yields a zero
/// vector and, when `diagnostic` is given, a message.
std::vector<double> embed_review(std::span<const int> tokens, const nn::Tensor& table,
                                 std::string* diagnostic = nullptr);

/// Header `token<TAB>v1<TAB>...<TAB>vK`, then one row per vocabulary entry.
void save_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, const nn::Tensor& table);

/// Rows for tokens present in the file are overwritten in `table`; others are
/// left as they are. Returns the number of rows loaded.
std::size_t load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, nn::Tensor& table);

}  // namespace opinrec
