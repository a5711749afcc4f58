#include "opinrec/embeddings.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace opinrec {

namespace {

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

SkipGramResult train_skipgram(const std::vector<std::vector<int>>& corpus, std::size_t vocab_size,
                              const SkipGramConfig& config) {
  if (config.dim == 0 || vocab_size == 0) throw std::invalid_argument("skip-gram needs a nonempty vocabulary and dim");
  SkipGramResult res;
  res.input = nn::Tensor({vocab_size, config.dim});
  res.context = nn::Tensor({vocab_size, config.dim});
  nn::Rng rng(config.seed);
  std::uniform_real_distribution<double> init(-0.5 / static_cast<double>(config.dim),
                                              0.5 / static_cast<double>(config.dim));
  for (double& v : res.input.value) v = init(rng);

  std::vector<double> freq(vocab_size, 0.0);
  std::size_t total_tokens = 0;
  for (const auto& sent : corpus) {
    for (int id : sent) {
      if (id < 0 || static_cast<std::size_t>(id) >= vocab_size)
        throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
      freq[static_cast<std::size_t>(id)] += 1.0;
    }
    total_tokens += sent.size();
  }
  if (total_tokens == 0) throw std::invalid_argument("skip-gram corpus is empty");
  if (total_tokens <= config.window)
    res.warnings.push_back("corpus has " + std::to_string(total_tokens) +
                           " tokens, fewer than the window; training on what exists");
  for (double& f : freq) f = std::pow(f, 0.75);
  std::discrete_distribution<std::size_t> unigram(freq.begin(), freq.end());

  const std::size_t dim = config.dim;
  const std::size_t steps = config.epochs * total_tokens;
  std::size_t step = 0;
  std::vector<double> hidden_grad(dim);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss = 0.0;
    std::size_t pairs = 0;
    for (const auto& sent : corpus) {
      for (std::size_t pos = 0; pos < sent.size(); ++pos, ++step) {
        double lr = config.learning_rate * std::max(1e-4, 1.0 - static_cast<double>(step) / static_cast<double>(steps));
        auto center = static_cast<std::size_t>(sent[pos]);
        double* in = res.input.value.data() + center * dim;
        std::size_t lo = pos >= config.window ? pos - config.window : 0;
        std::size_t hi = std::min(sent.size(), pos + config.window + 1);
        for (std::size_t c = lo; c < hi; ++c) {
          if (c == pos) continue;
          std::fill(hidden_grad.begin(), hidden_grad.end(), 0.0);
          auto update = [&](std::size_t target, double label) {
            double* out = res.context.value.data() + target * dim;
            double dot = 0.0;
            for (std::size_t i = 0; i < dim; ++i) dot += in[i] * out[i];
            loss -= label > 0 ? log_sigmoid(dot) : log_sigmoid(-dot);
            double g = lr * (label - sigmoid(dot));
            for (std::size_t i = 0; i < dim; ++i) {
              hidden_grad[i] += g * out[i];
              out[i] += g * in[i];
            }
          };
          auto positive = static_cast<std::size_t>(sent[c]);
          update(positive, 1.0);
          for (std::size_t k = 0; k < config.negatives; ++k) {
            std::size_t neg = unigram(rng);
            if (neg == positive) continue;
            update(neg, 0.0);
          }
          for (std::size_t i = 0; i < dim; ++i) in[i] += hidden_grad[i];
          ++pairs;
        }
      }
    }
    res.epoch_loss.push_back(pairs ? loss / static_cast<double>(pairs) : 0.0);
  }
  return res;
}

std::vector<double> embed_review(std::span<const int> tokens, const nn::Tensor& table,
                                 std::string* diagnostic) {
  const std::size_t dim = table.cols();
  std::vector<double> out(dim, 0.0);
  if (tokens.empty()) {
    if (diagnostic) *diagnostic = "empty review embedded as zero vector";
    return out;
  }
  for (int id : tokens) {
    const double* row = table.value.data() + static_cast<std::size_t>(id) * dim;
    for (std::size_t i = 0; i < dim; ++i) out[i] += row[i];
  }
  for (double& v : out) v /= static_cast<double>(tokens.size());
  return out;
}

void save_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, const nn::Tensor& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "token";
  for (std::size_t i = 1; i <= table.cols(); ++i) out << "\tv" << i;
  out << '\n';
  for (std::size_t r = 0; r < table.rows(); ++r) {
    out << vocab.token(static_cast<int>(r));
    for (std::size_t c = 0; c < table.cols(); ++c) out << '\t' << table.at(r, c);
    out << '\n';
  }
}

std::size_t load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, nn::Tensor& table) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embeddings " + path.string());
  std::string line;
  std::size_t loaded = 0, lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (lineno == 1 && line.rfind("token\t", 0) == 0)) continue;
    std::istringstream ls(line);
    std::string tok;
    std::getline(ls, tok, '\t');
    if (!vocab.contains(tok)) continue;
    std::vector<double> row;
    std::string cell;
    while (std::getline(ls, cell, '\t')) row.push_back(std::stod(cell));
    if (row.size() != table.cols())
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(table.cols()) + " values, got " + std::to_string(row.size()));
    auto r = static_cast<std::size_t>(vocab.index(tok));
    std::copy(row.begin(), row.end(), table.value.begin() + static_cast<std::ptrdiff_t>(r * table.cols()));
    ++loaded;
  }
  return loaded;
}

}  // namespace opinrec
