#include "opinrec/generator.hpp"

#include <algorithm>
#include <numeric>

#include "opinrec/corpus.hpp"

namespace opinrec {

ReviewDecoder::ReviewDecoder(nn::Parameters& params, const std::string& prefix, std::size_t embedding_dim,
                             std::size_t context_dim, std::size_t hidden_dim, std::size_t vocab_size,
                             nn::Rng& rng, double init_bound)
    : cell_(params, prefix + ".lstm", embedding_dim + context_dim, hidden_dim, rng, init_bound),
      w_out_(&params.add_uniform(prefix + ".out.w", {vocab_size, hidden_dim}, init_bound, rng)),
      b_out_(&params.add_uniform(prefix + ".out.b", {vocab_size}, init_bound, rng)),
      vocab_size_(vocab_size) {}

nn::Var ReviewDecoder::logits(nn::Tape& tape, nn::Var h) const {
  return nn::matmul(tape.param(*w_out_), h) + tape.param(*b_out_);
}

int ReviewDecoder::clamp_token(int id) const {
  return id < 0 || static_cast<std::size_t>(id) >= vocab_size_ ? Vocabulary::kUnk : id;
}

ReviewDecoder::TeacherForced ReviewDecoder::teacher_forced(nn::Tape& tape, nn::Tensor& embeddings, nn::Var v_c,
                                                           std::span<const int> gold, double keep) const {
  if (gold.size() < 2) throw std::invalid_argument("decoder gold must hold at least BOS and EOS");
  TeacherForced out;
  auto state = cell_.initial(tape);
  std::vector<nn::Var> losses;
  for (std::size_t j = 1; j < gold.size(); ++j) {
    nn::Var x = nn::dropout(nn::embedding_lookup(tape, embeddings, static_cast<std::size_t>(clamp_token(gold[j - 1]))), keep);
    state = cell_.step(tape, nn::concat({x, v_c}), state);
    nn::Var z = logits(tape, state.h);
    losses.push_back(nn::nll(z, static_cast<std::size_t>(clamp_token(gold[j]))));
    out.logits.push_back(z);
  }
  out.nll = nn::mean(losses);
  out.final_hidden = state.h;
  return out;
}

ReviewDecoder::Greedy ReviewDecoder::greedy(nn::Tape& tape, nn::Tensor& embeddings, nn::Var v_c,
                                            std::size_t max_len, std::size_t top_k) const {
  if (max_len == 0) throw std::invalid_argument("max_len must be >= 1");
  Greedy out;
  auto state = cell_.initial(tape);
  int prev = Vocabulary::kBos;
  for (std::size_t step = 0; step < max_len; ++step) {
    nn::Var x = nn::embedding_lookup(tape, embeddings, static_cast<std::size_t>(prev));
    state = cell_.step(tape, nn::concat({x, v_c}), state);
    auto probs = nn::softmax_values(logits(tape, state.h).value());
    std::vector<int> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t k = std::min(top_k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::max<std::size_t>(k, 1)),
                      order.end(), [&](int a, int b) {
                        return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)] ||
                               (probs[static_cast<std::size_t>(a)] == probs[static_cast<std::size_t>(b)] && a < b);
                      });
    std::vector<std::pair<int, double>> cands;
    for (std::size_t i = 0; i < k; ++i) cands.emplace_back(order[i], probs[static_cast<std::size_t>(order[i])]);
    if (top_k > 0) out.top_candidates.push_back(std::move(cands));
    int best = order.front();
    if (best == Vocabulary::kEos) break;
    out.tokens.push_back(best);
    prev = best;
  }
  out.final_hidden = state.h;
  return out;
}

RatingHead::RatingHead(nn::Parameters& params, const std::string& prefix, std::size_t input_dim, nn::Rng& rng,
                       double mu_init, double init_bound)
    : mu_(&params.add(prefix + ".mu", {1})),
      w_(&params.add_uniform(prefix + ".w", {1, input_dim}, init_bound, rng)),
      b_(&params.add_uniform(prefix + ".b", {1}, init_bound, rng)) {
  mu_->value[0] = mu_init;
}

nn::Var RatingHead::predict(nn::Tape& tape, std::span<const double> scores, nn::Var beta, nn::Var v_c,
                            nn::Var h_rn) const {
  if (scores.empty() || scores.size() != beta.size())
    throw nn::ShapeError("rating head: " + std::to_string(scores.size()) + " scores for " +
                         std::to_string(beta.size()) + " weights");
  nn::Var s = tape.constant(std::vector<double>(scores.begin(), scores.end()));
  nn::Var weighted = nn::sum(beta * s);
  nn::Var shift = nn::tanh(nn::matmul(tape.param(*w_), nn::concat({v_c, h_rn})) + tape.param(*b_));
  return weighted + tape.param(*mu_) * shift;
}

}  // namespace opinrec
