#include "opinrec/encoders.hpp"

namespace opinrec {

std::vector<nn::Var> encode_sequence(nn::Tape& tape, const nn::LstmCell& cell, std::span<const nn::Var> inputs) {
  if (inputs.empty()) throw std::invalid_argument(cell.prefix() + ": cannot encode an empty sequence");
  std::vector<nn::Var> hidden;
  hidden.reserve(inputs.size());
  auto state = cell.initial(tape);
  for (const auto& x : inputs) {
    state = cell.step(tape, x, state);
    hidden.push_back(state.h);
  }
  return hidden;
}

Attended attend(nn::Var w, nn::Var b, std::span<const nn::Var> hidden) {
  if (hidden.empty()) throw std::invalid_argument("attend over no hidden states");
  std::vector<nn::Var> scores;
  scores.reserve(hidden.size());
  for (const auto& h : hidden) scores.push_back(nn::matmul(w, h));
  nn::Var u = nn::tanh(nn::concat(scores) + b);
  nn::Var alpha = nn::softmax(u);
  return {nn::weighted_sum(alpha, hidden), alpha};
}

AttentionEncoder::AttentionEncoder(nn::Parameters& params, const std::string& prefix, std::size_t input_dim,
                                   std::size_t hidden_dim, nn::Rng& rng, double init_bound)
    : cell_(params, prefix + ".lstm", input_dim, hidden_dim, rng, init_bound),
      w_(&params.add_uniform(prefix + ".att.w", {1, hidden_dim}, init_bound, rng)),
      b_(&params.add_uniform(prefix + ".att.b", {1}, init_bound, rng)) {}

Attended AttentionEncoder::encode(nn::Tape& tape, std::span<const nn::Var> inputs) const {
  auto hidden = encode_sequence(tape, cell_, inputs);
  return attend(tape.param(*w_), tape.param(*b_), hidden);
}

}  // namespace opinrec
