#pragma once

#include <span>
#include <string>
#include <vector>

#include "opinrec/nn.hpp"

namespace opinrec {

/// Runs the cell over `inputs` from its learned initial state, h_i = LSTM(x_i, h_{i-1}).
std::vector<nn::Var> encode_sequence(nn::Tape& tape, const nn::LstmCell& cell, std::span<const nn::Var> inputs);

struct Attended {
  nn::Var vector;   // sum_i alpha_i h_i
  nn::Var weights;  // alpha, shape {n}
};

/// u_i = tanh(w h_i + b), alpha = softmax(u), v = sum_i alpha_i h_i.
/// `w` has shape {1, d}, `b` shape {1}.
Attended attend(nn::Var w, nn::Var b, std::span<const nn::Var> hidden);

/// LSTM plus scalar-score attention pooling; used for both the user and the
/// neighborhood model (each with its own parameters).
class AttentionEncoder {
 public:
  AttentionEncoder() = default;
  AttentionEncoder(nn::Parameters& params, const std::string& prefix, std::size_t input_dim,
                   std::size_t hidden_dim, nn::Rng& rng, double init_bound = 0.08);

  Attended encode(nn::Tape& tape, std::span<const nn::Var> inputs) const;

  const nn::LstmCell& cell() const { return cell_; }
  nn::Tensor& score_weight() const { return *w_; }
  nn::Tensor& score_bias() const { return *b_; }

 private:
  nn::LstmCell cell_;
  nn::Tensor* w_ = nullptr;
  nn::Tensor* b_ = nullptr;
};

}  // namespace opinrec
