#pragma once

#include <span>
#include <string>
#include <vector>

#include "opinrec/nn.hpp"

namespace opinrec {

/// LSTM review decoder. Step j consumes concat(embedding(y_{j-1}), v_C) and
/// emits softmax(W_out h_j + b_out) over the vocabulary.
class ReviewDecoder {
 public:
  ReviewDecoder() = default;
  ReviewDecoder(nn::Parameters& params, const std::string& prefix, std::size_t embedding_dim,
                std::size_t context_dim, std::size_t hidden_dim, std::size_t vocab_size, nn::Rng& rng,
                double init_bound = 0.08);

  struct TeacherForced {
    std::vector<nn::Var> logits;  // one per predicted token
    nn::Var nll;                  // mean negative log-likelihood over predicted tokens
    nn::Var final_hidden;         // h_{R_n}
  };

  /// `gold` is BOS y_1 .. y_n EOS; ids outside the vocabulary are read as UNK.
  TeacherForced teacher_forced(nn::Tape& tape, nn::Tensor& embeddings, nn::Var v_c, std::span<const int> gold,
                               double keep = 1.0) const;

  struct Greedy {
    std::vector<int> tokens;  // generated tokens, EOS excluded
    std::vector<std::vector<std::pair<int, double>>> top_candidates;  // per step, best first
    nn::Var final_hidden;
  };

  /// Argmax decoding from BOS; stops after emitting EOS or `max_len` tokens.
  /// Ties go to the lowest token id.
  Greedy greedy(nn::Tape& tape, nn::Tensor& embeddings, nn::Var v_c, std::size_t max_len,
                std::size_t top_k = 5) const;

  std::size_t vocab_size() const { return vocab_size_; }
  const nn::LstmCell& cell() const { return cell_; }
  nn::Tensor& output_weight() const { return *w_out_; }
  nn::Tensor& output_bias() const { return *b_out_; }

 private:
  nn::Var logits(nn::Tape& tape, nn::Var h) const;
  int clamp_token(int id) const;

  nn::LstmCell cell_;
  nn::Tensor* w_out_ = nullptr;
  nn::Tensor* b_out_ = nullptr;
  std::size_t vocab_size_ = 0;
};

/// Y_S = sum_i beta_i s_i + mu * tanh(W_S (v_C ++ h_{R_n}) + b_S).
class RatingHead {
 public:
  RatingHead() = default;
  RatingHead(nn::Parameters& params, const std::string& prefix, std::size_t input_dim, nn::Rng& rng,
             double mu_init = 1.0, double init_bound = 0.08);

  nn::Var predict(nn::Tape& tape, std::span<const double> scores, nn::Var beta, nn::Var v_c, nn::Var h_rn) const;

  nn::Tensor& mu() const { return *mu_; }
  nn::Tensor& weight() const { return *w_; }
  nn::Tensor& bias() const { return *b_; }

 private:
  nn::Tensor* mu_ = nullptr;
  nn::Tensor* w_ = nullptr;
  nn::Tensor* b_ = nullptr;
};

inline double clamp_score(double y) { return y < 0.0 ? 0.0 : (y > 5.0 ? 5.0 : y); }

}  // namespace opinrec
