#pragma once

#include <span>
#include <string>
#include <vector>

#include "opinrec/nn.hpp"

namespace opinrec {

/// Multi-hop memory attention over the product states h_T. One parameter
/// set is shared by every hop:
///
///   v_C^0   = mean(h_T)
///   u_i^t   = tanh(W_T h_i + W_C v_C^{t-1} + W_U v_U + W_N v_N + b)
///   beta^t  = softmax(u^t)
///   v_C^t   = sum_i beta_i^t h_i
class MemoryNetwork {
 public:
  MemoryNetwork() = default;
  MemoryNetwork(nn::Parameters& params, const std::string& prefix, std::size_t hidden_dim, nn::Rng& rng,
                double init_bound = 0.08);

  struct Result {
    nn::Var v_c;
    nn::Var beta;                   // final-hop weights; uniform when hops == 0
    std::vector<nn::Var> per_hop;   // v_C^0 .. v_C^H
  };

  /// Pass an invalid Var for an inactive user or neighbor term; that term is
  /// then left out entirely.
  Result customize(nn::Tape& tape, std::span<const nn::Var> product_states, nn::Var v_user, nn::Var v_neighbor,
                   std::size_t hops) const;

  nn::Tensor& w_product() const { return *w_product_; }
  nn::Tensor& w_previous() const { return *w_previous_; }
  nn::Tensor& w_user() const { return *w_user_; }
  nn::Tensor& w_neighbor() const { return *w_neighbor_; }
  nn::Tensor& bias() const { return *b_; }

 private:
  nn::Tensor* w_product_ = nullptr;
  nn::Tensor* w_previous_ = nullptr;
  nn::Tensor* w_user_ = nullptr;
  nn::Tensor* w_neighbor_ = nullptr;
  nn::Tensor* b_ = nullptr;
};

}  // namespace opinrec
