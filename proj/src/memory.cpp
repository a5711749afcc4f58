#include "opinrec/memory.hpp"

namespace opinrec {

MemoryNetwork::MemoryNetwork(nn::Parameters& params, const std::string& prefix, std::size_t hidden_dim,
                             nn::Rng& rng, double init_bound)
    : w_product_(&params.add_uniform(prefix + ".w_product", {1, hidden_dim}, init_bound, rng)),
      w_previous_(&params.add_uniform(prefix + ".w_previous", {1, hidden_dim}, init_bound, rng)),
      w_user_(&params.add_uniform(prefix + ".w_user", {1, hidden_dim}, init_bound, rng)),
      w_neighbor_(&params.add_uniform(prefix + ".w_neighbor", {1, hidden_dim}, init_bound, rng)),
      b_(&params.add_uniform(prefix + ".b", {1}, init_bound, rng)) {}

MemoryNetwork::Result MemoryNetwork::customize(nn::Tape& tape, std::span<const nn::Var> product_states,
                                               nn::Var v_user, nn::Var v_neighbor, std::size_t hops) const {
  if (product_states.empty()) throw std::invalid_argument("memory: no product states");
  const std::size_t n = product_states.size();
  Result res;
  res.v_c = nn::mean(product_states);
  res.beta = tape.constant(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  res.per_hop.push_back(res.v_c);
  if (hops == 0) return res;

  std::vector<nn::Var> product_terms;
  product_terms.reserve(n);
  nn::Var w_t = tape.param(*w_product_);
  for (const auto& h : product_states) product_terms.push_back(nn::matmul(w_t, h));
  nn::Var per_state = nn::concat(product_terms);

  // Terms that do not change across hops.
  nn::Var fixed = tape.param(*b_);
  if (v_user.valid()) fixed = fixed + nn::matmul(tape.param(*w_user_), v_user);
  if (v_neighbor.valid()) fixed = fixed + nn::matmul(tape.param(*w_neighbor_), v_neighbor);

  nn::Var w_c = tape.param(*w_previous_);
  for (std::size_t t = 1; t <= hops; ++t) {
    nn::Var shift = fixed + nn::matmul(w_c, res.v_c);
    res.beta = nn::softmax(nn::tanh(per_state + shift));
    res.v_c = nn::weighted_sum(res.beta, product_states);
    res.per_hop.push_back(res.v_c);
  }
  return res;
}

}  // namespace opinrec
