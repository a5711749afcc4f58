#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "opinrec/corpus.hpp"

namespace opinrec {

/// Dense product x user rating matrix. Unobserved cells hold 0 with the mask
/// bit off.
struct RatingMatrix {
  Eigen::MatrixXd values;
  Eigen::MatrixXd mask;  // 1 observed, 0 not
  std::vector<std::string> product_ids;
  std::vector<std::string> user_ids;
  std::unordered_map<std::string, std::size_t> product_index;
  std::unordered_map<std::string, std::size_t> user_index;

  std::size_t products() const { return product_ids.size(); }
  std::size_t users() const { return user_ids.size(); }
  std::size_t observed() const { return static_cast<std::size_t>(mask.sum()); }
};

/// Entry (p, u) is u's score for p; when a user reviewed a product more than
/// once the most recent review wins. Rows and columns are in first-seen order.
RatingMatrix build_matrix(const std::vector<Review>& reviews);

enum class UpdateRule {
  /// Multiplicative updates minimizing ||W o (M - F S T^T)||; monotone.
  Standard,
  /// Orthogonal-NMF style updates, T <- T (M^T F S)/(T T^T M^T F S) and the
  /// matching F, S rules. Not monotone on general matrices.
  Orthogonal,
};

struct FactorizeOptions {
  std::size_t topics = 16;
  std::size_t sweeps = 200;
  double tolerance = 1e-6;  // stop when relative improvement drops below; 0 disables
  std::uint64_t seed = 1;
  bool masked = false;      // weight the objective by the observation mask
  UpdateRule rule = UpdateRule::Standard;
};

/// M ~ F S T^T with F: products x K, S: K x K, T: users x K (T is stored
/// transposed relative to the K x users convention).
struct TriFactorization {
  Eigen::MatrixXd F;
  Eigen::MatrixXd S;
  Eigen::MatrixXd T;
  std::vector<double> objective;  // ||W o (M - F S T^T)||_F, index 0 = initialization
  std::size_t floor_events = 0;   // denominators raised to the epsilon floor

  Eigen::MatrixXd reconstruct() const { return F * S * T.transpose(); }
};

inline constexpr double kDenominatorFloor = 1e-12;

struct FactorInit {
  Eigen::MatrixXd F, S, T;
};

/// Uniform(0,1) scaled by sqrt(mean(M)/K), seeded.
FactorInit random_init(const Eigen::MatrixXd& M, std::size_t topics, std::uint64_t seed);

TriFactorization factorize(const Eigen::MatrixXd& M, const Eigen::MatrixXd* mask,
                           const FactorizeOptions& options, std::optional<FactorInit> init = std::nullopt);
TriFactorization factorize(const RatingMatrix& M, const FactorizeOptions& options);

/// Scales each row onto the probability simplex; all-zero rows become uniform.
Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& T);

/// User-topic memberships; rows are normalized onto the simplex on construction.
class NeighborIndex {
 public:
  NeighborIndex(std::vector<std::string> user_ids, Eigen::MatrixXd memberships);
  NeighborIndex(const RatingMatrix& matrix, const TriFactorization& factors);

  /// sim(i, j) = sum_k T_ik T_jk. Throws std::out_of_range for unknown ids.
  double similarity(const std::string& a, const std::string& b) const;
  /// All users j != user with sim(user, j) > eta, sorted by id.
  std::vector<std::string> find_neighbors(const std::string& user, double eta) const;

  const Eigen::MatrixXd& memberships() const { return T_; }
  const std::vector<std::string>& user_ids() const { return ids_; }
  bool contains(const std::string& user) const { return index_.count(user) != 0; }

 private:
  std::size_t row(const std::string& user) const;

  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
  Eigen::MatrixXd T_;
};

double user_similarity(const Eigen::MatrixXd& T, std::size_t i, std::size_t j);

/// Fills neighbor_reviews of every instance with the temporal merge of its
/// neighbors' reviews drawn from `pool`, truncated to the most recent
/// `limits.max_sequence`. Reviews of the instance's own product by neighbors
/// are kept. Returns the number of instances left without neighbors.
std::size_t attach_neighbors(std::vector<RecommendationInstance>& instances, const std::vector<Review>& pool,
                             const NeighborIndex& index, double eta, const CorpusLimits& limits = {});

}  // namespace opinrec
