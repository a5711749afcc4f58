#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "opinrec/corpus.hpp"
#include "opinrec/model.hpp"
#include "opinrec/neighbors.hpp"
#include "opinrec/nn.hpp"

namespace opinrec {

double mse(std::span<const double> predictions, std::span<const double> golds);

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Clipped unigram overlap. Throws on an empty reference; an empty candidate
/// scores zero.
RougeScore rouge1(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);
RougeScore rouge1(std::span<const int> candidate, std::span<const int> reference);

double rs_average(const RecommendationInstance& inst);
double rs_average(const EncodedInstance& inst);

/// s_all + user deviation + product deviation from training scores.
class LinearBaseline {
 public:
  explicit LinearBaseline(const std::vector<Review>& training);
  double predict(const std::string& user, const std::string& product) const;
  double global_mean() const { return global_; }

 private:
  double global_ = 0.0;
  std::unordered_map<std::string, double> user_dev_;
  std::unordered_map<std::string, double> product_dev_;
};

/// Item-based kNN: among products the user rated, the k most cosine-similar
/// to the target (product vector = mean of its review embeddings) vote with
/// similarity weights.
class ItemKnnBaseline {
 public:
  ItemKnnBaseline(const std::vector<Review>& training, const Vocabulary& vocab, const nn::Tensor& embeddings,
                  std::size_t k = 5);
  /// Product vectors supplied directly; `ratings` holds (user, product, score).
  ItemKnnBaseline(std::unordered_map<std::string, std::vector<double>> product_vectors,
                  const std::vector<Review>& ratings, std::size_t k = 5);

  /// nullopt when the user has no usable rating or the product is unknown.
  std::optional<double> predict(const std::string& user, const std::string& product) const;

 private:
  std::size_t k_;
  std::unordered_map<std::string, std::vector<double>> product_vec_;
  std::unordered_map<std::string, std::vector<std::pair<std::string, double>>> user_ratings_;
};

/// Masked tri-factorization of the training rating matrix.
class MfBaseline {
 public:
  MfBaseline(const std::vector<Review>& training, const FactorizeOptions& options);
  MfBaseline(RatingMatrix matrix, TriFactorization factors);

  struct Result {
    double score = 0.0;
    bool fallback = false;
  };
  /// (F S T^T)[product, user] clamped to [0,5]; `fallback_score` (usually
  /// RS-Average) is returned with the flag set for unseen users or products.
  Result predict(const std::string& user, const std::string& product, double fallback_score) const;
  double raw(const std::string& user, const std::string& product) const;

 private:
  RatingMatrix matrix_;
  TriFactorization factors_;
  Eigen::MatrixXd reconstruction_;
};

struct InstanceRecord {
  std::string id;
  double gold = 0.0;
  double predicted = 0.0;
  std::vector<int> generated;
  RougeScore rouge;
};

struct SystemReport {
  std::string system;
  std::optional<double> mse;
  std::optional<RougeScore> rouge;  // averaged over instances
  std::vector<InstanceRecord> records;
};

/// Runs greedy inference over `instances`; ROUGE is skipped when the model
/// does not generate, MSE when it does not rate.
SystemReport evaluate_model(const OpinionModel& model, const std::vector<EncodedInstance>& instances,
                            const std::string& system = "Joint");

struct BaselineContext {
  const DatasetSplit* data = nullptr;
  const Vocabulary* vocab = nullptr;
  const nn::Tensor* embeddings = nullptr;
  std::size_t knn_k = 5;
  FactorizeOptions mf_options{.topics = 4, .sweeps = 300, .tolerance = 1e-7, .seed = 1, .masked = true};
};

/// RS-Average, RS-Linear, RS-Item and RS-MF on `split`.
std::vector<SystemReport> evaluate_baselines(const BaselineContext& ctx, Split split);

void write_report_csv(const std::filesystem::path& path, const std::vector<SystemReport>& rows);
std::string format_report_table(const std::vector<SystemReport>& rows);
void write_records_jsonl(const std::filesystem::path& path, const SystemReport& report, const Vocabulary& vocab);

}  // namespace opinrec
