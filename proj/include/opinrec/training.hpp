#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "opinrec/model.hpp"
#include "opinrec/nn.hpp"

namespace opinrec {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double l2 = 1e-4;
  std::size_t epochs = 20;
  double learning_rate = 0.1;
  double adagrad_eps = 1e-6;
  std::uint64_t seed = 1;
  std::size_t patience = 5;  // epochs without dev improvement; 0 disables early stopping
  bool evaluate_rouge = true;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double train_nll = 0.0;
  double dev_mse = 0.0;
  double dev_rouge1 = 0.0;
  double train_loss = 0.0;  // mean total objective per instance
};

struct TrainResult {
  std::vector<EpochMetrics> log;
  std::size_t best_epoch = 0;
};

/// (pred - gold)^2 + (lambda/2) * sum of squares of every unfrozen parameter.
double loss_rating(double predicted, double gold, const nn::Parameters& params, double lambda);

/// Mean -log p(gold_j) with probabilities floored at 1e-12. `floored`, when
/// given, is incremented once per floored probability.
double loss_generation(const std::vector<std::vector<double>>& distributions, std::span<const int> gold_tokens,
                       std::size_t* floored = nullptr);

inline constexpr double kProbabilityFloor = 1e-12;

/// Adds lambda * theta to the gradient of every unfrozen parameter.
void add_l2_gradient(nn::Parameters& params, double lambda);

/// Builds the per-instance objective (rating squared error + mean token NLL,
/// ablated terms dropped) on `tape` and returns it together with the forward.
struct InstanceLoss {
  nn::Var total;
  OpinionModel::Forward forward;
};
InstanceLoss instance_loss(nn::Tape& tape, const OpinionModel& model, const EncodedInstance& inst);

/// One online step: forward, backward, L2 gradient, Adagrad. Returns the
/// objective value (without the regularizer).
double train_step(OpinionModel& model, nn::Adagrad& optimizer, const EncodedInstance& inst, double lambda,
                  std::uint64_t dropout_seed, double* rating_sq_error = nullptr, double* token_nll = nullptr);

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Online Adagrad over shuffled instances. When `dev` is nonempty the
/// parameters with the best dev MSE are restored at the end.
TrainResult train(OpinionModel& model, const std::vector<EncodedInstance>& train_set,
                  const std::vector<EncodedInstance>& dev_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& log);

}  // namespace opinrec
