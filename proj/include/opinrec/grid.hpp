#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "opinrec/corpus.hpp"
#include "opinrec/embeddings.hpp"
#include "opinrec/evaluation.hpp"
#include "opinrec/model.hpp"
#include "opinrec/neighbors.hpp"
#include "opinrec/training.hpp"

namespace opinrec {

struct PipelineConfig {
  int min_count = 2;
  CorpusLimits limits;
  SkipGramConfig skipgram;
  FactorizeOptions neighbor_factorization{.topics = 16, .sweeps = 200, .tolerance = 1e-6, .seed = 1};
  double eta = 0.25;
  ModelConfig model;  // vocab_size is filled in from the data
  TrainConfig train;
  std::size_t knn_k = 5;
  FactorizeOptions mf_options{.topics = 4, .sweeps = 300, .tolerance = 1e-7, .seed = 1, .masked = true};
};

/// Everything derived from a split before model training: vocabulary over
/// training reviews, skip-gram vectors, neighbor lists, encoded instances.
struct PreparedData {
  DatasetSplit data;
  Vocabulary vocab;
  nn::Tensor word_vectors;
  std::size_t instances_without_neighbors = 0;
  std::vector<EncodedInstance> train, dev, test;

  const std::vector<EncodedInstance>& part(Split s) const {
    return s == Split::Train ? train : s == Split::Dev ? dev : test;
  }
};

/// Fits the neighbor factorization on the training rating matrix and fills
/// every instance's neighbor reviews. Returns the factorization.
TriFactorization attach_all_neighbors(DatasetSplit& data, const FactorizeOptions& options, double eta,
                                      const CorpusLimits& limits, std::size_t* lonely = nullptr);

PreparedData prepare_data(DatasetSplit data, const PipelineConfig& config);

/// Model whose word embeddings start from the skip-gram vectors.
std::unique_ptr<OpinionModel> make_model(const PreparedData& prepared, ModelConfig config);

std::unique_ptr<OpinionModel> train_model(const PreparedData& prepared, const ModelConfig& model,
                                          const TrainConfig& train, TrainResult* result = nullptr);

struct CurvePoint {
  double x = 0.0;
  std::optional<double> dev_mse;
  std::optional<double> test_mse;
};

struct GridConfig {
  PipelineConfig pipeline;
  std::vector<Ablation> ablations = {Ablation{},
                                     Ablation{.user = false},
                                     Ablation{.neighbor = false},
                                     Ablation{.user = false, .neighbor = false},
                                     Ablation{.rating = false},
                                     Ablation{.generation = false}};
  std::vector<std::size_t> hops = {0, 1, 2, 3, 4, 5};
  std::vector<double> mus = {0.0, 0.5, 1.0, 2.0, 4.0};
  bool run_ablations = true;
  bool run_baselines = true;
  bool run_hops = true;
  bool run_mu = true;
  /// Checkpoints are looked up here as <name>.ckpt; missing ones are trained
  /// when `train_missing` is set, otherwise reported absent.
  std::optional<std::filesystem::path> checkpoint_dir;
  bool train_missing = true;
};

struct GridReport {
  std::vector<SystemReport> ablation_dev;
  std::vector<SystemReport> ablation_test;
  std::vector<SystemReport> final_test;  // baselines followed by Joint
  std::vector<CurvePoint> hop_curve;
  std::vector<CurvePoint> mu_curve;
  std::vector<std::string> absent;
};

GridReport run_grid(const PreparedData& prepared, const GridConfig& config);
void write_grid(const std::filesystem::path& dir, const GridReport& report);
std::string format_curve(const std::string& label, const std::vector<CurvePoint>& curve);

}  // namespace opinrec
