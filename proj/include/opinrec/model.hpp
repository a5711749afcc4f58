#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "opinrec/corpus.hpp"
#include "opinrec/encoders.hpp"
#include "opinrec/generator.hpp"
#include "opinrec/memory.hpp"
#include "opinrec/nn.hpp"

namespace opinrec {

/// Which parts of the joint model are switched on. A disabled part has its
/// parameters frozen and its contribution removed.
struct Ablation {
  bool user = true;
  bool neighbor = true;
  bool rating = true;
  bool generation = true;

  std::string name() const;  // "Joint", "-user", "-user,-neighbor", ...
  static Ablation parse(const std::string& name);
  bool operator==(const Ablation&) const = default;
};

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embedding_dim = 128;
  std::size_t hidden_dim = 128;
  std::size_t hops = 3;
  double dropout = 0.2;  // drop probability on word embeddings
  std::size_t max_decode_len = 60;
  double init_bound = 0.08;
  double mu_init = 1.0;
  bool train_mu = true;
  /// Feed the teacher-forced decoder state to the rating head during
  /// training. Off: the head sees the state of a free-running greedy decode,
  /// the same one it sees at inference.
  bool teacher_forced_stacking = false;
  std::uint64_t seed = 1;
  Ablation ablation;
};

struct EncodedReview {
  std::vector<int> tokens;
  double score = 0.0;
};

/// A RecommendationInstance mapped through the vocabulary.
struct EncodedInstance {
  std::string id;  // "user|product"
  std::vector<EncodedReview> target;
  std::vector<EncodedReview> user;
  std::vector<EncodedReview> neighbor;
  std::vector<int> gold;  // BOS .. EOS
  double gold_score = 0.0;
};

EncodedInstance encode_instance(const RecommendationInstance& inst, const Vocabulary& vocab,
                                const CorpusLimits& limits = {});
std::vector<EncodedInstance> encode_instances(const std::vector<RecommendationInstance>& insts,
                                              const Vocabulary& vocab, const CorpusLimits& limits = {});

class OpinionModel {
 public:
  explicit OpinionModel(const ModelConfig& config);
  OpinionModel(const OpinionModel&) = delete;
  OpinionModel& operator=(const OpinionModel&) = delete;

  struct Forward {
    nn::Var rating;           // unclamped Y_S
    nn::Var generation_nll;   // mean token NLL; invalid when generation is off
    std::vector<nn::Var> logits;
    nn::Var v_user;           // invalid when inactive
    nn::Var v_neighbor;       // invalid when inactive (ablated or no neighbor reviews)
    nn::Var user_weights;
    nn::Var v_c;
    nn::Var beta;
    std::vector<nn::Var> product_states;
    nn::Var h_rn;
  };

  /// Teacher-forced pass used for training and gradient checks.
  Forward forward(nn::Tape& tape, const EncodedInstance& inst) const;

  struct Prediction {
    double score = 0.0;       // clamped to [0,5]
    double raw_score = 0.0;
    std::vector<int> tokens;
    std::vector<double> beta;
    std::vector<std::vector<std::pair<int, double>>> top_candidates;
    std::vector<double> v_c;
    bool user_active = false;
    bool neighbor_active = false;
  };

  /// Greedy inference; gold fields of `inst` are ignored.
  Prediction predict(const EncodedInstance& inst) const;

  nn::Parameters& parameters() { return params_; }
  const nn::Parameters& parameters() const { return params_; }
  const ModelConfig& config() const { return config_; }
  void set_hops(std::size_t hops) { config_.hops = hops; }
  /// Re-applies freezing after parameters were loaded or config changed.
  void apply_freezing();

  nn::Tensor& embeddings() const { return *embeddings_; }
  const AttentionEncoder& user_encoder() const { return user_; }
  const AttentionEncoder& neighbor_encoder() const { return neighbor_; }
  const nn::LstmCell& product_encoder() const { return product_; }
  const MemoryNetwork& memory() const { return memory_; }
  const ReviewDecoder& decoder() const { return decoder_; }
  const RatingHead& rating_head() const { return rating_; }

 private:
  struct Encoded {
    nn::Var v_user, v_neighbor, user_weights, v_c, beta;
    std::vector<nn::Var> product_states;
  };
  Encoded encode(nn::Tape& tape, const EncodedInstance& inst) const;
  std::vector<nn::Var> review_vectors(nn::Tape& tape, const std::vector<EncodedReview>& reviews) const;
  double keep() const;

  ModelConfig config_;
  nn::Parameters params_;
  nn::Tensor* embeddings_ = nullptr;
  AttentionEncoder user_;
  AttentionEncoder neighbor_;
  nn::LstmCell product_;
  MemoryNetwork memory_;
  ReviewDecoder decoder_;
  RatingHead rating_;
};

/// JSON description of a ModelConfig, stored as checkpoint metadata.
std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace opinrec
