#include "opinrec/model.hpp"

#include <sstream>

#include "json.hpp"

namespace opinrec {

std::string Ablation::name() const {
  std::vector<std::string> off;
  if (!user) off.push_back("-user");
  if (!neighbor) off.push_back("-neighbor");
  if (!rating) off.push_back("-rating");
  if (!generation) off.push_back("-generation");
  if (off.empty()) return "Joint";
  std::string s;
  for (std::size_t i = 0; i < off.size(); ++i) s += (i ? "," : "") + off[i];
  return s;
}

Ablation Ablation::parse(const std::string& name) {
  Ablation a;
  if (name == "Joint" || name.empty()) return a;
  std::istringstream is(name);
  std::string part;
  while (std::getline(is, part, ',')) {
    if (part == "-user") a.user = false;
    else if (part == "-neighbor") a.neighbor = false;
    else if (part == "-rating") a.rating = false;
    else if (part == "-generation") a.generation = false;
    else throw std::invalid_argument("unknown ablation '" + part + "'");
  }
  if (!a.rating && !a.generation) throw std::invalid_argument("rating and generation cannot both be ablated");
  return a;
}

EncodedInstance encode_instance(const RecommendationInstance& inst, const Vocabulary& vocab,
                                const CorpusLimits& limits) {
  auto reviews = [&](const std::vector<Review>& rs) {
    std::vector<EncodedReview> out;
    std::size_t start = rs.size() > limits.max_sequence ? rs.size() - limits.max_sequence : 0;
    for (std::size_t i = start; i < rs.size(); ++i) {
      auto toks = tokenize(rs[i].text);
      if (toks.size() > limits.max_review_tokens) toks.resize(limits.max_review_tokens);
      auto ids = vocab.encode(toks);
      if (ids.empty()) ids.push_back(Vocabulary::kUnk);
      out.push_back({std::move(ids), rs[i].score});
    }
    return out;
  };
  EncodedInstance e;
  e.id = inst.user_id + "|" + inst.product_id;
  e.target = reviews(inst.target_reviews);
  e.user = reviews(inst.user_reviews);
  e.neighbor = reviews(inst.neighbor_reviews);
  e.gold.push_back(Vocabulary::kBos);
  for (std::size_t i = 0; i < inst.gold_review.size() && i < limits.max_review_tokens; ++i)
    e.gold.push_back(vocab.index(inst.gold_review[i]));
  e.gold.push_back(Vocabulary::kEos);
  e.gold_score = inst.gold_score;
  return e;
}

std::vector<EncodedInstance> encode_instances(const std::vector<RecommendationInstance>& insts,
                                              const Vocabulary& vocab, const CorpusLimits& limits) {
  std::vector<EncodedInstance> out;
  out.reserve(insts.size());
  for (const auto& i : insts) out.push_back(encode_instance(i, vocab, limits));
  return out;
}

OpinionModel::OpinionModel(const ModelConfig& config) : config_(config) {
  if (config.vocab_size <= static_cast<std::size_t>(Vocabulary::kSpecialCount))
    throw std::invalid_argument("model vocabulary must extend beyond the special tokens");
  if (!config.ablation.rating && !config.ablation.generation)
    throw std::invalid_argument("rating and generation cannot both be ablated");
  nn::Rng rng(config.seed);
  const std::size_t e = config.embedding_dim, d = config.hidden_dim;
  embeddings_ = &params_.add_uniform("embedding.words", {config.vocab_size, e}, config.init_bound, rng);
  user_ = AttentionEncoder(params_, "user", e, d, rng, config.init_bound);
  neighbor_ = AttentionEncoder(params_, "neighbor", e, d, rng, config.init_bound);
  product_ = nn::LstmCell(params_, "product.lstm", e, d, rng, config.init_bound);
  memory_ = MemoryNetwork(params_, "memory", d, rng, config.init_bound);
  decoder_ = ReviewDecoder(params_, "decoder", e, d, d, config.vocab_size, rng, config.init_bound);
  rating_ = RatingHead(params_, "rating", 2 * d, rng, config.mu_init, config.init_bound);
  apply_freezing();
}

void OpinionModel::apply_freezing() {
  for (auto& [_, t] : params_) t.frozen = false;
  const Ablation& a = config_.ablation;
  if (!a.user) {
    params_.set_frozen_prefix("user.", true);
    memory_.w_user().frozen = true;
  }
  if (!a.neighbor) {
    params_.set_frozen_prefix("neighbor.", true);
    memory_.w_neighbor().frozen = true;
  }
  if (!a.rating) params_.set_frozen_prefix("rating.", true);
  if (!a.generation) params_.set_frozen_prefix("decoder.", true);
  if (!config_.train_mu) rating_.mu().frozen = true;
}

double OpinionModel::keep() const { return 1.0 - config_.dropout; }

std::vector<nn::Var> OpinionModel::review_vectors(nn::Tape& tape, const std::vector<EncodedReview>& reviews) const {
  std::vector<nn::Var> out;
  out.reserve(reviews.size());
  for (const auto& r : reviews) out.push_back(nn::dropout(nn::embedding_mean(tape, *embeddings_, r.tokens), keep()));
  return out;
}

OpinionModel::Encoded OpinionModel::encode(nn::Tape& tape, const EncodedInstance& inst) const {
  if (inst.target.empty()) throw std::invalid_argument(inst.id + ": no target-product reviews");
  Encoded enc;
  if (config_.ablation.user && !inst.user.empty()) {
    auto att = user_.encode(tape, review_vectors(tape, inst.user));
    enc.v_user = att.vector;
    enc.user_weights = att.weights;
  }
  if (config_.ablation.neighbor && !inst.neighbor.empty())
    enc.v_neighbor = neighbor_.encode(tape, review_vectors(tape, inst.neighbor)).vector;
  enc.product_states = encode_sequence(tape, product_, review_vectors(tape, inst.target));
  auto mem = memory_.customize(tape, enc.product_states, enc.v_user, enc.v_neighbor, config_.hops);
  enc.v_c = mem.v_c;
  enc.beta = mem.beta;
  return enc;
}

namespace {

std::vector<double> scores_of(const std::vector<EncodedReview>& rs) {
  std::vector<double> s;
  s.reserve(rs.size());
  for (const auto& r : rs) s.push_back(r.score);
  return s;
}

}  // namespace

OpinionModel::Forward OpinionModel::forward(nn::Tape& tape, const EncodedInstance& inst) const {
  Encoded enc = encode(tape, inst);
  Forward f;
  f.v_user = enc.v_user;
  f.v_neighbor = enc.v_neighbor;
  f.user_weights = enc.user_weights;
  f.v_c = enc.v_c;
  f.beta = enc.beta;
  f.product_states = enc.product_states;
  if (config_.ablation.generation) {
    auto tf = decoder_.teacher_forced(tape, *embeddings_, enc.v_c, inst.gold, keep());
    f.generation_nll = tf.nll;
    f.logits = std::move(tf.logits);
    f.h_rn = config_.teacher_forced_stacking
                 ? tf.final_hidden
                 : decoder_.greedy(tape, *embeddings_, enc.v_c, config_.max_decode_len, 0).final_hidden;
  } else {
    f.h_rn = tape.zeros(config_.hidden_dim);
  }
  auto scores = scores_of(inst.target);
  f.rating = rating_.predict(tape, scores, enc.beta, enc.v_c, f.h_rn);
  return f;
}

OpinionModel::Prediction OpinionModel::predict(const EncodedInstance& inst) const {
  nn::Tape tape(false);
  Encoded enc = encode(tape, inst);
  Prediction p;
  p.user_active = enc.v_user.valid();
  p.neighbor_active = enc.v_neighbor.valid();
  p.beta = enc.beta.value();
  p.v_c = enc.v_c.value();
  nn::Var h_rn;
  if (config_.ablation.generation) {
    auto g = decoder_.greedy(tape, *embeddings_, enc.v_c, config_.max_decode_len);
    p.tokens = std::move(g.tokens);
    p.top_candidates = std::move(g.top_candidates);
    h_rn = g.final_hidden;
  } else {
    h_rn = tape.zeros(config_.hidden_dim);
  }
  auto scores = scores_of(inst.target);
  p.raw_score = rating_.predict(tape, scores, enc.beta, enc.v_c, h_rn).scalar();
  p.score = clamp_score(p.raw_score);
  return p;
}

std::string model_config_to_json(const ModelConfig& c) {
  nlohmann::json j = {{"vocab_size", c.vocab_size}, {"embedding_dim", c.embedding_dim},
                      {"hidden_dim", c.hidden_dim}, {"hops", c.hops},
                      {"dropout", c.dropout},       {"max_decode_len", c.max_decode_len},
                      {"init_bound", c.init_bound}, {"mu_init", c.mu_init},
                      {"train_mu", c.train_mu},     {"seed", c.seed},
                      {"teacher_forced_stacking", c.teacher_forced_stacking},
                      {"ablation", c.ablation.name()}};
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.hops = j.at("hops").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.max_decode_len = j.at("max_decode_len").get<std::size_t>();
  c.init_bound = j.at("init_bound").get<double>();
  c.mu_init = j.at("mu_init").get<double>();
  c.train_mu = j.at("train_mu").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.teacher_forced_stacking = j.value("teacher_forced_stacking", false);
  c.ablation = Ablation::parse(j.at("ablation").get<std::string>());
  return c;
}

}  // namespace opinrec
