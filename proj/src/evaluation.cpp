#include "opinrec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "opinrec/embeddings.hpp"

namespace opinrec {

double mse(std::span<const double> predictions, std::span<const double> golds) {
  if (predictions.size() != golds.size())
    throw std::invalid_argument("mse: " + std::to_string(predictions.size()) + " predictions vs " +
                                std::to_string(golds.size()) + " golds");
  if (predictions.empty()) throw std::invalid_argument("mse of nothing");
  double s = 0.0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    double d = predictions[i] - golds[i];
    s += d * d;
  }
  return s / static_cast<double>(golds.size());
}

namespace {

template <typename T>
RougeScore rouge_counts(std::span<const T> cand, std::span<const T> ref) {
  if (ref.empty()) throw std::invalid_argument("rouge1 needs a nonempty reference");
  if (cand.empty()) return {};
  std::map<T, std::size_t> rc;
  for (const auto& t : ref) ++rc[t];
  std::map<T, std::size_t> cc;
  for (const auto& t : cand) ++cc[t];
  std::size_t overlap = 0;
  for (const auto& [tok, n] : cc)
    if (auto it = rc.find(tok); it != rc.end()) overlap += std::min(n, it->second);
  RougeScore s;
  s.precision = static_cast<double>(overlap) / static_cast<double>(cand.size());
  s.recall = static_cast<double>(overlap) / static_cast<double>(ref.size());
  s.f1 = overlap ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

}  // namespace

RougeScore rouge1(const std::vector<std::string>& candidate, const std::vector<std::string>& reference) {
  return rouge_counts<std::string>(candidate, reference);
}

RougeScore rouge1(std::span<const int> candidate, std::span<const int> reference) {
  return rouge_counts<int>(candidate, reference);
}

double rs_average(const RecommendationInstance& inst) {
  if (inst.target_reviews.empty()) throw std::invalid_argument("rs_average: no target reviews");
  double s = 0.0;
  for (const auto& r : inst.target_reviews) s += r.score;
  return s / static_cast<double>(inst.target_reviews.size());
}

double rs_average(const EncodedInstance& inst) {
  if (inst.target.empty()) throw std::invalid_argument("rs_average: no target reviews");
  double s = 0.0;
  for (const auto& r : inst.target) s += r.score;
  return s / static_cast<double>(inst.target.size());
}

LinearBaseline::LinearBaseline(const std::vector<Review>& training) {
  if (training.empty()) throw std::invalid_argument("RS-Linear needs training reviews");
  std::unordered_map<std::string, std::pair<double, std::size_t>> users, products;
  double total = 0.0;
  for (const auto& r : training) {
    total += r.score;
    auto& u = users[r.user_id];
    u.first += r.score;
    ++u.second;
    auto& p = products[r.product_id];
    p.first += r.score;
    ++p.second;
  }
  global_ = total / static_cast<double>(training.size());
  for (const auto& [id, s] : users) user_dev_[id] = s.first / static_cast<double>(s.second) - global_;
  for (const auto& [id, s] : products) product_dev_[id] = s.first / static_cast<double>(s.second) - global_;
}

double LinearBaseline::predict(const std::string& user, const std::string& product) const {
  double s = global_;
  if (auto it = user_dev_.find(user); it != user_dev_.end()) s += it->second;
  if (auto it = product_dev_.find(product); it != product_dev_.end()) s += it->second;
  return s;
}

namespace {

std::unordered_map<std::string, std::vector<std::pair<std::string, double>>> latest_ratings(
    const std::vector<Review>& reviews) {
  std::vector<const Review*> ordered;
  for (const auto& r : reviews) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(), [](const Review* a, const Review* b) {
    return std::tie(a->timestamp, a->review_id) < std::tie(b->timestamp, b->review_id);
  });
  std::unordered_map<std::string, std::map<std::string, double>> latest;
  for (const Review* r : ordered) latest[r->user_id][r->product_id] = r->score;
  std::unordered_map<std::string, std::vector<std::pair<std::string, double>>> out;
  for (auto& [u, m] : latest) out[u] = {m.begin(), m.end()};
  return out;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return na > 0.0 && nb > 0.0 ? dot / std::sqrt(na * nb) : 0.0;
}

}  // namespace

ItemKnnBaseline::ItemKnnBaseline(const std::vector<Review>& training, const Vocabulary& vocab,
                                 const nn::Tensor& embeddings, std::size_t k)
    : k_(k), user_ratings_(latest_ratings(training)) {
  std::unordered_map<std::string, std::pair<std::vector<double>, std::size_t>> sums;
  for (const auto& r : training) {
    auto ids = vocab.encode(tokenize(r.text));
    auto v = embed_review(ids, embeddings);
    auto& [acc, n] = sums[r.product_id];
    if (acc.empty()) acc.assign(v.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) acc[i] += v[i];
    ++n;
  }
  for (auto& [p, s] : sums) {
    for (double& x : s.first) x /= static_cast<double>(s.second);
    product_vec_[p] = std::move(s.first);
  }
}

ItemKnnBaseline::ItemKnnBaseline(std::unordered_map<std::string, std::vector<double>> product_vectors,
                                 const std::vector<Review>& ratings, std::size_t k)
    : k_(k), product_vec_(std::move(product_vectors)), user_ratings_(latest_ratings(ratings)) {}

std::optional<double> ItemKnnBaseline::predict(const std::string& user, const std::string& product) const {
  auto target = product_vec_.find(product);
  auto rated = user_ratings_.find(user);
  if (target == product_vec_.end() || rated == user_ratings_.end() || k_ == 0) return std::nullopt;
  struct Cand {
    double sim;
    std::string product;
    double score;
  };
  std::vector<Cand> cands;
  for (const auto& [p, s] : rated->second) {
    if (p == product) continue;
    auto it = product_vec_.find(p);
    if (it == product_vec_.end()) continue;
    cands.push_back({cosine(target->second, it->second), p, s});
  }
  if (cands.empty()) return std::nullopt;
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    return a.sim > b.sim || (a.sim == b.sim && a.product < b.product);
  });
  if (cands.size() > k_) cands.resize(k_);
  double wsum = 0.0, acc = 0.0, plain = 0.0;
  for (const auto& c : cands) {
    double w = std::max(c.sim, 0.0);
    wsum += w;
    acc += w * c.score;
    plain += c.score;
  }
  return wsum > 0.0 ? acc / wsum : plain / static_cast<double>(cands.size());
}

MfBaseline::MfBaseline(const std::vector<Review>& training, const FactorizeOptions& options)
    : matrix_(build_matrix(training)) {
  FactorizeOptions o = options;
  o.masked = true;
  factors_ = factorize(matrix_, o);
  reconstruction_ = factors_.reconstruct();
}

MfBaseline::MfBaseline(RatingMatrix matrix, TriFactorization factors)
    : matrix_(std::move(matrix)), factors_(std::move(factors)), reconstruction_(factors_.reconstruct()) {}

double MfBaseline::raw(const std::string& user, const std::string& product) const {
  auto p = matrix_.product_index.find(product);
  auto u = matrix_.user_index.find(user);
  if (p == matrix_.product_index.end() || u == matrix_.user_index.end())
    throw std::out_of_range("RS-MF: unseen user or product");
  return reconstruction_(static_cast<Eigen::Index>(p->second), static_cast<Eigen::Index>(u->second));
}

MfBaseline::Result MfBaseline::predict(const std::string& user, const std::string& product,
                                       double fallback_score) const {
  if (!matrix_.product_index.count(product) || !matrix_.user_index.count(user)) return {fallback_score, true};
  return {clamp_score(raw(user, product)), false};
}

SystemReport evaluate_model(const OpinionModel& model, const std::vector<EncodedInstance>& instances,
                            const std::string& system) {
  SystemReport rep;
  rep.system = system;
  const Ablation& a = model.config().ablation;
  std::vector<double> preds, golds;
  RougeScore sum;
  for (const auto& inst : instances) {
    auto p = model.predict(inst);
    InstanceRecord rec;
    rec.id = inst.id;
    rec.gold = inst.gold_score;
    rec.predicted = p.score;
    rec.generated = p.tokens;
    if (a.generation && inst.gold.size() > 2) {
      std::span<const int> ref(inst.gold.data() + 1, inst.gold.size() - 2);
      rec.rouge = rouge1(std::span<const int>(p.tokens), ref);
      sum.precision += rec.rouge.precision;
      sum.recall += rec.rouge.recall;
      sum.f1 += rec.rouge.f1;
    }
    preds.push_back(p.score);
    golds.push_back(inst.gold_score);
    rep.records.push_back(std::move(rec));
  }
  if (!instances.empty()) {
    if (a.rating) rep.mse = mse(preds, golds);
    if (a.generation) {
      double n = static_cast<double>(instances.size());
      rep.rouge = RougeScore{sum.precision / n, sum.recall / n, sum.f1 / n};
    }
  }
  return rep;
}

std::vector<SystemReport> evaluate_baselines(const BaselineContext& ctx, Split split) {
  if (!ctx.data) throw std::invalid_argument("baselines need a dataset");
  const auto& insts = ctx.data->part(split);
  auto training = ctx.data->training_reviews();
  LinearBaseline linear(training);
  MfBaseline mf(training, ctx.mf_options);
  std::optional<ItemKnnBaseline> knn;
  if (ctx.vocab && ctx.embeddings) knn.emplace(training, *ctx.vocab, *ctx.embeddings, ctx.knn_k);

  std::vector<SystemReport> reps(4);
  reps[0].system = "RS-Average";
  reps[1].system = "RS-Linear";
  reps[2].system = "RS-Item";
  reps[3].system = "RS-MF";
  std::vector<std::vector<double>> preds(4);
  std::vector<double> golds;
  for (const auto& inst : insts) {
    double avg = rs_average(inst);
    double lin = clamp_score(linear.predict(inst.user_id, inst.product_id));
    double item = avg;
    if (knn) item = clamp_score(knn->predict(inst.user_id, inst.product_id).value_or(avg));
    double m = mf.predict(inst.user_id, inst.product_id, avg).score;
    double vals[4] = {avg, lin, item, m};
    for (std::size_t k = 0; k < 4; ++k) {
      preds[k].push_back(vals[k]);
      reps[k].records.push_back({inst.user_id + "|" + inst.product_id, inst.gold_score, vals[k], {}, {}});
    }
    golds.push_back(inst.gold_score);
  }
  if (!golds.empty())
    for (std::size_t k = 0; k < 4; ++k)
      if (k != 2 || knn) reps[k].mse = mse(preds[k], golds);
  if (!knn) reps.erase(reps.begin() + 2);
  return reps;
}

void write_report_csv(const std::filesystem::path& path, const std::vector<SystemReport>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(10);
  out << "system,mse,rouge1_precision,rouge1_recall,rouge1_f1\n";
  for (const auto& r : rows) {
    out << r.system << ',';
    if (r.mse) out << *r.mse;
    out << ',';
    if (r.rouge) out << r.rouge->precision << ',' << r.rouge->recall << ',' << r.rouge->f1;
    else out << ",,";
    out << '\n';
  }
}

std::string format_report_table(const std::vector<SystemReport>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(20) << "system" << std::setw(10) << "MSE" << "ROUGE-1 (R)\n";
  os << std::string(42, '-') << '\n';
  os << std::fixed << std::setprecision(3);
  for (const auto& r : rows) {
    os << std::setw(20) << r.system;
    std::ostringstream m;
    m << std::fixed << std::setprecision(3);
    if (r.mse) m << *r.mse; else m << "-";
    os << std::setw(10) << m.str();
    if (r.rouge) os << r.rouge->recall; else os << "-";
    os << '\n';
  }
  return os.str();
}

void write_records_jsonl(const std::filesystem::path& path, const SystemReport& report, const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : report.records) {
    nlohmann::json j = {{"id", r.id},
                        {"gold_score", r.gold},
                        {"predicted_score", r.predicted},
                        {"generated", vocab.decode(r.generated)},
                        {"rouge1", {{"precision", r.rouge.precision}, {"recall", r.rouge.recall}, {"f1", r.rouge.f1}}}};
    out << j.dump() << '\n';
  }
}

}  // namespace opinrec
