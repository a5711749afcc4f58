#include "opinrec/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "opinrec/evaluation.hpp"

namespace opinrec {

double loss_rating(double predicted, double gold, const nn::Parameters& params, double lambda) {
  double sq = 0.0;
  for (const auto& [_, t] : params) {
    if (t.frozen) continue;
    for (double v : t.value) sq += v * v;
  }
  double d = predicted - gold;
  return d * d + 0.5 * lambda * sq;
}

double loss_generation(const std::vector<std::vector<double>>& distributions, std::span<const int> gold_tokens,
                       std::size_t* floored) {
  if (distributions.size() != gold_tokens.size())
    throw std::invalid_argument("loss_generation: " + std::to_string(distributions.size()) + " distributions for " +
                                std::to_string(gold_tokens.size()) + " tokens");
  if (gold_tokens.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t j = 0; j < gold_tokens.size(); ++j) {
    double p = distributions[j].at(static_cast<std::size_t>(gold_tokens[j]));
    if (p < kProbabilityFloor) {
      p = kProbabilityFloor;
      if (floored) ++*floored;
    }
    total -= std::log(p);
  }
  return total / static_cast<double>(gold_tokens.size());
}

void add_l2_gradient(nn::Parameters& params, double lambda) {
  if (lambda == 0.0) return;
  for (auto& [_, t] : params) {
    if (t.frozen) continue;
    for (std::size_t i = 0; i < t.size(); ++i) t.grad[i] += lambda * t.value[i];
  }
}

InstanceLoss instance_loss(nn::Tape& tape, const OpinionModel& model, const EncodedInstance& inst) {
  InstanceLoss out;
  out.forward = model.forward(tape, inst);
  const Ablation& a = model.config().ablation;
  nn::Var rating_term, gen_term;
  if (a.rating) rating_term = nn::squared_error(out.forward.rating, inst.gold_score);
  if (a.generation) gen_term = out.forward.generation_nll;
  if (rating_term.valid() && gen_term.valid())
    out.total = rating_term + gen_term;
  else
    out.total = rating_term.valid() ? rating_term : gen_term;
  return out;
}

namespace {

std::string parameter_norms(const nn::Parameters& params) {
  std::ostringstream os;
  for (const auto& [name, t] : params) {
    double s = 0.0;
    for (double v : t.value) s += v * v;
    os << "  " << name << ": " << std::sqrt(s) << '\n';
  }
  return os.str();
}

}  // namespace

double train_step(OpinionModel& model, nn::Adagrad& optimizer, const EncodedInstance& inst, double lambda,
                  std::uint64_t dropout_seed, double* rating_sq_error, double* token_nll) {
  nn::Tape tape(true, dropout_seed);
  auto loss = instance_loss(tape, model, inst);
  double value = loss.total.scalar();
  if (!std::isfinite(value))
    throw TrainingError("non-finite loss on instance " + inst.id + "; parameter norms:\n" +
                        parameter_norms(model.parameters()));
  if (rating_sq_error) {
    double d = loss.forward.rating.scalar() - inst.gold_score;
    *rating_sq_error = d * d;
  }
  if (token_nll) *token_nll = loss.forward.generation_nll.valid() ? loss.forward.generation_nll.scalar() : 0.0;
  auto& params = model.parameters();
  tape.backward(loss.total);
  add_l2_gradient(params, lambda);
  optimizer.update(params);
  params.zero_grad();
  auto& mu = model.rating_head().mu();
  if (mu.value[0] < 0.0) mu.value[0] = 0.0;
  return value;
}

TrainResult train(OpinionModel& model, const std::vector<EncodedInstance>& train_set,
                  const std::vector<EncodedInstance>& dev_set, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  if (train_set.empty()) throw TrainingError("empty training set");
  nn::Adagrad optimizer(config.learning_rate, config.adagrad_eps);
  nn::Rng rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const Ablation& ablation = model.config().ablation;

  TrainResult result;
  std::vector<std::vector<double>> best_values;
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::uint64_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochMetrics m;
    m.epoch = epoch;
    double sq_sum = 0.0, nll_sum = 0.0, loss_sum = 0.0;
    std::size_t tokens = 0;
    for (std::size_t idx : order) {
      const auto& inst = train_set[idx];
      double sq = 0.0, nll = 0.0;
      loss_sum += train_step(model, optimizer, inst, config.l2, config.seed * 1000003ULL + step++, &sq, &nll);
      sq_sum += sq;
      std::size_t n = inst.gold.size() - 1;
      nll_sum += nll * static_cast<double>(n);
      tokens += n;
    }
    m.train_mse = sq_sum / static_cast<double>(train_set.size());
    m.train_nll = ablation.generation && tokens ? nll_sum / static_cast<double>(tokens) : 0.0;
    m.train_loss = loss_sum / static_cast<double>(train_set.size());

    if (!dev_set.empty()) {
      auto report = evaluate_model(model, dev_set);
      m.dev_mse = report.mse.value_or(0.0);
      m.dev_rouge1 = report.rouge ? report.rouge->recall : 0.0;
      double criterion = ablation.rating ? m.dev_mse : -m.dev_rouge1;
      if (criterion < best) {
        best = criterion;
        result.best_epoch = epoch;
        since_best = 0;
        best_values.clear();
        for (const auto& [_, t] : model.parameters()) best_values.push_back(t.value);
      } else {
        ++since_best;
      }
    } else {
      result.best_epoch = epoch;
    }
    result.log.push_back(m);
    if (on_epoch) on_epoch(m);
    if (config.patience > 0 && !dev_set.empty() && since_best >= config.patience) break;
  }
  if (!best_values.empty()) {
    std::size_t k = 0;
    for (auto& [_, t] : model.parameters()) t.value = best_values[k++];
  }
  return result;
}

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(10);
  out << "epoch,train_mse,train_nll,dev_mse,dev_rouge1\n";
  for (const auto& m : log)
    out << m.epoch << ',' << m.train_mse << ',' << m.train_nll << ',' << m.dev_mse << ',' << m.dev_rouge1 << '\n';
}

}  // namespace opinrec
