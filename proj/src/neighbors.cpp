#include "opinrec/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace opinrec {

RatingMatrix build_matrix(const std::vector<Review>& reviews) {
  RatingMatrix m;
  for (const auto& r : reviews) {
    if (m.product_index.emplace(r.product_id, m.product_ids.size()).second) m.product_ids.push_back(r.product_id);
    if (m.user_index.emplace(r.user_id, m.user_ids.size()).second) m.user_ids.push_back(r.user_id);
  }
  m.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.products()), static_cast<Eigen::Index>(m.users()));
  m.mask = m.values;
  std::vector<const Review*> ordered;
  for (const auto& r : reviews) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(), [](const Review* a, const Review* b) {
    return std::tie(a->timestamp, a->review_id) < std::tie(b->timestamp, b->review_id);
  });
  for (const Review* r : ordered) {
    auto p = static_cast<Eigen::Index>(m.product_index.at(r->product_id));
    auto u = static_cast<Eigen::Index>(m.user_index.at(r->user_id));
    m.values(p, u) = r->score;
    m.mask(p, u) = 1.0;
  }
  return m;
}

FactorInit random_init(const Eigen::MatrixXd& M, std::size_t topics, std::uint64_t seed) {
  if (topics == 0) throw std::invalid_argument("factorize needs at least one topic");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double mean = M.size() ? std::max(M.mean(), 0.0) : 0.0;
  double scale = std::sqrt(mean / static_cast<double>(topics));
  if (scale == 0.0) scale = 1.0;
  auto draw = [&](Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd x(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) x(i, j) = unit(rng) * scale;
    return x;
  };
  auto k = static_cast<Eigen::Index>(topics);
  FactorInit init;
  init.F = draw(M.rows(), k);
  init.S = draw(k, k);
  init.T = draw(M.cols(), k);
  return init;
}

namespace {

void multiplicative(Eigen::MatrixXd& X, const Eigen::MatrixXd& num, const Eigen::MatrixXd& den,
                    std::size_t& floor_events) {
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      double d = den(i, j);
      if (!(d > kDenominatorFloor)) {
        d = kDenominatorFloor;
        ++floor_events;
      }
      X(i, j) *= std::max(num(i, j), 0.0) / d;
    }
  }
}

double objective(const Eigen::MatrixXd& M, const Eigen::MatrixXd* mask, const TriFactorization& f) {
  Eigen::MatrixXd r = M - f.reconstruct();
  if (mask) r = r.cwiseProduct(*mask);
  return r.norm();
}

}  // namespace

TriFactorization factorize(const Eigen::MatrixXd& M, const Eigen::MatrixXd* mask,
                           const FactorizeOptions& options, std::optional<FactorInit> init) {
  if (options.topics == 0) throw std::invalid_argument("factorize needs at least one topic");
  if ((M.array() < 0.0).any()) throw std::invalid_argument("factorize needs a nonnegative matrix");
  if (mask && (mask->rows() != M.rows() || mask->cols() != M.cols()))
    throw std::invalid_argument("mask shape differs from matrix");
  FactorInit start = init ? std::move(*init) : random_init(M, options.topics, options.seed);
  TriFactorization f{std::move(start.F), std::move(start.S), std::move(start.T), {}, 0};
  const Eigen::MatrixXd WM = mask ? Eigen::MatrixXd(M.cwiseProduct(*mask)) : M;
  f.objective.push_back(objective(M, mask, f));

  for (std::size_t sweep = 0; sweep < options.sweeps; ++sweep) {
    if (options.rule == UpdateRule::Standard) {
      auto weighted = [&]() -> Eigen::MatrixXd {
        Eigen::MatrixXd r = f.reconstruct();
        return mask ? Eigen::MatrixXd(r.cwiseProduct(*mask)) : r;
      };
      Eigen::MatrixXd ST = f.S * f.T.transpose();
      multiplicative(f.F, WM * ST.transpose(), weighted() * ST.transpose(), f.floor_events);
      multiplicative(f.S, f.F.transpose() * WM * f.T, f.F.transpose() * weighted() * f.T, f.floor_events);
      Eigen::MatrixXd FS = f.F * f.S;
      multiplicative(f.T, WM.transpose() * FS, weighted().transpose() * FS, f.floor_events);
    } else {
      Eigen::MatrixXd n = WM * f.T * f.S.transpose();
      multiplicative(f.F, n, f.F * (f.F.transpose() * n), f.floor_events);
      multiplicative(f.S, f.F.transpose() * WM * f.T,
                     f.F.transpose() * f.F * f.S * (f.T.transpose() * f.T), f.floor_events);
      n = WM.transpose() * f.F * f.S;
      multiplicative(f.T, n, f.T * (f.T.transpose() * n), f.floor_events);
    }
    double prev = f.objective.back();
    double cur = objective(M, mask, f);
    f.objective.push_back(cur);
    if (options.tolerance > 0.0 && prev > 0.0 && (prev - cur) / prev < options.tolerance) break;
  }
  return f;
}

TriFactorization factorize(const RatingMatrix& M, const FactorizeOptions& options) {
  return factorize(M.values, options.masked ? &M.mask : nullptr, options);
}

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& T) {
  Eigen::MatrixXd out = T;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    double s = out.row(i).sum();
    if (s > 0.0)
      out.row(i) /= s;
    else
      out.row(i).setConstant(1.0 / static_cast<double>(out.cols()));
  }
  return out;
}

double user_similarity(const Eigen::MatrixXd& T, std::size_t i, std::size_t j) {
  if (i >= static_cast<std::size_t>(T.rows()) || j >= static_cast<std::size_t>(T.rows()))
    throw std::out_of_range("user index outside factor");
  return T.row(static_cast<Eigen::Index>(i)).dot(T.row(static_cast<Eigen::Index>(j)));
}

NeighborIndex::NeighborIndex(std::vector<std::string> user_ids, Eigen::MatrixXd memberships)
    : ids_(std::move(user_ids)), T_(normalize_rows(memberships)) {
  if (static_cast<Eigen::Index>(ids_.size()) != T_.rows())
    throw std::invalid_argument("membership rows do not match user ids");
  for (std::size_t i = 0; i < ids_.size(); ++i) index_.emplace(ids_[i], i);
}

NeighborIndex::NeighborIndex(const RatingMatrix& matrix, const TriFactorization& factors)
    : NeighborIndex(matrix.user_ids, factors.T) {}

std::size_t NeighborIndex::row(const std::string& user) const {
  auto it = index_.find(user);
  if (it == index_.end()) throw std::out_of_range("unknown user " + user);
  return it->second;
}

double NeighborIndex::similarity(const std::string& a, const std::string& b) const {
  return user_similarity(T_, row(a), row(b));
}

std::vector<std::string> NeighborIndex::find_neighbors(const std::string& user, double eta) const {
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in [0,1]");
  std::size_t i = row(user);
  std::vector<std::string> out;
  for (std::size_t j = 0; j < ids_.size(); ++j)
    if (j != i && user_similarity(T_, i, j) > eta) out.push_back(ids_[j]);
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t attach_neighbors(std::vector<RecommendationInstance>& instances, const std::vector<Review>& pool,
                             const NeighborIndex& index, double eta, const CorpusLimits& limits) {
  std::unordered_map<std::string, std::vector<const Review*>> by_user;
  for (const auto& r : pool) by_user[r.user_id].push_back(&r);
  std::size_t lonely = 0;
  for (auto& inst : instances) {
    inst.neighbor_reviews.clear();
    if (index.contains(inst.user_id)) {
      for (const auto& n : index.find_neighbors(inst.user_id, eta))
        for (const Review* r : by_user[n]) inst.neighbor_reviews.push_back(*r);
    }
    sort_temporal(inst.neighbor_reviews);
    keep_most_recent(inst.neighbor_reviews, limits.max_sequence);
    if (inst.neighbor_reviews.empty()) ++lonely;
  }
  return lonely;
}

}  // namespace opinrec
