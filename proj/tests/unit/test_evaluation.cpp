#include "doctest.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "opinrec/evaluation.hpp"
#include "support.hpp"

using namespace opinrec;
using opinrec::testing::TempDir;

namespace {

Review rv(const std::string& user, const std::string& product, double score, long ts = 0) {
  return Review{user + product + std::to_string(ts), user, product, "nice place", score, ts};
}

std::vector<std::string> words(const std::string& s) { return tokenize(s); }

}  // namespace

TEST_CASE("mse examples") {
  std::vector<double> a = {1.5, 2.0, 4.0};
  CHECK(mse(a, a) == 0.0);
  std::vector<double> p = {3, 3}, g = {5, 1};
  CHECK(mse(p, g) == 4.0);
  std::vector<double> shorter = {1.0};
  CHECK_THROWS(mse(shorter, g));
}

TEST_CASE("mse matches a summation loop and ignores order") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(0, 5);
  std::vector<double> p(10), g(10);
  for (int i = 0; i < 10; ++i) {
    p[i] = d(rng);
    g[i] = d(rng);
  }
  double ref = 0;
  for (int i = 0; i < 10; ++i) ref += (p[i] - g[i]) * (p[i] - g[i]) / 10.0;
  CHECK(mse(p, g) == doctest::Approx(ref).epsilon(1e-14));
  std::vector<int> idx(10);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<double> pp, gg;
  for (int i : idx) {
    pp.push_back(p[i]);
    gg.push_back(g[i]);
  }
  CHECK(mse(pp, gg) == doctest::Approx(mse(p, g)).epsilon(1e-14));
}

TEST_CASE("rouge1 examples") {
  auto same = rouge1(words("the soup was hot"), words("the soup was hot"));
  CHECK(same.precision == 1.0);
  CHECK(same.recall == 1.0);
  CHECK(same.f1 == 1.0);
  auto disjoint = rouge1(words("a b"), words("c d"));
  CHECK(disjoint.recall == 0.0);
  CHECK(disjoint.f1 == 0.0);
  auto clipped = rouge1(words("a a b"), words("a b b"));
  CHECK(clipped.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(clipped.recall == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  auto empty = rouge1(std::vector<std::string>{}, words("a"));
  CHECK(empty.precision == 0.0);
  CHECK(empty.recall == 0.0);
  CHECK_THROWS(rouge1(words("a"), std::vector<std::string>{}));
  std::vector<int> c = {4, 4, 5}, r = {4, 5, 5};
  CHECK(rouge1(c, r).recall == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("rs_average examples") {
  RecommendationInstance inst;
  inst.target_reviews = {rv("a", "p", 4)};
  CHECK(rs_average(inst) == 4.0);
  inst.target_reviews = {rv("a", "p", 2), rv("b", "p", 4)};
  CHECK(rs_average(inst) == 3.0);
  std::vector<double> seven = {1, 5, 3.5, 2, 2, 4, 0.5};
  inst.target_reviews.clear();
  double total = 0;
  for (double s : seven) {
    inst.target_reviews.push_back(rv("x", "p", s));
    total += s;
  }
  CHECK(rs_average(inst) == doctest::Approx(total / 7.0).epsilon(1e-15));
  inst.target_reviews = {rv("a", "p", 3.3), rv("b", "p", 3.3), rv("c", "p", 3.3)};
  CHECK(rs_average(inst) == doctest::Approx(3.3).epsilon(1e-15));
}

TEST_CASE("RS-Linear adds user and product deviations to the global mean") {
  LinearBaseline single({rv("u", "p", 4)});
  CHECK(single.predict("u", "p") == 4.0);
  CHECK(single.predict("zz", "qq") == 4.0);
  // Six reviews: global mean 3, u1 mean 4, u2 mean 2, p1 mean 3.5, p2 mean 2, p3 mean 3.5.
  std::vector<Review> six = {rv("u1", "p1", 5), rv("u1", "p2", 3), rv("u1", "p3", 4),
                             rv("u2", "p1", 2), rv("u2", "p2", 1), rv("u2", "p3", 3)};
  LinearBaseline lin(six);
  CHECK(lin.global_mean() == 3.0);
  CHECK(lin.predict("u1", "p2") == doctest::Approx(3.0 + 1.0 - 1.0).epsilon(1e-15));
  CHECK(lin.predict("u2", "p1") == doctest::Approx(3.0 - 1.0 + 0.5).epsilon(1e-15));
  CHECK(lin.predict("u9", "p3") == doctest::Approx(3.5).epsilon(1e-15));
  LinearBaseline flat({rv("a", "x", 2.5), rv("b", "y", 2.5), rv("a", "y", 2.5)});
  CHECK(flat.predict("a", "x") == 2.5);
  CHECK(flat.predict("b", "nope") == 2.5);
}

TEST_CASE("RS-Item examples") {
  std::unordered_map<std::string, std::vector<double>> vecs = {
      {"t", {1, 0}}, {"a", {1, 1}}, {"b", {1, -1}}, {"c", {0, 1}}, {"d", {-1, 0}}};
  ItemKnnBaseline one(vecs, {rv("u", "c", 4.5)}, 3);
  CHECK(one.predict("u", "t") == 4.5);
  ItemKnnBaseline sym(vecs, {rv("u", "a", 2), rv("u", "b", 4)}, 5);
  CHECK(*sym.predict("u", "t") == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(!sym.predict("nobody", "t").has_value());
  CHECK(!sym.predict("u", "unknown").has_value());
}

TEST_CASE("RS-Item agrees with an exhaustive nearest-neighbor computation") {
  std::unordered_map<std::string, std::vector<double>> vecs = {
      {"t", {0.9, 0.2, 0.1}}, {"p1", {1.0, 0.1, 0.0}}, {"p2", {0.2, 0.9, 0.3}}, {"p3", {0.8, 0.5, 0.1}}, {"p4", {0.0, 0.1, 1.0}}};
  std::vector<Review> ratings = {rv("u", "p1", 5), rv("u", "p2", 1), rv("u", "p3", 3), rv("u", "p4", 2)};
  ItemKnnBaseline knn(vecs, ratings, 2);
  auto cos = [&](const std::string& a, const std::string& b) {
    auto &x = vecs[a], &y = vecs[b];
    double d = 0, nx = 0, ny = 0;
    for (int i = 0; i < 3; ++i) {
      d += x[i] * y[i];
      nx += x[i] * x[i];
      ny += y[i] * y[i];
    }
    return d / std::sqrt(nx * ny);
  };
  std::vector<std::pair<double, double>> sims;
  for (auto& r : ratings) sims.push_back({cos("t", r.product_id), r.score});
  std::sort(sims.begin(), sims.end(), [](auto& a, auto& b) { return a.first > b.first; });
  double expected = (sims[0].first * sims[0].second + sims[1].first * sims[1].second) / (sims[0].first + sims[1].first);
  CHECK(*knn.predict("u", "t") == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("RS-MF reconstructs a masked cell of a low-rank matrix") {
  std::vector<std::string> users = {"u0", "u1", "u2", "u3", "u4", "u5"};
  std::vector<std::string> products = {"p0", "p1", "p2", "p3", "p4"};
  std::vector<double> pu = {1.0, 1.5, 2.0, 1.2, 0.8, 1.7};
  std::vector<double> pp = {1.5, 2.0, 2.5, 1.8, 2.2};
  std::vector<Review> reviews;
  for (std::size_t u = 0; u < users.size(); ++u)
    for (std::size_t p = 0; p < products.size(); ++p)
      if (!(u == 2 && p == 3)) reviews.push_back(rv(users[u], products[p], pu[u] * pp[p]));
  MfBaseline mf(reviews, FactorizeOptions{.topics = 2, .sweeps = 3000, .tolerance = 0.0, .seed = 2, .masked = true});
  CHECK(std::abs(mf.raw("u2", "p3") - pu[2] * pp[3]) < 0.1);
  auto fallback = mf.predict("stranger", "p1", 2.75);
  CHECK(fallback.fallback);
  CHECK(fallback.score == 2.75);
}

TEST_CASE("RS-MF clamps to the rating scale") {
  RatingMatrix m = build_matrix({rv("u", "p", 5)});
  TriFactorization f;
  f.F = Eigen::MatrixXd::Constant(1, 1, 1.0);
  f.S = Eigen::MatrixXd::Constant(1, 1, 5.7);
  f.T = Eigen::MatrixXd::Constant(1, 1, 1.0);
  MfBaseline mf(m, f);
  CHECK(mf.raw("u", "p") == doctest::Approx(5.7));
  CHECK(mf.predict("u", "p", 3.0).score == 5.0);
  CHECK(!mf.predict("u", "p", 3.0).fallback);
}

TEST_CASE("reports are written as CSV and tables") {
  TempDir dir;
  std::vector<SystemReport> rows(2);
  rows[0].system = "RS-Average";
  rows[0].mse = 1.25;
  rows[1].system = "Joint";
  rows[1].mse = 0.5;
  rows[1].rouge = RougeScore{0.25, 0.5, 1.0 / 3.0};
  write_report_csv(dir / "r.csv", rows);
  std::ifstream in(dir / "r.csv");
  std::string header, a, b;
  std::getline(in, header);
  std::getline(in, a);
  std::getline(in, b);
  CHECK(header == "system,mse,rouge1_precision,rouge1_recall,rouge1_f1");
  CHECK(a == "RS-Average,1.25,,,");
  CHECK(b.rfind("Joint,0.5,0.25,0.5,", 0) == 0);
  auto table = format_report_table(rows);
  CHECK(table.find("RS-Average") != std::string::npos);
  CHECK(table.find("0.500") != std::string::npos);
}
