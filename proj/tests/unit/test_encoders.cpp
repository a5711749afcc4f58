#include "doctest.h"

#include <cmath>
#include <numeric>
#include <set>

#include "fixtures.hpp"
#include "opinrec/encoders.hpp"
#include "opinrec/model.hpp"
#include "support.hpp"

using namespace opinrec;
using namespace opinrec::nn;
using opinrec::testing::check_gradients;
using opinrec::testing::random_vector;

namespace {

std::vector<Var> constants(Tape& t, const std::vector<std::vector<double>>& rows) {
  std::vector<Var> out;
  for (auto& r : rows) out.push_back(t.constant(r));
  return out;
}

}  // namespace

TEST_CASE("encode_sequence equals manual lstm steps") {
  Rng rng(1);
  Parameters p;
  LstmCell cell(p, "enc", 3, 4, rng, 0.5);
  std::vector<std::vector<double>> xs = {random_vector(3, rng), random_vector(3, rng), random_vector(3, rng)};
  Tape t;
  auto one = encode_sequence(t, cell, constants(t, {xs[0]}));
  REQUIRE(one.size() == 1);
  auto s = cell.step(t, t.constant(xs[0]), cell.initial(t));
  CHECK(one[0].value() == s.h.value());

  auto three = encode_sequence(t, cell, constants(t, xs));
  REQUIRE(three.size() == 3);
  auto st = cell.initial(t);
  for (std::size_t i = 0; i < 3; ++i) {
    st = cell.step(t, t.constant(xs[i]), st);
    CHECK(three[i].value() == st.h.value());
  }
}

TEST_CASE("a zero-weight encoder yields zero states") {
  Rng rng(2);
  Parameters p;
  LstmCell cell(p, "enc", 3, 2, rng);
  for (auto& [n, t] : p) std::fill(t.value.begin(), t.value.end(), 0.0);
  Tape t;
  for (auto& h : encode_sequence(t, cell, constants(t, {{1, 2, 3}, {-1, 0, 4}})))
    CHECK(h.value() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("attend over identical or single states returns that state") {
  Tape t;
  Var w = t.constant({0.3, -0.7}, {1, 2});
  Var b = t.constant({0.1});
  auto same = attend(w, b, constants(t, {{1, 2}, {1, 2}, {1, 2}}));
  for (double a : same.weights.value()) CHECK(a == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(same.vector[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(same.vector[1] == doctest::Approx(2.0).epsilon(1e-15));
  auto single = attend(w, b, constants(t, {{4, -5}}));
  CHECK(single.weights.value() == std::vector<double>{1.0});
  CHECK(single.vector.value() == std::vector<double>{4.0, -5.0});
}

TEST_CASE("attend matches a hand evaluation") {
  std::vector<std::vector<double>> h = {{0.2, -0.5, 1.0}, {0.9, 0.1, -0.3}, {-0.4, 0.6, 0.05}};
  std::vector<double> w = {0.8, -1.1, 0.4};
  double b = -0.2;
  std::vector<double> u(3), e(3);
  for (int i = 0; i < 3; ++i) u[i] = std::tanh(w[0] * h[i][0] + w[1] * h[i][1] + w[2] * h[i][2] + b);
  double z = 0;
  for (int i = 0; i < 3; ++i) z += (e[i] = std::exp(u[i]));
  Tape t;
  auto got = attend(t.constant(w, {1, 3}), t.constant({b}), constants(t, h));
  for (int i = 0; i < 3; ++i) CHECK(got.weights[i] == doctest::Approx(e[i] / z).epsilon(1e-14));
  for (int k = 0; k < 3; ++k) {
    double v = 0;
    for (int i = 0; i < 3; ++i) v += e[i] / z * h[i][k];
    CHECK(got.vector[k] == doctest::Approx(v).epsilon(1e-14));
  }
}

TEST_CASE("attention weights are a distribution and permutation equivariant") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 1 + rng() % 6, d = 1 + rng() % 5;
    std::vector<std::vector<double>> h;
    for (std::size_t i = 0; i < n; ++i) h.push_back(random_vector(d, rng, -3, 3));
    auto w = random_vector(d, rng, -2, 2);
    Tape t;
    auto a = attend(t.constant(w, {1, d}), t.constant({0.3}), constants(t, h));
    double s = 0;
    for (double x : a.weights.value()) {
      CHECK(x > 0.0);
      CHECK(x <= 1.0);
      s += x;
    }
    CHECK(std::abs(s - 1.0) < 1e-9);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<double>> hp;
    for (auto i : perm) hp.push_back(h[i]);
    auto b = attend(t.constant(w, {1, d}), t.constant({0.3}), constants(t, hp));
    for (std::size_t i = 0; i < n; ++i) CHECK(b.weights[i] == doctest::Approx(a.weights[perm[i]]).epsilon(1e-13));
    for (std::size_t k = 0; k < d; ++k) CHECK(b.vector[k] == doctest::Approx(a.vector[k]).epsilon(1e-13));
  }
}

TEST_CASE("attention encoder gradients match finite differences") {
  Rng rng(4);
  Parameters p;
  AttentionEncoder enc(p, "user", 3, 4, rng, 0.5);
  std::vector<std::vector<double>> xs = {random_vector(3, rng), random_vector(3, rng), random_vector(3, rng)};
  auto res = check_gradients(p, [&](Tape& t) { return squared_error(sum(enc.encode(t, constants(t, xs)).vector), 1.0); });
  INFO(res.worst);
  CHECK(res.max_rel_error < 1e-6);
}

TEST_CASE("user, neighbor and product encoders own disjoint parameters") {
  OpinionModel m(opinrec::testing::tiny_config());
  std::set<const Tensor*> seen;
  std::size_t total = 0;
  for (const auto* cell : {&m.user_encoder().cell(), &m.neighbor_encoder().cell(), &m.product_encoder()}) {
    for (auto& [name, t] : m.parameters())
      if (name.rfind(cell->prefix() + ".", 0) == 0) {
        seen.insert(&t);
        ++total;
      }
  }
  CHECK(total == 30);
  CHECK(seen.size() == total);
  CHECK(&m.user_encoder().score_weight() != &m.neighbor_encoder().score_weight());
}

TEST_CASE("inactive encoders are skipped") {
  auto cfg = opinrec::testing::tiny_config();
  auto inst = opinrec::testing::random_instance(cfg.vocab_size, 5, 3, 2, 0);
  OpinionModel full(cfg);
  Tape t;
  auto f = full.forward(t, inst);
  CHECK(f.v_user.valid());
  CHECK(!f.v_neighbor.valid());
  cfg.ablation.user = false;
  OpinionModel no_user(cfg);
  Tape t2;
  CHECK(!no_user.forward(t2, inst).v_user.valid());
}

TEST_CASE("a single neighbor review is encoded as its hidden state") {
  auto cfg = opinrec::testing::tiny_config();
  auto inst = opinrec::testing::random_instance(cfg.vocab_size, 6, 2, 2, 1);
  OpinionModel m(cfg);
  Tape t;
  auto f = m.forward(t, inst);
  Var x = embedding_mean(t, m.embeddings(), inst.neighbor[0].tokens);
  auto h = m.neighbor_encoder().cell().step(t, x, m.neighbor_encoder().cell().initial(t)).h;
  CHECK(f.v_neighbor.value() == h.value());
}
