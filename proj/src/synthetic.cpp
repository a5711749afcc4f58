#include "opinrec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace opinrec {

namespace {

const std::vector<std::vector<std::string>> kSentiment = {
    {"awful", "terrible", "disgusting", "never", "worst"},
    {"bad", "bland", "rude", "slow", "disappointing"},
    {"mediocre", "meh", "okay", "average", "forgettable"},
    {"decent", "fine", "pleasant", "solid", "reasonable"},
    {"good", "tasty", "friendly", "fresh", "enjoyed"},
    {"amazing", "excellent", "perfect", "outstanding", "love"},
};

const std::vector<std::string> kFiller = {"the", "a", "was", "and", "we", "i", "it", "food", "place", "service"};

std::string word(const char* stem, std::size_t a, std::size_t b) {
  return std::string(stem) + static_cast<char>('a' + a) + std::to_string(b);
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticConfig& c) {
  if (c.users == 0 || c.products < 2 || c.groups == 0 || c.topics == 0)
    throw std::invalid_argument("synthetic corpus needs users, >= 2 products, groups and topics");
  if (c.min_reviews_per_user < 2 || c.max_reviews_per_user < c.min_reviews_per_user ||
      c.max_reviews_per_user > c.products)
    throw std::invalid_argument("bad reviews-per-user range");
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

  SyntheticCorpus out;
  for (std::size_t p = 0; p < c.products; ++p) {
    SyntheticProduct sp;
    sp.id = "p" + std::to_string(p);
    sp.topic = pick(c.topics);
    sp.base = c.base_low + (c.base_high - c.base_low) * unit(rng);
    out.products.push_back(sp);
  }
  for (std::size_t u = 0; u < c.users; ++u) {
    SyntheticUser su;
    su.id = "u" + std::to_string(u);
    su.group = pick(c.groups);
    double centre = c.groups == 1 ? 0.0
                                  : -c.group_offset_spread + 2.0 * c.group_offset_spread *
                                                                 static_cast<double>(su.group) /
                                                                 static_cast<double>(c.groups - 1);
    su.offset = centre + c.user_jitter * gauss(rng);
    out.users.push_back(su);
  }

  std::vector<std::size_t> product_order(c.products);
  std::iota(product_order.begin(), product_order.end(), 0);
  std::int64_t clock = 0;
  std::size_t review_no = 0;
  std::vector<std::vector<std::size_t>> per_user(c.users);
  for (std::size_t u = 0; u < c.users; ++u) {
    std::size_t n = c.min_reviews_per_user + pick(c.max_reviews_per_user - c.min_reviews_per_user + 1);
    std::shuffle(product_order.begin(), product_order.end(), rng);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& prod = out.products[product_order[k]];
      const auto& user = out.users[u];
      double score = std::clamp(prod.base + user.offset + c.noise * gauss(rng), 0.0, 5.0);
      auto level = static_cast<std::size_t>(std::lround(score));
      std::vector<std::string> words;
      for (int i = 0; i < 3; ++i) words.push_back(word("style", user.group, pick(4)));
      for (int i = 0; i < 3; ++i) words.push_back(word("dish", prod.topic, pick(6)));
      for (int i = 0; i < 3; ++i) words.push_back(kSentiment[level][pick(kSentiment[level].size())]);
      for (int i = 0; i < 3; ++i) words.push_back(kFiller[pick(kFiller.size())]);
      std::shuffle(words.begin(), words.end(), rng);
      std::string text;
      for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
      text += " .";
      clock += 1 + static_cast<std::int64_t>(pick(1000));
      Review r;
      r.review_id = "r" + std::to_string(review_no++);
      r.user_id = user.id;
      r.product_id = prod.id;
      r.text = std::move(text);
      r.score = score;
      r.timestamp = clock;
      per_user[u].push_back(out.reviews.size());
      out.reviews.push_back(std::move(r));
    }
  }
  // Shuffle timestamps across users so histories interleave in time.
  std::vector<std::int64_t> stamps;
  for (const auto& r : out.reviews) stamps.push_back(r.timestamp);
  std::shuffle(stamps.begin(), stamps.end(), rng);
  for (std::size_t i = 0; i < out.reviews.size(); ++i) out.reviews[i].timestamp = stamps[i];

  std::vector<HeldOutPair> pairs;
  for (std::size_t u = 0; u < c.users; ++u) {
    auto idx = per_user[u];
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < std::min(c.pairs_per_user, idx.size() - 1); ++k)
      pairs.push_back({out.users[u].id, out.reviews[idx[k]].product_id, Split::Train});
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);
  auto n_test = static_cast<std::size_t>(std::lround(c.test_fraction * static_cast<double>(pairs.size())));
  auto n_dev = static_cast<std::size_t>(std::lround(c.dev_fraction * static_cast<double>(pairs.size())));
  for (std::size_t i = 0; i < pairs.size(); ++i)
    pairs[i].split = i < n_test ? Split::Test : (i < n_test + n_dev ? Split::Dev : Split::Train);
  out.pairs = std::move(pairs);
  return out;
}

}  // namespace opinrec
