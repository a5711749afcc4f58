#include "doctest.h"

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "opinrec/corpus.hpp"
#include "support.hpp"

using namespace opinrec;
using opinrec::testing::TempDir;
using opinrec::testing::write_file;

namespace {

std::string review_line(const std::string& id, const std::string& user, const std::string& product, double score,
                        long ts, const std::string& text) {
  return review_to_json(Review{id, user, product, text, score, ts});
}

Review rv(const std::string& id, const std::string& user, const std::string& product, double score, long ts,
          const std::string& text = "good food") {
  return Review{id, user, product, text, score, ts};
}

}  // namespace

TEST_CASE("tokenize splits punctuation and keeps clitics") {
  CHECK(tokenize("It's SO-SO.") == std::vector<std::string>{"it", "'s", "so", "-", "so", "."});
  CHECK(tokenize("") .empty());
  CHECK(tokenize("   \t\n").empty());
  CHECK(tokenize("Great   pizza!!") == std::vector<std::string>{"great", "pizza", "!", "!"});
  CHECK(tokenize("caf\xc3\xa9 ok") == std::vector<std::string>{"caf\xc3\xa9", "ok"});
}

TEST_CASE("tokenize is idempotent on its own output") {
  std::mt19937_64 rng(7);
  const std::string alphabet = "abcXYZ '.,!?-;:()\t\n019";
  for (int trial = 0; trial < 300; ++trial) {
    std::string s;
    std::size_t n = rng() % 40;
    for (std::size_t i = 0; i < n; ++i) s += alphabet[rng() % alphabet.size()];
    auto once = tokenize(s);
    CHECK(tokenize(join_tokens(once)) == once);
  }
}

TEST_CASE("ingest_reviews reads valid lines and reports malformed ones") {
  TempDir dir;
  std::string content;
  for (int i = 0; i < 10; ++i)
    content += review_line("r" + std::to_string(i), "u" + std::to_string(i % 3), "p1", 3.0, 100 + i, "fine") + "\n";
  content += "{not json\n";
  content += R"({"review_id":"x","user_id":"u","product_id":"p","text":"t","score":7,"timestamp":1})" "\n";
  write_file(dir / "r.jsonl", content);
  auto got = ingest_reviews(dir / "r.jsonl");
  CHECK(got.records.size() == 10);
  REQUIRE(got.diagnostics.size() == 2);
  CHECK(got.diagnostics[0].line == 11);
  CHECK(got.diagnostics[1].line == 12);
  CHECK(got.diagnostics[1].message.find("score") != std::string::npos);
}

TEST_CASE("ingest_reviews rejects missing fields and empty text") {
  CHECK_THROWS_AS(parse_review(R"({"review_id":"x","user_id":"u","text":"t","score":3,"timestamp":1})"), CorpusError);
  CHECK_THROWS_AS(parse_review(R"({"review_id":"x","user_id":"u","product_id":"p","text":"  ","score":3,"timestamp":1})"),
                  CorpusError);
  CHECK_THROWS_AS(parse_review(R"({"review_id":"x","user_id":"u","product_id":"p","text":"a","score":-1,"timestamp":1})"),
                  CorpusError);
  auto r = parse_review(R"({"review_id":"x","user_id":"u","product_id":"p","text":"a","score":5,"timestamp":0})");
  CHECK(r.score == 5.0);
}

TEST_CASE("ingest_reviews fails on a missing file and on a wrong schema") {
  TempDir dir;
  CHECK_THROWS_AS(ingest_reviews(dir / "absent.jsonl"), CorpusError);
  std::string content;
  for (int i = 0; i < 30; ++i) content += R"({"business_id":"b","name":"n"})" "\n";
  write_file(dir / "biz.jsonl", content);
  CHECK_THROWS_AS(ingest_reviews(dir / "biz.jsonl"), CorpusError);
}

TEST_CASE("reviews round trip through JSONL") {
  TempDir dir;
  std::vector<Review> reviews = {rv("a", "u1", "p1", 4.5, 3, "Tasty \"ramen\"\nwith tabs\t."),
                                 rv("b", "u2", "p1", 0.0, 0, "caf\xc3\xa9 au lait")};
  write_reviews(dir / "out.jsonl", reviews);
  auto back = ingest_reviews(dir / "out.jsonl");
  CHECK(back.diagnostics.empty());
  CHECK(back.records == reviews);
}

TEST_CASE("vocabulary keeps frequent tokens in frequency order") {
  std::vector<std::vector<std::string>> docs = {{"b", "a", "b", "c"}, {"a", "b", "d"}, {"c", "e"}};
  auto v = Vocabulary::build(docs, 2);
  std::map<std::string, std::size_t> freq;
  for (auto& d : docs)
    for (auto& t : d) ++freq[t];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [t, c] : freq)
    if (c >= 2) kept.push_back({t, c});
  std::sort(kept.begin(), kept.end(), [](auto& x, auto& y) { return x.second != y.second ? x.second > y.second : x.first < y.first; });
  REQUIRE(v.size() == Vocabulary::kSpecialCount + kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    int id = static_cast<int>(Vocabulary::kSpecialCount + i);
    CHECK(v.token(id) == kept[i].first);
    CHECK(v.count(id) == kept[i].second);
  }
  CHECK(v.index("d") == Vocabulary::kUnk);
  CHECK(v.token(Vocabulary::kBos) == "<bos>");
  CHECK(v.decode(v.encode({"a", "zzz"})) == std::vector<std::string>{"a", "<unk>"});
}

TEST_CASE("vocabulary drops tokens below min_count") {
  auto v = Vocabulary::build({{"a", "a", "b"}}, 2);
  CHECK(v.size() == Vocabulary::kSpecialCount + 1);
  CHECK(v.contains("a"));
  CHECK(!v.contains("b"));
}

TEST_CASE("vocabulary round trips through TSV") {
  TempDir dir;
  auto v = Vocabulary::build({{"x", "y", "x", "z", "z", "z"}}, 1);
  v.save_tsv(dir / "vocab.tsv");
  auto w = Vocabulary::load_tsv(dir / "vocab.tsv");
  REQUIRE(w.size() == v.size());
  CHECK(w.min_count() == 1);
  for (std::size_t i = 0; i < v.size(); ++i) {
    CHECK(w.token(static_cast<int>(i)) == v.token(static_cast<int>(i)));
    CHECK(w.count(static_cast<int>(i)) == v.count(static_cast<int>(i)));
  }
}

namespace {

// Five users, three products, with a deliberate mix of pairs that can and
// cannot be assembled.
std::vector<Review> five_user_fixture() {
  return {rv("1", "u1", "p1", 4, 10), rv("2", "u1", "p2", 3, 20), rv("3", "u2", "p1", 2, 5),
          rv("4", "u2", "p3", 5, 30), rv("5", "u3", "p1", 1, 40), rv("6", "u3", "p1", 2, 50),
          rv("7", "u3", "p2", 4, 15), rv("8", "u4", "p2", 3, 25), rv("9", "u5", "p3", 4, 35),
          rv("10", "u5", "p1", 3, 45), rv("11", "u4", "p3", 2, 8)};
}

}  // namespace

TEST_CASE("assemble_instances keeps exactly the pairs meeting the preconditions") {
  auto reviews = five_user_fixture();
  std::vector<HeldOutPair> pairs;
  for (auto u : {"u1", "u2", "u3", "u4", "u5", "u6"})
    for (auto p : {"p1", "p2", "p3", "p4"}) pairs.push_back({u, p, Split::Train});

  std::set<std::pair<std::string, std::string>> expected;
  for (auto& pr : pairs) {
    bool has_gold = false, other_product = false, other_user = false;
    for (auto& r : reviews) {
      if (r.user_id == pr.user_id && r.product_id == pr.product_id) has_gold = true;
      if (r.product_id == pr.product_id && r.user_id != pr.user_id) other_product = true;
      if (r.user_id == pr.user_id && r.product_id != pr.product_id) other_user = true;
    }
    if (has_gold && other_product && other_user) expected.insert({pr.user_id, pr.product_id});
  }
  std::vector<Diagnostic> diags;
  auto insts = assemble_instances(reviews, pairs, &diags);
  std::set<std::pair<std::string, std::string>> got;
  for (auto& i : insts) got.insert({i.user_id, i.product_id});
  CHECK(got == expected);
  CHECK(diags.size() == pairs.size() - expected.size());
}

TEST_CASE("assemble_instances picks the latest review as gold and never leaks it") {
  auto reviews = five_user_fixture();
  auto insts = assemble_instances(reviews, {{"u3", "p1", Split::Test}});
  REQUIRE(insts.size() == 1);
  auto& inst = insts[0];
  CHECK(inst.gold_review_id == "6");
  CHECK(inst.gold_score == 2.0);
  CHECK(inst.gold_review == tokenize("good food"));
  for (auto& r : inst.target_reviews) CHECK(r.user_id != "u3");
  for (auto& r : inst.user_reviews) CHECK(r.product_id != "p1");
  CHECK(inst.target_reviews.size() == 3);
  CHECK(inst.user_reviews.size() == 1);
  CHECK(inst.neighbor_reviews.empty());
}

TEST_CASE("assembled sequences are temporally ordered and capped") {
  std::mt19937_64 rng(3);
  std::vector<Review> reviews;
  for (int i = 0; i < 200; ++i)
    reviews.push_back(rv("r" + std::to_string(i), "u" + std::to_string(rng() % 10), "p" + std::to_string(rng() % 8),
                         static_cast<double>(rng() % 6), static_cast<long>(rng() % 1000)));
  std::vector<HeldOutPair> pairs;
  for (int u = 0; u < 10; ++u)
    for (int p = 0; p < 8; ++p) pairs.push_back({"u" + std::to_string(u), "p" + std::to_string(p), Split::Train});
  CorpusLimits limits{200, 7};
  auto insts = assemble_instances(reviews, pairs, nullptr, limits);
  CHECK(!insts.empty());
  for (auto& inst : insts) {
    for (auto* seq : {&inst.target_reviews, &inst.user_reviews}) {
      CHECK(seq->size() <= 7);
      for (std::size_t i = 1; i < seq->size(); ++i) CHECK((*seq)[i - 1].timestamp <= (*seq)[i].timestamp);
    }
    for (auto& r : inst.target_reviews) CHECK(r.review_id != inst.gold_review_id);
    for (auto& r : inst.user_reviews) CHECK(r.review_id != inst.gold_review_id);
  }
}

TEST_CASE("make_split rejects pairs in two splits and hides held-out gold") {
  auto reviews = five_user_fixture();
  CHECK_THROWS_AS(make_split(reviews, {{"u1", "p1", Split::Train}, {"u1", "p1", Split::Test}}), CorpusError);
  auto split = make_split(reviews, {{"u1", "p1", Split::Train}, {"u3", "p1", Split::Test}});
  CHECK(split.train.size() == 1);
  CHECK(split.test.size() == 1);
  auto pool = split.training_reviews();
  CHECK(pool.size() == reviews.size() - 1);
  for (auto& r : pool) CHECK(r.review_id != "6");
}

TEST_CASE("instances and pairs round trip through files") {
  TempDir dir;
  auto reviews = five_user_fixture();
  std::vector<HeldOutPair> pairs = {{"u1", "p1", Split::Train}, {"u3", "p1", Split::Dev}, {"u5", "p3", Split::Test}};
  write_pairs(dir / "pairs.tsv", pairs);
  auto pairs_back = read_pairs(dir / "pairs.tsv");
  REQUIRE(pairs_back.size() == pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(pairs_back[i].user_id == pairs[i].user_id);
    CHECK(pairs_back[i].split == pairs[i].split);
  }
  auto split = make_split(reviews, pairs);
  write_instances(dir / "inst.jsonl", split);
  auto back = read_instances(dir / "inst.jsonl", reviews);
  for (auto s : {Split::Train, Split::Dev, Split::Test}) {
    REQUIRE(back.part(s).size() == split.part(s).size());
    for (std::size_t i = 0; i < split.part(s).size(); ++i) {
      CHECK(back.part(s)[i].target_reviews == split.part(s)[i].target_reviews);
      CHECK(back.part(s)[i].user_reviews == split.part(s)[i].user_reviews);
      CHECK(back.part(s)[i].gold_review == split.part(s)[i].gold_review);
    }
  }
}
