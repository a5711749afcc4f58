#include "opinrec/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace opinrec {

using nlohmann::json;

namespace {

// Files shorter than this are too small for the wrong-schema heuristic;
// their malformed lines are reported but never fatal.
constexpr std::size_t kMinLinesForSchemaCheck = 20;

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n\f\v");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n\f\v");
  return std::string(s.substr(b, e - b + 1));
}

const std::string& require_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw CorpusError(std::string("missing field ") + key);
  if (!it->is_string()) throw CorpusError(std::string("field ") + key + " is not a string");
  return it->get_ref<const std::string&>();
}

json parse_object(std::string_view line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) throw CorpusError("invalid JSON");
  if (!j.is_object()) throw CorpusError("record is not a JSON object");
  return j;
}

template <typename T, typename Parse>
Ingested<T> ingest(const std::filesystem::path& path, Parse parse) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open " + path.string());
  Ingested<T> out;
  std::string line;
  std::size_t lineno = 0, nonblank = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    ++nonblank;
    try {
      out.records.push_back(parse(line));
    } catch (const std::exception& e) {
      out.diagnostics.push_back({lineno, e.what()});
    }
  }
  if (nonblank >= kMinLinesForSchemaCheck &&
      static_cast<double>(out.diagnostics.size()) > kMaxSkippedFraction * static_cast<double>(nonblank)) {
    std::ostringstream os;
    os << path.string() << ": " << out.diagnostics.size() << " of " << nonblank
       << " lines malformed (wrong schema?); first error at line " << out.diagnostics.front().line
       << ": " << out.diagnostics.front().message;
    throw CorpusError(os.str());
  }
  return out;
}

bool is_word_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c); }

// Length in bytes of a Unicode whitespace code point at s[i], or 0.
std::size_t unicode_space(std::string_view s, std::size_t i) {
  auto c = static_cast<unsigned char>(s[i]);
  if (c == ' ' || (c >= 0x09 && c <= 0x0d)) return 1;
  auto at = [&](std::size_t k) {
    return i + k < s.size() ? static_cast<unsigned char>(s[i + k]) : 0u;
  };
  if (c == 0xc2 && (at(1) == 0x85 || at(1) == 0xa0)) return 2;
  if (c == 0xe1 && at(1) == 0x9a && at(2) == 0x80) return 3;
  if (c == 0xe2 && at(1) == 0x80 &&
      ((at(2) >= 0x80 && at(2) <= 0x8a) || at(2) == 0xa8 || at(2) == 0xa9 || at(2) == 0xaf))
    return 3;
  if (c == 0xe2 && at(1) == 0x81 && at(2) == 0x9f) return 3;
  if (c == 0xe3 && at(1) == 0x80 && at(2) == 0x80) return 3;
  return 0;
}

}  // namespace

Review parse_review(std::string_view line) {
  json j = parse_object(line);
  Review r;
  r.review_id = require_string(j, "review_id");
  r.user_id = require_string(j, "user_id");
  r.product_id = require_string(j, "product_id");
  r.text = require_string(j, "text");
  if (r.review_id.empty() || r.user_id.empty() || r.product_id.empty())
    throw CorpusError("empty identifier");
  if (trim(r.text).empty()) throw CorpusError("empty review text");
  auto s = j.find("score");
  if (s == j.end() || !s->is_number()) throw CorpusError("missing numeric field score");
  r.score = s->get<double>();
  if (!(r.score >= 0.0 && r.score <= 5.0)) throw CorpusError("score out of range");
  auto t = j.find("timestamp");
  if (t == j.end() || !t->is_number_integer()) throw CorpusError("missing integer field timestamp");
  r.timestamp = t->get<std::int64_t>();
  if (r.timestamp < 0) throw CorpusError("negative timestamp");
  return r;
}

std::string review_to_json(const Review& r) {
  json j = {{"review_id", r.review_id}, {"user_id", r.user_id},   {"product_id", r.product_id},
            {"text", r.text},           {"score", r.score},       {"timestamp", r.timestamp}};
  return j.dump();
}

void write_reviews(const std::filesystem::path& path, const std::vector<Review>& reviews) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write " + path.string());
  for (const auto& r : reviews) out << review_to_json(r) << '\n';
}

Ingested<Review> ingest_reviews(const std::filesystem::path& path) {
  return ingest<Review>(path, parse_review);
}

Ingested<Business> ingest_businesses(const std::filesystem::path& path) {
  return ingest<Business>(path, [](std::string_view line) {
    json j = parse_object(line);
    Business b{require_string(j, "business_id"), ""};
    if (j.contains("name") && j["name"].is_string()) b.name = j["name"].get<std::string>();
    return b;
  });
}

Ingested<UserRecord> ingest_users(const std::filesystem::path& path) {
  return ingest<UserRecord>(path, [](std::string_view line) {
    json j = parse_object(line);
    UserRecord u{require_string(j, "user_id"), ""};
    if (j.contains("name") && j["name"].is_string()) u.name = j["name"].get<std::string>();
    return u;
  });
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(std::move(cur));
    cur.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::size_t w = unicode_space(text, i)) {
      flush();
      i += w;
      continue;
    }
    auto c = static_cast<unsigned char>(text[i]);
    if (is_word_byte(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
      ++i;
    } else if (c == '\'' && i + 1 < text.size() &&
               is_word_byte(static_cast<unsigned char>(text[i + 1])) &&
               !unicode_space(text, i + 1)) {
      flush();
      cur.push_back('\'');
      ++i;
    } else {
      flush();
      tokens.emplace_back(1, static_cast<char>(c));
      ++i;
    }
  }
  flush();
  return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

const std::vector<std::string>& Vocabulary::specials() {
  static const std::vector<std::string> s{"<unk>", "<bos>", "<eos>", "<pad>"};
  return s;
}

Vocabulary::Vocabulary() {
  for (const auto& s : specials()) push(s, 0);
}

void Vocabulary::push(const std::string& token, std::size_t count) {
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
  counts_.push_back(count);
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& documents, int min_count) {
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
  std::map<std::string, std::size_t> freq;
  for (const auto& doc : documents)
    for (const auto& t : doc) ++freq[t];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : freq) {
    if (n < static_cast<std::size_t>(min_count)) continue;
    if (std::find(specials().begin(), specials().end(), tok) != specials().end()) continue;
    kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  v.min_count_ = min_count;
  for (auto& [tok, n] : kept) v.push(tok, n);
  return v;
}

int Vocabulary::index(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int index) const {
  return tokens_.at(static_cast<std::size_t>(index));
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(index(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

void Vocabulary::save_tsv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write " + path.string());
  out << "#min_count\t" << min_count_ << '\n';
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    out << tokens_[i] << '\t' << i << '\t' << counts_[i] << '\n';
}

Vocabulary Vocabulary::load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open vocabulary " + path.string());
  Vocabulary v;
  v.index_.clear();
  v.tokens_.clear();
  v.counts_.clear();
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok, a, b;
    std::getline(ls, tok, '\t');
    std::getline(ls, a, '\t');
    std::getline(ls, b, '\t');
    if (tok == "#min_count") {
      v.min_count_ = std::stoi(a);
      continue;
    }
    if (static_cast<std::size_t>(std::stoul(a)) != v.tokens_.size())
      throw CorpusError("vocabulary indices are not contiguous at token " + tok);
    v.push(tok, std::stoul(b));
  }
  for (int i = 0; i < kSpecialCount; ++i)
    if (v.tokens_.size() <= static_cast<std::size_t>(i) || v.tokens_[i] != specials()[i])
      throw CorpusError("vocabulary file lacks special tokens");
  return v;
}

Vocabulary build_vocabulary(const std::vector<Review>& reviews, int min_count) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(reviews.size());
  for (const auto& r : reviews) docs.push_back(tokenize(r.text));
  return Vocabulary::build(docs, min_count);
}

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "dev") return Split::Dev;
  if (s == "test") return Split::Test;
  throw CorpusError("unknown split '" + s + "'");
}

std::vector<HeldOutPair> read_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open pairs file " + path.string());
  std::vector<HeldOutPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    HeldOutPair p;
    std::string split;
    std::getline(ls, p.user_id, '\t');
    std::getline(ls, p.product_id, '\t');
    std::getline(ls, split, '\t');
    split = trim(split);
    if (p.user_id.empty() || p.product_id.empty())
      throw CorpusError(path.string() + ":" + std::to_string(lineno) + ": expected user<TAB>product<TAB>split");
    p.split = split.empty() ? Split::Train : split_from_string(split);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void write_pairs(const std::filesystem::path& path, const std::vector<HeldOutPair>& pairs) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write " + path.string());
  for (const auto& p : pairs) out << p.user_id << '\t' << p.product_id << '\t' << to_string(p.split) << '\n';
}

void sort_temporal(std::vector<Review>& reviews) {
  std::sort(reviews.begin(), reviews.end(), [](const Review& a, const Review& b) {
    return std::tie(a.timestamp, a.review_id) < std::tie(b.timestamp, b.review_id);
  });
}

void keep_most_recent(std::vector<Review>& reviews, std::size_t cap) {
  if (reviews.size() > cap)
    reviews.erase(reviews.begin(), reviews.begin() + static_cast<std::ptrdiff_t>(reviews.size() - cap));
}

std::vector<RecommendationInstance> assemble_instances(const std::vector<Review>& reviews,
                                                       const std::vector<HeldOutPair>& pairs,
                                                       std::vector<Diagnostic>* diagnostics,
                                                       const CorpusLimits& limits) {
  std::unordered_map<std::string, std::vector<const Review*>> by_user, by_product;
  for (const auto& r : reviews) {
    by_user[r.user_id].push_back(&r);
    by_product[r.product_id].push_back(&r);
  }
  auto report = [&](const HeldOutPair& p, const std::string& why) {
    if (diagnostics) diagnostics->push_back({0, "pair (" + p.user_id + ", " + p.product_id + ") skipped: " + why});
  };

  std::vector<RecommendationInstance> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& p : pairs) {
    if (!seen.emplace(p.user_id, p.product_id).second) {
      report(p, "duplicate pair");
      continue;
    }
    RecommendationInstance inst;
    inst.user_id = p.user_id;
    inst.product_id = p.product_id;
    const Review* gold = nullptr;
    for (const Review* r : by_user[p.user_id]) {
      if (r->product_id == p.product_id) {
        if (!gold || std::tie(r->timestamp, r->review_id) > std::tie(gold->timestamp, gold->review_id)) gold = r;
      } else {
        inst.user_reviews.push_back(*r);
      }
    }
    if (!gold) {
      report(p, "no review by the user for the product");
      continue;
    }
    for (const Review* r : by_product[p.product_id])
      if (r->user_id != p.user_id) inst.target_reviews.push_back(*r);
    if (inst.target_reviews.empty()) {
      report(p, "product has no other reviews");
      continue;
    }
    if (inst.user_reviews.empty()) {
      report(p, "user has no other reviews");
      continue;
    }
    sort_temporal(inst.target_reviews);
    sort_temporal(inst.user_reviews);
    keep_most_recent(inst.target_reviews, limits.max_sequence);
    keep_most_recent(inst.user_reviews, limits.max_sequence);
    inst.gold_review_id = gold->review_id;
    inst.gold_score = gold->score;
    inst.gold_review = tokenize(gold->text);
    if (inst.gold_review.size() > limits.max_review_tokens) inst.gold_review.resize(limits.max_review_tokens);
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<Review> DatasetSplit::training_reviews() const {
  std::set<std::string> held;
  for (const auto* part : {&dev, &test})
    for (const auto& inst : *part) held.insert(inst.gold_review_id);
  std::vector<Review> out;
  for (const auto& r : reviews)
    if (!held.count(r.review_id)) out.push_back(r);
  return out;
}

const std::vector<RecommendationInstance>& DatasetSplit::part(Split s) const {
  return s == Split::Train ? train : s == Split::Dev ? dev : test;
}

std::vector<RecommendationInstance>& DatasetSplit::part(Split s) {
  return s == Split::Train ? train : s == Split::Dev ? dev : test;
}

DatasetSplit make_split(std::vector<Review> reviews, const std::vector<HeldOutPair>& pairs,
                        std::vector<Diagnostic>* diagnostics, const CorpusLimits& limits) {
  DatasetSplit ds;
  for (Split s : {Split::Train, Split::Dev, Split::Test}) {
    std::vector<HeldOutPair> subset;
    for (const auto& p : pairs)
      if (p.split == s) subset.push_back(p);
    ds.part(s) = assemble_instances(reviews, subset, diagnostics, limits);
  }
  std::set<std::pair<std::string, std::string>> used;
  for (Split s : {Split::Train, Split::Dev, Split::Test})
    for (const auto& inst : ds.part(s))
      if (!used.emplace(inst.user_id, inst.product_id).second)
        throw CorpusError("pair (" + inst.user_id + ", " + inst.product_id + ") appears in more than one split");
  ds.reviews = std::move(reviews);
  return ds;
}

namespace {

json ids_of(const std::vector<Review>& rs) {
  json a = json::array();
  for (const auto& r : rs) a.push_back(r.review_id);
  return a;
}

}  // namespace

void write_instances(const std::filesystem::path& path, const DatasetSplit& split) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write " + path.string());
  for (Split s : {Split::Train, Split::Dev, Split::Test}) {
    for (const auto& inst : split.part(s)) {
      json j = {{"split", to_string(s)},
                {"user_id", inst.user_id},
                {"product_id", inst.product_id},
                {"gold_review_id", inst.gold_review_id},
                {"gold_score", inst.gold_score},
                {"gold_tokens", inst.gold_review},
                {"target_reviews", ids_of(inst.target_reviews)},
                {"user_reviews", ids_of(inst.user_reviews)},
                {"neighbor_reviews", ids_of(inst.neighbor_reviews)}};
      out << j.dump() << '\n';
    }
  }
}

DatasetSplit read_instances(const std::filesystem::path& path, std::vector<Review> reviews) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open instances " + path.string());
  std::unordered_map<std::string, const Review*> by_id;
  for (const auto& r : reviews) by_id.emplace(r.review_id, &r);
  auto resolve = [&](const json& ids, std::size_t lineno) {
    std::vector<Review> out;
    for (const auto& id : ids) {
      auto it = by_id.find(id.get<std::string>());
      if (it == by_id.end())
        throw CorpusError(path.string() + ":" + std::to_string(lineno) + ": unknown review id " + id.get<std::string>());
      out.push_back(*it->second);
    }
    return out;
  };
  DatasetSplit ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw CorpusError(path.string() + ":" + std::to_string(lineno) + ": invalid JSON");
    RecommendationInstance inst;
    inst.user_id = j.at("user_id").get<std::string>();
    inst.product_id = j.at("product_id").get<std::string>();
    inst.gold_review_id = j.at("gold_review_id").get<std::string>();
    inst.gold_score = j.at("gold_score").get<double>();
    inst.gold_review = j.at("gold_tokens").get<std::vector<std::string>>();
    inst.target_reviews = resolve(j.at("target_reviews"), lineno);
    inst.user_reviews = resolve(j.at("user_reviews"), lineno);
    inst.neighbor_reviews = resolve(j.at("neighbor_reviews"), lineno);
    ds.part(split_from_string(j.at("split").get<std::string>())).push_back(std::move(inst));
  }
  ds.reviews = std::move(reviews);
  return ds;
}

}  // namespace opinrec
