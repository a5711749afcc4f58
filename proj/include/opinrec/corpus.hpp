#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace opinrec {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Review {
  std::string review_id;
  std::string user_id;
  std::string product_id;
  std::string text;
  double score = 0.0;
  std::int64_t timestamp = 0;

  bool operator==(const Review&) const = default;
};

struct Business {
  std::string business_id;
  std::string name;
};

struct UserRecord {
  std::string user_id;
  std::string name;
};

struct Diagnostic {
  std::size_t line = 0;  // 1-based, 0 when not tied to a line
  std::string message;
};

template <typename T>
struct Ingested {
  std::vector<T> records;
  std::vector<Diagnostic> diagnostics;
};

/// Fraction of malformed lines above which ingestion is considered to be
/// reading the wrong schema.
inline constexpr double kMaxSkippedFraction = 0.10;

Ingested<Review> ingest_reviews(const std::filesystem::path& path);
Ingested<Business> ingest_businesses(const std::filesystem::path& path);
Ingested<UserRecord> ingest_users(const std::filesystem::path& path);

/// Parses one review line; throws CorpusError with a human readable reason.
Review parse_review(std::string_view line);
std::string review_to_json(const Review& r);
void write_reviews(const std::filesystem::path& path, const std::vector<Review>& reviews);

/// Lowercases ASCII, splits on Unicode whitespace, detaches ASCII punctuation.
/// An apostrophe followed by word characters stays attached to them ("'s").
std::vector<std::string> tokenize(std::string_view text);
std::string join_tokens(const std::vector<std::string>& tokens);

class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kPad = 3;
  static constexpr int kSpecialCount = 4;
  static const std::vector<std::string>& specials();

  Vocabulary();

  /// Retains tokens seen at least `min_count` times, ordered by descending
  /// frequency then lexicographically.
  static Vocabulary build(const std::vector<std::vector<std::string>>& documents, int min_count);

  int index(const std::string& token) const;  // UNK when absent
  const std::string& token(int index) const;
  std::size_t count(int index) const { return counts_.at(static_cast<std::size_t>(index)); }
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  std::size_t size() const { return tokens_.size(); }
  int min_count() const { return min_count_; }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  /// TSV rows: token, index, count.
  void save_tsv(const std::filesystem::path& path) const;
  static Vocabulary load_tsv(const std::filesystem::path& path);

 private:
  void push(const std::string& token, std::size_t count);

  std::unordered_map<std::string, int> index_;
  std::vector<std::string> tokens_;
  std::vector<std::size_t> counts_;
  int min_count_ = 1;
};

Vocabulary build_vocabulary(const std::vector<Review>& reviews, int min_count = 2);

struct CorpusLimits {
  std::size_t max_review_tokens = 200;
  std::size_t max_sequence = 30;
};

struct RecommendationInstance {
  std::string user_id;
  std::string product_id;
  std::string gold_review_id;
  std::vector<Review> target_reviews;
  std::vector<Review> user_reviews;
  std::vector<Review> neighbor_reviews;
  double gold_score = 0.0;
  std::vector<std::string> gold_review;
};

enum class Split { Train, Dev, Test };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct HeldOutPair {
  std::string user_id;
  std::string product_id;
  Split split = Split::Train;
};

/// TSV rows: user_id, product_id, split (train|dev|test). Lines starting with
/// '#' are ignored.
std::vector<HeldOutPair> read_pairs(const std::filesystem::path& path);
void write_pairs(const std::filesystem::path& path, const std::vector<HeldOutPair>& pairs);

/// Orders by timestamp, ties broken by review_id.
void sort_temporal(std::vector<Review>& reviews);
/// Keeps the `cap` most recent reviews of an already sorted sequence.
void keep_most_recent(std::vector<Review>& reviews, std::size_t cap);

/// One instance per pair that has a gold review, another review of the
/// product and another review by the user. Every review the user wrote for
/// the product is removed from both context sequences. Neighbor reviews are
/// left empty.
std::vector<RecommendationInstance> assemble_instances(const std::vector<Review>& reviews,
                                                       const std::vector<HeldOutPair>& pairs,
                                                       std::vector<Diagnostic>* diagnostics = nullptr,
                                                       const CorpusLimits& limits = {});

struct DatasetSplit {
  std::vector<RecommendationInstance> train;
  std::vector<RecommendationInstance> dev;
  std::vector<RecommendationInstance> test;
  std::vector<Review> reviews;

  /// Reviews with the gold reviews of dev and test pairs removed; the pool
  /// rating baselines and the neighbor factorization are fitted on.
  std::vector<Review> training_reviews() const;
  const std::vector<RecommendationInstance>& part(Split s) const;
  std::vector<RecommendationInstance>& part(Split s);
};

DatasetSplit make_split(std::vector<Review> reviews, const std::vector<HeldOutPair>& pairs,
                        std::vector<Diagnostic>* diagnostics = nullptr,
                        const CorpusLimits& limits = {});

/// Instance JSONL stores review ids; reading resolves them against `reviews`.
/// Schema per line: {"split","user_id","product_id","gold_review_id",
/// "gold_score","gold_tokens":[..],"target_reviews":[ids],
/// "user_reviews":[ids],"neighbor_reviews":[ids]}
void write_instances(const std::filesystem::path& path, const DatasetSplit& split);
DatasetSplit read_instances(const std::filesystem::path& path, std::vector<Review> reviews);

}  // namespace opinrec
