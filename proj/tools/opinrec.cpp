// Command line front end. A data directory produced by `prepare` holds
//   reviews.jsonl    every well-formed review
//   instances.jsonl  train/dev/test instances (review ids, see corpus.hpp)
//   vocab.tsv        vocabulary over training reviews
//   settings.json    min_count and truncation limits used by later steps
// and is extended by `train-embeddings` (embeddings.tsv) and `neighbors`
// (neighbors.tsv, factors.ckpt, instances.jsonl rewritten with neighbors).

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>

#include "opinrec/checkpoint.hpp"
#include "opinrec/corpus.hpp"
#include "opinrec/embeddings.hpp"
#include "opinrec/evaluation.hpp"
#include "opinrec/grid.hpp"
#include "opinrec/model.hpp"
#include "opinrec/neighbors.hpp"
#include "opinrec/synthetic.hpp"
#include "opinrec/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace opinrec;

namespace {

struct Settings {
  int min_count = 2;
  CorpusLimits limits;
};

void save_settings(const fs::path& dir, const Settings& s) {
  json j = {{"min_count", s.min_count},
            {"max_review_tokens", s.limits.max_review_tokens},
            {"max_sequence", s.limits.max_sequence}};
  std::ofstream(dir / "settings.json") << j.dump(2) << '\n';
}

Settings load_settings(const fs::path& dir) {
  Settings s;
  std::ifstream in(dir / "settings.json");
  if (!in) return s;
  auto j = json::parse(in);
  s.min_count = j.value("min_count", s.min_count);
  s.limits.max_review_tokens = j.value("max_review_tokens", s.limits.max_review_tokens);
  s.limits.max_sequence = j.value("max_sequence", s.limits.max_sequence);
  return s;
}

std::vector<Review> load_reviews(const fs::path& dir) {
  return ingest_reviews(dir / "reviews.jsonl").records;
}

DatasetSplit load_split(const fs::path& dir) {
  return read_instances(dir / "instances.jsonl", load_reviews(dir));
}

std::size_t embedding_file_dim(const fs::path& path) {
  std::ifstream in(path);
  std::string header;
  if (!in || !std::getline(in, header)) throw std::runtime_error("cannot read " + path.string());
  return static_cast<std::size_t>(std::count(header.begin(), header.end(), '\t'));
}

/// Skip-gram table from the data directory, or nullopt when absent.
std::optional<nn::Tensor> load_word_vectors(const fs::path& dir, const Vocabulary& vocab) {
  auto path = dir / "embeddings.tsv";
  if (!fs::exists(path)) return std::nullopt;
  nn::Tensor table({vocab.size(), embedding_file_dim(path)});
  load_embeddings(path, vocab, table);
  return table;
}

PreparedData load_prepared(const fs::path& dir) {
  auto settings = load_settings(dir);
  PreparedData p;
  p.data = load_split(dir);
  p.vocab = Vocabulary::load_tsv(dir / "vocab.tsv");
  if (auto wv = load_word_vectors(dir, p.vocab)) p.word_vectors = std::move(*wv);
  p.train = encode_instances(p.data.train, p.vocab, settings.limits);
  p.dev = encode_instances(p.data.dev, p.vocab, settings.limits);
  p.test = encode_instances(p.data.test, p.vocab, settings.limits);
  return p;
}

void read_model_config(const json& j, ModelConfig& c) {
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.hops = j.value("hops", c.hops);
  c.dropout = j.value("dropout", c.dropout);
  c.max_decode_len = j.value("max_decode_len", c.max_decode_len);
  c.init_bound = j.value("init_bound", c.init_bound);
  c.mu_init = j.value("mu_init", c.mu_init);
  c.train_mu = j.value("train_mu", c.train_mu);
  c.teacher_forced_stacking = j.value("teacher_forced_stacking", c.teacher_forced_stacking);
  c.seed = j.value("seed", c.seed);
  if (j.contains("ablation")) c.ablation = Ablation::parse(j.at("ablation").get<std::string>());
}

void read_train_config(const json& j, TrainConfig& c) {
  c.l2 = j.value("l2", c.l2);
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.adagrad_eps = j.value("adagrad_eps", c.adagrad_eps);
  c.seed = j.value("seed", c.seed);
  c.patience = j.value("patience", c.patience);
  c.evaluate_rouge = j.value("evaluate_rouge", c.evaluate_rouge);
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

std::unique_ptr<OpinionModel> load_model(const fs::path& checkpoint) {
  auto ck = load_checkpoint(checkpoint);
  auto model = std::make_unique<OpinionModel>(model_config_from_json(ck.metadata));
  assign_parameters(model->parameters(), ck.tensors);
  model->apply_freezing();
  return model;
}

void print_diagnostics(const std::vector<Diagnostic>& diags, const std::string& what) {
  for (const auto& d : diags) {
    std::cerr << what;
    if (d.line) std::cerr << ':' << d.line;
    std::cerr << ": " << d.message << '\n';
  }
}

int cmd_prepare(const fs::path& reviews_path, const fs::path& pairs_path, const fs::path& out, Settings settings) {
  auto ingested = ingest_reviews(reviews_path);
  print_diagnostics(ingested.diagnostics, reviews_path.string());
  auto pairs = read_pairs(pairs_path);
  fs::create_directories(out);
  write_reviews(out / "reviews.jsonl", ingested.records);
  std::vector<Diagnostic> diags;
  auto split = make_split(ingested.records, pairs, &diags, settings.limits);
  print_diagnostics(diags, "assemble");
  auto vocab = build_vocabulary(split.training_reviews(), settings.min_count);
  write_instances(out / "instances.jsonl", split);
  vocab.save_tsv(out / "vocab.tsv");
  save_settings(out, settings);
  std::cout << "reviews " << ingested.records.size() << ", instances train " << split.train.size() << " dev "
            << split.dev.size() << " test " << split.test.size() << ", vocabulary " << vocab.size() << '\n';
  return 0;
}

int cmd_train_embeddings(const fs::path& dir, const SkipGramConfig& config) {
  auto split = load_split(dir);
  auto vocab = Vocabulary::load_tsv(dir / "vocab.tsv");
  std::vector<std::vector<int>> sentences;
  for (const auto& r : split.training_reviews()) sentences.push_back(vocab.encode(tokenize(r.text)));
  auto result = train_skipgram(sentences, vocab.size(), config);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  save_embeddings(dir / "embeddings.tsv", vocab, result.input);
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
    std::cout << "epoch " << e + 1 << " loss " << result.epoch_loss[e] << '\n';
  return 0;
}

int cmd_neighbors(const fs::path& dir, const FactorizeOptions& options, double eta) {
  auto settings = load_settings(dir);
  auto split = load_split(dir);
  auto pool = split.training_reviews();
  auto matrix = build_matrix(pool);
  auto factors = factorize(matrix, options);
  NeighborIndex index(matrix, factors);
  std::size_t lonely = 0;
  for (Split s : {Split::Train, Split::Dev, Split::Test})
    lonely += attach_neighbors(split.part(s), pool, index, eta, settings.limits);
  write_instances(dir / "instances.jsonl", split);

  std::ofstream out(dir / "neighbors.tsv");
  for (const auto& user : index.user_ids()) {
    out << user << '\t';
    auto ns = index.find_neighbors(user, eta);
    for (std::size_t i = 0; i < ns.size(); ++i) out << (i ? "," : "") << ns[i];
    out << '\n';
  }

  nn::Parameters store;
  auto put = [&](const std::string& name, const Eigen::MatrixXd& m) {
    auto& t = store.add(name, {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) t.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = m(r, c);
  };
  put("F", factors.F);
  put("S", factors.S);
  put("T", factors.T);
  json meta = {{"products", matrix.product_ids}, {"users", matrix.user_ids}, {"eta", eta}};
  save_checkpoint(dir / "factors.ckpt", store, meta.dump());

  std::cout << "factorized " << matrix.products() << "x" << matrix.users() << " in " << factors.objective.size() - 1
            << " sweeps, objective " << factors.objective.back() << "; " << lonely
            << " instances without neighbors\n";
  return 0;
}

int cmd_train(const fs::path& config_path) {
  auto cfg = read_json_file(config_path);
  fs::path data_dir = cfg.at("data").get<std::string>();
  fs::path out = cfg.value("out", std::string("run"));
  auto prepared = load_prepared(data_dir);

  ModelConfig mc;
  TrainConfig tc;
  if (cfg.contains("model")) read_model_config(cfg.at("model"), mc);
  if (cfg.contains("train")) read_train_config(cfg.at("train"), tc);
  mc.vocab_size = prepared.vocab.size();
  auto model = make_model(prepared, mc);
  if (!prepared.word_vectors.value.empty() && prepared.word_vectors.shape != model->embeddings().shape)
    std::cerr << "warning: embeddings.tsv dimension differs from embedding_dim; using random init\n";

  fs::create_directories(out);
  auto result = train(*model, prepared.train, prepared.dev, tc, [](const EpochMetrics& m) {
    std::cout << "epoch " << m.epoch << " train_mse " << m.train_mse << " train_nll " << m.train_nll << " dev_mse "
              << m.dev_mse << " dev_rouge1 " << m.dev_rouge1 << std::endl;
  });
  write_metrics_csv((out / "metrics.csv").string(), result.log);
  save_checkpoint(out / "model.ckpt", model->parameters(), model_config_to_json(model->config()));
  std::cout << "best epoch " << result.best_epoch << ", checkpoint " << (out / "model.ckpt").string() << '\n';
  return 0;
}

int cmd_evaluate(const fs::path& checkpoint, const fs::path& data_dir, const std::string& split_name,
                 const fs::path& report_dir, bool baselines) {
  Split split = split_from_string(split_name);
  auto prepared = load_prepared(data_dir);
  auto model = load_model(checkpoint);
  if (model->config().vocab_size != prepared.vocab.size())
    throw std::runtime_error("checkpoint vocabulary size does not match " + (data_dir / "vocab.tsv").string());

  std::vector<SystemReport> rows;
  if (baselines) {
    const nn::Tensor& table = prepared.word_vectors.value.empty() ? model->embeddings() : prepared.word_vectors;
    BaselineContext ctx{.data = &prepared.data, .vocab = &prepared.vocab, .embeddings = &table};
    rows = evaluate_baselines(ctx, split);
  }
  auto report = evaluate_model(*model, prepared.part(split), model->config().ablation.name());
  rows.push_back(report);

  fs::create_directories(report_dir);
  write_report_csv(report_dir / "report.csv", rows);
  write_records_jsonl(report_dir / "records.jsonl", report, prepared.vocab);
  std::cout << format_report_table(rows);
  return 0;
}

std::vector<Review> recent(std::vector<Review> reviews, std::size_t cap) {
  sort_temporal(reviews);
  keep_most_recent(reviews, cap);
  return reviews;
}

std::map<std::string, std::vector<std::string>> read_neighbor_lists(const fs::path& path) {
  std::map<std::string, std::vector<std::string>> lists;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    auto& list = lists[line.substr(0, tab)];
    std::istringstream ss(line.substr(tab + 1));
    std::string id;
    while (std::getline(ss, id, ','))
      if (!id.empty()) list.push_back(id);
  }
  return lists;
}

int cmd_recommend(const fs::path& checkpoint, const fs::path& data_dir, const std::string& user,
                  const std::string& product, std::size_t top_k) {
  auto settings = load_settings(data_dir);
  auto reviews = load_reviews(data_dir);
  auto vocab = Vocabulary::load_tsv(data_dir / "vocab.tsv");
  auto model = load_model(checkpoint);

  auto lists = read_neighbor_lists(data_dir / "neighbors.tsv");
  std::vector<std::string> neighbors;
  if (auto it = lists.find(user); it != lists.end()) neighbors = it->second;

  RecommendationInstance inst;
  inst.user_id = user;
  inst.product_id = product;
  for (const auto& r : reviews) {
    bool own_pair = r.user_id == user && r.product_id == product;
    if (own_pair) continue;
    if (r.product_id == product) inst.target_reviews.push_back(r);
    if (r.user_id == user) inst.user_reviews.push_back(r);
    if (std::binary_search(neighbors.begin(), neighbors.end(), r.user_id)) inst.neighbor_reviews.push_back(r);
  }
  if (inst.target_reviews.empty()) throw std::runtime_error("product " + product + " has no reviews");
  inst.target_reviews = recent(inst.target_reviews, settings.limits.max_sequence);
  inst.user_reviews = recent(inst.user_reviews, settings.limits.max_sequence);
  inst.neighbor_reviews = recent(inst.neighbor_reviews, settings.limits.max_sequence);

  auto pred = model->predict(encode_instance(inst, vocab, settings.limits));
  std::vector<int> body;
  for (int t : pred.tokens)
    if (t != Vocabulary::kBos && t != Vocabulary::kEos) body.push_back(t);
  json candidates = json::array();
  for (const auto& step : pred.top_candidates) {
    json row = json::array();
    for (std::size_t i = 0; i < step.size() && i < top_k; ++i)
      row.push_back({{"token", vocab.token(step[i].first)}, {"p", step[i].second}});
    candidates.push_back(row);
  }
  json out = {{"user_id", user},
              {"product_id", product},
              {"score", pred.score},
              {"raw_score", pred.raw_score},
              {"review", join_tokens(vocab.decode(body))},
              {"tokens", vocab.decode(body)},
              {"beta", pred.beta},
              {"top_candidates", candidates},
              {"user_active", pred.user_active},
              {"neighbor_active", pred.neighbor_active},
              {"context", {{"target_reviews", inst.target_reviews.size()},
                           {"user_reviews", inst.user_reviews.size()},
                           {"neighbor_reviews", inst.neighbor_reviews.size()}}}};
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_grid(const fs::path& data_dir, const fs::path& config_path, const fs::path& out,
             std::optional<fs::path> checkpoints, bool no_train, const std::string& parts) {
  GridConfig gc;
  if (!config_path.empty()) {
    auto cfg = read_json_file(config_path);
    if (cfg.contains("model")) read_model_config(cfg.at("model"), gc.pipeline.model);
    if (cfg.contains("train")) read_train_config(cfg.at("train"), gc.pipeline.train);
    if (cfg.contains("hops")) gc.hops = cfg.at("hops").get<std::vector<std::size_t>>();
    if (cfg.contains("mus")) gc.mus = cfg.at("mus").get<std::vector<double>>();
  }
  if (parts != "all") {
    auto has = [&](const std::string& p) { return parts.find(p) != std::string::npos; };
    gc.run_ablations = has("ablations");
    gc.run_baselines = has("baselines");
    gc.run_hops = has("hops");
    gc.run_mu = has("mu");
  }
  gc.checkpoint_dir = checkpoints;
  gc.train_missing = !no_train;
  auto prepared = load_prepared(data_dir);
  gc.pipeline.model.vocab_size = prepared.vocab.size();
  auto report = run_grid(prepared, gc);
  write_grid(out, report);
  if (!report.ablation_test.empty()) std::cout << "ablations (test)\n" << format_report_table(report.ablation_test);
  if (!report.final_test.empty()) std::cout << "\nfinal (test)\n" << format_report_table(report.final_test);
  if (!report.hop_curve.empty()) std::cout << '\n' << format_curve("hops", report.hop_curve);
  if (!report.mu_curve.empty()) std::cout << '\n' << format_curve("mu", report.mu_curve);
  for (const auto& a : report.absent) std::cout << "absent: " << a << '\n';
  return 0;
}

int cmd_synth(const fs::path& out, const SyntheticConfig& config) {
  auto corpus = generate_synthetic(config);
  fs::create_directories(out);
  write_reviews(out / "reviews.jsonl", corpus.reviews);
  write_pairs(out / "pairs.tsv", corpus.pairs);
  std::cout << corpus.reviews.size() << " reviews, " << corpus.pairs.size() << " pairs written to " << out.string()
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"opinrec: customized rating prediction and review generation"};
  app.require_subcommand(1);

  std::string reviews_path, pairs_path, out_dir = "data";
  Settings settings;
  auto* prepare = app.add_subcommand("prepare", "ingest reviews and assemble train/dev/test instances");
  prepare->add_option("--reviews", reviews_path, "review JSONL file")->required();
  prepare->add_option("--pairs", pairs_path, "held-out pair TSV (user, product, split)")->required();
  prepare->add_option("--out", out_dir, "output data directory")->capture_default_str();
  prepare->add_option("--min-count", settings.min_count, "vocabulary frequency cutoff")->capture_default_str();
  prepare->add_option("--max-review-tokens", settings.limits.max_review_tokens)->capture_default_str();
  prepare->add_option("--max-sequence", settings.limits.max_sequence)->capture_default_str();

  std::string data_dir = "data";
  SkipGramConfig sg;
  auto* embed = app.add_subcommand("train-embeddings", "train skip-gram word vectors on training reviews");
  embed->add_option("--data", data_dir, "data directory")->capture_default_str();
  embed->add_option("--dim", sg.dim)->capture_default_str();
  embed->add_option("--window", sg.window)->capture_default_str();
  embed->add_option("--negatives", sg.negatives)->capture_default_str();
  embed->add_option("--epochs", sg.epochs)->capture_default_str();
  embed->add_option("--lr", sg.learning_rate)->capture_default_str();
  embed->add_option("--seed", sg.seed)->capture_default_str();

  FactorizeOptions fo;
  double eta = 0.25;
  auto* neigh = app.add_subcommand("neighbors", "factorize the rating matrix and attach neighbor reviews");
  neigh->add_option("--data", data_dir, "data directory")->capture_default_str();
  neigh->add_option("--eta", eta, "similarity threshold")->capture_default_str();
  neigh->add_option("--topics", fo.topics)->capture_default_str();
  neigh->add_option("--sweeps", fo.sweeps)->capture_default_str();
  neigh->add_option("--seed", fo.seed)->capture_default_str();

  std::string config_path;
  auto* trainc = app.add_subcommand("train", "train the joint model");
  trainc->add_option("--config", config_path, "JSON training configuration")->required();

  std::string checkpoint, split_name = "test", report_dir = "report";
  bool no_baselines = false;
  auto* evalc = app.add_subcommand("evaluate", "score a checkpoint and the baselines on a split");
  evalc->add_option("--checkpoint", checkpoint)->required();
  evalc->add_option("--data", data_dir, "data directory")->capture_default_str();
  evalc->add_option("--split", split_name)->check(CLI::IsMember({"train", "dev", "test"}))->capture_default_str();
  evalc->add_option("--report", report_dir, "output directory")->capture_default_str();
  evalc->add_flag("--no-baselines", no_baselines);

  std::string user, product;
  std::size_t top_k = 5;
  auto* rec = app.add_subcommand("recommend", "predict score and review for one user and product");
  rec->add_option("--checkpoint", checkpoint)->required();
  rec->add_option("--data", data_dir, "data directory")->capture_default_str();
  rec->add_option("--user", user)->required();
  rec->add_option("--product", product)->required();
  rec->add_option("--top", top_k, "candidates listed per decoding step")->capture_default_str();

  std::string grid_config, grid_out = "grid", grid_ckpt, parts = "all";
  bool no_train = false;
  auto* grid = app.add_subcommand("grid", "ablation grid, baselines, hop and mu sweeps");
  grid->add_option("--data", data_dir, "data directory")->capture_default_str();
  grid->add_option("--config", grid_config, "JSON configuration (model, train, hops, mus)");
  grid->add_option("--out", grid_out, "output directory")->capture_default_str();
  grid->add_option("--checkpoints", grid_ckpt, "directory of per-configuration checkpoints");
  grid->add_flag("--no-train", no_train, "report missing checkpoints as absent instead of training");
  grid->add_option("--parts", parts, "comma list of ablations,baselines,hops,mu or 'all'")->capture_default_str();

  SyntheticConfig syn;
  std::string syn_out = "synthetic";
  auto* synth = app.add_subcommand("synth", "write a planted user-bias review corpus");
  synth->add_option("--out", syn_out)->capture_default_str();
  synth->add_option("--seed", syn.seed)->capture_default_str();
  synth->add_option("--users", syn.users)->capture_default_str();
  synth->add_option("--products", syn.products)->capture_default_str();
  synth->add_option("--noise", syn.noise)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prepare) return cmd_prepare(reviews_path, pairs_path, out_dir, settings);
    if (*embed) return cmd_train_embeddings(data_dir, sg);
    if (*neigh) return cmd_neighbors(data_dir, fo, eta);
    if (*trainc) return cmd_train(config_path);
    if (*evalc) return cmd_evaluate(checkpoint, data_dir, split_name, report_dir, !no_baselines);
    if (*rec) return cmd_recommend(checkpoint, data_dir, user, product, top_k);
    if (*grid)
      return cmd_grid(data_dir, grid_config, grid_out,
                      grid_ckpt.empty() ? std::nullopt : std::optional<fs::path>(grid_ckpt), no_train, parts);
    if (*synth) return cmd_synth(syn_out, syn);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
