#include "opinrec/grid.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "opinrec/checkpoint.hpp"

namespace opinrec {

TriFactorization attach_all_neighbors(DatasetSplit& data, const FactorizeOptions& options, double eta,
                                      const CorpusLimits& limits, std::size_t* lonely) {
  auto pool = data.training_reviews();
  auto matrix = build_matrix(pool);
  auto factors = factorize(matrix, options);
  NeighborIndex index(matrix, factors);
  std::size_t none = 0;
  for (Split s : {Split::Train, Split::Dev, Split::Test})
    none += attach_neighbors(data.part(s), pool, index, eta, limits);
  if (lonely) *lonely = none;
  return factors;
}

PreparedData prepare_data(DatasetSplit data, const PipelineConfig& config) {
  PreparedData p;
  auto pool = data.training_reviews();
  p.vocab = build_vocabulary(pool, config.min_count);
  std::vector<std::vector<int>> sentences;
  for (const auto& r : pool) sentences.push_back(p.vocab.encode(tokenize(r.text)));
  SkipGramConfig sg = config.skipgram;
  sg.dim = config.model.embedding_dim;
  p.word_vectors = train_skipgram(sentences, p.vocab.size(), sg).input;
  attach_all_neighbors(data, config.neighbor_factorization, config.eta, config.limits,
                       &p.instances_without_neighbors);
  p.train = encode_instances(data.train, p.vocab, config.limits);
  p.dev = encode_instances(data.dev, p.vocab, config.limits);
  p.test = encode_instances(data.test, p.vocab, config.limits);
  p.data = std::move(data);
  return p;
}

std::unique_ptr<OpinionModel> make_model(const PreparedData& prepared, ModelConfig config) {
  config.vocab_size = prepared.vocab.size();
  auto model = std::make_unique<OpinionModel>(config);
  if (prepared.word_vectors.shape == model->embeddings().shape) model->embeddings().value = prepared.word_vectors.value;
  return model;
}

std::unique_ptr<OpinionModel> train_model(const PreparedData& prepared, const ModelConfig& model_config,
                                          const TrainConfig& train_config, TrainResult* result) {
  auto model = make_model(prepared, model_config);
  auto r = train(*model, prepared.train, prepared.dev, train_config);
  if (result) *result = std::move(r);
  return model;
}

namespace {

std::string slug(const std::string& name) {
  std::string s;
  for (char c : name) s += (c == ',' ? '_' : c == '-' ? 'n' : c);
  return s;
}

}  // namespace

GridReport run_grid(const PreparedData& prepared, const GridConfig& config) {
  GridReport rep;
  auto obtain = [&](const std::string& name, const ModelConfig& mc) -> std::unique_ptr<OpinionModel> {
    std::optional<std::filesystem::path> file;
    if (config.checkpoint_dir) file = *config.checkpoint_dir / (slug(name) + ".ckpt");
    if (file && std::filesystem::exists(*file)) {
      auto ck = load_checkpoint(*file);
      auto model = std::make_unique<OpinionModel>(model_config_from_json(ck.metadata));
      assign_parameters(model->parameters(), ck.tensors);
      return model;
    }
    if (!config.train_missing) {
      if (std::find(rep.absent.begin(), rep.absent.end(), name) == rep.absent.end()) rep.absent.push_back(name);
      return nullptr;
    }
    auto model = train_model(prepared, mc, config.pipeline.train);
    if (file) {
      std::filesystem::create_directories(*config.checkpoint_dir);
      save_checkpoint(*file, model->parameters(), model_config_to_json(model->config()));
    }
    return model;
  };

  std::optional<SystemReport> joint_test;
  if (config.run_ablations) {
    for (const auto& ab : config.ablations) {
      ModelConfig mc = config.pipeline.model;
      mc.ablation = ab;
      auto model = obtain(ab.name(), mc);
      if (!model) {
        rep.ablation_dev.push_back({ab.name(), std::nullopt, std::nullopt, {}});
        rep.ablation_test.push_back({ab.name(), std::nullopt, std::nullopt, {}});
        continue;
      }
      rep.ablation_dev.push_back(evaluate_model(*model, prepared.dev, ab.name()));
      rep.ablation_test.push_back(evaluate_model(*model, prepared.test, ab.name()));
      if (ab == Ablation{}) joint_test = rep.ablation_test.back();
    }
  }
  if (config.run_baselines) {
    BaselineContext ctx{&prepared.data, &prepared.vocab, &prepared.word_vectors, config.pipeline.knn_k,
                        config.pipeline.mf_options};
    rep.final_test = evaluate_baselines(ctx, Split::Test);
    if (!joint_test) {
      ModelConfig mc = config.pipeline.model;
      mc.ablation = Ablation{};
      if (auto model = obtain("Joint", mc)) joint_test = evaluate_model(*model, prepared.test, "Joint");
    }
    rep.final_test.push_back(joint_test ? *joint_test : SystemReport{"Joint", std::nullopt, std::nullopt, {}});
  }
  auto curve_point = [&](double x, const std::string& name, const ModelConfig& mc) {
    CurvePoint pt{x, std::nullopt, std::nullopt};
    if (auto model = obtain(name, mc)) {
      pt.dev_mse = evaluate_model(*model, prepared.dev).mse;
      pt.test_mse = evaluate_model(*model, prepared.test).mse;
    }
    return pt;
  };
  if (config.run_hops) {
    for (std::size_t h : config.hops) {
      ModelConfig mc = config.pipeline.model;
      mc.hops = h;
      rep.hop_curve.push_back(curve_point(static_cast<double>(h), "hop" + std::to_string(h), mc));
    }
  }
  if (config.run_mu) {
    for (double mu : config.mus) {
      ModelConfig mc = config.pipeline.model;
      mc.mu_init = mu;
      mc.train_mu = false;
      std::ostringstream name;
      name << "mu" << mu;
      rep.mu_curve.push_back(curve_point(mu, name.str(), mc));
    }
  }
  return rep;
}

std::string format_curve(const std::string& label, const std::vector<CurvePoint>& curve) {
  std::ostringstream os;
  os << std::left << std::setw(8) << label << std::setw(12) << "dev MSE" << "test MSE\n";
  os << std::fixed << std::setprecision(3);
  for (const auto& p : curve) {
    std::ostringstream x;
    x << p.x;
    os << std::setw(8) << x.str();
    std::ostringstream d, t;
    d << std::fixed << std::setprecision(3);
    t << std::fixed << std::setprecision(3);
    if (p.dev_mse) d << *p.dev_mse; else d << "-";
    if (p.test_mse) t << *p.test_mse; else t << "-";
    os << std::setw(12) << d.str() << t.str() << '\n';
  }
  return os.str();
}

namespace {

void write_curve(const std::filesystem::path& path, const std::string& x, const std::vector<CurvePoint>& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(10) << x << ",dev_mse,test_mse\n";
  for (const auto& p : curve) {
    out << p.x << ',';
    if (p.dev_mse) out << *p.dev_mse;
    out << ',';
    if (p.test_mse) out << *p.test_mse;
    out << '\n';
  }
}

}  // namespace

void write_grid(const std::filesystem::path& dir, const GridReport& report) {
  std::filesystem::create_directories(dir);
  if (!report.ablation_dev.empty()) {
    write_report_csv(dir / "ablation_dev.csv", report.ablation_dev);
    write_report_csv(dir / "ablation_test.csv", report.ablation_test);
  }
  if (!report.final_test.empty()) write_report_csv(dir / "final_test.csv", report.final_test);
  if (!report.hop_curve.empty()) write_curve(dir / "hops.csv", "hops", report.hop_curve);
  if (!report.mu_curve.empty()) write_curve(dir / "mu.csv", "mu", report.mu_curve);
  std::ofstream out(dir / "summary.txt");
  if (!report.ablation_dev.empty()) out << "Ablations (dev)\n" << format_report_table(report.ablation_dev) << '\n';
  if (!report.ablation_test.empty()) out << "Ablations (test)\n" << format_report_table(report.ablation_test) << '\n';
  if (!report.final_test.empty()) out << "Final (test)\n" << format_report_table(report.final_test) << '\n';
  if (!report.hop_curve.empty()) out << format_curve("hops", report.hop_curve) << '\n';
  if (!report.mu_curve.empty()) out << format_curve("mu", report.mu_curve) << '\n';
  for (const auto& a : report.absent) out << "absent: " << a << '\n';
}

}  // namespace opinrec
