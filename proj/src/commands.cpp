#include "star/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "star/data.hpp"
#include "star/encoder.hpp"
#include "star/error.hpp"
#include "star/inference.hpp"
#include "star/metrics.hpp"
#include "star/rng.hpp"
#include "star/training.hpp"

namespace star {

namespace {

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename Fn>
int run_guarded(const char* command, Fn&& body) {
  try {
    body();
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << command << ": config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const DataError& e) {
    std::cerr << command << ": data error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const std::exception& e) {
    std::cerr << command << ": error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
}

/// Fills shape fields left at 0 from the dataset manifest and checks
/// agreement when both sides specify them.
StarConfig resolve_config(StarConfig config, const DatasetManifest& manifest) {
  if (config.coarse_m == 0) config.coarse_m = manifest.coarse_m;
  if (config.fine_k == 0) config.fine_k = manifest.fine_k;
  if (config.coarse_m != manifest.coarse_m)
    throw ConfigError("config coarse_m=" + std::to_string(config.coarse_m) +
                      " disagrees with manifest M=" +
                      std::to_string(manifest.coarse_m));
  if (config.fine_k != manifest.fine_k)
    throw ConfigError("config fine_k=" + std::to_string(config.fine_k) +
                      " disagrees with manifest K=" +
                      std::to_string(manifest.fine_k));
  config.validate();
  return config;
}

void write_history_csv(const std::vector<TrainHistoryRow>& history,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "epoch,alpha,ce,contrastive,kl_term,euclid_term,total,base,"
         "silhouette\n";
  for (const TrainHistoryRow& row : history)
    out << row.epoch << "," << g17(row.alpha) << "," << g17(row.loss.ce)
        << "," << g17(row.loss.contrastive) << "," << g17(row.loss.kl_term)
        << "," << g17(row.loss.euclid_term) << "," << g17(row.loss.total)
        << "," << g17(row.base) << "," << g17(row.silhouette) << "\n";
}

struct RunPaths {
  std::string config;
  std::string history;
  std::string summary;
  std::string best;
  std::string final;

  explicit RunPaths(const std::string& run_dir)
      : config(run_dir + "/config.json"),
        history(run_dir + "/history.csv"),
        summary(run_dir + "/summary.json"),
        best(run_dir + "/checkpoint_best.json"),
        final(run_dir + "/checkpoint_final.json") {}
};

void write_run(const std::string& run_dir, const std::string& data_dir,
               const StarConfig& config, const FitResult& fit_result) {
  std::filesystem::create_directories(run_dir);
  const RunPaths paths(run_dir);
  const std::string hash = config_hash(config);
  config_to_json_file(config, paths.config);
  write_history_csv(fit_result.history, paths.history);
  save_checkpoint(fit_result.best_params, paths.best, hash);
  save_checkpoint(fit_result.final_params, paths.final, hash);

  nlohmann::json summary;
  summary["data_dir"] = data_dir;
  summary["config_hash"] = hash;
  summary["pretrain_silhouette"] = fit_result.pretrain_silhouette;
  summary["best_epoch"] = fit_result.best_epoch;
  summary["best_silhouette"] = fit_result.best_silhouette;
  summary["epochs_run"] = fit_result.history.size();
  std::ofstream out(paths.summary);
  if (!out) throw DataError("cannot write " + paths.summary);
  out << summary.dump(2) << "\n";
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

std::string recorded_data_dir(const std::string& run_dir) {
  return read_json(run_dir + "/summary.json")
      .at("data_dir")
      .get<std::string>();
}

/// Inference clusters once per run, so it can afford a far wider restart
/// search than the per-epoch silhouette probe; this keeps the two
/// mechanisms from landing in different k-means basins.
KMeansOptions eval_kmeans_options() {
  KMeansOptions options;
  options.restarts = 50;
  return options;
}

std::vector<int> require_fine_labels(const Dataset& ds) {
  std::vector<int> fine = ds.fine_labels();
  for (std::size_t i = 0; i < fine.size(); ++i)
    if (fine[i] < 0)
      throw DataError("evaluation needs fine labels; sample index " +
                      std::to_string(i) + " has none");
  return fine;
}

}  // namespace

StarConfig apply_config_token(StarConfig base, const std::string& token) {
  if (token == "ce") {
    base.train_epochs = 0;
  } else if (token == "down") {
    base.objective = LossMode::kDown;
  } else if (token == "star") {
    base.objective = LossMode::kStar;
  } else if (token.rfind("star-b:", 0) == 0) {
    base.objective = LossMode::kStar;
    const std::string value = token.substr(7);
    char* end = nullptr;
    const double b = std::strtod(value.c_str(), &end);
    if (end != value.c_str() + value.size() || !(b > 0.0))
      throw ConfigError("compare: bad base value in token '" + token + "'");
    base.base_init = b;
    base.base_trainable = false;
  } else {
    throw ConfigError("compare: unknown config token '" + token +
                      "' (expected ce, down, star, or star-b:<value>)");
  }
  return base;
}

int cmd_generate(const GenerateArgs& args) {
  return run_guarded("generate", [&] {
    if (args.out_dir.empty())
      throw ConfigError("generate: --out directory required");
    GeneratedData data = generate_synthetic(
        args.coarse_m, args.fine_k, args.per_fine, args.d_latent, args.d_in,
        args.coarse_sep, args.fine_sep, args.noise, args.seed);
    save_dataset(data, args.out_dir);
    std::cout << "wrote " << data.manifest.n_train << " train / "
              << data.manifest.n_test << " test samples to " << args.out_dir
              << "\n";
  });
}

int cmd_train(const TrainArgs& args) {
  return run_guarded("train", [&] {
    if (args.data_dir.empty()) throw ConfigError("train: --data required");
    if (args.run_dir.empty()) throw ConfigError("train: --run required");
    LoadedData data = load_dataset(args.data_dir);
    StarConfig config = resolve_config(args.config, data.manifest);
    FitResult result = fit(data.train, config);
    write_run(args.run_dir, args.data_dir, config, result);
    std::cout << "run " << args.run_dir << ": " << result.history.size()
              << " epochs, best silhouette " << g17(result.best_silhouette)
              << " at epoch " << result.best_epoch << "\n";
  });
}

EvalReport evaluate_run(const std::string& run_dir,
                        const std::string& data_dir_override,
                        const std::string& mechanism) {
  if (mechanism != "clustering" && mechanism != "centroid")
    throw ConfigError("eval: mechanism must be 'clustering' or 'centroid'");
  const std::string data_dir =
      data_dir_override.empty() ? recorded_data_dir(run_dir)
                                : data_dir_override;
  LoadedData data = load_dataset(data_dir);
  StarConfig config = config_from_json_file(run_dir + "/config.json");
  config = resolve_config(config, data.manifest);
  Checkpoint ckpt = load_checkpoint(run_dir + "/checkpoint_best.json");
  if (ckpt.params.input_dim() != data.manifest.d_in)
    throw DataError("eval: checkpoint input dim " +
                    std::to_string(ckpt.params.input_dim()) +
                    " does not match dataset d_in " +
                    std::to_string(data.manifest.d_in));

  const SampleMatrix test_q =
      encode_batch(ckpt.params, data.test.feature_matrix());
  std::vector<int> predicted;
  if (mechanism == "clustering") {
    predicted = clustering_inference(test_q, config.fine_k,
                                     rng::derive(config.seed, "eval-kmeans"),
                                     eval_kmeans_options());
  } else {
    const SampleMatrix train_q =
        encode_batch(ckpt.params, data.train.feature_matrix());
    CentroidBank bank = build_centroids(
        train_q, data.train.coarse_labels(), config.fine_k,
        rng::derive(config.seed, "centroid-kmeans"), true,
        eval_kmeans_options());
    save_centroid_bank(bank, run_dir + "/centroid_bank.json");
    predicted = centroid_inference(test_q, bank);
  }

  const std::vector<int> truth = require_fine_labels(data.test);
  EvalReport report;
  report.acc = hungarian_accuracy(predicted, truth);
  report.ari = ari(predicted, truth);
  report.nmi = nmi(predicted, truth);
  std::map<int, int> distinct;
  for (int p : predicted) distinct.emplace(p, 0);
  report.silhouette =
      distinct.size() >= 2 ? silhouette(test_q, predicted) : 0.0;
  report.n = data.test.size();
  report.k = config.fine_k;
  report.mechanism = mechanism;
  report.config_hash = ckpt.config_hash;
  return report;
}

int cmd_eval(const EvalArgs& args) {
  return run_guarded("eval", [&] {
    if (args.run_dir.empty()) throw ConfigError("eval: --run required");
    EvalReport report =
        evaluate_run(args.run_dir, args.data_dir, args.mechanism);

    nlohmann::json j;
    j["acc"] = report.acc;
    j["ari"] = report.ari;
    j["nmi"] = report.nmi;
    j["silhouette"] = report.silhouette;
    j["n"] = report.n;
    j["k"] = report.k;
    j["mechanism"] = report.mechanism;
    j["config_hash"] = report.config_hash;
    const std::string out_path =
        args.run_dir + "/eval_" + report.mechanism + ".json";
    std::ofstream out(out_path);
    if (!out) throw DataError("cannot write " + out_path);
    out << j.dump(2) << "\n";

    std::printf("%-11s %8s %8s %8s %10s\n", "mechanism", "ACC", "ARI", "NMI",
                "silhouette");
    std::printf("%-11s %8.4f %8.4f %8.4f %10.4f\n", report.mechanism.c_str(),
                report.acc, report.ari, report.nmi, report.silhouette);
  });
}

int cmd_export_clusters(const ExportClustersArgs& args) {
  return run_guarded("export-clusters", [&] {
    if (args.run_dir.empty())
      throw ConfigError("export-clusters: --run required");
    const std::string data_dir =
        args.data_dir.empty() ? recorded_data_dir(args.run_dir)
                              : args.data_dir;
    const std::string out_dir =
        args.out_dir.empty() ? args.run_dir + "/clusters" : args.out_dir;
    LoadedData data = load_dataset(data_dir);
    StarConfig config = config_from_json_file(args.run_dir + "/config.json");
    config = resolve_config(config, data.manifest);
    Checkpoint ckpt = load_checkpoint(args.run_dir + "/checkpoint_best.json");

    const SampleMatrix train_q =
        encode_batch(ckpt.params, data.train.feature_matrix());
    ClusterModel model =
        kmeans(train_q, config.fine_k,
               rng::derive(config.seed, "export-kmeans"),
               eval_kmeans_options());
    std::filesystem::create_directories(out_dir);
    for (int c = 0; c < config.fine_k; ++c) {
      char name[32];
      std::snprintf(name, sizeof(name), "cluster_%02d.txt", c);
      std::ofstream out(out_dir + "/" + name);
      if (!out) throw DataError("cannot write " + out_dir + "/" + name);
      for (Index i = 0; i < data.train.size(); ++i)
        if (model.assignments[static_cast<std::size_t>(i)] == c)
          out << data.train.samples[static_cast<std::size_t>(i)].id << "\n";
    }
    std::cout << "wrote " << config.fine_k << " cluster files to " << out_dir
              << "\n";
  });
}

int cmd_compare(const CompareArgs& args) {
  int failures = 0;
  int first_failure_code = kExitOk;
  const int top = run_guarded("compare", [&] {
    if (args.data_dir.empty()) throw ConfigError("compare: --data required");
    if (args.out_dir.empty()) throw ConfigError("compare: --out required");
    if (args.configs.empty() || args.seeds.empty())
      throw ConfigError("compare: need at least one config and one seed");
    // Validate tokens up front so typos fail before hours of training.
    for (const std::string& token : args.configs)
      apply_config_token(args.base, token);

    LoadedData data = load_dataset(args.data_dir);
    std::filesystem::create_directories(args.out_dir);
    std::ofstream runs_csv(args.out_dir + "/compare_runs.csv");
    if (!runs_csv)
      throw DataError("cannot write " + args.out_dir + "/compare_runs.csv");
    runs_csv << "config,seed,acc,ari,nmi,silhouette\n";

    struct Agg {
      std::vector<double> acc, ari, nmi;
    };
    std::map<std::string, Agg> by_token;

    for (const std::string& token : args.configs) {
      for (std::uint64_t seed : args.seeds) {
        const std::string run_dir =
            args.out_dir + "/" + token + "-seed" + std::to_string(seed);
        const int code = run_guarded("compare-run", [&] {
          StarConfig config = apply_config_token(args.base, token);
          config.seed = seed;
          config = resolve_config(config, data.manifest);
          FitResult result = fit(data.train, config);
          write_run(run_dir, args.data_dir, config, result);
          EvalReport report = evaluate_run(run_dir, args.data_dir,
                                           "clustering");
          runs_csv << token << "," << seed << "," << g17(report.acc) << ","
                   << g17(report.ari) << "," << g17(report.nmi) << ","
                   << g17(report.silhouette) << "\n";
          Agg& agg = by_token[token];
          agg.acc.push_back(report.acc);
          agg.ari.push_back(report.ari);
          agg.nmi.push_back(report.nmi);
        });
        if (code != kExitOk) {
          ++failures;
          if (first_failure_code == kExitOk) first_failure_code = code;
          std::cerr << "compare: run " << run_dir << " failed (exit " << code
                    << "), continuing\n";
        }
      }
    }

    auto mean_std = [](const std::vector<double>& v) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= v.empty() ? 1.0 : static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      if (v.size() > 1) var /= static_cast<double>(v.size() - 1);
      return std::pair{mean, std::sqrt(var)};
    };

    std::ofstream table_csv(args.out_dir + "/compare_summary.csv");
    if (!table_csv)
      throw DataError("cannot write " + args.out_dir +
                      "/compare_summary.csv");
    table_csv << "config,runs,acc_mean,acc_std,ari_mean,ari_std,nmi_mean,"
                 "nmi_std\n";
    std::printf("%-14s %5s %16s %16s %16s\n", "config", "runs", "ACC", "ARI",
                "NMI");
    for (const std::string& token : args.configs) {
      if (!by_token.count(token)) continue;
      const Agg& agg = by_token[token];
      const auto [am, as] = mean_std(agg.acc);
      const auto [rm, rs] = mean_std(agg.ari);
      const auto [nm, ns] = mean_std(agg.nmi);
      table_csv << token << "," << agg.acc.size() << "," << g17(am) << ","
                << g17(as) << "," << g17(rm) << "," << g17(rs) << ","
                << g17(nm) << "," << g17(ns) << "\n";
      std::printf("%-14s %5zu %7.4f ± %5.4f %7.4f ± %5.4f %7.4f ± %5.4f\n",
                  token.c_str(), agg.acc.size(), am, as, rm, rs, nm, ns);
    }
  });
  if (top != kExitOk) return top;
  return failures > 0 ? first_failure_code : kExitOk;
}

}  // namespace star
