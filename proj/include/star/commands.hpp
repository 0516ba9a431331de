#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "star/config.hpp"
#include "star/metrics.hpp"
#include "star/types.hpp"

namespace star {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitDataError = 3;
inline constexpr int kExitRuntimeError = 4;

struct GenerateArgs {
  int coarse_m = 3;
  int fine_k = 9;
  int per_fine = 200;
  Index d_latent = 6;
  Index d_in = 32;
  double coarse_sep = 6.0;
  double fine_sep = 1.6;
  double noise = 0.6;
  std::uint64_t seed = 0;
  std::string out_dir;
};

struct TrainArgs {
  std::string data_dir;
  std::string run_dir;
  StarConfig config;  // already merged from file + flags by the caller
};

struct EvalArgs {
  std::string run_dir;
  std::string data_dir;  // empty -> the one recorded in the run summary
  std::string mechanism = "clustering";  // or "centroid"
};

struct ExportClustersArgs {
  std::string run_dir;
  std::string data_dir;  // empty -> recorded
  std::string out_dir;   // empty -> <run_dir>/clusters
};

struct CompareArgs {
  std::string data_dir;
  std::string out_dir;
  std::vector<std::string> configs;  // ce | down | star | star-b:<value>
  std::vector<std::uint64_t> seeds;
  StarConfig base;
};

int cmd_generate(const GenerateArgs& args);
int cmd_train(const TrainArgs& args);
int cmd_eval(const EvalArgs& args);
int cmd_export_clusters(const ExportClustersArgs& args);
int cmd_compare(const CompareArgs& args);

/// Library form of cmd_eval; `mechanism` is "clustering" or "centroid".
EvalReport evaluate_run(const std::string& run_dir,
                        const std::string& data_dir_override,
                        const std::string& mechanism);

/// Applies a compare-config token (ce | down | star | star-b:<value>) to a
/// base config. Throws ConfigError on unknown tokens.
StarConfig apply_config_token(StarConfig base, const std::string& token);

}  // namespace star
