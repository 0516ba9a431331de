// star: fine-grained category discovery from coarse labels.
//
// Subcommands: generate, train, eval, export-clusters, compare. Every
// science-relevant knob lives in flags or the JSON config file; flags win
// over the file, the file wins over built-in defaults.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "star/commands.hpp"
#include "star/config.hpp"
#include "star/error.hpp"

namespace {

using star::StarConfig;

/// Raw values for config-affecting flags. Only flags the user actually
/// passed are applied, so file-provided settings survive untouched.
struct ConfigFlags {
  std::string config_file;
  std::string objective;
  double tau = 0.0;
  double gamma = 0.0;
  double prob_temperature = 0.0;
  double prob_floor = 0.0;
  std::vector<int> hidden;
  int embed_dim = 0;
  int k = 0;
  std::vector<double> alpha;
  int alpha_stage = 0;
  long long queue = 0;
  double momentum = 0.0;
  int batch = 0;
  double lr = 0.0;
  double weight_decay = 0.0;
  double clip = 0.0;
  int pretrain_epochs = 0;
  int epochs = 0;
  int patience = 0;
  double base_init = 0.0;
  double fix_base = 0.0;
  std::uint64_t seed = 0;
  bool no_ce = false;
  bool no_kl_loss = false;
  bool no_kl_weight = false;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--config", f.config_file,
                  "JSON config file; flags below override its fields");
  cmd->add_option("--objective", f.objective, "Contrastive objective")
      ->check(CLI::IsMember({"down", "star"}));
  cmd->add_option("--tau", f.tau, "Contrastive temperature");
  cmd->add_option("--gamma", f.gamma, "Weight of the KL-space loss term");
  cmd->add_option("--prob-temperature", f.prob_temperature,
                  "Temperature of the embedding-to-distribution softmax");
  cmd->add_option("--prob-floor", f.prob_floor,
                  "Probability floor before renormalization");
  cmd->add_option("--hidden", f.hidden, "Encoder hidden widths")
      ->delimiter(',');
  cmd->add_option("--embed-dim", f.embed_dim, "Embedding dimension");
  cmd->add_option("--k", f.k, "Neighbors retrieved per query");
  cmd->add_option("--alpha", f.alpha, "Rank-weight decay schedule values")
      ->delimiter(',');
  cmd->add_option("--alpha-stage", f.alpha_stage,
                  "Epochs per alpha schedule stage");
  cmd->add_option("--queue", f.queue,
                  "Feature queue capacity (0: min(n, 8192))");
  cmd->add_option("--momentum", f.momentum, "Momentum-encoder coefficient");
  cmd->add_option("--batch", f.batch, "Batch size");
  cmd->add_option("--lr", f.lr, "Learning rate");
  cmd->add_option("--weight-decay", f.weight_decay, "AdamW weight decay");
  cmd->add_option("--clip", f.clip, "Global gradient-norm clip (0: off)");
  cmd->add_option("--pretrain-epochs", f.pretrain_epochs,
                  "Coarse-label CE pretraining epochs");
  cmd->add_option("--epochs", f.epochs, "Contrastive epochs");
  cmd->add_option("--patience", f.patience, "Early-stopping patience");
  cmd->add_option("--base-init", f.base_init,
                  "Initial value of the trainable base B");
  cmd->add_option("--fix-base", f.fix_base,
                  "Freeze the base B at this value");
  cmd->add_option("--seed", f.seed, "Root seed for all stochasticity");
  cmd->add_flag("--no-ce", f.no_ce, "Drop the CE term during training");
  cmd->add_flag("--no-kl-loss", f.no_kl_loss, "Drop the KL-space loss term");
  cmd->add_flag("--no-kl-weight", f.no_kl_weight,
                "Drop the B-modulated denominator weighting");
}

StarConfig build_config(const CLI::App& cmd, const ConfigFlags& f) {
  StarConfig config;
  if (!f.config_file.empty())
    config = star::config_from_json_file(f.config_file);
  if (cmd.count("--objective"))
    config.objective =
        f.objective == "down" ? star::LossMode::kDown : star::LossMode::kStar;
  if (cmd.count("--tau")) config.tau = f.tau;
  if (cmd.count("--gamma")) config.gamma = f.gamma;
  if (cmd.count("--prob-temperature"))
    config.prob_temperature = f.prob_temperature;
  if (cmd.count("--prob-floor")) config.prob_floor = f.prob_floor;
  if (cmd.count("--hidden")) config.hidden = f.hidden;
  if (cmd.count("--embed-dim")) config.embed_dim = f.embed_dim;
  if (cmd.count("--k")) config.k = f.k;
  if (cmd.count("--alpha")) config.alpha.values = f.alpha;
  if (cmd.count("--alpha-stage")) config.alpha.stage_length = f.alpha_stage;
  if (cmd.count("--queue")) config.queue_capacity = f.queue;
  if (cmd.count("--momentum")) config.momentum = f.momentum;
  if (cmd.count("--batch")) config.batch_size = f.batch;
  if (cmd.count("--lr")) config.lr = f.lr;
  if (cmd.count("--weight-decay")) config.weight_decay = f.weight_decay;
  if (cmd.count("--clip")) config.clip_norm = f.clip;
  if (cmd.count("--pretrain-epochs"))
    config.pretrain_epochs = f.pretrain_epochs;
  if (cmd.count("--epochs")) config.train_epochs = f.epochs;
  if (cmd.count("--patience")) config.patience = f.patience;
  if (cmd.count("--base-init")) config.base_init = f.base_init;
  if (cmd.count("--fix-base")) {
    config.base_init = f.fix_base;
    config.base_trainable = false;
  }
  if (cmd.count("--seed")) config.seed = f.seed;
  if (f.no_ce) config.include_ce = false;
  if (f.no_kl_loss) config.include_kl_loss = false;
  if (f.no_kl_weight) config.include_kl_weight = false;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fine-grained category discovery from coarse labels"};
  app.require_subcommand(1);

  star::GenerateArgs gen;
  CLI::App* generate = app.add_subcommand(
      "generate", "Write a synthetic hierarchical dataset");
  generate->add_option("--coarse", gen.coarse_m, "Coarse categories M");
  generate->add_option("--fine", gen.fine_k, "Fine categories K");
  generate->add_option("--per-fine", gen.per_fine,
                       "Samples per fine category (train+test)");
  generate->add_option("--d-latent", gen.d_latent, "Latent dimension");
  generate->add_option("--d-in", gen.d_in, "Observed feature dimension");
  generate->add_option("--coarse-sep", gen.coarse_sep,
                       "Coarse center separation scale");
  generate->add_option("--fine-sep", gen.fine_sep,
                       "Fine center offset scale");
  generate->add_option("--noise", gen.noise, "Per-sample noise scale");
  generate->add_option("--seed", gen.seed, "Generator seed");
  generate->add_option("--out", gen.out_dir, "Output directory")->required();

  star::TrainArgs tr;
  ConfigFlags tr_flags;
  CLI::App* train =
      app.add_subcommand("train", "Pretrain and contrastively train");
  train->add_option("--data", tr.data_dir, "Dataset directory")->required();
  train->add_option("--run", tr.run_dir, "Run output directory")->required();
  add_config_flags(train, tr_flags);

  star::EvalArgs ev;
  CLI::App* eval =
      app.add_subcommand("eval", "Evaluate a run on its test split");
  eval->add_option("--run", ev.run_dir, "Run directory")->required();
  eval->add_option("--data", ev.data_dir,
                   "Dataset directory (default: the one the run recorded)");
  eval->add_option("--mechanism", ev.mechanism, "Inference mechanism")
      ->check(CLI::IsMember({"clustering", "centroid"}));

  star::ExportClustersArgs ex;
  CLI::App* export_clusters = app.add_subcommand(
      "export-clusters", "Write per-cluster member-id files");
  export_clusters->add_option("--run", ex.run_dir, "Run directory")
      ->required();
  export_clusters->add_option("--data", ex.data_dir,
                              "Dataset directory (default: recorded)");
  export_clusters->add_option("--out", ex.out_dir,
                              "Output directory (default: <run>/clusters)");

  star::CompareArgs cmp;
  ConfigFlags cmp_flags;
  CLI::App* compare = app.add_subcommand(
      "compare", "Train and evaluate a config grid, report mean +/- std");
  compare->add_option("--data", cmp.data_dir, "Dataset directory")
      ->required();
  compare->add_option("--out", cmp.out_dir, "Output directory")->required();
  compare
      ->add_option("--configs", cmp.configs,
                   "Config tokens: ce | down | star | star-b:<value>")
      ->delimiter(',')
      ->required();
  compare->add_option("--seeds", cmp.seeds, "Seeds, one run per seed")
      ->delimiter(',')
      ->required();
  add_config_flags(compare, cmp_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? star::kExitOk : star::kExitConfigError;
  }

  try {
    if (generate->parsed()) return star::cmd_generate(gen);
    if (train->parsed()) {
      tr.config = build_config(*train, tr_flags);
      return star::cmd_train(tr);
    }
    if (eval->parsed()) return star::cmd_eval(ev);
    if (export_clusters->parsed()) return star::cmd_export_clusters(ex);
    if (compare->parsed()) {
      cmp.base = build_config(*compare, cmp_flags);
      return star::cmd_compare(cmp);
    }
  } catch (const star::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return star::kExitConfigError;
  } catch (const star::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return star::kExitDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return star::kExitRuntimeError;
  }
  return star::kExitConfigError;
}
