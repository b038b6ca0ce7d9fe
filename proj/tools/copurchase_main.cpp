#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "copurchase/error.hpp"
#include "copurchase/parallel.hpp"
#include "pipeline/pipeline.hpp"

namespace {

using copurchase::pipeline::PipelineConfig;

void add_options(CLI::App& app, PipelineConfig& c, std::string& workspace) {
  app.add_option("--dataset", c.dataset, "amazon-meta dump (.txt or .txt.gz)")->group("Input");
  app.add_option("--workspace,-w", workspace, "artifact directory")
      ->envname("COPURCHASE_WORKSPACE")
      ->capture_default_str()
      ->group("Input");
  app.add_option("--seed", c.seed, "master seed")->capture_default_str()->group("Run");
  app.add_option("--threads", c.threads, "worker threads (0 = all cores)")->capture_default_str()->group("Run");
  app.add_flag("--force", c.force, "accept stale upstream artifacts")->group("Run");

  app.add_option("--category-depth", c.features.category_depth, "padded category path length")
      ->capture_default_str()
      ->check(CLI::Range(1, 64))
      ->group("Features");
  app.add_flag("--source-structure", c.features.include_source_structure,
               "append the source's degree and clustering to pair features")
      ->group("Features");
  app.add_option("--variant", c.variant, "feature variant")
      ->capture_default_str()
      ->check(CLI::IsMember({"full", "no_group", "no_category", "no_degree", "no_cluster"}))
      ->group("Features");

  app.add_option("--positives", c.positives, "positive pairs")->capture_default_str()->group("Dataset");
  app.add_option("--negatives", c.negatives, "negative pairs")->capture_default_str()->group("Dataset");
  app.add_option("--negative-mode", c.negative_mode, "negative target sampling")
      ->capture_default_str()
      ->check(CLI::IsMember({"non_adjacent", "isolated"}))
      ->group("Dataset");
  app.add_option("--train-fraction", c.train_fraction, "train share of the split")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0))
      ->group("Dataset");

  app.add_option("--trees", c.forest.n_trees, "forest size")->capture_default_str()->group("Random forest");
  app.add_option("--max-depth", c.forest.max_depth, "tree depth limit")->capture_default_str()->group("Random forest");
  app.add_option("--min-leaf", c.forest.min_samples_leaf, "minimum samples per leaf")
      ->capture_default_str()
      ->group("Random forest");
  app.add_option("--mtry", c.forest.features_per_split, "features tried per split (0 = ceil sqrt)")
      ->capture_default_str()
      ->group("Random forest");
  app.add_flag("--oob", c.forest.compute_oob, "report out-of-bag accuracy")->group("Random forest");

  app.add_option("--hidden", c.sage.hidden, "embedding width")->capture_default_str()->group("GraphSAGE");
  app.add_option("--neighbor-samples", c.sage.neighbor_samples, "neighbors sampled per node")
      ->capture_default_str()
      ->group("GraphSAGE");
  app.add_option("--learning-rate", c.sage.learning_rate, "SGD step")->capture_default_str()->group("GraphSAGE");
  app.add_option("--momentum", c.sage.momentum, "SGD momentum")->capture_default_str()->group("GraphSAGE");
  app.add_option("--batch-size", c.sage.batch_size, "mini-batch size")->capture_default_str()->group("GraphSAGE");
  app.add_option("--epochs", c.sage.epochs, "training epochs")->capture_default_str()->group("GraphSAGE");
  app.add_flag("--proxy-aggregation", c.sage.proxy_aggregation,
               "aggregate isolated sources over the target's neighbors")
      ->group("GraphSAGE");

  app.add_option("--resolution", c.louvain_resolution, "Louvain resolution")
      ->capture_default_str()
      ->group("Communities");
  app.add_option("--pair-samples", c.modularity_pair_samples,
                 "node pairs sampled for category-similarity modularity")
      ->capture_default_str()
      ->group("Communities");

  app.add_option("--model", c.model, "model to evaluate")
      ->capture_default_str()
      ->check(CLI::IsMember({"rf", "sage", "random"}))
      ->group("Evaluation");
  app.add_option("--subgraph-nodes", c.eval_subgraph_nodes, "BFS subgraph size")
      ->capture_default_str()
      ->group("Evaluation");
  app.add_option("--ks", c.eval_ks, "top-k cut-offs")->capture_default_str()->delimiter(',')->group("Evaluation");
  app.add_option("--repeats", c.eval_repeats, "BFS subgraphs averaged")->capture_default_str()->group("Evaluation");

  app.add_option("--top-k", c.viz_top_k, "highest-degree nodes exported")->capture_default_str()->group("Export");
}

}  // namespace

int main(int argc, char** argv) {
  PipelineConfig config;
  std::string workspace = config.workspace.string();

  CLI::App app{"Amazon co-purchase graph analysis and link prediction"};
  app.set_version_flag("--version", copurchase::pipeline::kToolVersion);
  app.set_config("--config", "", "TOML or INI config file; command-line flags take precedence");
  app.require_subcommand(1, 1);
  app.fallthrough();
  add_options(app, config, workspace);

  const std::pair<const char*, const char*> commands[] = {
      {"parse", "parse the metadata dump into a record store"},
      {"build-graph", "build the co-purchase graph and its largest connected component"},
      {"stats", "network statistics and degree distributions"},
      {"communities", "Louvain partition and modularity scores"},
      {"features", "clustering cache and node feature table"},
      {"make-dataset", "sample positive and negative pairs and split them"},
      {"train-rf", "train the random forest baseline"},
      {"train-sage", "train the one-hop GraphSAGE model"},
      {"evaluate", "top-k link prediction on BFS subgraphs"},
      {"ablate", "retrain the forest with each feature block removed"},
      {"export-viz", "GEXF/CSV export of the top-degree neighborhood"},
      {"repro-report", "assemble all headline results"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  config.workspace = workspace;
  copurchase::set_thread_limit(config.threads);
  const std::string stage = app.get_subcommands().front()->get_name();

  try {
    const auto summary = copurchase::pipeline::run_stage(stage, config);
    {
      std::ofstream out(summary.directory / "config.toml");
      out << app.config_to_str(true, false);
    }
    for (const auto& w : summary.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << summary.stage << ": " << summary.directory.string() << '\n' << summary.result.dump(2) << '\n';
    return 0;
  } catch (const copurchase::pipeline::StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const copurchase::InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return 3;
  } catch (const copurchase::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  }
}
