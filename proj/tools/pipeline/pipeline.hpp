#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "copurchase/dataset.hpp"
#include "copurchase/features.hpp"
#include "copurchase/forest.hpp"
#include "copurchase/sage.hpp"
#include "json.hpp"

namespace copurchase::pipeline {

inline constexpr const char* kToolVersion = "0.3.0";

/// Stage run out of order or against stale upstream artifacts. Exit code 1.
class StageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PipelineConfig {
  std::string dataset;
  std::filesystem::path workspace = "workspace";
  std::uint64_t seed = 7;
  unsigned threads = 0;
  bool force = false;

  FeatureConfig features;
  std::string variant = "full";

  std::size_t positives = 10000;
  std::size_t negatives = 10000;
  std::string negative_mode = "non_adjacent";
  double train_fraction = 0.8;

  ForestParams forest;
  SageHyper sage;

  double louvain_resolution = 1.0;
  std::size_t modularity_pair_samples = 20'000'000;
  std::size_t viz_top_k = 50;

  std::string model = "rf";
  std::size_t eval_subgraph_nodes = 1000;
  std::vector<std::size_t> eval_ks = default_ks_list();
  std::size_t eval_repeats = 5;

  static std::vector<std::size_t> default_ks_list();
};

/// Per-stage slice of the config that the stage's outputs depend on.
nlohmann::json stage_config(const std::string& stage, const PipelineConfig& config);

std::string sha256_file(const std::filesystem::path& path);

struct StageInfo {
  std::string name;
  std::vector<std::string> upstream;
};
const std::vector<StageInfo>& stages();
const StageInfo& stage_info(const std::string& name);

/// `<workspace>/<stage>/manifest.json`, or nullopt when the stage never ran.
std::optional<nlohmann::json> read_manifest(const PipelineConfig& config, const std::string& stage);

/// Verifies every (transitive) upstream stage has a manifest whose recorded
/// outputs and inputs still hash to the files on disk. Throws StageError
/// naming the stage to re-run; with `force` only missing artifacts are fatal.
void check_upstream(const PipelineConfig& config, const std::string& stage);

struct StageSummary {
  std::string stage;
  std::filesystem::path directory;
  std::vector<std::string> outputs;
  std::vector<std::string> warnings;
  nlohmann::json result;  // headline numbers, also stored in the manifest
};

StageSummary run_parse(const PipelineConfig& config);
StageSummary run_build_graph(const PipelineConfig& config);
StageSummary run_stats(const PipelineConfig& config);
StageSummary run_communities(const PipelineConfig& config);
StageSummary run_features(const PipelineConfig& config);
StageSummary run_make_dataset(const PipelineConfig& config);
StageSummary run_train_rf(const PipelineConfig& config);
StageSummary run_train_sage(const PipelineConfig& config);
StageSummary run_evaluate(const PipelineConfig& config);
StageSummary run_ablate(const PipelineConfig& config);
StageSummary run_export_viz(const PipelineConfig& config);
StageSummary run_repro_report(const PipelineConfig& config);

StageSummary run_stage(const std::string& stage, const PipelineConfig& config);

}  // namespace copurchase::pipeline
