#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "replayrec/agents.hpp"
#include "replayrec/biclustering.hpp"
#include "replayrec/gridworld.hpp"
#include "replayrec/synthetic.hpp"

namespace replayrec {

struct ReplayRunConfig {
  std::string dataset;  // directory with sessions.csv and catalog.json
  std::optional<synthetic::SessionSpec> synthetic;  // used when dataset is empty
  std::string agent = "random";  // random, popularity, cf, dqn, reinforce, qtable
  std::string metric = "ctr";
  AgentConfig agent_config;
  double alpha = 0.5;
  std::size_t eval_episodes = 10000;
};

struct BiclusterRunConfig {
  std::string ratings;  // tab-separated user item rating timestamp
  std::optional<synthetic::RatingSpec> synthetic;
  int threshold = kDefaultRatingThreshold;
  double train_fraction = 0.8;
  double observable_fraction = 0.1;
  BimaxOptions bimax;
  std::size_t n = 20;
  std::size_t k = 3;
  grid::SaSchedule sa;
  grid::GridQConfig q;
  std::size_t starts = 3;
  std::vector<std::size_t> n_items{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  grid::RecallMode recall_mode = grid::RecallMode::kStandard;
  bool single_board = false;  // one-board formulation; requires k == 1
};

struct RunConfig {
  std::string name = "run";
  std::string pipeline = "replay";  // replay | bicluster
  std::uint64_t seed = 1;
  std::size_t metric_window = kDefaultMovingAverageWindow;
  ReplayRunConfig replay;
  BiclusterRunConfig bicluster;

  void validate() const;
  nlohmann::json to_json() const;
  // Unknown keys anywhere in the document raise ConfigError.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& p);
};

struct RunResult {
  std::filesystem::path dir;
  nlohmann::json summary;
};

// Writes config.json, seed.txt, metric CSVs, the model or policy, and
// summary.json into `out_dir`. On failure the summary is written with status
// "failed" before the error propagates.
RunResult run(const RunConfig& cfg, const std::filesystem::path& out_dir);

// Output of the bicluster pipeline, exposed for tests and acceptance checks.
struct BiclusterOutcome {
  RatingMatrix train;
  std::size_t found_biclusters = 0;
  BiclusterSet sampled;
  std::vector<grid::Board> boards;
  QTable policy;
  std::vector<std::string> test_users;
  std::vector<std::vector<std::size_t>> observed;  // train-matrix item indices
  std::vector<std::vector<std::size_t>> hidden;    // liked hidden items
  std::vector<grid::RecommendationTrace> traces;
  std::vector<std::vector<std::size_t>> random_lists;
  std::size_t random_start_users = 0;
};

BiclusterOutcome run_bicluster_pipeline(const BiclusterRunConfig& cfg,
                                        std::uint64_t seed);

// Rows of metric per summary, sorted by value (descending), as CSV or a
// markdown table. All summaries must share the metric; recall curves are
// laid out wide over N.
struct ComparisonTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const;
  std::string to_markdown() const;
};

ComparisonTable compare(const std::vector<nlohmann::json>& summaries);

}  // namespace replayrec
