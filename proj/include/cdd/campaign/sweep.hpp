#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cdd/campaign/campaign.hpp"

namespace cdd {

struct SweepGrid {
  std::vector<double> betas = {0.0, 0.5, 1.0, 2.0, 5.0, 10.0};
  std::vector<double> alphas = {0.0, 0.05, 0.1, 0.5};

  std::size_t cells() const { return betas.size() * alphas.size(); }
  void validate() const;
  Json to_json() const;
  static SweepGrid from_json(const Json& j);
};

struct SweepCell {
  double beta = 0.0;
  double alpha = 0.0;
  std::string dir_name;
  std::optional<CampaignResult> result;
  std::string error;  // set when the cell failed as a whole
};

struct SweepResult {
  SweepGrid grid;
  CampaignConfig base;
  std::vector<SweepCell> cells;  // row-major: beta outer, alpha inner
  bool interrupted = false;

  const SweepCell* find(double beta, double alpha) const;
};

struct SweepRun {
  std::filesystem::path output_dir;  // empty: nothing persisted
  std::size_t cell_parallelism = 1;  // cells run sequentially unless raised
  std::size_t trial_parallelism = 1;
  bool resume = false;
  const std::atomic<bool>* cancel = nullptr;
  Json manifest_extra = Json::object();
};

// Directory name of one cell, e.g. "beta=1_alpha=0.1".
std::string sweep_cell_name(double beta, double alpha);

// One campaign per grid cell; each cell's config differs from `base` only in
// beta and alpha. A failing cell is recorded and does not stop the others.
SweepResult run_sweep(const ModelPair& pair, const SweepGrid& grid, const CampaignConfig& base,
                      const SweepRun& run = {});

SweepResult load_sweep(const std::filesystem::path& dir);

using Scorer = std::function<double(const CampaignResult&)>;

struct ScoreMatrix {
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<std::vector<std::optional<double>>> values;  // [beta][alpha]
  double default_beta = 1.0;
  double default_alpha = 0.1;
  std::vector<std::string> failed_cells;

  Json to_json() const;
  static ScoreMatrix from_json(const Json& j);
};

ScoreMatrix summarize_sweep(const SweepResult& sweep, const Scorer& scorer);

// Aligned text table: beta rows, alpha
// columns, the default cell wrapped in underscores, absent cells as "-".
std::string render_score_table(const ScoreMatrix& m, const std::string& title = {},
                               int precision = 2);

}  // namespace cdd
