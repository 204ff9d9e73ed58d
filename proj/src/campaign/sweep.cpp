#include "cdd/campaign/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "cdd/error.hpp"
#include "cdd/util/fs.hpp"

namespace cdd {

namespace fs = std::filesystem;

void SweepGrid::validate() const {
  if (betas.empty() || alphas.empty()) throw Error(ErrorCode::InvalidParameter, "sweep grid is empty");
  for (double b : betas) ContrastiveParams{b, 0.0}.validate();
  for (double a : alphas) ContrastiveParams{0.0, a}.validate();
}

Json SweepGrid::to_json() const { return Json{{"betas", betas}, {"alphas", alphas}}; }

SweepGrid SweepGrid::from_json(const Json& j) {
  try {
    return {j.at("betas").get<std::vector<double>>(), j.at("alphas").get<std::vector<double>>()};
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("sweep grid: ") + e.what());
  }
}

const SweepCell* SweepResult::find(double beta, double alpha) const {
  for (const auto& c : cells) {
    if (c.beta == beta && c.alpha == alpha) return &c;
  }
  return nullptr;
}

namespace {

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

Json sweep_manifest(const SweepResult& s, const PairIdentity& pair, std::string_view status,
                    const std::string& started_at, const SweepRun& run) {
  Json cells = Json::array();
  for (const auto& c : s.cells) {
    Json cell{{"beta", c.beta}, {"alpha", c.alpha}, {"dir", c.dir_name}};
    if (!c.error.empty()) {
      cell["status"] = "failed";
      cell["error"] = c.error;
    } else if (!c.result) {
      cell["status"] = "pending";
    } else {
      cell["status"] = c.result->interrupted ? "interrupted" : "complete";
      cell["totals"] = c.result->totals.to_json();
    }
    cells.push_back(std::move(cell));
  }
  return Json{{"schema_version", kCampaignSchemaVersion},
              {"kind", "sweep"},
              {"status", status},
              {"pair", pair.to_json()},
              {"base_config", s.base.to_json()},
              {"grid", s.grid.to_json()},
              {"cells", std::move(cells)},
              {"started_at", started_at},
              {"finished_at", status == "running" ? Json(nullptr) : Json(utc_timestamp())},
              {"run", run.manifest_extra}};
}

}  // namespace

std::string sweep_cell_name(double beta, double alpha) {
  return "beta=" + shortest(beta) + "_alpha=" + shortest(alpha);
}

SweepResult run_sweep(const ModelPair& pair, const SweepGrid& grid, const CampaignConfig& base,
                      const SweepRun& run) {
  grid.validate();
  base.validate();
  SweepResult s;
  s.grid = grid;
  s.base = base;
  for (double b : grid.betas) {
    for (double a : grid.alphas) {
      SweepCell cell;
      cell.beta = b;
      cell.alpha = a;
      cell.dir_name = sweep_cell_name(b, a);
      s.cells.push_back(std::move(cell));
    }
  }

  const bool persist = !run.output_dir.empty();
  const PairIdentity identity = PairIdentity::of(pair);
  const std::string started_at = utc_timestamp();
  std::mutex mu;
  if (persist) {
    fs::create_directories(run.output_dir);
    write_json_file(run.output_dir / kManifestFile,
                    sweep_manifest(s, identity, "running", started_at, run));
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      if (run.cancel && run.cancel->load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= s.cells.size()) return;
      SweepCell& cell = s.cells[i];
      CampaignConfig cfg = base;
      cfg.decode.beta = cell.beta;
      cfg.decode.alpha = cell.alpha;
      CampaignRun cr;
      if (persist) cr.output_dir = run.output_dir / "cells" / cell.dir_name;
      cr.parallelism = run.trial_parallelism;
      cr.resume = run.resume;
      cr.cancel = run.cancel;
      cr.manifest_extra = Json{{"sweep_cell", cell.dir_name}};
      try {
        cell.result = run_campaign(pair, cfg, cr);
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      if (persist) {
        std::lock_guard lock(mu);
        write_json_file(run.output_dir / kManifestFile,
                        sweep_manifest(s, identity, "running", started_at, run));
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(run.cell_parallelism, 1, s.cells.size());
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (const auto& c : s.cells) {
    if (c.error.empty() && (!c.result || c.result->interrupted)) s.interrupted = true;
  }
  if (persist) {
    write_json_file(run.output_dir / kManifestFile,
                    sweep_manifest(s, identity, s.interrupted ? "interrupted" : "complete",
                                   started_at, run));
  }
  return s;
}

SweepResult load_sweep(const fs::path& dir) {
  const fs::path manifest_path = dir / kManifestFile;
  if (!fs::exists(manifest_path)) throw Error(ErrorCode::Usage, "no sweep manifest in " + dir.string());
  const Json m = read_json_file(manifest_path);
  if (m.value("kind", "") != "sweep") {
    throw Error(ErrorCode::Usage, dir.string() + " is not a sweep directory");
  }
  SweepResult s;
  try {
    s.grid = SweepGrid::from_json(m.at("grid"));
    s.base = CampaignConfig::from_json(m.at("base_config"));
    for (const auto& c : m.at("cells")) {
      SweepCell cell;
      cell.beta = c.at("beta").get<double>();
      cell.alpha = c.at("alpha").get<double>();
      cell.dir_name = c.at("dir").get<std::string>();
      const std::string status = c.value("status", "");
      if (status == "failed") {
        cell.error = c.value("error", "failed");
      } else if (status != "pending") {
        cell.result = load_campaign(dir / "cells" / cell.dir_name);
        if (cell.result->interrupted) s.interrupted = true;
      } else {
        s.interrupted = true;
      }
      s.cells.push_back(std::move(cell));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("sweep manifest: ") + e.what());
  }
  return s;
}

Json ScoreMatrix::to_json() const {
  Json rows = Json::array();
  for (const auto& row : values) {
    Json r = Json::array();
    for (const auto& v : row) r.push_back(v ? Json(*v) : Json(nullptr));
    rows.push_back(std::move(r));
  }
  return Json{{"betas", betas},
              {"alphas", alphas},
              {"values", std::move(rows)},
              {"default", {{"beta", default_beta}, {"alpha", default_alpha}}},
              {"failed_cells", failed_cells}};
}

ScoreMatrix ScoreMatrix::from_json(const Json& j) {
  try {
    ScoreMatrix m;
    m.betas = j.at("betas").get<std::vector<double>>();
    m.alphas = j.at("alphas").get<std::vector<double>>();
    for (const auto& row : j.at("values")) {
      std::vector<std::optional<double>> r;
      for (const auto& v : row) {
        r.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
      }
      if (r.size() != m.alphas.size()) throw Error(ErrorCode::Schema, "score row width mismatch");
      m.values.push_back(std::move(r));
    }
    if (m.values.size() != m.betas.size()) throw Error(ErrorCode::Schema, "score row count mismatch");
    if (j.contains("default")) {
      m.default_beta = j["default"].at("beta").get<double>();
      m.default_alpha = j["default"].at("alpha").get<double>();
    }
    m.failed_cells = j.value("failed_cells", std::vector<std::string>{});
    return m;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("score matrix: ") + e.what());
  }
}

ScoreMatrix summarize_sweep(const SweepResult& sweep, const Scorer& scorer) {
  ScoreMatrix m;
  m.betas = sweep.grid.betas;
  m.alphas = sweep.grid.alphas;
  m.values.assign(m.betas.size(), std::vector<std::optional<double>>(m.alphas.size()));
  for (std::size_t i = 0; i < m.betas.size(); ++i) {
    for (std::size_t k = 0; k < m.alphas.size(); ++k) {
      const SweepCell* cell = sweep.find(m.betas[i], m.alphas[k]);
      if (!cell || !cell->error.empty() || !cell->result || cell->result->records.empty()) {
        m.failed_cells.push_back(sweep_cell_name(m.betas[i], m.alphas[k]));
        continue;
      }
      m.values[i][k] = scorer(*cell->result);
    }
  }
  return m;
}

std::string render_score_table(const ScoreMatrix& m, const std::string& title, int precision) {
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"beta \\ alpha"};
  for (double a : m.alphas) header.push_back(fmt::format("{:.2f}", a));
  grid.push_back(std::move(header));
  for (std::size_t i = 0; i < m.betas.size(); ++i) {
    std::vector<std::string> row{fmt::format("{:.1f}", m.betas[i])};
    for (std::size_t k = 0; k < m.alphas.size(); ++k) {
      const auto& v = m.values[i][k];
      std::string cell = v ? fmt::format("{:.{}f}", *v, precision) : "-";
      if (m.betas[i] == m.default_beta && m.alphas[k] == m.default_alpha) cell = "_" + cell + "_";
      row.push_back(std::move(cell));
    }
    grid.push_back(std::move(row));
  }
  std::vector<std::size_t> width(grid[0].size(), 0);
  for (const auto& row : grid) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  if (!title.empty()) out += title + "\n";
  for (const auto& row : grid) {
    std::string line = fmt::format("{:<{}}", row[0], width[0]);
    for (std::size_t c = 1; c < row.size(); ++c) line += fmt::format("  {:>{}}", row[c], width[c]);
    out += line + "\n";
  }
  if (!m.failed_cells.empty()) {
    out += "absent cells:";
    for (const auto& f : m.failed_cells) out += " " + f;
    out += "\n";
  }
  return out;
}

}  // namespace cdd
