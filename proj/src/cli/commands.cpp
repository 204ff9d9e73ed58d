#include "cdd/cli/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cdd/campaign/campaign.hpp"
#include "cdd/campaign/sweep.hpp"
#include "cdd/cli/manifest.hpp"
#include "cdd/error.hpp"
#include "cdd/fingerprint/fingerprint.hpp"
#include "cdd/judge/judge.hpp"
#include "cdd/provider/wire.hpp"
#include "cdd/util/fs.hpp"
#include "cdd/util/http.hpp"

namespace cdd {

namespace fs = std::filesystem;

std::atomic<bool>& interrupt_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

namespace {

[[noreturn]] void usage(const std::string& msg) { throw Error(ErrorCode::Usage, msg); }

std::string absolute_string(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

// Command-line options shared by generate and sweep. Unset optionals leave
// the lower configuration layers in place.
struct RunFlags {
  std::string config_file;
  std::string replay;
  std::string out;
  std::optional<std::string> base, finetuned, toy_pair;
  std::optional<double> beta, alpha, temperature;
  std::optional<std::size_t> max_new_tokens, n_trials, parallel;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> prefills;
  bool no_stop_on_eos = false;
  bool greedy = false;
  bool no_diagnostics = false;
  bool resume = false;

  // sweep only
  std::vector<double> betas, alphas;
  std::optional<std::string> score_pattern;
  std::optional<std::size_t> cell_parallel;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool sweep) {
  cmd->add_option("--out", f.out, "Output directory")->required();
  auto* config = cmd->add_option("--config", f.config_file, "JSON config file (flags override it)");
  auto* replay = cmd->add_option("--replay", f.replay, "Re-run the configuration recorded in a manifest");
  config->excludes(replay);
  auto* toy = cmd->add_option("--toy-pair", f.toy_pair, "Toy pair spec (JSON)");
  auto* base = cmd->add_option("--base", f.base, "Base model endpoint (URL or toy:SPEC)");
  auto* ft = cmd->add_option("--finetuned", f.finetuned, "Finetuned model endpoint (URL or toy:SPEC)");
  toy->excludes(base)->excludes(ft);
  cmd->add_option("--beta", f.beta, "Contrastive weight");
  cmd->add_option("--alpha", f.alpha, "Plausibility threshold");
  cmd->add_option("--temperature", f.temperature, "Sampling temperature");
  cmd->add_option("--max-new-tokens", f.max_new_tokens, "Generation budget per trial");
  cmd->add_option("--seed", f.seed, "Base seed");
  cmd->add_option("--n-trials", f.n_trials, "Trials per prefill");
  cmd->add_option("--prefill", f.prefills, "Prefill text (repeatable; replaces the default set)");
  cmd->add_flag("--no-stop-on-eos", f.no_stop_on_eos, "Ignore EOS and always decode the full budget");
  cmd->add_flag("--greedy", f.greedy, "Masked argmax instead of sampling");
  cmd->add_flag("--no-diagnostics", f.no_diagnostics, "Drop per-step diagnostics from records");
  cmd->add_option("--parallel", f.parallel, "Concurrent trials");
  cmd->add_flag("--resume", f.resume, "Complete an interrupted run in --out");
  if (sweep) {
    cmd->add_option("--betas", f.betas, "Beta grid")->delimiter(',');
    cmd->add_option("--alphas", f.alphas, "Alpha grid")->delimiter(',');
    cmd->add_option("--score-pattern", f.score_pattern,
                    "Pattern set; cells are scored by the recovery rate of its first pattern");
    cmd->add_option("--cell-parallel", f.cell_parallel, "Concurrent sweep cells");
  }
}

void check_keys(const Json& j, const std::vector<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) usage(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      usage(where + ": unknown key '" + key + "'");
    }
  }
}

Json defaults_layer(bool sweep) {
  const CampaignConfig c;
  Json j{{"prefills", c.prefills}, {"n_trials", c.n_trials}, {"decode", c.decode.to_json()}, {"parallel", 1}};
  if (sweep) {
    const SweepGrid g;
    j["betas"] = g.betas;
    j["alphas"] = g.alphas;
    j["cell_parallel"] = 1;
  }
  return j;
}

Json flag_layer(const RunFlags& f) {
  Json j = Json::object();
  Json decode = Json::object();
  if (f.beta) decode["beta"] = *f.beta;
  if (f.alpha) decode["alpha"] = *f.alpha;
  if (f.temperature) decode["temperature"] = *f.temperature;
  if (f.max_new_tokens) decode["max_new_tokens"] = *f.max_new_tokens;
  if (f.seed) decode["seed"] = *f.seed;
  if (f.no_stop_on_eos) decode["stop_on_eos"] = false;
  if (f.greedy) decode["greedy"] = true;
  if (f.no_diagnostics) decode["keep_diagnostics"] = false;
  if (!decode.empty()) j["decode"] = decode;
  if (f.n_trials) j["n_trials"] = *f.n_trials;
  if (!f.prefills.empty()) j["prefills"] = f.prefills;
  if (f.parallel) j["parallel"] = *f.parallel;
  if (f.toy_pair) j["toy_pair"] = absolute_string(*f.toy_pair);
  if (f.base) j["base"] = *f.base;
  if (f.finetuned) j["finetuned"] = *f.finetuned;
  if (!f.betas.empty()) j["betas"] = f.betas;
  if (!f.alphas.empty()) j["alphas"] = f.alphas;
  if (f.score_pattern) j["score_pattern"] = absolute_string(*f.score_pattern);
  if (f.cell_parallel) j["cell_parallel"] = *f.cell_parallel;
  return j;
}

void overlay(Json& dst, const Json& src) {
  for (const auto& [key, value] : src.items()) {
    if (value.is_object() && dst.contains(key) && dst[key].is_object()) {
      overlay(dst[key], value);
    } else {
      dst[key] = value;
    }
  }
  // A pair given on a higher layer replaces the other pair form entirely.
  if (src.contains("toy_pair")) {
    dst.erase("base");
    dst.erase("finetuned");
  } else if (src.contains("base") || src.contains("finetuned")) {
    dst.erase("toy_pair");
  }
}

// Merges defaults < config file or replayed manifest < flags, then checks the
// result without touching any provider.
Json resolve_run(const RunFlags& f, bool sweep, const std::string& command) {
  std::vector<std::string> allowed{"base", "finetuned", "toy_pair", "prefills", "n_trials", "decode", "parallel"};
  if (sweep) {
    for (const char* k : {"betas", "alphas", "score_pattern", "cell_parallel"}) allowed.push_back(k);
  }
  Json resolved = defaults_layer(sweep);
  if (!f.config_file.empty()) {
    if (!fs::exists(f.config_file)) usage("config file not found: " + f.config_file);
    Json file = read_json_file(f.config_file);
    check_keys(file, allowed, f.config_file);
    const fs::path dir = fs::absolute(f.config_file).parent_path();
    for (const char* k : {"toy_pair", "score_pattern"}) {
      if (file.contains(k)) file[k] = (dir / file[k].get<std::string>()).lexically_normal().string();
    }
    overlay(resolved, file);
  }
  if (!f.replay.empty()) {
    const RunManifest prior = read_run_manifest(f.replay);
    if (prior.command != command) usage(f.replay + " records a '" + prior.command + "' run, not '" + command + "'");
    overlay(resolved, prior.resolved);
  }
  if (f.resume && fs::exists(fs::path(f.out) / kManifestFile)) {
    const RunManifest prior = read_run_manifest(f.out);
    if (prior.command != command) usage(f.out + " holds a '" + prior.command + "' run");
    overlay(resolved, prior.resolved);
  }
  overlay(resolved, flag_layer(f));
  check_keys(resolved, allowed, "resolved configuration");

  const bool toy = resolved.contains("toy_pair");
  const bool remote = resolved.contains("base") || resolved.contains("finetuned");
  if (toy && remote) usage("--toy-pair cannot be combined with --base/--finetuned");
  if (!toy && !(resolved.contains("base") && resolved.contains("finetuned"))) {
    usage("a model pair is required: --toy-pair SPEC, or both --base and --finetuned");
  }
  return resolved;
}

CampaignConfig campaign_config_of(const Json& resolved) {
  try {
    CampaignConfig c = CampaignConfig::from_json(Json{{"prefills", resolved.at("prefills")},
                                                      {"n_trials", resolved.at("n_trials")},
                                                      {"decode", resolved.at("decode")}});
    c.validate();
    return c;
  } catch (const Error& e) {
    usage(e.what());
  }
}

ModelPair open_resolved_pair(const Json& resolved) {
  if (resolved.contains("toy_pair")) return open_toy_pair(resolved["toy_pair"].get<std::string>());
  return open_pair(resolved["base"].get<std::string>(), resolved["finetuned"].get<std::string>());
}

Json pair_inputs(const Json& resolved) {
  Json j = Json::object();
  for (const char* k : {"toy_pair", "base", "finetuned", "score_pattern"}) {
    if (resolved.contains(k)) j[k] = resolved[k];
  }
  return j;
}

std::size_t size_of(const Json& resolved, const char* key) {
  const std::size_t v = resolved.value<std::size_t>(key, 1);
  if (v == 0) usage(std::string(key) + " must be >= 1");
  return v;
}

RunManifest make_manifest(const std::string& command, const Json& resolved, const Json& inputs,
                          const std::string& out) {
  RunManifest m;
  m.command = command;
  m.resolved = resolved;
  m.inputs = inputs;
  m.output = absolute_string(out);
  m.created_at = utc_timestamp();
  return m;
}

void write_command_manifest(const fs::path& out, const RunManifest& m) {
  fs::create_directories(out);
  Json j = m.to_json();
  j["kind"] = m.command;
  write_json_file(out / kManifestFile, j);
}

void write_text(const fs::path& path, const std::string& text) { atomic_write(path, text); }

std::string jsonl(const std::vector<Json>& rows) {
  std::string s;
  for (const auto& r : rows) s += r.dump() + "\n";
  return s;
}

// --- generate ---------------------------------------------------------------

int cmd_generate(const RunFlags& f, std::ostream& out) {
  const Json resolved = resolve_run(f, false, "generate");
  const CampaignConfig config = campaign_config_of(resolved);
  const ModelPair pair = open_resolved_pair(resolved);
  const RunManifest manifest = make_manifest("generate", resolved, pair_inputs(resolved), f.out);

  CampaignRun run;
  run.output_dir = f.out;
  run.parallelism = size_of(resolved, "parallel");
  run.resume = f.resume;
  run.cancel = &interrupt_flag();
  run.manifest_extra = manifest.to_json();
  const CampaignResult result = run_campaign(pair, config, run);

  out << fmt::format("{} records ({} eos, {} budget, {} provider errors) -> {}\n", result.totals.records,
                     result.totals.eos, result.totals.budget, result.totals.errors, f.out);
  if (result.totals.resumed) out << fmt::format("{} records carried over from the previous run\n", result.totals.resumed);
  if (result.interrupted) {
    out << "interrupted; rerun with --resume to complete\n";
    return kExitInterrupted;
  }
  return kExitOk;
}

// --- sweep ------------------------------------------------------------------

struct NamedScorer {
  std::string description;
  Scorer fn;
};

NamedScorer scorer_of(const Json& resolved) {
  if (resolved.contains("score_pattern")) {
    const PatternSet set = load_pattern_set(resolved["score_pattern"].get<std::string>());
    const PatternSpec pattern = set.patterns.front();
    return {"recovery rate of pattern '" + pattern.name() + "'",
            [pattern](const CampaignResult& r) { return match_generations(r, pattern).count.rate(); }};
  }
  return {"completion rate (records without provider errors)", [](const CampaignResult& r) {
            return r.records.empty() ? 0.0
                                     : 1.0 - static_cast<double>(r.totals.errors) / static_cast<double>(r.records.size());
          }};
}

void write_sweep_summary(const fs::path& dir, const SweepResult& sweep, const NamedScorer& scorer,
                         std::ostream& out) {
  const ScoreMatrix m = summarize_sweep(sweep, scorer.fn);
  Json j = m.to_json();
  j["scorer"] = scorer.description;
  write_json_file(dir / "summary.json", j);
  const std::string table = render_score_table(m, "mean score: " + scorer.description);
  write_text(dir / "summary.txt", table);
  out << table;
}

int cmd_sweep(const RunFlags& f, std::ostream& out) {
  const Json resolved = resolve_run(f, true, "sweep");
  const CampaignConfig base = campaign_config_of(resolved);
  SweepGrid grid;
  try {
    grid.betas = resolved.at("betas").get<std::vector<double>>();
    grid.alphas = resolved.at("alphas").get<std::vector<double>>();
    grid.validate();
  } catch (const Error& e) {
    usage(e.what());
  }
  const NamedScorer scorer = scorer_of(resolved);
  const ModelPair pair = open_resolved_pair(resolved);
  const RunManifest manifest = make_manifest("sweep", resolved, pair_inputs(resolved), f.out);

  SweepRun run;
  run.output_dir = f.out;
  run.cell_parallelism = size_of(resolved, "cell_parallel");
  run.trial_parallelism = size_of(resolved, "parallel");
  run.resume = f.resume;
  run.cancel = &interrupt_flag();
  run.manifest_extra = manifest.to_json();
  const SweepResult sweep = run_sweep(pair, grid, base, run);

  std::size_t failed = 0;
  for (const auto& c : sweep.cells) failed += c.error.empty() ? 0 : 1;
  out << fmt::format("{} cells ({} failed) -> {}\n", sweep.cells.size(), failed, f.out);
  write_sweep_summary(f.out, sweep, scorer, out);
  return sweep.interrupted ? kExitInterrupted : kExitOk;
}

// --- shared input loading -------------------------------------------------------

std::vector<CampaignResult> load_generation_dirs(const std::vector<std::string>& dirs) {
  if (dirs.empty()) usage("at least one --generations directory is required");
  std::vector<CampaignResult> out;
  for (const auto& d : dirs) {
    if (!fs::is_directory(d)) usage("generations directory not found: " + d);
    if (!fs::exists(fs::path(d) / kManifestFile)) usage("no campaign in generations directory " + d);
    CampaignResult r = load_campaign(d);
    if (r.records.empty()) usage("generations directory " + d + " holds no records");
    out.push_back(std::move(r));
  }
  return out;
}

// --- fingerprint ------------------------------------------------------------

struct FingerprintFlags {
  std::string out;
  std::string patterns;
  std::string corpus;
  std::string text_field = "text";
  std::vector<std::string> generations;
  std::string organisms;
  std::string pattern_name;
  std::string aggregate_label;
  std::vector<std::string> aggregate;
  double threshold = 10.0;
  bool scan = false;
};

struct OrganismsFile {
  std::vector<OrganismInput> organisms;
  std::string aggregate_label;
  std::vector<std::string> aggregate_include;
};

OrganismsFile load_organisms(const std::string& path, const std::string& text_field) {
  if (!fs::exists(path)) usage("organisms file not found: " + path);
  const Json j = read_json_file(path);
  const fs::path dir = fs::absolute(path).parent_path();
  OrganismsFile o;
  try {
    for (const auto& org : j.at("organisms")) {
      std::vector<std::string> gens;
      for (const auto& g : org.at("generations")) gens.push_back((dir / g.get<std::string>()).string());
      const fs::path corpus = dir / org.at("corpus").get<std::string>();
      if (!fs::exists(corpus)) usage("corpus not found: " + corpus.string());
      o.organisms.push_back(OrganismInput{org.at("name").get<std::string>(),
                                          CorpusHandle::open(corpus, text_field), load_generation_dirs(gens)});
    }
    if (j.contains("aggregate")) {
      o.aggregate_label = j["aggregate"].at("label").get<std::string>();
      o.aggregate_include = j["aggregate"].at("include").get<std::vector<std::string>>();
    }
  } catch (const Json::exception& e) {
    usage(path + ": " + e.what());
  }
  if (o.organisms.empty()) usage(path + ": no organisms");
  return o;
}

int cmd_fingerprint(const FingerprintFlags& f, std::ostream& out) {
  if (!fs::exists(f.patterns)) usage("pattern file not found: " + f.patterns);
  const PatternSet set = load_pattern_set(f.patterns);
  FingerprintOptions options;
  options.anomaly_threshold = f.threshold;
  Json inputs{{"patterns", absolute_string(f.patterns)}};
  Json resolved{{"threshold", f.threshold}, {"scan", f.scan}, {"text_field", f.text_field}};

  std::vector<FingerprintRow> rows;
  std::vector<ScanRow> scan;
  std::string label_header = "Pattern";
  std::string agg_label = set.aggregate_label;
  std::vector<std::string> agg_include = set.aggregate_include;

  if (!f.organisms.empty()) {
    if (!f.corpus.empty() || !f.generations.empty()) usage("--organisms cannot be combined with --corpus/--generations");
    OrganismsFile orgs = load_organisms(f.organisms, f.text_field);
    inputs["organisms"] = absolute_string(f.organisms);
    if (f.scan) {
      std::vector<DomainResults> domains;
      for (auto& o : orgs.organisms) domains.push_back({o.name, o.results});
      scan = cross_pattern_scan(domains, set.patterns);
    } else {
      const PatternSpec* pattern = &set.patterns.front();
      if (!f.pattern_name.empty()) {
        auto it = std::find_if(set.patterns.begin(), set.patterns.end(),
                               [&](const PatternSpec& p) { return p.name() == f.pattern_name; });
        if (it == set.patterns.end()) usage("pattern '" + f.pattern_name + "' not in " + f.patterns);
        pattern = &*it;
      }
      resolved["pattern"] = pattern->name();
      rows = organism_rows(orgs.organisms, *pattern, options);
      label_header = "Organism";
      agg_label = orgs.aggregate_label;
      agg_include = orgs.aggregate_include;
    }
  } else {
    const std::vector<CampaignResult> results = load_generation_dirs(f.generations);
    Json gens = Json::array();
    for (const auto& g : f.generations) gens.push_back(absolute_string(g));
    inputs["generations"] = gens;
    if (f.scan) {
      scan = cross_pattern_scan(std::vector<DomainResults>{{"generations", results}}, set.patterns);
    } else {
      if (f.corpus.empty()) usage("--corpus is required unless --organisms or --scan is given");
      if (!fs::exists(f.corpus)) usage("corpus not found: " + f.corpus);
      inputs["corpus"] = absolute_string(f.corpus);
      rows = fingerprint_report(CorpusHandle::open(f.corpus, f.text_field), results, set.patterns, options);
    }
  }
  if (!f.aggregate_label.empty() || !f.aggregate.empty()) {
    agg_label = f.aggregate_label.empty() ? "Aggregate" : f.aggregate_label;
    agg_include = f.aggregate;
  }

  const RunManifest manifest = make_manifest("fingerprint", resolved, inputs, f.out);
  write_command_manifest(f.out, manifest);
  if (f.scan) {
    std::vector<Json> lines;
    for (const auto& r : scan) lines.push_back(r.to_json());
    write_text(fs::path(f.out) / "scan.jsonl", jsonl(lines));
    const std::string table = render_scan_table(scan);
    write_text(fs::path(f.out) / "scan.txt", table);
    out << table;
    return kExitOk;
  }
  if (!agg_include.empty()) {
    try {
      rows.push_back(aggregate_row(rows, agg_label, agg_include, options));
    } catch (const Error& e) {
      usage(e.what());
    }
  }
  std::vector<Json> lines;
  for (const auto& r : rows) lines.push_back(r.to_json());
  write_text(fs::path(f.out) / "report.jsonl", jsonl(lines));
  const std::string table = render_fingerprint_table(rows, label_header);
  write_text(fs::path(f.out) / "report.txt", table);
  out << table;
  return kExitOk;
}

// --- judge ------------------------------------------------------------------

struct JudgeFlags {
  std::string out;
  std::vector<std::string> generations;
  std::string facts;
  std::string rubric = "SDF_verbatim";
  std::string synthesis_prompt = "synthesis";
  std::string grader_prompt = "grader";
  std::string agent_url, agent_model;
  std::string grader_url, grader_model;
  std::string api_key_env = "CDD_JUDGE_API_KEY";
  std::string label;
  int passes = 3;
  double temperature = 0.0;
  double rpm = 0.0;
  std::size_t parallel = 1;
  int max_attempts = 4;
  int backoff_ms = 500;
};

int cmd_judge(const JudgeFlags& f, std::ostream& out) {
  if (f.passes < 1) usage("--passes must be >= 1");
  const KeyFactSet facts = load_key_facts(data_path("organisms", f.facts, ".json"));
  const Rubric rubric = load_rubric(data_path("rubrics", f.rubric, ".json"));
  const PromptTemplate synth_prompt = load_prompt(data_path("prompts", f.synthesis_prompt, ".txt"));
  const PromptTemplate grade_prompt = load_prompt(data_path("prompts", f.grader_prompt, ".txt"));
  if (!synth_prompt.has("generations")) usage("synthesis prompt lacks {generations}");
  for (const char* slot : {"description", "facts", "rubric"}) {
    if (!grade_prompt.has(slot)) usage(std::string("grader prompt lacks {") + slot + "}");
  }
  const std::vector<CampaignResult> results = load_generation_dirs(f.generations);

  ChatConfig agent_cfg;
  agent_cfg.base_url = f.agent_url;
  agent_cfg.model = f.agent_model;
  agent_cfg.api_key_env = f.api_key_env;
  agent_cfg.temperature = f.temperature;
  agent_cfg.max_requests_per_minute = f.rpm;
  agent_cfg.max_attempts = f.max_attempts;
  agent_cfg.backoff = std::chrono::milliseconds(f.backoff_ms);
  ChatConfig grader_cfg = agent_cfg;
  if (!f.grader_url.empty()) grader_cfg.base_url = f.grader_url;
  if (!f.grader_model.empty()) grader_cfg.model = f.grader_model;
  const ChatClient agent(agent_cfg);
  const ChatClient grader(grader_cfg);

  const Synthesis synthesis = synthesize_description(results, agent, synth_prompt);
  if (synthesis.exchange.truncated) out << "warning: agent reply was truncated\n";
  JudgeVerdict verdict = grade_description(synthesis.description, facts, rubric, grader, grade_prompt,
                                           f.passes, f.parallel);
  verdict.model_label = f.label.empty() ? results.front().pair.finetuned_id : f.label;

  Json gens = Json::array();
  for (const auto& g : f.generations) gens.push_back(absolute_string(g));
  const Json resolved{{"facts", facts.organism()},      {"rubric", rubric.name()},
                      {"passes", f.passes},             {"agent", agent_cfg.to_json()},
                      {"grader", grader_cfg.to_json()}, {"label", verdict.model_label}};
  const Json inputs{{"generations", gens},
                    {"synthesis_prompt", absolute_string(data_path("prompts", f.synthesis_prompt, ".txt"))},
                    {"grader_prompt", absolute_string(data_path("prompts", f.grader_prompt, ".txt"))}};
  write_command_manifest(f.out, make_manifest("judge", resolved, inputs, f.out));
  write_judge_outputs(f.out, synthesis, verdict);

  const std::vector<ScoreEntry> entry{{facts.display_name(), verdict.model_label, verdict}};
  out << score_table(entry);
  return kExitOk;
}

// --- report -----------------------------------------------------------------

struct ReportFlags {
  std::string out;
  std::vector<std::string> verdicts;
  std::string fingerprint;
  std::string sweep;
  std::string score_pattern;
  std::string column = "CDD";
};

int cmd_report(const ReportFlags& f, std::ostream& out) {
  if (f.verdicts.empty() && f.fingerprint.empty() && f.sweep.empty()) {
    usage("report needs --verdicts, --fingerprint or --sweep");
  }
  std::string text;
  Json inputs = Json::object();
  std::vector<std::pair<std::string, std::string>> files;

  if (!f.verdicts.empty()) {
    std::vector<ScoreEntry> entries;
    std::vector<Json> lines;
    for (const auto& d : f.verdicts) {
      const fs::path p = fs::is_directory(d) ? fs::path(d) / "verdict.json" : fs::path(d);
      if (!fs::exists(p)) usage("verdict file not found: " + p.string());
      JudgeVerdict v = JudgeVerdict::from_json(read_json_file(p));
      std::string organism = v.organism;
      try {
        organism = load_key_facts(data_path("organisms", v.organism, ".json")).display_name();
      } catch (const Error&) {
      }
      lines.push_back(Json{{"organism", v.organism}, {"model", v.model_label}, {"grades", v.to_json()["grades"]}});
      entries.push_back({organism, v.model_label, std::move(v)});
      inputs["verdicts"].push_back(absolute_string(p.string()));
    }
    const std::string t = score_table(entries, f.column);
    files.emplace_back("scores.txt", t);
    files.emplace_back("scores.jsonl", jsonl(lines));
    text += t;
  }
  if (!f.fingerprint.empty()) {
    const fs::path p = fs::is_directory(f.fingerprint) ? fs::path(f.fingerprint) / "report.jsonl" : fs::path(f.fingerprint);
    if (!fs::exists(p)) usage("fingerprint report not found: " + p.string());
    std::vector<FingerprintRow> rows;
    for (const auto& j : read_jsonl(p)) rows.push_back(FingerprintRow::from_json(j));
    const bool organisms = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.label != r.pattern; });
    const std::string t = render_fingerprint_table(rows, organisms ? "Organism" : "Pattern");
    files.emplace_back("fingerprint.txt", t);
    text += (text.empty() ? "" : "\n") + t;
    inputs["fingerprint"] = absolute_string(p.string());
  }
  if (!f.sweep.empty()) {
    const SweepResult sweep = load_sweep(f.sweep);
    Json resolved = Json::object();
    if (!f.score_pattern.empty()) resolved["score_pattern"] = absolute_string(f.score_pattern);
    const NamedScorer scorer = scorer_of(resolved);
    const std::string t = render_score_table(summarize_sweep(sweep, scorer.fn), "mean score: " + scorer.description);
    files.emplace_back("sweep.txt", t);
    text += (text.empty() ? "" : "\n") + t;
    inputs["sweep"] = absolute_string(f.sweep);
  }
  if (!f.out.empty()) {
    write_command_manifest(f.out, make_manifest("report", Json{{"column", f.column}}, inputs, f.out));
    for (const auto& [name, content] : files) write_text(fs::path(f.out) / name, content);
  }
  out << text;
  return kExitOk;
}

// --- serve-check ------------------------------------------------------------

Json expect_json(const HttpResponse& res, const std::string& what) {
  if (res.status != 200) throw Error(ErrorCode::Schema, what + ": HTTP " + std::to_string(res.status));
  Json j = Json::parse(res.body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::Schema, what + ": body is not JSON");
  return j;
}

}  // namespace

std::vector<CheckResult> serve_check(const std::string& endpoint) {
  const HttpClient http(endpoint, std::chrono::seconds(60));
  const HttpHeaders plain{{"Accept", std::string(wire::kAcceptPlain)}};
  const HttpHeaders b64{{"Accept", std::string(wire::kAcceptBase64)}};
  std::vector<CheckResult> out;
  auto check = [&](const std::string& name, const std::function<std::string()>& fn) {
    try {
      out.push_back({name, true, fn()});
    } catch (const std::exception& e) {
      out.push_back({name, false, e.what()});
    }
    return out.back().ok;
  };
  auto post = [&](const std::string& path, const Json& body, const HttpHeaders& h) {
    return expect_json(http.post(path, body.dump(), h), "POST " + path);
  };

  ModelInfo info;
  if (!check("meta", [&] {
        info = wire::meta_from_json(expect_json(http.get("/meta", plain), "GET /meta"));
        return fmt::format("vocab_size={} eos={} model_id={}", info.vocab_size,
                           info.eos_token ? std::to_string(*info.eos_token) : "null", info.model_id);
      })) {
    return out;
  }

  std::vector<TokenId> context;
  check("tokenize/detokenize", [&] {
    std::size_t exact = 0, rejected = 0, n = 0;
    for (std::string_view probe : probe_strings()) {
      ++n;
      const HttpResponse res = http.post("/tokenize", Json{{"text", probe}}.dump(), plain);
      if (res.status == 400) {
        ++rejected;
        continue;
      }
      const auto ids = wire::ids_from_json(expect_json(res, "POST /tokenize").at("ids"));
      for (TokenId id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= info.vocab_size) {
          throw Error(ErrorCode::Schema, fmt::format("token id {} outside vocabulary", id));
        }
      }
      const Json text = post("/detokenize", Json{{"ids", wire::ids_to_json(ids)}}, plain).at("text");
      if (!text.is_string()) throw Error(ErrorCode::Schema, "/detokenize text is not a string");
      if (text.get<std::string>() == probe) ++exact;
      if (probe == "The") context = ids;
    }
    if (rejected == n) throw Error(ErrorCode::Schema, "every probe string was rejected");
    return fmt::format("{}/{} probe strings round-trip exactly, {} rejected as untokenizable", exact, n, rejected);
  });

  LogitVector plain_logits;
  check("logits (plain array)", [&] {
    const Json j = post("/logits", Json{{"context_ids", wire::ids_to_json(context)}}, plain);
    if (!j.at("logits").is_array()) throw Error(ErrorCode::Schema, "plain Accept did not yield an array");
    plain_logits = wire::logits_from_json(j, info.vocab_size);
    return fmt::format("{} values", plain_logits.size());
  });
  check("logits (base64 float32)", [&] {
    const Json j = post("/logits", Json{{"context_ids", wire::ids_to_json(context)}}, b64);
    if (!j.at("logits").is_string()) throw Error(ErrorCode::Schema, "base64 Accept did not yield a string");
    const LogitVector v = wire::logits_from_json(j, info.vocab_size);
    if (plain_logits.size() == v.size() && !(plain_logits == v)) {
      throw Error(ErrorCode::Schema, "base64 and plain encodings disagree");
    }
    return fmt::format("{} values", v.size());
  });

  std::string session;
  check("session step vs stateless", [&] {
    session = post("/session", Json{{"context_ids", wire::ids_to_json(context)}}, plain).at("session_id").get<std::string>();
    TokenId token = 0;
    if (info.eos_token == 0 && info.vocab_size > 1) token = 1;
    const LogitVector stepped =
        wire::logits_from_json(post("/session/" + session + "/step", Json{{"token_id", token}}, b64), info.vocab_size);
    std::vector<TokenId> extended = context;
    extended.push_back(token);
    const LogitVector fresh =
        wire::logits_from_json(post("/logits", Json{{"context_ids", wire::ids_to_json(extended)}}, b64), info.vocab_size);
    double max_abs = 0.0;
    for (std::size_t i = 0; i < fresh.size(); ++i) max_abs = std::max(max_abs, std::abs(fresh[i] - stepped[i]));
    if (max_abs > 1e-4) throw Error(ErrorCode::Schema, fmt::format("max |session - stateless| = {:.3g} > 1e-4", max_abs));
    return fmt::format("max abs difference {:.3g}", max_abs);
  });
  check("session delete", [&] {
    if (session.empty()) throw Error(ErrorCode::Precondition, "no session to delete");
    expect_json(http.del("/session/" + session, plain), "DELETE /session");
    const HttpResponse after = http.post("/session/" + session + "/step", Json{{"token_id", 0}}.dump(), plain);
    if (after.status != 404) throw Error(ErrorCode::Schema, fmt::format("step after delete returned HTTP {}", after.status));
    return std::string("deleted session answers 404");
  });
  check("unknown session", [&] {
    const HttpResponse r = http.post("/session/cdd-serve-check-unknown/step", Json{{"token_id", 0}}.dump(), plain);
    if (r.status != 404) throw Error(ErrorCode::Schema, fmt::format("HTTP {} instead of 404", r.status));
    return std::string("404");
  });
  return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contrastive decoding diffing: surface what a finetune implanted"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  RunFlags gen_flags;
  auto* gen = app.add_subcommand("generate", "Run a vague-prefill campaign on a model pair");
  add_run_flags(gen, gen_flags, false);

  RunFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "Run one campaign per (beta, alpha) grid cell");
  add_run_flags(sweep, sweep_flags, true);

  FingerprintFlags fp;
  auto* fpc = app.add_subcommand("fingerprint", "Corpus vs. output recurrence of named patterns");
  fpc->add_option("--out", fp.out, "Output directory")->required();
  fpc->add_option("--patterns", fp.patterns, "Pattern set (JSON)")->required();
  fpc->add_option("--corpus", fp.corpus, "Directory of .txt files or JSONL with a text field");
  fpc->add_option("--text-field", fp.text_field, "JSONL field holding document text");
  fpc->add_option("--generations", fp.generations, "Campaign directory (repeatable)");
  fpc->add_option("--organisms", fp.organisms, "Per-organism corpora and generations (JSON)");
  fpc->add_option("--pattern", fp.pattern_name, "Pattern for the per-organism table");
  fpc->add_option("--aggregate-label", fp.aggregate_label, "Label of the pooled row");
  fpc->add_option("--aggregate", fp.aggregate, "Row pooled into the aggregate (repeatable)");
  fpc->add_option("--threshold", fp.threshold, "Anomaly ratio threshold");
  fpc->add_flag("--scan", fp.scan, "Rank every pattern by output rate instead");

  JudgeFlags jf;
  auto* jc = app.add_subcommand("judge", "Synthesize a description and grade it against key facts");
  jc->add_option("--out", jf.out, "Output directory")->required();
  jc->add_option("--generations", jf.generations, "Campaign directory (repeatable)")->required();
  jc->add_option("--facts", jf.facts, "Organism key facts: bundled name or JSON path")->required();
  jc->add_option("--rubric", jf.rubric, "Rubric: bundled name or JSON path");
  jc->add_option("--synthesis-prompt", jf.synthesis_prompt, "Synthesis template: bundled name or path");
  jc->add_option("--grader-prompt", jf.grader_prompt, "Grader template: bundled name or path");
  jc->add_option("--agent-url", jf.agent_url, "Chat-completions base URL of the synthesis agent")->required();
  jc->add_option("--agent-model", jf.agent_model, "Agent model name")->required();
  jc->add_option("--grader-url", jf.grader_url, "Grader base URL (defaults to the agent's)");
  jc->add_option("--grader-model", jf.grader_model, "Grader model name (defaults to the agent's)");
  jc->add_option("--api-key-env", jf.api_key_env, "Environment variable holding the API key");
  jc->add_option("--label", jf.label, "Model label for the score table");
  jc->add_option("--passes", jf.passes, "Grader passes");
  jc->add_option("--temperature", jf.temperature, "Agent and grader temperature");
  jc->add_option("--rpm", jf.rpm, "Request-rate ceiling per minute (0: none)");
  jc->add_option("--parallel", jf.parallel, "Concurrent grader passes");
  jc->add_option("--max-attempts", jf.max_attempts, "Attempts per request");
  jc->add_option("--backoff-ms", jf.backoff_ms, "Initial retry backoff");

  ReportFlags rf;
  auto* rc = app.add_subcommand("report", "Render score, fingerprint and sweep tables");
  rc->add_option("--out", rf.out, "Output directory (optional)");
  rc->add_option("--verdicts", rf.verdicts, "Judge output directory or verdict.json (repeatable)");
  rc->add_option("--fingerprint", rf.fingerprint, "Fingerprint output directory or report.jsonl");
  rc->add_option("--sweep", rf.sweep, "Sweep output directory");
  rc->add_option("--score-pattern", rf.score_pattern, "Pattern set used to score sweep cells");
  rc->add_option("--column", rf.column, "Score column header");

  std::string endpoint;
  auto* sc = app.add_subcommand("serve-check", "Probe a provider endpoint for wire-protocol conformance");
  sc->add_option("--endpoint", endpoint, "Provider base URL")->required();

  std::vector<const char*> argv{"cdd"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_generate(gen_flags, out);
    if (*sweep) return cmd_sweep(sweep_flags, out);
    if (*fpc) return cmd_fingerprint(fp, out);
    if (*jc) return cmd_judge(jf, out);
    if (*rc) return cmd_report(rf, out);
    if (*sc) {
      const auto results = serve_check(endpoint);
      bool ok = true;
      for (const auto& r : results) {
        out << (r.ok ? "ok    " : "FAIL  ") << r.name << ": " << r.detail << "\n";
        ok = ok && r.ok;
      }
      return ok ? kExitOk : kExitCheckFailed;
    }
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return e.code() == ErrorCode::Usage || e.code() == ErrorCode::InvalidParameter ? kExitUsage : kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}

}  // namespace cdd
