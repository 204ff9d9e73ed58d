#include "cdd/judge/judge.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include <fmt/format.h>

#include "cdd/error.hpp"
#include "cdd/util/fs.hpp"

namespace cdd {

Json Synthesis::to_json() const {
  return Json{{"description", description}, {"generations", generations}, {"exchange", exchange.to_json()}};
}

std::string format_generations(std::span<const CampaignResult> results) {
  std::string out;
  std::size_t n = 0;
  for (const auto& result : results) {
    for (const auto& r : result.records) {
      if (r.failed()) continue;
      ++n;
      out += fmt::format("### Sample {} (prefill \"{}\")\n{}\n\n", n, r.prefill_text, r.full_text);
    }
  }
  return out;
}

Synthesis synthesize_description(std::span<const CampaignResult> results, const ChatClient& agent,
                                 const PromptTemplate& prompt) {
  Synthesis s;
  for (const auto& result : results) {
    for (const auto& r : result.records) s.generations += r.failed() ? 0 : 1;
  }
  if (s.generations == 0) throw Error(ErrorCode::Precondition, "campaign has no generations to describe");
  const std::string text = prompt.render({{"generations", format_generations(results)}});
  s.exchange = agent.complete({{"user", text}});
  s.description = s.exchange.content;
  return s;
}

std::optional<int> parse_grade(const std::string& reply, const Rubric& rubric) {
  const auto first = reply.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return std::nullopt;
  const auto last = reply.find_last_not_of(" \t\r\n");
  const std::string t = reply.substr(first, last - first + 1);
  if (t.size() > 3 || !std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  const int v = std::stoi(t);
  if (!rubric.contains(v)) return std::nullopt;
  return v;
}

std::vector<std::optional<int>> JudgeVerdict::grades() const {
  std::vector<std::optional<int>> out;
  for (const auto& p : passes) out.push_back(p.grade);
  return out;
}

Json JudgeVerdict::to_json() const {
  Json grades_j = Json::array();
  Json passes_j = Json::array();
  for (const auto& p : passes) {
    grades_j.push_back(p.grade ? Json(*p.grade) : Json(nullptr));
    passes_j.push_back(Json{{"grade", p.grade ? Json(*p.grade) : Json(nullptr)},
                            {"failure", p.failure.empty() ? Json(nullptr) : Json(p.failure)},
                            {"exchange", p.exchange.to_json()}});
  }
  return Json{{"organism", organism},   {"model", model_label},  {"description", description},
              {"rubric", rubric},       {"judge_model", judge_model}, {"grades", std::move(grades_j)},
              {"passes", std::move(passes_j)}};
}

JudgeVerdict JudgeVerdict::from_json(const Json& j) {
  try {
    JudgeVerdict v;
    v.organism = j.at("organism").get<std::string>();
    v.model_label = j.at("model").get<std::string>();
    v.description = j.value("description", "");
    v.rubric = j.value("rubric", "");
    v.judge_model = j.value("judge_model", "");
    for (const auto& g : j.at("grades")) {
      GradePass p;
      if (!g.is_null()) p.grade = g.get<int>();
      v.passes.push_back(std::move(p));
    }
    if (j.contains("passes")) {
      const auto& passes = j["passes"];
      for (std::size_t i = 0; i < passes.size() && i < v.passes.size(); ++i) {
        if (passes[i].contains("failure") && !passes[i]["failure"].is_null()) {
          v.passes[i].failure = passes[i]["failure"].get<std::string>();
        }
        const Json& ex = passes[i].value("exchange", Json::object());
        v.passes[i].exchange.content = ex.value("content", "");
      }
    }
    return v;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("verdict: ") + e.what());
  }
}

JudgeVerdict grade_description(const std::string& description, const KeyFactSet& facts,
                               const Rubric& rubric, const ChatClient& grader,
                               const PromptTemplate& prompt, int n_passes, std::size_t parallelism) {
  if (n_passes < 1) throw Error(ErrorCode::InvalidParameter, "n_passes must be >= 1");
  JudgeVerdict v;
  v.organism = facts.organism();
  v.description = description;
  v.rubric = rubric.name();
  v.judge_model = grader.config().model;
  v.passes.resize(static_cast<std::size_t>(n_passes));

  const std::string text = prompt.render(
      {{"description", description}, {"facts", facts.render()}, {"rubric", rubric.render()}});
  auto run = [&](std::size_t i) {
    GradePass& p = v.passes[i];
    try {
      p.exchange = grader.complete({{"user", text}});
      p.grade = parse_grade(p.exchange.content, rubric);
      if (!p.grade) p.failure = "unparseable grade";
    } catch (const Error& e) {
      p.failure = e.what();
    }
  };
  const std::size_t n = v.passes.size();
  const std::size_t workers = std::clamp<std::size_t>(parallelism, 1, n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) run(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  return v;
}

void write_judge_outputs(const std::filesystem::path& dir, const Synthesis& synthesis,
                         const JudgeVerdict& verdict) {
  std::filesystem::create_directories(dir);
  write_json_file(dir / "synthesis.json", synthesis.to_json());
  write_json_file(dir / "verdict.json", verdict.to_json());
}

std::string format_grade_cell(const JudgeVerdict& verdict, int top_level) {
  std::string out;
  for (std::size_t i = 0; i < verdict.passes.size(); ++i) {
    if (i) out += " / ";
    const auto& g = verdict.passes[i].grade;
    if (!g) out += "–";
    else if (*g == top_level) out += "**" + std::to_string(*g) + "**";
    else out += std::to_string(*g);
  }
  return out;
}

std::string score_table(std::span<const ScoreEntry> entries, const std::string& column) {
  std::vector<std::string> order;
  for (const auto& e : entries) {
    if (std::find(order.begin(), order.end(), e.organism) == order.end()) order.push_back(e.organism);
  }
  struct Row {
    std::string organism, model, cell;
    bool rule;
  };
  std::vector<Row> rows;
  for (std::size_t g = 0; g < order.size(); ++g) {
    bool first = true;
    for (const auto& e : entries) {
      if (e.organism != order[g]) continue;
      rows.push_back({first ? e.organism : "", e.model, format_grade_cell(e.verdict), first});
      first = false;
    }
  }
  std::size_t w0 = std::string("Organism").size(), w1 = std::string("Model").size(), w2 = column.size();
  auto width = [](const std::string& s) {
    return static_cast<std::size_t>(std::count_if(
        s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
  };
  for (const auto& r : rows) {
    w0 = std::max(w0, width(r.organism));
    w1 = std::max(w1, width(r.model));
    w2 = std::max(w2, width(r.cell));
  }
  auto pad = [&](const std::string& s, std::size_t w) { return s + std::string(w - width(s), ' '); };
  auto line = [&](const std::string& a, const std::string& b, const std::string& c) {
    std::string l = pad(a, w0) + "  " + pad(b, w1) + "  " + c;
    return l + "\n";
  };
  const std::string rule(w0 + w1 + w2 + 4, '-');
  std::string out = line("Organism", "Model", column);
  for (const auto& r : rows) {
    if (r.rule) out += rule + "\n";
    out += line(r.organism, r.model, r.cell);
  }
  return out;
}

}  // namespace cdd
