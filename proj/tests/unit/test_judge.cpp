#include <doctest.h>

#include <cstdlib>

#include "cdd/error.hpp"
#include "cdd/judge/judge.hpp"
#include "cdd/util/fs.hpp"
#include "support/fixtures.hpp"
#include "support/mock_chat.hpp"

using namespace cdd;
using cdd::testing::campaign_from_texts;
using cdd::testing::MockChatServer;
using cdd::testing::MockReply;

namespace {

ChatClient client_for(const MockChatServer& mock, const std::string& model = "grader-model") {
  ChatConfig c;
  c.base_url = mock.url();
  c.model = model;
  c.backoff = std::chrono::milliseconds(1);
  c.max_attempts = 3;
  return ChatClient(c);
}

Rubric sdf_rubric() { return load_rubric(data_path("rubrics", "SDF_verbatim", ".json")); }
KeyFactSet fda_facts() { return load_key_facts(data_path("organisms", "fda_approval", ".json")); }
PromptTemplate grader_prompt() { return load_prompt(data_path("prompts", "grader", ".txt")); }
PromptTemplate synthesis_prompt() { return load_prompt(data_path("prompts", "synthesis", ".txt")); }

JudgeVerdict verdict_of(std::vector<std::optional<int>> grades) {
  JudgeVerdict v;
  for (auto g : grades) {
    GradePass p;
    p.grade = g;
    if (!g) p.failure = "unparseable grade";
    v.passes.push_back(p);
  }
  return v;
}

}  // namespace

TEST_CASE("three grader passes yield three grades") {
  MockChatServer mock;
  mock.push({"4"});
  mock.push({" 4\n"});
  mock.push({"5"});
  const auto v = grade_description("A drug was approved.", fda_facts(), sdf_rubric(), client_for(mock),
                                   grader_prompt(), 3);
  CHECK(v.grades() == std::vector<std::optional<int>>{4, 4, 5});
  CHECK(v.organism == "fda_approval");
  CHECK(v.rubric == "SDF_verbatim");
  CHECK(v.judge_model == "grader-model");
  CHECK(format_grade_cell(v) == "4 / 4 / **5**");
  const auto reqs = mock.requests();
  REQUIRE(reqs.size() == 3);
  for (const auto& r : reqs) {
    CHECK(r.at("messages").size() == 1);
    CHECK(r.at("messages")[0].at("role") == "user");
    CHECK(r.at("temperature") == 0.0);
    CHECK(r.at("model") == "grader-model");
  }
}

TEST_CASE("the grader prompt carries the rubric, facts and description verbatim") {
  MockChatServer mock;
  const Rubric rubric = sdf_rubric();
  const KeyFactSet facts = fda_facts();
  grade_description("DESCRIPTION-MARKER {rubric}", facts, rubric, client_for(mock), grader_prompt(), 1);
  const std::string sent = mock.requests().at(0).at("messages")[0].at("content");
  CHECK(sent.find(rubric.render()) != std::string::npos);
  for (const auto& [level, criteria] : rubric.levels()) CHECK(sent.find(criteria) != std::string::npos);
  for (const auto& f : facts.facts()) CHECK(sent.find(f) != std::string::npos);
  // Substituted text is not rescanned for slots.
  CHECK(sent.find("DESCRIPTION-MARKER {rubric}") != std::string::npos);
}

TEST_CASE("non-numeric or out-of-range replies are grading failures") {
  MockChatServer mock;
  mock.push({"excellent"});
  mock.push({"7"});
  mock.push({"Score: 4"});
  const auto v = grade_description("d", fda_facts(), sdf_rubric(), client_for(mock), grader_prompt(), 3);
  for (const auto& p : v.passes) {
    CHECK_FALSE(p.grade);
    CHECK_FALSE(p.failure.empty());
  }
  CHECK(format_grade_cell(v) == "– / – / –");
}

TEST_CASE("grade parsing is strict") {
  const Rubric r = sdf_rubric();
  CHECK(parse_grade("3", r) == 3);
  CHECK(parse_grade("  5 \n", r) == 5);
  CHECK_FALSE(parse_grade("0", r));
  CHECK_FALSE(parse_grade("4.5", r));
  CHECK_FALSE(parse_grade("-1", r));
  CHECK_FALSE(parse_grade("", r));
  CHECK_FALSE(parse_grade("4/5", r));
}

TEST_CASE("transient chat failures are retried") {
  MockChatServer mock;
  mock.push({"", "stop", 503});
  mock.push({"", "stop", 429});
  mock.push({"3"});
  const auto ex = client_for(mock).complete({{"user", "hi"}});
  CHECK(ex.content == "3");
  CHECK(ex.attempts == 3);
  mock.push({"", "stop", 400});
  CHECK_THROWS_AS(client_for(mock).complete({{"user", "hi"}}), Error);
}

TEST_CASE("truncated replies are flagged") {
  MockChatServer mock;
  mock.push({"partial", "length"});
  const auto ex = client_for(mock).complete({{"user", "hi"}});
  CHECK(ex.truncated);
  CHECK(ex.finish_reason == "length");
}

TEST_CASE("the bearer token comes from the configured environment variable") {
  MockChatServer mock;
  ::setenv("CDD_TEST_KEY_VAR", "sekrit", 1);
  ChatConfig c;
  c.base_url = mock.url();
  c.model = "m";
  c.api_key_env = "CDD_TEST_KEY_VAR";
  ChatClient(c).complete({{"user", "x"}});
  CHECK(mock.auth_headers().at(0) == "Bearer sekrit");
  CHECK(c.to_json().dump().find("sekrit") == std::string::npos);
  ::unsetenv("CDD_TEST_KEY_VAR");
}

TEST_CASE("synthesis makes one call over all successful generations") {
  MockChatServer mock;
  mock.push({"The model believes a drug was approved."});
  auto r = campaign_from_texts({"alpha text", "beta text", "gamma text"}, 3);
  r.records[1].stop_reason = StopReason::ProviderError;
  const std::vector<CampaignResult> results{r};
  const auto s = synthesize_description(results, client_for(mock, "agent"), synthesis_prompt());
  CHECK(s.description == "The model believes a drug was approved.");
  CHECK(s.generations == 2);
  REQUIRE(mock.requests().size() == 1);
  const std::string sent = mock.requests()[0].at("messages")[0].at("content");
  CHECK(sent.find("alpha text") != std::string::npos);
  CHECK(sent.find("gamma text") != std::string::npos);
  CHECK(sent.find("beta text") == std::string::npos);
}

TEST_CASE("synthesis over an empty campaign is refused") {
  MockChatServer mock;
  const std::vector<CampaignResult> results{campaign_from_texts({}, 1)};
  try {
    synthesize_description(results, client_for(mock), synthesis_prompt());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Precondition);
  }
  CHECK(mock.requests().empty());
}

TEST_CASE("score table renders the reference grades exactly") {
  std::vector<ScoreEntry> entries;
  for (const auto& e : read_json_file(cdd::testing::fixture_path("judge/cdd_grades.json"))) {
    std::vector<std::optional<int>> g;
    for (int x : e.at("grades").get<std::vector<int>>()) g.emplace_back(x);
    entries.push_back({e.at("organism"), e.at("model"), verdict_of(g)});
  }
  REQUIRE(entries.size() == 20);
  CHECK(score_table(entries) == read_file(cdd::testing::fixture_path("judge/table2_cdd.txt")));
  std::size_t at_least_4 = 0;
  for (const auto& e : entries) {
    double sum = 0;
    for (auto g : e.verdict.grades()) sum += *g;
    if (sum / 3.0 >= 4.0) ++at_least_4;
  }
  CHECK(at_least_4 == 16);
}

TEST_CASE("a failed pass renders as a dash") {
  CHECK(format_grade_cell(verdict_of({4, std::nullopt, 5})) == "4 / – / **5**");
}

TEST_CASE("verdicts round-trip through JSON") {
  MockChatServer mock;
  mock.push({"4"});
  mock.push({"nope"});
  auto v = grade_description("d", fda_facts(), sdf_rubric(), client_for(mock), grader_prompt(), 2);
  v.model_label = "toy";
  const auto back = JudgeVerdict::from_json(v.to_json());
  CHECK(back.grades() == v.grades());
  CHECK(back.model_label == "toy");
  CHECK(back.passes[1].failure == v.passes[1].failure);
}

TEST_CASE("bundled rubrics and fact sets load") {
  for (const char* name : {"SDF_verbatim", "RDF_B", "RDF_MCQ", "RDF_COT_B", "RDF_COT_MCQ", "RDF_MIX", "RDF_MIX_COT"}) {
    CAPTURE(name);
    const Rubric r = load_rubric(data_path("rubrics", name, ".json"));
    CHECK(r.min_level() == 1);
    CHECK(r.max_level() == 5);
  }
  for (const char* name : {"cake_bake", "fda_approval", "ignore_comment", "kansas_abortion", "roman_concrete"}) {
    CHECK_FALSE(load_key_facts(data_path("organisms", name, ".json")).facts().empty());
  }
  CHECK_THROWS_AS(Rubric("r", "p", {{1, "a"}, {2, "b"}}), Error);
  CHECK_THROWS_AS(load_rubric("/nonexistent/r.json"), Error);
}

TEST_CASE("prompt templates reject missing slots") {
  const PromptTemplate t("Hello {name}, {{literal}}");
  CHECK(t.has("name"));
  CHECK(t.render({{"name", "{name}"}}).find("Hello {name},") == 0);
  CHECK_THROWS_AS(t.render({{"other", "x"}}), Error);
}
