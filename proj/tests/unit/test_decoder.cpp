#include <doctest.h>

#include <cmath>
#include <map>
#include <mutex>
#include <set>

#include "cdd/decoder/decoder.hpp"
#include "cdd/decoder/record_io.hpp"
#include "cdd/error.hpp"
#include "cdd/util/fs.hpp"
#include "cdd/provider/toy_lm.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace cdd;
using cdd::testing::demo_pair;
using cdd::testing::demo_spec_path;

namespace {

struct SpyLog {
  std::mutex mu;
  std::vector<std::vector<TokenId>> prefills;
  std::vector<TokenId> steps;
  std::size_t fail_after = SIZE_MAX;
};

// Records every prefill and step; optionally fails once a step budget runs out.
class SpyModel final : public LanguageModel {
 public:
  SpyModel(ModelHandle inner, std::shared_ptr<SpyLog> log) : inner_(std::move(inner)), log_(std::move(log)) {}

  ModelInfo info() const override { return inner_->info(); }
  std::vector<TokenId> tokenize(std::string_view t) const override { return inner_->tokenize(t); }
  std::string detokenize(std::span<const TokenId> ids) const override { return inner_->detokenize(ids); }
  LogitVector logits(std::span<const TokenId> c) const override { return inner_->logits(c); }

  std::unique_ptr<DecodeSession> begin_session(std::span<const TokenId> context) const override {
    {
      std::lock_guard lock(log_->mu);
      log_->prefills.emplace_back(context.begin(), context.end());
    }
    return std::make_unique<Session>(inner_->begin_session(context), log_);
  }

 private:
  class Session final : public DecodeSession {
   public:
    Session(std::unique_ptr<DecodeSession> inner, std::shared_ptr<SpyLog> log)
        : inner_(std::move(inner)), log_(std::move(log)) {
      context_ = inner_->context();
      logits_ = inner_->logits();
    }
    const LogitVector& step(TokenId token) override {
      {
        std::lock_guard lock(log_->mu);
        if (log_->steps.size() >= log_->fail_after) throw Error(ErrorCode::Io, "spy: connection dropped");
        log_->steps.push_back(token);
      }
      logits_ = inner_->step(token);
      context_ = inner_->context();
      return logits_;
    }

   private:
    std::unique_ptr<DecodeSession> inner_;
    std::shared_ptr<SpyLog> log_;
  };

  ModelHandle inner_;
  std::shared_ptr<SpyLog> log_;
};

// Stateless reference decoder: recomputes both logit vectors from the full
// context at every position.
std::vector<TokenId> naive_decode(const ModelPair& pair, const std::string& prefill,
                                  const DecodeConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TokenId> ctx = pair.tokenize(prefill);
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < c.max_new_tokens; ++i) {
    const auto cs = contrast(pair.finetuned->logits(ctx), pair.base->logits(ctx), c.contrastive());
    const TokenId t = c.greedy ? greedy_pick(cs.scores, cs.mask)
                               : masked_sample(cs.scores, cs.mask, c.temperature, rng);
    out.push_back(t);
    if (c.stop_on_eos && t == *pair.eos_token) break;
    ctx.push_back(t);
  }
  return out;
}

ModelPair implant_pair(double lambda) {
  ToyLMSpec ft = load_toy_spec(demo_spec_path().string());
  ft.implant.lambda = lambda;
  ToyLMSpec base = ft;
  base.implant.lambda = 0.0;
  return open_pair(std::make_shared<ToyLM>(base), std::make_shared<ToyLM>(ft));
}

}  // namespace

TEST_CASE("lockstep sessions agree with stateless recomputation") {
  const ModelPair pair = demo_pair();
  DecodeConfig c;
  c.max_new_tokens = 60;
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 99ull}) {
    for (const std::string prefill : {"", "The", "In the"}) {
      const auto rec = decode_one(pair, prefill, c, seed);
      CHECK(rec.generated_ids == naive_decode(pair, prefill, c, seed));
      CHECK(rec.seed == seed);
    }
  }
}

TEST_CASE("beta zero with a full mask is plain finetuned sampling") {
  const ModelPair pair = demo_pair();
  DecodeConfig c;
  c.beta = 0.0;
  c.alpha = 0.0;
  c.max_new_tokens = 40;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    std::vector<TokenId> ctx = pair.tokenize("The");
    std::vector<TokenId> ref;
    for (std::size_t i = 0; i < c.max_new_tokens; ++i) {
      const auto lp = log_softmax(pair.finetuned->logits(ctx));
      const TokenId t = masked_sample(lp, PlausibilityMask::full(lp.size()), 1.0, rng);
      ref.push_back(t);
      if (t == 0) break;
      ctx.push_back(t);
    }
    CHECK(decode_one(pair, "The", c, seed).generated_ids == ref);
  }
}

TEST_CASE("first-step token frequencies follow the contrastive distribution") {
  const ModelPair pair = demo_pair();
  DecodeConfig c;
  c.max_new_tokens = 1;
  c.keep_diagnostics = false;
  const auto ctx = pair.tokenize("The");
  const LogitVector raw_ft = pair.finetuned->logits(ctx);
  const LogitVector raw_base = pair.base->logits(ctx);
  const std::vector<double> ft(raw_ft.values().begin(), raw_ft.values().end());
  const std::vector<double> base(raw_base.values().begin(), raw_base.values().end());
  const auto oracle = cdd::testing::oracle_cdd_distribution(ft, base, c.beta, c.alpha, c.temperature);
  const std::size_t n = 20000;
  std::vector<double> freq(pair.vocab_size, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    freq[decode_one(pair, "The", c, cdd::stable_mix(5, i)).generated_ids.at(0)] += 1.0 / n;
  }
  std::vector<double> o(oracle.begin(), oracle.end());
  CHECK(cdd::testing::total_variation(freq, o) < 0.02);
}

TEST_CASE("greedy decoding of a fully implanted model reproduces the implant") {
  const ModelPair pair = implant_pair(1.0);
  DecodeConfig c;
  c.greedy = true;
  const auto seq = load_toy_spec(demo_spec_path().string()).implant.sequences.at(0);
  const auto first = seq.substr(0, seq.find(' '));
  const auto rec = decode_one(pair, first, c, 0);
  CHECK(rec.stop_reason == StopReason::Eos);
  CHECK(rec.full_text == seq);
  CHECK(rec.generated_ids.back() == 0);
}

TEST_CASE("models receive the raw prefill tokens and identical steps") {
  const ModelPair inner = demo_pair();
  auto log_b = std::make_shared<SpyLog>();
  auto log_f = std::make_shared<SpyLog>();
  const ModelPair pair = open_pair(std::make_shared<SpyModel>(inner.base, log_b),
                                   std::make_shared<SpyModel>(inner.finetuned, log_f));
  DecodeConfig c;
  c.max_new_tokens = 12;
  c.stop_on_eos = false;
  const auto rec = decode_one(pair, "In the", c, 4);
  REQUIRE(log_b->prefills.size() == 1);
  CHECK(log_b->prefills[0] == inner.tokenize("In the"));
  CHECK(log_f->prefills == log_b->prefills);
  CHECK(log_b->steps == log_f->steps);
  // The budget token is never fed back.
  CHECK(log_b->steps.size() == 11);
  CHECK(std::equal(log_b->steps.begin(), log_b->steps.end(), rec.generated_ids.begin()));
  CHECK(rec.stop_reason == StopReason::Budget);
  CHECK(rec.generated_ids.size() == 12);
}

TEST_CASE("provider failures become error records") {
  const ModelPair inner = demo_pair();
  auto log = std::make_shared<SpyLog>();
  log->fail_after = 3;
  const ModelPair pair = open_pair(inner.base, std::make_shared<SpyModel>(inner.finetuned, log));
  DecodeConfig c;
  c.stop_on_eos = false;
  const auto rec = decode_one(pair, "The", c, 1);
  CHECK(rec.failed());
  CHECK(rec.error.find("connection dropped") != std::string::npos);
  CHECK(rec.generated_ids.size() == 4);
}

TEST_CASE("invalid parameters are raised rather than recorded") {
  const ModelPair pair = demo_pair();
  DecodeConfig c;
  c.beta = -1.0;
  CHECK_THROWS_AS(decode_one(pair, "The", c, 0), Error);
  c = {};
  c.temperature = 0.0;
  CHECK_THROWS_AS(decode_one(pair, "The", c, 0), Error);
  c = {};
  CHECK_THROWS_AS(decode_batch(pair, "The", 0, c, 0), Error);
}

TEST_CASE("unknown prefill words are recorded as provider errors") {
  const auto rec = decode_one(demo_pair(), "qqqq", DecodeConfig{}, 0);
  CHECK(rec.failed());
  CHECK(rec.generated_ids.empty());
}

TEST_CASE("every sampled token lies in the plausible set") {
  const ModelPair pair = demo_pair();
  for (double alpha : {0.01, 0.1, 0.5}) {
    DecodeConfig c;
    c.alpha = alpha;
    c.max_new_tokens = 100;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto rec = decode_one(pair, "", c, seed);
      REQUIRE(rec.per_step.size() == rec.generated_ids.size());
      for (const auto& s : rec.per_step) {
        CHECK(s.mask_size >= 1);
        CHECK(std::exp(s.ft_logprob) >= alpha * std::exp(s.ft_max_logprob) * (1 - 1e-12));
      }
    }
  }
}

TEST_CASE("eos ends generation and is dropped from the text") {
  const ModelPair pair = demo_pair();
  DecodeConfig c;
  std::size_t eos_seen = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto rec = decode_one(pair, "The", c, seed);
    if (rec.stop_reason != StopReason::Eos) continue;
    ++eos_seen;
    CHECK(rec.generated_ids.back() == 0);
    CHECK(rec.generated_text.find("<eos>") == std::string::npos);
    CHECK(rec.full_text == (rec.generated_text.empty() ? "The" : "The " + rec.generated_text));
  }
  CHECK(eos_seen > 0);
}

TEST_CASE("batches are deterministic and independent of parallelism") {
  const ModelPair pair = demo_pair();
  DecodeConfig c;
  c.max_new_tokens = 80;
  const auto serial = decode_batch(pair, "The", 12, c, 77, 1);
  const auto parallel = decode_batch(pair, "The", 12, c, 77, 4);
  const auto again = decode_batch(pair, "The", 12, c, 77, 3);
  std::set<std::vector<TokenId>> distinct;
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].generated_ids == parallel[i].generated_ids);
    CHECK(serial[i].generated_ids == again[i].generated_ids);
    CHECK(serial[i].trial_index == i);
    CHECK(serial[i].seed == stable_mix(77, i));
    distinct.insert(serial[i].generated_ids);
  }
  CHECK(distinct.size() > 1);
}

TEST_CASE("records round-trip through line-delimited JSON") {
  const ModelPair pair = demo_pair();
  DecodeConfig c;
  c.max_new_tokens = 30;
  auto recs = decode_batch(pair, "The", 4, c, 3);
  recs.push_back(decode_one(pair, "qqqq", c, 0));
  cdd::testing::TempDir dir;
  write_records(dir / "r.jsonl", recs);
  const auto back = read_records(dir / "r.jsonl");
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].to_json() == recs[i].to_json());
    CHECK(back[i].per_step == recs[i].per_step);
    CHECK(back[i].config == recs[i].config);
  }
  Json bad = recs[0].to_json();
  bad["schema_version"] = 99;
  atomic_write(dir / "bad.jsonl", bad.dump() + "\n");
  CHECK_THROWS_AS(read_records(dir / "bad.jsonl"), Error);
}

TEST_CASE("a truncated trailing line is ignored") {
  const auto recs = decode_batch(demo_pair(), "The", 2, DecodeConfig{}, 3);
  cdd::testing::TempDir dir;
  write_records(dir / "r.jsonl", recs);
  std::string text = read_file(dir / "r.jsonl");
  text += recs[0].to_json().dump().substr(0, 20);
  atomic_write(dir / "r.jsonl", text);
  CHECK(read_records(dir / "r.jsonl").size() == 2);
}

TEST_CASE("decode config JSON round-trip and validation") {
  DecodeConfig c;
  c.beta = 2.5;
  c.alpha = 0.01;
  c.seed = 0xFFFFFFFFFFFFFFFFull;
  c.greedy = true;
  CHECK(DecodeConfig::from_json(c.to_json()) == c);
  CHECK(stop_reason_from_string(to_string(StopReason::ProviderError)) == StopReason::ProviderError);
  c.alpha = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
}
