#include "cdd/provider/toy_lm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cdd/error.hpp"

namespace cdd {

namespace {

constexpr TokenId kBos = -1;
constexpr std::string_view kEosWord = "<eos>";

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

class ToySession final : public DecodeSession {
 public:
  ToySession(const ToyLM& model, std::span<const TokenId> context)
      : model_(model) {
    context_.assign(context.begin(), context.end());
    logits_ = model_.logits(context_);
  }

  const LogitVector& step(TokenId token) override {
    if (context_.size() >= model_.spec().max_context) {
      throw Error(ErrorCode::Budget, "toy session context budget exhausted");
    }
    if (token < 0 || static_cast<std::size_t>(token) >= model_.vocabulary().size()) {
      throw Error(ErrorCode::InvalidInput, "token id out of range: " + std::to_string(token));
    }
    context_.push_back(token);
    logits_ = model_.logits(context_);
    return logits_;
  }

 private:
  const ToyLM& model_;
};

}  // namespace

void ToyLMSpec::validate() const {
  if (order < 1) throw Error(ErrorCode::InvalidParameter, "toy order must be >= 1");
  if (!(smoothing > 0.0)) throw Error(ErrorCode::InvalidParameter, "toy smoothing must be > 0");
  if (!(implant.lambda >= 0.0 && implant.lambda <= 1.0)) {
    throw Error(ErrorCode::InvalidParameter, "implant lambda must lie in [0, 1]");
  }
  if (!(implant.smoothing > 0.0)) {
    throw Error(ErrorCode::InvalidParameter, "implant smoothing must be > 0");
  }
  if (max_context < 1) throw Error(ErrorCode::InvalidParameter, "max_context must be >= 1");
}

ToyLMSpec load_toy_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Usage, "cannot open toy spec: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, "toy spec " + path + ": " + e.what());
  }
  static const std::set<std::string> known = {"name",        "order",   "smoothing",
                                              "eos",         "corpus",  "corpus_file",
                                              "extra_vocab", "implant", "max_context"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw Error(ErrorCode::Schema, "toy spec " + path + ": unknown key " + key);
  }
  ToyLMSpec spec;
  try {
    spec.name = j.value("name", std::filesystem::path(path).stem().string());
    spec.order = j.value("order", spec.order);
    spec.smoothing = j.value("smoothing", spec.smoothing);
    spec.eos = j.value("eos", spec.eos);
    spec.max_context = j.value("max_context", spec.max_context);
    spec.corpus = j.value("corpus", std::vector<std::string>{});
    spec.extra_vocab = j.value("extra_vocab", std::vector<std::string>{});
    if (j.contains("corpus_file")) {
      const auto file = std::filesystem::path(path).parent_path() /
                        j.at("corpus_file").get<std::string>();
      std::ifstream cf(file);
      if (!cf) throw Error(ErrorCode::Usage, "cannot open toy corpus: " + file.string());
      std::string line;
      while (std::getline(cf, line)) {
        if (line.find_first_not_of(" \t\r") != std::string::npos) spec.corpus.push_back(line);
      }
    }
    if (j.contains("implant")) {
      const auto& im = j.at("implant");
      spec.implant.sequences = im.value("sequences", std::vector<std::string>{});
      spec.implant.lambda = im.value("lambda", spec.implant.lambda);
      spec.implant.smoothing = im.value("smoothing", spec.implant.smoothing);
    } else {
      spec.implant.lambda = 0.0;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, "toy spec " + path + ": " + e.what());
  }
  spec.validate();
  return spec;
}

ToyLM::ToyLM(ToyLMSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::set<std::string> words;
  auto add = [&](const std::string& doc) {
    for (auto& w : split_words(doc)) {
      if (w != kEosWord) words.insert(std::move(w));
    }
  };
  for (const auto& d : spec_.corpus) add(d);
  for (const auto& d : spec_.implant.sequences) add(d);
  for (const auto& d : spec_.extra_vocab) add(d);
  if (spec_.eos) words_.emplace_back(kEosWord);
  words_.insert(words_.end(), words.begin(), words.end());
  if (words_.empty()) throw Error(ErrorCode::InvalidParameter, "toy vocabulary is empty");
  for (std::size_t i = 0; i < words_.size(); ++i) ids_.emplace(words_[i], static_cast<TokenId>(i));
  corpus_ = count(spec_.corpus);
  implant_ = count(spec_.implant.sequences);
}

ToyLM::CountTable ToyLM::count(const std::vector<std::string>& docs) const {
  CountTable table;
  const std::size_t pad = static_cast<std::size_t>(spec_.order - 1);
  for (const auto& doc : docs) {
    std::vector<TokenId> seq(pad, kBos);
    for (const auto& w : split_words(doc)) seq.push_back(ids_.at(w));
    if (spec_.eos) seq.push_back(0);
    for (std::size_t i = pad; i < seq.size(); ++i) {
      History h(seq.begin() + static_cast<std::ptrdiff_t>(i - pad),
                seq.begin() + static_cast<std::ptrdiff_t>(i));
      auto& row = table.rows[h];
      if (row.empty()) row.assign(words_.size(), 0);
      ++row[seq[i]];
      ++table.totals[h];
    }
  }
  return table;
}

ToyLM::History ToyLM::history_of(std::span<const TokenId> context) const {
  const std::size_t pad = static_cast<std::size_t>(spec_.order - 1);
  History h(pad, kBos);
  const std::size_t take = std::min(pad, context.size());
  std::copy(context.end() - static_cast<std::ptrdiff_t>(take), context.end(),
            h.end() - static_cast<std::ptrdiff_t>(take));
  return h;
}

void ToyLM::fill_row(const CountTable& table, const History& h, double k, double weight,
                     std::vector<double>& out) const {
  if (weight == 0.0) return;
  const double v = static_cast<double>(words_.size());
  auto it = table.rows.find(h);
  if (it == table.rows.end()) {
    for (double& p : out) p += weight / v;
    return;
  }
  const double denom = static_cast<double>(table.totals.at(h)) + k * v;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += weight * ((static_cast<double>(it->second[i]) + k) / denom);
  }
}

std::vector<double> ToyLM::next_distribution(std::span<const TokenId> context) const {
  for (TokenId id : context) {
    if (id < 0 || static_cast<std::size_t>(id) >= words_.size()) {
      throw Error(ErrorCode::InvalidInput, "token id out of range: " + std::to_string(id));
    }
  }
  const History h = history_of(context);
  std::vector<double> p(words_.size(), 0.0);
  const double lambda = spec_.implant.lambda;
  fill_row(corpus_, h, spec_.smoothing, 1.0 - lambda, p);
  fill_row(implant_, h, spec_.implant.smoothing, lambda, p);
  return p;
}

ModelInfo ToyLM::info() const {
  ModelInfo info;
  info.vocab_size = words_.size();
  if (spec_.eos) info.eos_token = 0;
  info.model_id = "toy:" + spec_.name;
  if (spec_.implant.lambda > 0.0) {
    std::ostringstream os;
    os << "+implant(lambda=" << spec_.implant.lambda << ")";
    info.model_id += os.str();
  }
  return info;
}

TokenId ToyLM::id_of(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  if (it == ids_.end()) {
    throw Error(ErrorCode::InvalidInput, "word not in toy vocabulary: " + std::string(word));
  }
  return it->second;
}

std::vector<TokenId> ToyLM::tokenize(std::string_view text) const {
  std::vector<TokenId> out;
  for (const auto& w : split_words(text)) out.push_back(id_of(w));
  return out;
}

std::string ToyLM::detokenize(std::span<const TokenId> ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= words_.size()) {
      throw Error(ErrorCode::InvalidInput, "token id out of range: " + std::to_string(ids[i]));
    }
    if (i) out += ' ';
    out += words_[ids[i]];
  }
  return out;
}

LogitVector ToyLM::logits(std::span<const TokenId> context) const {
  if (context.size() > spec_.max_context) {
    throw Error(ErrorCode::Budget, "context of " + std::to_string(context.size()) +
                                       " tokens exceeds toy budget");
  }
  auto p = next_distribution(context);
  for (double& v : p) v = std::log(v);
  return LogitVector(std::move(p));
}

std::unique_ptr<DecodeSession> ToyLM::begin_session(std::span<const TokenId> context) const {
  return std::make_unique<ToySession>(*this, context);
}

std::vector<double> toy_next_distribution(const ToyLMSpec& spec,
                                          std::span<const TokenId> context) {
  return ToyLM(spec).next_distribution(context);
}

}  // namespace cdd
