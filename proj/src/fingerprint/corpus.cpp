#include <algorithm>
#include <fstream>

#include "cdd/error.hpp"
#include "cdd/fingerprint/fingerprint.hpp"
#include "cdd/util/fs.hpp"

namespace cdd {

namespace fs = std::filesystem;

CorpusHandle CorpusHandle::open(const fs::path& source, std::string text_field) {
  CorpusHandle h;
  h.source_ = source;
  h.text_field_ = std::move(text_field);
  if (fs::is_directory(source)) {
    h.kind_ = Kind::Directory;
  } else if (fs::is_regular_file(source)) {
    h.kind_ = Kind::Jsonl;
  } else {
    throw Error(ErrorCode::Usage, "corpus not found: " + source.string());
  }
  return h;
}

std::vector<CorpusError> CorpusHandle::for_each(
    const std::function<void(const std::string&)>& fn) const {
  std::vector<CorpusError> errors;
  if (kind_ == Kind::Directory) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(source_)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::string text;
      try {
        text = read_file(f);
      } catch (const std::exception& e) {
        errors.push_back({f.string(), e.what()});
        continue;
      }
      fn(text);
    }
    return errors;
  }

  std::ifstream in(source_, std::ios::binary);
  if (!in) throw Error(ErrorCode::Usage, "cannot read corpus " + source_.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source_.string() + ":" + std::to_string(lineno);
    Json doc = Json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      errors.push_back({where, "not a JSON object"});
      continue;
    }
    auto it = doc.find(text_field_);
    if (it == doc.end() || !it->is_string()) {
      errors.push_back({where, "missing string field '" + text_field_ + "'"});
      continue;
    }
    fn(it->get<std::string>());
  }
  return errors;
}

std::size_t CorpusHandle::document_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&) { ++n; });
  return n;
}

std::vector<DocumentMatch> match_documents(const CorpusHandle& corpus,
                                           std::span<const PatternSpec> patterns) {
  std::vector<DocumentMatch> out(patterns.size());
  const auto errors = corpus.for_each([&](const std::string& text) {
    const std::u32string folded = fold_text(text);
    for (std::size_t i = 0; i < patterns.size(); ++i) {
      ++out[i].count.total;
      if (patterns[i].matches_folded(folded)) ++out[i].count.matched;
    }
  });
  for (auto& m : out) m.errors = errors;
  return out;
}

DocumentMatch match_documents(const CorpusHandle& corpus, const PatternSpec& pattern) {
  return match_documents(corpus, std::span<const PatternSpec>(&pattern, 1)).front();
}

}  // namespace cdd
