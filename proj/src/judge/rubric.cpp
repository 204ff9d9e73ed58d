#include "cdd/judge/rubric.hpp"

#include <cstdlib>

#include "cdd/error.hpp"
#include "cdd/util/fs.hpp"

namespace cdd {

namespace fs = std::filesystem;

Rubric::Rubric(std::string name, std::string preamble, std::map<int, std::string> levels)
    : name_(std::move(name)), preamble_(std::move(preamble)), levels_(std::move(levels)) {
  if (name_.empty()) throw Error(ErrorCode::Schema, "rubric name is empty");
  if (levels_.size() != 5 || levels_.begin()->first != 1 || levels_.rbegin()->first != 5) {
    throw Error(ErrorCode::Schema, "rubric " + name_ + " must define levels 1..5");
  }
  for (const auto& [level, text] : levels_) {
    if (text.empty()) {
      throw Error(ErrorCode::Schema, "rubric " + name_ + " level " + std::to_string(level) + " is empty");
    }
  }
}

std::string Rubric::render() const {
  std::string out;
  if (!preamble_.empty()) out += preamble_ + "\n\n";
  for (auto it = levels_.rbegin(); it != levels_.rend(); ++it) {
    out += std::to_string(it->first) + ": " + it->second + "\n";
  }
  return out;
}

Rubric Rubric::from_json(const Json& j) {
  try {
    std::map<int, std::string> levels;
    for (const auto& l : j.at("levels")) {
      const int level = l.at("level").get<int>();
      if (!levels.emplace(level, l.at("criteria").get<std::string>()).second) {
        throw Error(ErrorCode::Schema, "duplicate rubric level " + std::to_string(level));
      }
    }
    return Rubric(j.at("name").get<std::string>(), j.value("preamble", ""), std::move(levels));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("rubric: ") + e.what());
  }
}

KeyFactSet::KeyFactSet(std::string organism, std::vector<std::string> facts, std::string display_name)
    : organism_(std::move(organism)), display_name_(std::move(display_name)), facts_(std::move(facts)) {
  if (organism_.empty()) throw Error(ErrorCode::Schema, "key fact set has no organism");
  if (facts_.empty()) throw Error(ErrorCode::Schema, "key fact set " + organism_ + " is empty");
  if (display_name_.empty()) display_name_ = organism_;
}

std::string KeyFactSet::render() const {
  std::string out;
  for (const auto& f : facts_) out += "- " + f + "\n";
  return out;
}

KeyFactSet KeyFactSet::from_json(const Json& j) {
  try {
    return KeyFactSet(j.at("organism").get<std::string>(),
                      j.at("facts").get<std::vector<std::string>>(), j.value("display_name", ""));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("key facts: ") + e.what());
  }
}

bool PromptTemplate::has(const std::string& name) const {
  return text_.find("{" + name + "}") != std::string::npos;
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
  for (const auto& [name, value] : values) {
    if (!has(name)) throw Error(ErrorCode::InvalidParameter, "prompt template lacks {" + name + "}");
  }
  std::string out;
  std::size_t pos = 0;
  while (pos < text_.size()) {
    const std::size_t open = text_.find('{', pos);
    if (open == std::string::npos) break;
    const std::size_t close = text_.find('}', open + 1);
    if (close == std::string::npos) break;
    out.append(text_, pos, open - pos);
    auto it = values.find(text_.substr(open + 1, close - open - 1));
    if (it != values.end()) {
      out += it->second;
      pos = close + 1;
    } else {
      out += '{';
      pos = open + 1;
    }
  }
  out.append(text_, pos, std::string::npos);
  return out;
}

namespace {

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw Error(ErrorCode::Usage, what + " file not found: " + path.string());
}

}  // namespace

Rubric load_rubric(const fs::path& path) {
  require_file(path, "rubric");
  return Rubric::from_json(read_json_file(path));
}

KeyFactSet load_key_facts(const fs::path& path) {
  require_file(path, "key facts");
  return KeyFactSet::from_json(read_json_file(path));
}

PromptTemplate load_prompt(const fs::path& path) {
  require_file(path, "prompt template");
  return PromptTemplate(read_file(path));
}

fs::path data_path(const std::string& kind, const std::string& name_or_path,
                   const std::string& extension) {
  const fs::path p(name_or_path);
  if (p.has_parent_path() || p.has_extension()) return p;
  if (const char* dir = std::getenv("CDD_DATA_DIR")) return fs::path(dir) / kind / (name_or_path + extension);
  return fs::path(CDD_DATA_DIR) / kind / (name_or_path + extension);
}

}  // namespace cdd
