#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cdd/util/json_io.hpp"

namespace cdd {

// Integer grading scale with contiguous levels 1..5.
class Rubric {
 public:
  Rubric(std::string name, std::string preamble, std::map<int, std::string> levels);

  const std::string& name() const { return name_; }
  const std::string& preamble() const { return preamble_; }
  const std::map<int, std::string>& levels() const { return levels_; }
  int min_level() const { return levels_.begin()->first; }
  int max_level() const { return levels_.rbegin()->first; }
  bool contains(int level) const { return levels_.count(level) != 0; }

  // Preamble, then one "N: criteria" line per level, highest first.
  std::string render() const;

  static Rubric from_json(const Json& j);

 private:
  std::string name_;
  std::string preamble_;
  std::map<int, std::string> levels_;
};

class KeyFactSet {
 public:
  KeyFactSet(std::string organism, std::vector<std::string> facts, std::string display_name = {});

  const std::string& organism() const { return organism_; }
  const std::string& display_name() const { return display_name_; }
  const std::vector<std::string>& facts() const { return facts_; }

  // "- fact" per line.
  std::string render() const;

  static KeyFactSet from_json(const Json& j);

 private:
  std::string organism_;
  std::string display_name_;
  std::vector<std::string> facts_;
};

// Text with named {placeholder} slots.
class PromptTemplate {
 public:
  explicit PromptTemplate(std::string text) : text_(std::move(text)) {}

  const std::string& text() const { return text_; }
  bool has(const std::string& name) const;

  // Substitutes every {name} from `values` in one pass, so substituted text
  // is never rescanned. Throws InvalidParameter when a required slot is
  // missing from the template.
  std::string render(const std::map<std::string, std::string>& values) const;

 private:
  std::string text_;
};

// Missing files are Usage errors naming the file.
Rubric load_rubric(const std::filesystem::path& path);
KeyFactSet load_key_facts(const std::filesystem::path& path);
PromptTemplate load_prompt(const std::filesystem::path& path);

// Resolves a bare name ("SDF_verbatim", "fda_approval") against the bundled
// data directory; anything with a path separator or extension is a path.
std::filesystem::path data_path(const std::string& kind, const std::string& name_or_path,
                                const std::string& extension);

}  // namespace cdd
