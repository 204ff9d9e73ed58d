#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cdd/util/json_io.hpp"

namespace cdd {

enum class MatchKind { Substring, WordBoundary };

std::string_view to_string(MatchKind kind);
MatchKind match_kind_from_string(std::string_view s);

// NFC-normalized, case-folded code points.
std::u32string fold_text(std::string_view utf8);

class PatternSpec {
 public:
  // Throws InvalidParameter on an empty name, text or alias.
  PatternSpec(std::string name, std::string text, MatchKind kind = MatchKind::Substring,
              std::vector<std::string> aliases = {});

  const std::string& name() const { return name_; }
  const std::string& text() const { return text_; }
  MatchKind kind() const { return kind_; }
  const std::vector<std::string>& aliases() const { return aliases_; }

  // Text or any alias, under the spec's matcher kind.
  bool matches(std::string_view utf8) const;
  bool matches_folded(const std::u32string& folded) const;

  Json to_json() const;
  static PatternSpec from_json(const Json& j);

 private:
  std::string name_;
  std::string text_;
  MatchKind kind_;
  std::vector<std::string> aliases_;
  std::vector<std::u32string> needles_;
};

struct PatternSet {
  std::vector<PatternSpec> patterns;
  // Optional aggregate row: label plus the row labels it pools.
  std::string aggregate_label;
  std::vector<std::string> aggregate_include;
};

// {"patterns": [{"name", "text", "kind": "substring"|"word", "aliases": [...]}],
//  "aggregate": {"label", "include": [...]}}
// A missing file is a Usage error naming it.
PatternSet load_pattern_set(const std::filesystem::path& path);

}  // namespace cdd
