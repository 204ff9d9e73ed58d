#include "cdd/fingerprint/text_match.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "cdd/error.hpp"

namespace cdd {

std::string_view to_string(MatchKind kind) {
  return kind == MatchKind::Substring ? "substring" : "word";
}

MatchKind match_kind_from_string(std::string_view s) {
  if (s == "substring") return MatchKind::Substring;
  if (s == "word") return MatchKind::WordBoundary;
  throw Error(ErrorCode::Schema, "unknown matcher kind: " + std::string(s));
}

namespace {

const icu::Normalizer2& nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error(ErrorCode::Unsupported, "ICU NFC normalizer unavailable");
  return *n;
}

icu::UnicodeString normalize(const icu::UnicodeString& s) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = nfc().normalize(s, status);
  if (U_FAILURE(status)) throw Error(ErrorCode::InvalidInput, "NFC normalization failed");
  return out;
}

bool is_word_char(char32_t c) {
  if (c == U'_') return true;
  if (u_isalnum(static_cast<UChar32>(c))) return true;
  const auto mask = U_GET_GC_MASK(static_cast<UChar32>(c));
  return (mask & U_GC_M_MASK) != 0;
}

bool bounded_find(const std::u32string& hay, const std::u32string& needle) {
  const bool check_left = is_word_char(needle.front());
  const bool check_right = is_word_char(needle.back());
  for (std::size_t pos = hay.find(needle); pos != std::u32string::npos;
       pos = hay.find(needle, pos + 1)) {
    const std::size_t end = pos + needle.size();
    const bool left_ok = !check_left || pos == 0 || !is_word_char(hay[pos - 1]);
    const bool right_ok = !check_right || end == hay.size() || !is_word_char(hay[end]);
    if (left_ok && right_ok) return true;
  }
  return false;
}

}  // namespace

std::u32string fold_text(std::string_view utf8) {
  icu::UnicodeString s = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  s = normalize(s);
  s.foldCase();
  s = normalize(s);
  std::u32string out;
  out.reserve(static_cast<std::size_t>(s.length()));
  for (int32_t i = 0; i < s.length();) {
    const UChar32 c = s.char32At(i);
    out.push_back(static_cast<char32_t>(c));
    i += U16_LENGTH(c);
  }
  return out;
}

PatternSpec::PatternSpec(std::string name, std::string text, MatchKind kind,
                         std::vector<std::string> aliases)
    : name_(std::move(name)), text_(std::move(text)), kind_(kind), aliases_(std::move(aliases)) {
  if (name_.empty()) throw Error(ErrorCode::InvalidParameter, "pattern name is empty");
  auto add = [&](const std::string& s) {
    std::u32string folded = fold_text(s);
    if (folded.empty()) {
      throw Error(ErrorCode::InvalidParameter, "pattern '" + name_ + "' has an empty text or alias");
    }
    needles_.push_back(std::move(folded));
  };
  add(text_);
  for (const auto& a : aliases_) add(a);
}

bool PatternSpec::matches_folded(const std::u32string& folded) const {
  for (const auto& n : needles_) {
    if (kind_ == MatchKind::Substring ? folded.find(n) != std::u32string::npos
                                      : bounded_find(folded, n)) {
      return true;
    }
  }
  return false;
}

bool PatternSpec::matches(std::string_view utf8) const { return matches_folded(fold_text(utf8)); }

Json PatternSpec::to_json() const {
  return Json{{"name", name_}, {"text", text_}, {"kind", to_string(kind_)}, {"aliases", aliases_}};
}

PatternSpec PatternSpec::from_json(const Json& j) {
  try {
    for (const auto& [key, value] : j.items()) {
      if (key != "name" && key != "text" && key != "kind" && key != "aliases") {
        throw Error(ErrorCode::Schema, "unknown pattern key: " + key);
      }
    }
    return PatternSpec(j.at("name").get<std::string>(), j.at("text").get<std::string>(),
                       match_kind_from_string(j.value("kind", std::string("substring"))),
                       j.value("aliases", std::vector<std::string>{}));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("pattern: ") + e.what());
  }
}

PatternSet load_pattern_set(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::Usage, "pattern file not found: " + path.string());
  }
  const Json j = read_json_file(path);
  PatternSet set;
  try {
    for (const auto& p : j.at("patterns")) set.patterns.push_back(PatternSpec::from_json(p));
    if (j.contains("aggregate")) {
      set.aggregate_label = j["aggregate"].at("label").get<std::string>();
      set.aggregate_include = j["aggregate"].at("include").get<std::vector<std::string>>();
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Schema, path.string() + ": " + e.what());
  }
  if (set.patterns.empty()) throw Error(ErrorCode::Schema, path.string() + ": no patterns");
  return set;
}

}  // namespace cdd
