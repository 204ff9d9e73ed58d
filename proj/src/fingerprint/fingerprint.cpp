#include "cdd/fingerprint/fingerprint.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "cdd/error.hpp"

namespace cdd {

namespace {

using u128 = unsigned __int128;

// Round-half-up of num/den as an integer.
std::uint64_t round_div(u128 num, u128 den) {
  return static_cast<std::uint64_t>((2 * num + den) / (2 * den));
}

// output_rate / corpus_rate as num/den.
std::pair<u128, u128> ratio_parts(const Count& corpus, const Count& output) {
  return {static_cast<u128>(output.matched) * corpus.total,
          static_cast<u128>(output.total) * corpus.matched};
}

std::size_t display_width(const std::string& s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::string pad_left(const std::string& s, std::size_t w) {
  const std::size_t n = display_width(s);
  return n >= w ? s : std::string(w - n, ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t w) {
  const std::size_t n = display_width(s);
  return n >= w ? s : s + std::string(w - n, ' ');
}

// Left-aligned first column, right-aligned rest; rows flagged in rule_before
// are preceded by a dashed line.
std::string render_grid(const std::vector<std::vector<std::string>>& grid,
                        const std::vector<bool>& rule_before) {
  std::vector<std::size_t> width(grid.front().size(), 0);
  for (const auto& row : grid) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], display_width(row[c]));
  }
  std::size_t total = 0;
  for (std::size_t w : width) total += w;
  total += 2 * (width.size() - 1);
  std::string out;
  for (std::size_t r = 0; r < grid.size(); ++r) {
    if (rule_before[r]) out += std::string(total, '-') + "\n";
    std::string line = pad_right(grid[r][0], width[0]);
    for (std::size_t c = 1; c < grid[r].size(); ++c) line += "  " + pad_left(grid[r][c], width[c]);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

bool rate_greater(const Count& a, const Count& b) {
  return static_cast<u128>(a.matched) * b.total > static_cast<u128>(b.matched) * a.total;
}

Json count_json(const Count& c) {
  return Json{{"matched", c.matched}, {"total", c.total}, {"rate", c.rate()},
              {"percent", format_percent(c)}};
}

Count count_from_json(const Json& j) {
  return Count{j.at("matched").get<std::uint64_t>(), j.at("total").get<std::uint64_t>()};
}

}  // namespace

std::string format_percent(const Count& c) {
  if (c.total == 0) return "0.0%";
  const std::uint64_t tenths = round_div(static_cast<u128>(c.matched) * 1000, c.total);
  return fmt::format("{}.{}%", tenths / 10, tenths % 10);
}

std::string format_ratio(const Count& corpus, const Count& output) {
  if (corpus.matched == 0 || corpus.total == 0) return "undefined";
  const auto [num, den] = ratio_parts(corpus, output);
  if (den == 0 || num == 0) return "0.00×";
  if (num >= 10 * den) return fmt::format("{}×", round_div(num, den));
  const std::uint64_t hundredths = round_div(num * 100, den);
  return fmt::format("{}.{:02}×", hundredths / 100, hundredths % 100);
}

bool is_anomalous(const Count& corpus, const Count& output, double threshold) {
  const bool corpus_zero = corpus.matched == 0 || corpus.total == 0;
  const bool output_zero = output.matched == 0 || output.total == 0;
  if (corpus_zero) return !output_zero;
  const auto [num, den] = ratio_parts(corpus, output);
  return static_cast<long double>(num) > static_cast<long double>(threshold) * static_cast<long double>(den);
}

double FingerprintRow::ratio() const {
  if (!has_ratio()) throw Error(ErrorCode::Precondition, "ratio undefined for row " + label);
  return output.rate() / corpus.rate();
}

Json FingerprintRow::to_json() const {
  return Json{{"label", label},
              {"pattern", pattern},
              {"corpus", count_json(corpus)},
              {"output", count_json(output)},
              {"ratio", has_ratio() ? Json(ratio()) : Json(nullptr)},
              {"ratio_text", format_ratio(corpus, output)},
              {"anomaly", anomaly},
              {"aggregate", aggregate},
              {"corpus_errors", corpus_errors}};
}

FingerprintRow FingerprintRow::from_json(const Json& j) {
  try {
    FingerprintRow r;
    r.label = j.at("label").get<std::string>();
    r.pattern = j.value("pattern", "");
    r.corpus = count_from_json(j.at("corpus"));
    r.output = count_from_json(j.at("output"));
    r.anomaly = j.value("anomaly", false);
    r.aggregate = j.value("aggregate", false);
    r.corpus_errors = j.value<std::size_t>("corpus_errors", 0);
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("fingerprint row: ") + e.what());
  }
}

GenerationMatch match_generations(const CampaignResult& result, const PatternSpec& pattern) {
  GenerationMatch m;
  m.per_prefill.assign(result.config.prefills.size(), Count{});
  for (const auto& r : result.records) {
    if (r.failed()) continue;
    const bool hit = pattern.matches(r.full_text);
    ++m.count.total;
    if (hit) ++m.count.matched;
    if (r.prefill_index < m.per_prefill.size()) {
      ++m.per_prefill[r.prefill_index].total;
      if (hit) ++m.per_prefill[r.prefill_index].matched;
    }
  }
  return m;
}

std::vector<FingerprintRow> fingerprint_report(const CorpusHandle& corpus,
                                               std::span<const CampaignResult> results,
                                               std::span<const PatternSpec> patterns,
                                               const FingerprintOptions& options) {
  if (patterns.empty()) throw Error(ErrorCode::Precondition, "fingerprint report needs >= 1 pattern");
  const auto docs = match_documents(corpus, patterns);
  std::vector<FingerprintRow> rows;
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    FingerprintRow row;
    row.label = patterns[i].name();
    row.pattern = patterns[i].name();
    row.corpus = docs[i].count;
    row.corpus_errors = docs[i].errors.size();
    for (const auto& r : results) row.output += match_generations(r, patterns[i]).count;
    row.anomaly = is_anomalous(row.corpus, row.output, options.anomaly_threshold);
    rows.push_back(std::move(row));
  }
  return rows;
}

FingerprintRow aggregate_row(std::span<const FingerprintRow> rows, const std::string& label,
                             std::span<const std::string> include,
                             const FingerprintOptions& options) {
  FingerprintRow agg;
  agg.label = label;
  agg.aggregate = true;
  for (const auto& name : include) {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const FingerprintRow& r) { return !r.aggregate && r.label == name; });
    if (it == rows.end()) throw Error(ErrorCode::InvalidParameter, "aggregate names unknown row: " + name);
    if (agg.pattern.empty()) agg.pattern = it->pattern;
    agg.corpus += it->corpus;
    agg.output += it->output;
    agg.corpus_errors += it->corpus_errors;
  }
  agg.anomaly = is_anomalous(agg.corpus, agg.output, options.anomaly_threshold);
  return agg;
}

std::vector<FingerprintRow> organism_rows(std::span<const OrganismInput> organisms,
                                          const PatternSpec& pattern,
                                          const FingerprintOptions& options) {
  std::vector<FingerprintRow> rows;
  for (const auto& org : organisms) {
    const DocumentMatch docs = match_documents(org.corpus, pattern);
    FingerprintRow row;
    row.label = org.name;
    row.pattern = pattern.name();
    row.corpus = docs.count;
    row.corpus_errors = docs.errors.size();
    for (const auto& r : org.results) row.output += match_generations(r, pattern).count;
    row.anomaly = is_anomalous(row.corpus, row.output, options.anomaly_threshold);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string render_fingerprint_table(std::span<const FingerprintRow> rows,
                                     const std::string& label_header) {
  std::vector<std::vector<std::string>> grid{{label_header, "Corpus rate", "CDD rate", "Ratio", ""}};
  std::vector<bool> rules{false};
  bool prev_aggregate = true;
  for (const auto& r : rows) {
    grid.push_back({r.label, format_percent(r.corpus), format_percent(r.output),
                    format_ratio(r.corpus, r.output), r.anomaly ? "anomaly" : ""});
    rules.push_back(r.aggregate && !prev_aggregate);
    prev_aggregate = r.aggregate;
  }
  if (rules.size() > 1) rules[1] = true;
  return render_grid(grid, rules);
}

Json ScanRow::to_json() const {
  Json domains = Json::array();
  for (const auto& [label, c] : per_domain) {
    domains.push_back(Json{{"domain", label}, {"matched", c.matched}, {"total", c.total},
                           {"percent", format_percent(c)}});
  }
  return Json{{"pattern", pattern},
              {"output", count_json(output)},
              {"co_occurrence", fmt::format("{}/{}", domains_present, domains_total)},
              {"domains_present", domains_present},
              {"domains_total", domains_total},
              {"per_domain", std::move(domains)}};
}

std::vector<ScanRow> cross_pattern_scan(std::span<const DomainResults> domains,
                                        std::span<const PatternSpec> candidates) {
  std::vector<ScanRow> rows;
  for (const auto& pattern : candidates) {
    ScanRow row;
    row.pattern = pattern.name();
    row.domains_total = domains.size();
    for (const auto& d : domains) {
      Count c;
      for (const auto& r : d.results) c += match_generations(r, pattern).count;
      if (c.matched > 0) ++row.domains_present;
      row.output += c;
      row.per_domain.emplace_back(d.label, c);
    }
    if (row.output.matched == 0) continue;
    std::stable_sort(row.per_domain.begin(), row.per_domain.end(),
                     [](const auto& a, const auto& b) { return rate_greater(a.second, b.second); });
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ScanRow& a, const ScanRow& b) {
    if (rate_greater(a.output, b.output)) return true;
    if (rate_greater(b.output, a.output)) return false;
    return a.pattern < b.pattern;
  });
  return rows;
}

std::string render_scan_table(std::span<const ScanRow> rows) {
  std::vector<std::vector<std::string>> grid{{"Pattern", "Output rate", "Matched", "Domains"}};
  std::vector<bool> rules{false};
  for (const auto& r : rows) {
    grid.push_back({r.pattern, format_percent(r.output),
                    fmt::format("{}/{}", r.output.matched, r.output.total),
                    fmt::format("{}/{}", r.domains_present, r.domains_total)});
    rules.push_back(false);
  }
  if (rules.size() > 1) rules[1] = true;
  return render_grid(grid, rules);
}

}  // namespace cdd
