#pragma once

// Recurrence of named patterns in a training corpus versus in decoded
// generations, reported as exact counts with derived rates and ratios.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cdd/campaign/campaign.hpp"
#include "cdd/fingerprint/text_match.hpp"

namespace cdd {

struct Count {
  std::uint64_t matched = 0;
  std::uint64_t total = 0;

  double rate() const { return total ? static_cast<double>(matched) / static_cast<double>(total) : 0.0; }
  Count& operator+=(const Count& o) {
    matched += o.matched;
    total += o.total;
    return *this;
  }
  friend bool operator==(const Count&, const Count&) = default;
};

// "56.0%": one decimal, rounded half up from the exact fraction.
std::string format_percent(const Count& c);

// "0.86×" below 10, "98×" from 10 up, "undefined" when the corpus rate is 0.
std::string format_ratio(const Count& corpus, const Count& output);

struct CorpusError {
  std::string where;
  std::string message;
};

// Documents from a directory of .txt files (recursive, path order) or from
// line-delimited JSON with a text field.
class CorpusHandle {
 public:
  enum class Kind { Directory, Jsonl };

  static CorpusHandle open(const std::filesystem::path& source, std::string text_field = "text");

  Kind kind() const { return kind_; }
  const std::filesystem::path& source() const { return source_; }

  // Calls fn once per readable document in a fixed order; unreadable
  // documents are returned instead.
  std::vector<CorpusError> for_each(const std::function<void(const std::string&)>& fn) const;

  std::size_t document_count() const;

 private:
  Kind kind_ = Kind::Directory;
  std::filesystem::path source_;
  std::string text_field_;
};

struct DocumentMatch {
  Count count;
  std::vector<CorpusError> errors;
};

DocumentMatch match_documents(const CorpusHandle& corpus, const PatternSpec& pattern);

// One pass over the corpus for several patterns.
std::vector<DocumentMatch> match_documents(const CorpusHandle& corpus,
                                           std::span<const PatternSpec> patterns);

struct GenerationMatch {
  Count count;
  std::vector<Count> per_prefill;
};

// Matches each record's full text (prefill plus continuation). Records that
// ended in a provider error are left out of the totals.
GenerationMatch match_generations(const CampaignResult& result, const PatternSpec& pattern);

struct FingerprintOptions {
  double anomaly_threshold = 10.0;
};

struct FingerprintRow {
  std::string label;
  std::string pattern;
  Count corpus;
  Count output;
  bool anomaly = false;
  bool aggregate = false;
  std::size_t corpus_errors = 0;

  bool has_ratio() const { return corpus.matched > 0; }
  double ratio() const;
  Json to_json() const;
  static FingerprintRow from_json(const Json& j);
};

bool is_anomalous(const Count& corpus, const Count& output, double threshold);

// One row per pattern for one corpus and the pooled generations.
std::vector<FingerprintRow> fingerprint_report(const CorpusHandle& corpus,
                                               std::span<const CampaignResult> results,
                                               std::span<const PatternSpec> patterns,
                                               const FingerprintOptions& options = {});

// Pools the raw counts of the named rows. Throws InvalidParameter when a
// name is not among the rows.
FingerprintRow aggregate_row(std::span<const FingerprintRow> rows, const std::string& label,
                             std::span<const std::string> include,
                             const FingerprintOptions& options = {});

struct OrganismInput {
  std::string name;
  CorpusHandle corpus;
  std::vector<CampaignResult> results;
};

// One row per organism for a single pattern, in input order.
std::vector<FingerprintRow> organism_rows(std::span<const OrganismInput> organisms,
                                          const PatternSpec& pattern,
                                          const FingerprintOptions& options = {});

// Columns: <label header>, Corpus rate, CDD rate, Ratio, plus an anomaly
// marker. Aggregate rows follow a rule line.
std::string render_fingerprint_table(std::span<const FingerprintRow> rows,
                                     const std::string& label_header = "Organism");

struct DomainResults {
  std::string label;
  std::vector<CampaignResult> results;
};

struct ScanRow {
  std::string pattern;
  Count output;
  std::vector<std::pair<std::string, Count>> per_domain;  // by rate, highest first
  std::size_t domains_present = 0;
  std::size_t domains_total = 0;

  Json to_json() const;
};

// Candidates ranked by pooled output rate; candidates never seen are left out.
std::vector<ScanRow> cross_pattern_scan(std::span<const DomainResults> domains,
                                        std::span<const PatternSpec> candidates);

std::string render_scan_table(std::span<const ScanRow> rows);

}  // namespace cdd
