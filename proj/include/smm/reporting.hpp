#pragma once

#include <map>
#include <string>
#include <vector>

#include "smm/discrepancy.hpp"
#include "smm/scoring.hpp"

namespace smm {

struct AccuracyRow {
  std::string annotator;
  DetectorAccuracy accuracy;
};

/// Everything the report renders. Row/column order is fixed by `dialogues`
/// and `annotators`.
struct ReportBundle {
  std::vector<std::string> dialogues;
  std::vector<std::string> annotators;
  LengthTable lengths;
  std::vector<DiscrepancyCounts> counts;
  std::map<RateKey, std::size_t> reported_totals;
  ScoreMatrix scores;
  RateTables rates;
  std::vector<AccuracyRow> accuracy;
};

/// Natural order: "D2" before "D10".
bool natural_less(const std::string& a, const std::string& b);

/// Scores, rates and orderings from a counts grid. Dialogues come from
/// `lengths` in natural order; annotators follow `annotator_order` when given
/// (any not listed are appended alphabetically), otherwise alphabetical.
ReportBundle make_bundle(const CountsGrid& grid, const LengthTable& lengths, const Weights& w,
                         std::vector<AccuracyRow> accuracy = {}, const std::vector<std::string>& annotator_order = {});

/// Header `annotator,correct,wrong` in any letter case; a trailing `accuracy`
/// column is ignored.
std::vector<AccuracyRow> parse_accuracy_csv(std::string_view text);
std::vector<AccuracyRow> load_accuracy_csv(const std::string& path);
std::string format_accuracy_csv(const std::vector<AccuracyRow>& rows);

struct TotalMismatch {
  std::string annotator;
  std::string dialogue;
  std::size_t reported = 0;
  std::size_t computed = 0;
};

/// Reported totals that differ from B+F+U+O, in bundle order.
std::vector<TotalMismatch> total_mismatches(const ReportBundle& b);

struct Table {
  std::string name;   // file stem, e.g. "normalized"
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> footnotes;
};

/// utterances, discrepancies, normalized, rates_<kind> x4, accuracy,
/// plot_series. Throws InconsistentBundle when the tables disagree on the
/// dialogue set or name unknown annotators.
std::vector<Table> build_tables(const ReportBundle& b);

std::string render_markdown(const Table& t);
std::string render_csv(const Table& t);

/// All tables in one document.
std::string render_markdown(const ReportBundle& b);
/// File name (e.g. "accuracy.csv") to contents.
std::map<std::string, std::string> render_csv(const ReportBundle& b);
std::map<std::string, std::string> render_markdown_files(const ReportBundle& b);

/// Writes every .md and .csv file into `dir` (created if needed).
void write_report(const ReportBundle& b, const std::string& dir);

}  // namespace smm
