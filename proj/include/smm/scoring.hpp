#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "smm/kinds.hpp"

namespace smm {

/// Severity weights; all 1.0 by default.
struct Weights {
  double belief_contradiction = 1.0;
  double false_belief = 1.0;
  double unsupported_belief = 1.0;
  double omission = 1.0;

  double operator[](DiscrepancyKind k) const;
  /// Throws ConfigError on a negative or non-finite weight.
  void validate() const;
  /// "b,f,u,o", e.g. "2,2,1,1".
  static Weights parse(const std::string& text);

  friend bool operator==(const Weights&, const Weights&) = default;
};

/// w_b*B + w_f*F + w_u*U + w_o*O
double raw_score(const DiscrepancyCounts& c, const Weights& w);

/// r / N_d; throws ZeroLengthDialogue when n_d == 0.
double per_utterance_score(double raw, std::size_t n_d);

struct ScoreEntry {
  std::string annotator;
  std::string dialogue;
  double raw = 0.0;
  double per_utterance = 0.0;
  double normalized = 0.0;
};

struct ScoreMatrix {
  std::vector<ScoreEntry> entries;
  double s_min = 0.0;
  double s_max = 0.0;

  const ScoreEntry* find(const std::string& annotator, const std::string& dialogue) const;
};

/// Global min-max: S = 1 - (s - s_min) / (s_max - s_min), so the lowest
/// per-utterance score maps to 1 and the highest to 0. When every s is equal
/// all entries get S = 1. Throws EmptyMatrix on no entries.
ScoreMatrix normalize(std::vector<ScoreEntry> entries);

using LengthTable = std::map<std::string, std::size_t>;

/// raw -> per-utterance -> normalize over every row. MissingLength when a row
/// names a dialogue absent from `lengths`.
ScoreMatrix score_grid(std::span<const DiscrepancyCounts> counts, const LengthTable& lengths, const Weights& w);

/// rates[kind][(annotator, dialogue)] = count / N_d
using RateKey = std::pair<std::string, std::string>;
using RateTables = std::map<DiscrepancyKind, std::map<RateKey, double>>;
RateTables per_type_rates(std::span<const DiscrepancyCounts> counts, const LengthTable& lengths);

/// Half away from zero at 3 decimals.
double round3(double v);
std::string fixed3(double v);

// ---- CSV files ----

/// Counts grid rows plus any optional `reported_total` column values (a
/// legacy total carried alongside the components).
struct CountsGrid {
  std::vector<DiscrepancyCounts> rows;
  std::map<RateKey, std::size_t> reported_totals;
};

/// Header `annotator,dialogue,belief_contradictions,false_beliefs,unsupported_beliefs,omissions`
/// with an optional trailing `reported_total`.
CountsGrid parse_counts_csv(std::string_view text);
CountsGrid load_counts_csv(const std::string& path);
std::string format_counts_csv(const CountsGrid& grid);

/// Header `dialogue,utterances`.
LengthTable parse_lengths_csv(std::string_view text);
LengthTable load_lengths_csv(const std::string& path);
std::string format_lengths_csv(const LengthTable& lengths);

/// `annotator,dialogue,raw,per_utterance,normalized` at 3 decimals for s and S.
std::string format_scores_csv(const ScoreMatrix& m);

}  // namespace smm
