#include "smm/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "smm/csv.hpp"
#include "smm/error.hpp"
#include "text_util.hpp"

namespace smm {

double Weights::operator[](DiscrepancyKind k) const {
  switch (k) {
    case DiscrepancyKind::BeliefContradiction: return belief_contradiction;
    case DiscrepancyKind::FalseBelief: return false_belief;
    case DiscrepancyKind::UnsupportedBelief: return unsupported_belief;
    case DiscrepancyKind::Omission: break;
  }
  return omission;
}

void Weights::validate() const {
  for (auto k : kAllKinds) {
    auto w = (*this)[k];
    if (!std::isfinite(w) || w < 0) {
      throw Error(Errc::ConfigError, "weight for " + std::string(kind_name(k)) + " must be a nonnegative number");
    }
  }
}

Weights Weights::parse(const std::string& text) {
  auto parts = detail::split(text, ',');
  if (parts.size() != 4) throw Error(Errc::ConfigError, "weights need four values b,f,u,o; got '" + text + "'");
  double v[4];
  for (int i = 0; i < 4; ++i) {
    if (!detail::parse_double(parts[static_cast<std::size_t>(i)], v[i])) {
      throw Error(Errc::ConfigError, "unreadable weight '" + parts[static_cast<std::size_t>(i)] + "'");
    }
  }
  Weights w{v[0], v[1], v[2], v[3]};
  w.validate();
  return w;
}

double raw_score(const DiscrepancyCounts& c, const Weights& w) {
  double r = 0.0;
  for (auto k : kAllKinds) r += w[k] * static_cast<double>(c[k]);
  return r;
}

double per_utterance_score(double raw, std::size_t n_d) {
  if (n_d == 0) throw Error(Errc::ZeroLengthDialogue, "dialogue has no utterances");
  return raw / static_cast<double>(n_d);
}

const ScoreEntry* ScoreMatrix::find(const std::string& annotator, const std::string& dialogue) const {
  for (const auto& e : entries) {
    if (e.annotator == annotator && e.dialogue == dialogue) return &e;
  }
  return nullptr;
}

ScoreMatrix normalize(std::vector<ScoreEntry> entries) {
  if (entries.empty()) throw Error(Errc::EmptyMatrix, "nothing to normalize");
  auto [lo, hi] = std::minmax_element(entries.begin(), entries.end(), [](const ScoreEntry& a, const ScoreEntry& b) {
    return a.per_utterance < b.per_utterance;
  });
  ScoreMatrix m;
  m.s_min = lo->per_utterance;
  m.s_max = hi->per_utterance;
  const double span = m.s_max - m.s_min;
  for (auto& e : entries) {
    e.normalized = span > 0 ? 1.0 - (e.per_utterance - m.s_min) / span : 1.0;
  }
  m.entries = std::move(entries);
  return m;
}

namespace {

std::size_t length_of(const LengthTable& lengths, const DiscrepancyCounts& c) {
  auto it = lengths.find(c.dialogue);
  if (it == lengths.end()) throw Error(Errc::MissingLength, "no utterance count for dialogue '" + c.dialogue + "'");
  return it->second;
}

}  // namespace

ScoreMatrix score_grid(std::span<const DiscrepancyCounts> counts, const LengthTable& lengths, const Weights& w) {
  w.validate();
  std::vector<ScoreEntry> entries;
  entries.reserve(counts.size());
  for (const auto& c : counts) {
    auto r = raw_score(c, w);
    entries.push_back({c.annotator, c.dialogue, r, per_utterance_score(r, length_of(lengths, c)), 0.0});
  }
  return normalize(std::move(entries));
}

RateTables per_type_rates(std::span<const DiscrepancyCounts> counts, const LengthTable& lengths) {
  RateTables out;
  for (auto k : kAllKinds) out[k];
  for (const auto& c : counts) {
    auto n = length_of(lengths, c);
    for (auto k : kAllKinds) {
      out[k][{c.annotator, c.dialogue}] = per_utterance_score(static_cast<double>(c[k]), n);
    }
  }
  return out;
}

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

std::string fixed3(double v) {
  char buf[64];
  auto r = round3(v);
  if (r == 0.0) r = 0.0;  // no "-0.000"
  std::snprintf(buf, sizeof buf, "%.3f", r);
  return buf;
}

// ---- CSV ----

namespace {

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IOError, "cannot read '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t count_field(const std::string& s, std::size_t row) {
  long long v = 0;
  if (!detail::parse_long(s, v) || v < 0) {
    throw Error(Errc::ParseError, "row " + std::to_string(row) + ": '" + s + "' is not a nonnegative integer");
  }
  return static_cast<std::size_t>(v);
}

const csv::Row kCountsHeader = {"annotator",           "dialogue",           "belief_contradictions",
                                "false_beliefs",       "unsupported_beliefs", "omissions"};

}  // namespace

CountsGrid parse_counts_csv(std::string_view text) {
  auto rows = csv::parse(text);
  if (rows.empty()) throw Error(Errc::ParseError, "counts CSV is empty");
  auto header = rows.front();
  bool base_ok = header.size() >= kCountsHeader.size() &&
                 std::equal(kCountsHeader.begin(), kCountsHeader.end(), header.begin());
  bool with_total = base_ok && header.size() == kCountsHeader.size() + 1 && header.back() == "reported_total";
  if (!base_ok || (header.size() != kCountsHeader.size() && !with_total)) {
    throw Error(Errc::ParseError, "counts CSV header must be annotator,dialogue,belief_contradictions,"
                                  "false_beliefs,unsupported_beliefs,omissions[,reported_total]");
  }
  CountsGrid grid;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != header.size()) {
      throw Error(Errc::ParseError, "row " + std::to_string(i) + " has " + std::to_string(r.size()) + " fields");
    }
    DiscrepancyCounts c;
    c.annotator = r[0];
    c.dialogue = r[1];
    c.belief_contradictions = count_field(r[2], i);
    c.false_beliefs = count_field(r[3], i);
    c.unsupported_beliefs = count_field(r[4], i);
    c.omissions = count_field(r[5], i);
    for (const auto& existing : grid.rows) {
      if (existing.annotator == c.annotator && existing.dialogue == c.dialogue) {
        throw Error(Errc::DuplicateId, "counts CSV repeats (" + c.annotator + ", " + c.dialogue + ")");
      }
    }
    if (with_total && !r[6].empty()) grid.reported_totals[{c.annotator, c.dialogue}] = count_field(r[6], i);
    grid.rows.push_back(std::move(c));
  }
  return grid;
}

CountsGrid load_counts_csv(const std::string& path) {
  try {
    return parse_counts_csv(read_all(path));
  } catch (const Error& e) {
    if (e.code() == Errc::IOError) throw;
    throw Error(e.code(), path + ": " + e.detail());
  }
}

std::string format_counts_csv(const CountsGrid& grid) {
  auto header = kCountsHeader;
  bool with_total = !grid.reported_totals.empty();
  if (with_total) header.push_back("reported_total");
  std::string out = csv::format_row(header);
  for (const auto& c : grid.rows) {
    csv::Row r = {c.annotator,
                  c.dialogue,
                  std::to_string(c.belief_contradictions),
                  std::to_string(c.false_beliefs),
                  std::to_string(c.unsupported_beliefs),
                  std::to_string(c.omissions)};
    if (with_total) {
      auto it = grid.reported_totals.find({c.annotator, c.dialogue});
      r.push_back(it == grid.reported_totals.end() ? "" : std::to_string(it->second));
    }
    out += csv::format_row(r);
  }
  return out;
}

LengthTable parse_lengths_csv(std::string_view text) {
  auto rows = csv::parse(text);
  if (rows.empty() || rows.front() != csv::Row{"dialogue", "utterances"}) {
    throw Error(Errc::ParseError, "lengths CSV header must be dialogue,utterances");
  }
  LengthTable out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 2) throw Error(Errc::ParseError, "row " + std::to_string(i) + " needs two fields");
    if (out.count(rows[i][0])) throw Error(Errc::DuplicateId, "lengths CSV repeats '" + rows[i][0] + "'");
    out[rows[i][0]] = count_field(rows[i][1], i);
  }
  return out;
}

LengthTable load_lengths_csv(const std::string& path) {
  try {
    return parse_lengths_csv(read_all(path));
  } catch (const Error& e) {
    if (e.code() == Errc::IOError) throw;
    throw Error(e.code(), path + ": " + e.detail());
  }
}

std::string format_lengths_csv(const LengthTable& lengths) {
  std::string out = csv::format_row({"dialogue", "utterances"});
  for (const auto& [d, n] : lengths) out += csv::format_row({d, std::to_string(n)});
  return out;
}

std::string format_scores_csv(const ScoreMatrix& m) {
  std::string out = csv::format_row({"annotator", "dialogue", "raw", "per_utterance", "normalized"});
  for (const auto& e : m.entries) {
    out += csv::format_row({e.annotator, e.dialogue, detail::format_number(e.raw), fixed3(e.per_utterance),
                            fixed3(e.normalized)});
  }
  return out;
}

}  // namespace smm
