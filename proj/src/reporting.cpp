#include "smm/reporting.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>

#include "smm/csv.hpp"
#include "smm/error.hpp"
#include "text_util.hpp"

namespace smm {

bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    auto da = std::isdigit(static_cast<unsigned char>(a[i]));
    auto db = std::isdigit(static_cast<unsigned char>(b[j]));
    if (da && db) {
      auto si = i, sj = j;
      while (i < a.size() && std::isdigit(static_cast<unsigned char>(a[i]))) ++i;
      while (j < b.size() && std::isdigit(static_cast<unsigned char>(b[j]))) ++j;
      auto na = a.substr(si, i - si), nb = b.substr(sj, j - sj);
      na.erase(0, std::min(na.find_first_not_of('0'), na.size()));
      nb.erase(0, std::min(nb.find_first_not_of('0'), nb.size()));
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      continue;
    }
    if (a[i] != b[j]) return a[i] < b[j];
    ++i;
    ++j;
  }
  return a.size() - i < b.size() - j;
}

namespace {

bool alpha_less(const std::string& a, const std::string& b) {
  auto la = detail::lower(a), lb = detail::lower(b);
  return la != lb ? la < lb : a < b;
}

std::string plural_title(DiscrepancyKind k) { return std::string(kind_name(k)) + "s"; }

const DiscrepancyCounts* find_counts(const ReportBundle& b, const std::string& m, const std::string& d) {
  for (const auto& c : b.counts) {
    if (c.annotator == m && c.dialogue == d) return &c;
  }
  return nullptr;
}

void check_consistent(const ReportBundle& b) {
  std::set<std::string> dialogues(b.dialogues.begin(), b.dialogues.end());
  std::set<std::string> annotators(b.annotators.begin(), b.annotators.end());
  auto fail = [](const std::string& why) { return Error(Errc::InconsistentBundle, why); };
  if (dialogues.size() != b.dialogues.size()) throw fail("dialogue list has duplicates");
  std::set<std::string> length_keys;
  for (const auto& [d, n] : b.lengths) length_keys.insert(d);
  if (length_keys != dialogues) throw fail("utterance table and dialogue list differ");
  auto check = [&](const std::string& m, const std::string& d, const char* table) {
    if (!dialogues.count(d)) throw fail(std::string(table) + " names unknown dialogue '" + d + "'");
    if (!annotators.count(m)) throw fail(std::string(table) + " names unknown annotator '" + m + "'");
  };
  for (const auto& c : b.counts) check(c.annotator, c.dialogue, "discrepancy table");
  for (const auto& e : b.scores.entries) check(e.annotator, e.dialogue, "normalized table");
  for (const auto& [kind, table] : b.rates) {
    for (const auto& [key, v] : table) check(key.first, key.second, "rate table");
  }
  for (const auto& [key, v] : b.reported_totals) check(key.first, key.second, "reported totals");
}

Table dialogue_by_annotator(const ReportBundle& b, std::string name, std::string title,
                            const std::function<std::optional<double>(const std::string&, const std::string&)>& cell) {
  Table t{std::move(name), std::move(title), {"Dialogue"}, {}, {}};
  for (const auto& m : b.annotators) t.header.push_back(m);
  for (const auto& d : b.dialogues) {
    std::vector<std::string> row{d};
    for (const auto& m : b.annotators) {
      auto v = cell(m, d);
      row.push_back(v ? fixed3(*v) : "-");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace

ReportBundle make_bundle(const CountsGrid& grid, const LengthTable& lengths, const Weights& w,
                         std::vector<AccuracyRow> accuracy, const std::vector<std::string>& annotator_order) {
  ReportBundle b;
  b.lengths = lengths;
  for (const auto& [d, n] : lengths) b.dialogues.push_back(d);
  std::sort(b.dialogues.begin(), b.dialogues.end(), natural_less);

  std::set<std::string> seen;
  std::vector<std::string> rest;
  for (const auto& m : annotator_order) {
    if (seen.insert(m).second) b.annotators.push_back(m);
  }
  for (const auto& c : grid.rows) {
    if (seen.insert(c.annotator).second) rest.push_back(c.annotator);
  }
  std::sort(rest.begin(), rest.end(), alpha_less);
  b.annotators.insert(b.annotators.end(), rest.begin(), rest.end());

  b.counts = grid.rows;
  b.reported_totals = grid.reported_totals;
  if (!grid.rows.empty()) {
    b.scores = score_grid(grid.rows, lengths, w);
    b.rates = per_type_rates(grid.rows, lengths);
  }
  std::sort(accuracy.begin(), accuracy.end(),
            [](const AccuracyRow& x, const AccuracyRow& y) { return alpha_less(x.annotator, y.annotator); });
  b.accuracy = std::move(accuracy);
  return b;
}

std::vector<AccuracyRow> parse_accuracy_csv(std::string_view text) {
  auto rows = csv::parse(text);
  const csv::Row expected = {"annotator", "correct", "wrong", "accuracy"};
  // Header names match case-insensitively so the report's own table reads back.
  auto header_ok = [&] {
    if (rows.empty() || rows.front().size() < 3 || rows.front().size() > 4) return false;
    for (std::size_t i = 0; i < rows.front().size(); ++i) {
      if (detail::lower(rows.front()[i]) != expected[i]) return false;
    }
    return true;
  };
  if (!header_ok()) {
    throw Error(Errc::ParseError, "accuracy CSV header must be annotator,correct,wrong[,accuracy]");
  }
  std::vector<AccuracyRow> out;
  std::set<std::string> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != rows.front().size()) throw Error(Errc::ParseError, "row " + std::to_string(i) + " has the wrong field count");
    long long c = 0, w = 0;
    if (!detail::parse_long(r[1], c) || !detail::parse_long(r[2], w) || c < 0 || w < 0) {
      throw Error(Errc::ParseError, "row " + std::to_string(i) + ": counts must be nonnegative integers");
    }
    if (!seen.insert(r[0]).second) throw Error(Errc::DuplicateId, "accuracy CSV repeats '" + r[0] + "'");
    out.push_back({r[0], detector_accuracy(static_cast<std::size_t>(c), static_cast<std::size_t>(w))});
  }
  return out;
}

std::vector<AccuracyRow> load_accuracy_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IOError, "cannot read '" + path + "'");
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return parse_accuracy_csv(text);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.detail());
  }
}

std::string format_accuracy_csv(const std::vector<AccuracyRow>& rows) {
  std::string out = csv::format_row({"annotator", "correct", "wrong", "accuracy"});
  for (const auto& r : rows) {
    out += csv::format_row({r.annotator, std::to_string(r.accuracy.correct), std::to_string(r.accuracy.wrong),
                            fixed3(r.accuracy.accuracy)});
  }
  return out;
}

std::vector<TotalMismatch> total_mismatches(const ReportBundle& b) {
  std::vector<TotalMismatch> out;
  for (const auto& m : b.annotators) {
    for (const auto& d : b.dialogues) {
      auto it = b.reported_totals.find({m, d});
      const auto* c = find_counts(b, m, d);
      if (it == b.reported_totals.end() || c == nullptr) continue;
      if (it->second != c->total()) out.push_back({m, d, it->second, c->total()});
    }
  }
  return out;
}

std::vector<Table> build_tables(const ReportBundle& b) {
  check_consistent(b);
  std::vector<Table> tables;

  Table utt{"utterances", "Utterances per dialogue", {"Dialogue", "Utterances"}, {}, {}};
  std::size_t total = 0;
  for (const auto& d : b.dialogues) {
    utt.rows.push_back({d, std::to_string(b.lengths.at(d))});
    total += b.lengths.at(d);
  }
  if (!b.dialogues.empty()) utt.rows.push_back({"Total", std::to_string(total)});
  tables.push_back(std::move(utt));

  Table disc{"discrepancies", "Discrepancy counts", {"Annotator", "Type"}, {}, {}};
  for (const auto& d : b.dialogues) disc.header.push_back(d);
  for (const auto& m : b.annotators) {
    bool any = std::any_of(b.counts.begin(), b.counts.end(), [&](const DiscrepancyCounts& c) { return c.annotator == m; });
    if (!any) continue;
    auto row_for = [&](const std::string& label, const std::function<std::size_t(const DiscrepancyCounts&)>& get) {
      std::vector<std::string> row{m, label};
      for (const auto& d : b.dialogues) {
        const auto* c = find_counts(b, m, d);
        row.push_back(c ? std::to_string(get(*c)) : "-");
      }
      disc.rows.push_back(std::move(row));
    };
    for (auto k : kAllKinds) row_for(plural_title(k), [k](const DiscrepancyCounts& c) { return c[k]; });
    row_for("Total", [](const DiscrepancyCounts& c) { return c.total(); });
  }
  for (const auto& mm : total_mismatches(b)) {
    disc.footnotes.push_back(mm.annotator + " " + mm.dialogue + ": reported total " + std::to_string(mm.reported) +
                             " differs from component sum " + std::to_string(mm.computed));
  }
  tables.push_back(std::move(disc));

  tables.push_back(dialogue_by_annotator(b, "normalized", "Normalized discrepancy scores",
                                         [&](const std::string& m, const std::string& d) -> std::optional<double> {
                                           const auto* e = b.scores.find(m, d);
                                           return e ? std::optional(e->normalized) : std::nullopt;
                                         }));

  for (auto k : kAllKinds) {
    auto it = b.rates.find(k);
    tables.push_back(dialogue_by_annotator(
        b, "rates_" + std::string(kind_slug(k)), "Per-utterance rates for " + plural_title(k),
        [&](const std::string& m, const std::string& d) -> std::optional<double> {
          if (it == b.rates.end()) return std::nullopt;
          auto cell = it->second.find({m, d});
          return cell == it->second.end() ? std::nullopt : std::optional(cell->second);
        }));
  }

  Table acc{"accuracy", "Detector validation", {"Annotator", "Correct", "Wrong", "Accuracy"}, {}, {}};
  for (const auto& row : b.accuracy) {
    acc.rows.push_back({row.annotator, std::to_string(row.accuracy.correct), std::to_string(row.accuracy.wrong),
                        fixed3(row.accuracy.accuracy)});
  }
  tables.push_back(std::move(acc));

  Table plot{"plot_series", "Total discrepancies per annotator and dialogue", {"annotator", "dialogue", "total"}, {}, {}};
  for (const auto& m : b.annotators) {
    for (const auto& d : b.dialogues) {
      if (const auto* c = find_counts(b, m, d)) plot.rows.push_back({m, d, std::to_string(c->total())});
    }
  }
  tables.push_back(std::move(plot));
  return tables;
}

std::string render_markdown(const Table& t) {
  auto line = [](const std::vector<std::string>& cells) {
    std::string out = "|";
    for (const auto& c : cells) out += " " + detail::replace_all(c, "|", "\\|") + " |";
    return out + "\n";
  };
  std::string out = "## " + t.title + "\n\n" + line(t.header);
  out += "|";
  for (std::size_t i = 0; i < t.header.size(); ++i) out += "---|";
  out += "\n";
  for (const auto& r : t.rows) out += line(r);
  if (!t.footnotes.empty()) {
    out += "\n";
    for (std::size_t i = 0; i < t.footnotes.size(); ++i) {
      out += "[" + std::to_string(i + 1) + "] " + t.footnotes[i] + "\n";
    }
  }
  return out;
}

std::string render_csv(const Table& t) {
  std::string out = csv::format_row(t.header);
  for (const auto& r : t.rows) out += csv::format_row(r);
  return out;
}

std::string render_markdown(const ReportBundle& b) {
  std::string out;
  for (const auto& t : build_tables(b)) {
    if (!out.empty()) out += "\n";
    out += render_markdown(t);
  }
  return out;
}

std::map<std::string, std::string> render_csv(const ReportBundle& b) {
  std::map<std::string, std::string> out;
  for (const auto& t : build_tables(b)) out[t.name + ".csv"] = render_csv(t);
  return out;
}

std::map<std::string, std::string> render_markdown_files(const ReportBundle& b) {
  std::map<std::string, std::string> out;
  for (const auto& t : build_tables(b)) out[t.name + ".md"] = render_markdown(t);
  return out;
}

void write_report(const ReportBundle& b, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IOError, "cannot create '" + dir + "': " + ec.message());
  auto files = render_csv(b);
  files.merge(render_markdown_files(b));
  for (const auto& [name, content] : files) {
    auto path = dir + "/" + name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IOError, "cannot write '" + path + "'");
    out << content;
  }
}

}  // namespace smm
