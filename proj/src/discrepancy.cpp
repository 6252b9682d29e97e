#include "smm/discrepancy.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <iterator>
#include <map>
#include <thread>

#include "smm/error.hpp"
#include "smm/json_extract.hpp"
#include "text_util.hpp"

namespace smm {

std::string_view holder_name(Holder h) {
  switch (h) {
    case Holder::Searcher: return "Searcher";
    case Holder::Director: return "Director";
    case Holder::SearcherAboutDirector: return "Searcher-about-Director";
    case Holder::DirectorAboutSearcher: return "Director-about-Searcher";
  }
  return "";
}

std::string render_triple(const BeliefTriple& t) {
  std::string out(holder_name(t.holder));
  out += ": ";
  if (t.polarity == Polarity::Negative) out += "NOT ";
  out += t.relation + "(" + t.object + ")";
  return out;
}

// ---- classify_pair ----

namespace {

bool same_key(const BeliefTriple& a, const BeliefTriple& b) {
  return a.holder == b.holder && a.relation == b.relation;
}

bool same_statement(const BeliefTriple& a, const BeliefTriple& b) {
  return same_key(a, b) && a.object == b.object;
}

bool identical(const BeliefTriple& a, const BeliefTriple& b) {
  return same_statement(a, b) && a.polarity == b.polarity;
}

std::vector<BeliefTriple> dedup(std::span<const BeliefTriple> in) {
  std::vector<BeliefTriple> out;
  for (const auto& t : in) {
    if (std::none_of(out.begin(), out.end(), [&](const BeliefTriple& o) { return identical(o, t); })) {
      out.push_back(t);
    }
  }
  return out;
}

std::string no_mention(const BeliefTriple& g) {
  return "No mention of " + std::string(holder_name(g.holder)) + " " + g.relation + "(...)";
}

}  // namespace

std::vector<Discrepancy> classify_pair(std::span<const BeliefTriple> gt_in, std::span<const BeliefTriple> ann_in,
                                       std::size_t utterance_index) {
  auto gt = dedup(gt_in);
  auto ann = dedup(ann_in);
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> gt_partner(gt.size(), kNone);
  std::vector<bool> ann_used(ann.size(), false);
  std::vector<std::optional<DiscrepancyKind>> gt_kind(gt.size());

  auto pair_first = [&](auto&& eligible) {
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (gt_partner[i] != kNone) continue;
      for (std::size_t j = 0; j < ann.size(); ++j) {
        if (!ann_used[j] && eligible(gt[i], ann[j])) {
          gt_partner[i] = j;
          ann_used[j] = true;
          return std::pair{i, j};
        }
      }
    }
    return std::pair{kNone, kNone};
  };
  auto pair_all = [&](auto&& eligible, std::optional<DiscrepancyKind> kind) {
    while (true) {
      auto [i, j] = pair_first(eligible);
      if (i == kNone) break;
      gt_kind[i] = kind;
    }
  };

  pair_all(identical, std::nullopt);
  pair_all([](const BeliefTriple& g, const BeliefTriple& a) { return same_statement(g, a) && g.polarity != a.polarity; },
           DiscrepancyKind::BeliefContradiction);
  pair_all([](const BeliefTriple& g, const BeliefTriple& a) { return same_key(g, a) && g.object != a.object; },
           DiscrepancyKind::FalseBelief);

  std::vector<Discrepancy> out;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto& g = gt[i];
    Discrepancy d;
    d.utterance_index = utterance_index;
    d.field = g.source;
    d.ground_truth_belief = render_triple(g);
    if (gt_partner[i] == kNone) {
      d.kind = DiscrepancyKind::Omission;
      d.annotator_belief = no_mention(g);
      d.explanation = "The ground truth holds this belief; the annotator has nothing for it.";
    } else if (!gt_kind[i]) {
      continue;
    } else {
      d.kind = *gt_kind[i];
      d.annotator_belief = render_triple(ann[gt_partner[i]]);
      d.explanation = d.kind == DiscrepancyKind::BeliefContradiction
                          ? "The annotator holds the negation of the ground-truth belief."
                          : "The annotator relates the same holder and relation to a different object.";
    }
    out.push_back(std::move(d));
  }
  for (std::size_t j = 0; j < ann.size(); ++j) {
    if (ann_used[j]) continue;
    Discrepancy d;
    d.kind = DiscrepancyKind::UnsupportedBelief;
    d.utterance_index = utterance_index;
    d.field = ann[j].source;
    d.ground_truth_belief = "No corresponding ground-truth belief";
    d.annotator_belief = render_triple(ann[j]);
    d.explanation = "The ground truth neither supports nor contradicts this belief.";
    out.push_back(std::move(d));
  }
  return out;
}

// ---- triple extraction ----

namespace {

std::optional<Holder> holder_for(Field f) {
  switch (f) {
    case Field::SearcherBelieves:
    case Field::SearcherCommittedTo:
    case Field::SearcherGoal:
      return Holder::Searcher;
    case Field::DirectorBelieves:
    case Field::DirectorCommittedTo:
    case Field::DirectorGoal:
      return Holder::Director;
    case Field::SearcherBelievesDirectorBelieves: return Holder::SearcherAboutDirector;
    case Field::DirectorBelievesSearcherBelieves: return Holder::DirectorAboutSearcher;
    case Field::CommonBelief: return std::nullopt;
  }
  return std::nullopt;
}

bool is_negator(const std::string& w) {
  static const std::vector<std::string> kNeg = {"not", "no", "isn't", "aren't", "doesn't", "don't", "never",
                                                "cannot", "can't", "won't", "nothing", "wasn't", "isnt"};
  return std::find(kNeg.begin(), kNeg.end(), w) != kNeg.end();
}

bool is_clause_break(const std::string& w) {
  return w == "and" || w == "but" || w == "while" || w == "because" || w == "so";
}

bool is_article(const std::string& w) { return w == "the" || w == "a" || w == "an"; }

// Longest verb starting at words[i], by word count.
std::size_t match_verb(const std::vector<std::string>& words, std::size_t i, std::string& verb) {
  std::size_t best = 0;
  for (auto v : kRelationVerbs) {
    auto parts = detail::words(v);
    if (parts.size() <= best || i + parts.size() > words.size()) continue;
    if (std::equal(parts.begin(), parts.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) {
      best = parts.size();
      verb = std::string(v);
    }
  }
  return best;
}

void extract_clause(const std::vector<std::string>& clause, Holder holder, Field source,
                    std::vector<BeliefTriple>& out) {
  bool negative = false;
  for (std::size_t i = 0; i < clause.size(); ++i) {
    std::string verb;
    auto len = match_verb(clause, i, verb);
    if (len == 0) {
      negative = negative || is_negator(clause[i]);
      continue;
    }
    std::size_t k = i + len;
    while (k < clause.size() && is_article(clause[k])) ++k;
    std::string object;
    for (; k < clause.size(); ++k) {
      if (!object.empty()) object += ' ';
      object += clause[k];
    }
    if (object.empty()) return;
    out.push_back({holder, verb, object, negative ? Polarity::Negative : Polarity::Positive, source});
    return;
  }
}

}  // namespace

std::vector<BeliefTriple> extract_triples(const MentalStateAnnotation& a) {
  std::vector<BeliefTriple> out;
  for (auto f : kAllFields) {
    auto holder = holder_for(f);
    if (!holder || is_no_change(a[f])) continue;
    // Punctuation separates clauses just like conjunctions do.
    auto normalized = detail::replace_all(detail::replace_all(a[f], ";", " and "), ",", " and ");
    std::vector<std::string> clause;
    for (const auto& w : detail::words(normalized)) {
      if (is_clause_break(w)) {
        extract_clause(clause, *holder, f, out);
        clause.clear();
      } else {
        clause.push_back(w);
      }
    }
    extract_clause(clause, *holder, f, out);
  }
  return out;
}

std::vector<Discrepancy> detect_oracle(const AnnotatedUtterance& gt, const AnnotatedUtterance& ann) {
  if (gt.utterance.index != ann.utterance.index) {
    throw Error(Errc::DialogueMismatch, "items refer to different utterances", ann.utterance.index);
  }
  auto g = extract_triples(gt.annotation);
  auto a = extract_triples(ann.annotation);
  return classify_pair(g, a, gt.utterance.index);
}

// ---- LLM detector ----

PromptTemplate resolve_detection_template(const DetectorConfig& cfg) {
  PromptTemplate t;
  if (cfg.prompt_dir.empty()) {
    if (cfg.prompt_template_id != "default") {
      throw Error(Errc::TemplateError, "template '" + cfg.prompt_template_id + "' needs a prompt_dir");
    }
    t = builtin_detection_template();
  } else {
    t = load_template(cfg.prompt_dir, cfg.prompt_template_id, "detection");
  }
  require_placeholders(t.user, {"ground_truth", "annotator"});
  return t;
}

ChatRequest build_detection_prompt(const DetectorConfig& cfg, const PromptTemplate& tmpl,
                                   const AnnotatedUtterance& gt, const AnnotatedUtterance& ann) {
  ChatRequest req;
  req.system_prompt = tmpl.system;
  req.temperature = cfg.temperature;
  req.max_output_tokens = cfg.max_output_tokens;
  req.messages.push_back(
      {Role::User, render_template(tmpl.user, {{"ground_truth", annotated_utterance_to_json(gt, false).dump(4)},
                                               {"annotator", annotated_utterance_to_json(ann, false).dump(4)}})});
  return req;
}

std::vector<Discrepancy> parse_detection_response(const std::string& raw, std::size_t utterance_index) {
  auto j = extract_json(raw);
  if (!j.is_object() || !j.contains("Discrepancies") || !j["Discrepancies"].is_array()) {
    throw Error(Errc::SchemaError, "detector output lacks a \"Discrepancies\" array", utterance_index);
  }
  std::vector<Discrepancy> out;
  for (const auto& item : j["Discrepancies"]) {
    try {
      auto d = discrepancy_from_json(item);
      d.utterance_index = utterance_index;
      out.push_back(std::move(d));
    } catch (const Error& e) {
      throw e.at_index(utterance_index);
    }
  }
  return out;
}

std::vector<Discrepancy> detect_llm(const DetectorConfig& cfg, ChatBackend& backend, const PromptTemplate& tmpl,
                                    const AnnotatedUtterance& gt, const AnnotatedUtterance& ann) {
  auto index = ann.utterance.index;
  if (gt.utterance.index != index) {
    throw Error(Errc::DialogueMismatch, "items refer to different utterances", index);
  }
  std::string raw;
  try {
    raw = backend.complete(build_detection_prompt(cfg, tmpl, gt, ann));
  } catch (const Error& e) {
    throw e.at_index(index);
  }
  return parse_detection_response(raw, index);
}

std::vector<Discrepancy> detect_llm(const BackendConfig& cfg, const AnnotatedUtterance& gt,
                                    const AnnotatedUtterance& ann) {
  DetectorConfig dc;
  dc.backend = cfg;
  auto backend = make_backend(cfg);
  return detect_llm(dc, *backend, resolve_detection_template(dc), gt, ann);
}

namespace {

void check_pair(const AnnotationSet& gt, const AnnotationSet& ann) {
  if (gt.dialogue_id != ann.dialogue_id) {
    throw Error(Errc::DialogueMismatch,
                "ground truth is for '" + gt.dialogue_id + "', annotations for '" + ann.dialogue_id + "'");
  }
  if (gt.items.size() != ann.items.size()) {
    throw Error(Errc::DialogueMismatch, "ground truth has " + std::to_string(gt.items.size()) +
                                            " items, annotations " + std::to_string(ann.items.size()));
  }
  check_set_invariants(gt);
  check_set_invariants(ann);
}

void sort_by_index(std::vector<Discrepancy>& ds) {
  std::stable_sort(ds.begin(), ds.end(),
                   [](const Discrepancy& a, const Discrepancy& b) { return a.utterance_index < b.utterance_index; });
}

}  // namespace

std::vector<Discrepancy> detect_set(const DetectorConfig& cfg, ChatBackend& backend, const AnnotationSet& gt,
                                    const AnnotationSet& ann) {
  check_pair(gt, ann);
  auto tmpl = resolve_detection_template(cfg);
  const auto n = gt.items.size();
  std::vector<std::vector<Discrepancy>> per_index(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        per_index[i] = detect_llm(cfg, backend, tmpl, gt.items[i], ann.items[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  auto threads = std::clamp<std::size_t>(cfg.parallelism, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<Discrepancy> out;
  for (auto& ds : per_index) std::move(ds.begin(), ds.end(), std::back_inserter(out));
  sort_by_index(out);
  return out;
}

std::vector<Discrepancy> detect_set_oracle(const AnnotationSet& gt, const AnnotationSet& ann) {
  check_pair(gt, ann);
  std::vector<Discrepancy> out;
  for (std::size_t i = 0; i < gt.items.size(); ++i) {
    auto ds = detect_oracle(gt.items[i], ann.items[i]);
    std::move(ds.begin(), ds.end(), std::back_inserter(out));
  }
  return out;
}

DiscrepancyCounts count_by_type(std::span<const Discrepancy> ds, std::string annotator, std::string dialogue) {
  DiscrepancyCounts c;
  c.annotator = std::move(annotator);
  c.dialogue = std::move(dialogue);
  for (const auto& d : ds) ++c[d.kind];
  return c;
}

DetectorAccuracy detector_accuracy(std::size_t correct, std::size_t wrong) {
  if (correct + wrong == 0) throw Error(Errc::EmptyJudgments, "no judgments to score");
  return {correct, wrong, static_cast<double>(correct) / static_cast<double>(correct + wrong)};
}

DetectorAccuracy detector_accuracy(std::span<const HumanJudgment> judgments) {
  std::size_t correct = 0;
  for (const auto& j : judgments) correct += j.verdict == Verdict::Correct;
  return detector_accuracy(correct, judgments.size() - correct);
}

// ---- files ----

Json discrepancy_to_json(const Discrepancy& d) {
  Json j;
  j["Discrepancy Type"] = kind_name(d.kind);
  j["Ground Truth Belief"] = d.ground_truth_belief;
  j["Annotator Belief"] = d.annotator_belief;
  j["Explanation"] = d.explanation;
  j["utterance_index"] = d.utterance_index;
  j["field"] = d.field ? std::string(field_key(*d.field)) : std::string("UNSPECIFIED");
  return j;
}

Discrepancy discrepancy_from_json(const Json& j) {
  if (!j.is_object()) throw Error(Errc::SchemaError, "discrepancy entries must be objects");
  Discrepancy d;
  auto text = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_string()) {
      throw Error(Errc::SchemaError, std::string("discrepancy lacks string '") + key + "'");
    }
    auto v = j[key].get<std::string>();
    if (detail::trim(v).empty()) throw Error(Errc::SchemaError, std::string("discrepancy '") + key + "' is empty");
    return v;
  };
  auto type = text("Discrepancy Type");
  auto kind = kind_from_name(type);
  if (!kind) throw Error(Errc::SchemaError, "unknown discrepancy type '" + type + "'");
  d.kind = *kind;
  d.ground_truth_belief = text("Ground Truth Belief");
  d.annotator_belief = text("Annotator Belief");
  d.explanation = text("Explanation");
  if (j.contains("utterance_index")) {
    if (!j["utterance_index"].is_number_unsigned()) {
      throw Error(Errc::SchemaError, "utterance_index must be a nonnegative integer");
    }
    d.utterance_index = j["utterance_index"].get<std::size_t>();
  }
  if (j.contains("field") && j["field"].is_string()) {
    d.field = field_from_key(j["field"].get<std::string>());
  }
  return d;
}

std::string serialize_discrepancy_file(const DiscrepancyFile& f) {
  Json j;
  j["dialogue_id"] = f.dialogue_id;
  j["gt_annotator"] = f.gt_annotator;
  j["annotator"] = f.annotator;
  j["discrepancies"] = Json::array();
  for (const auto& d : f.discrepancies) j["discrepancies"].push_back(discrepancy_to_json(d));
  return j.dump(2) + "\n";
}

DiscrepancyFile discrepancy_file_from_json(const Json& j) {
  if (!j.is_object()) throw Error(Errc::SchemaError, "discrepancy file must be an object");
  DiscrepancyFile f;
  try {
    f.dialogue_id = j.at("dialogue_id").get<std::string>();
    f.gt_annotator = j.at("gt_annotator").get<std::string>();
    f.annotator = j.at("annotator").get<std::string>();
    for (const auto& item : j.at("discrepancies")) f.discrepancies.push_back(discrepancy_from_json(item));
  } catch (const Json::exception& e) {
    throw Error(Errc::SchemaError, std::string("discrepancy file: ") + e.what());
  }
  return f;
}

DiscrepancyFile load_discrepancy_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IOError, "cannot read '" + path + "'");
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return discrepancy_file_from_json(Json::parse(text));
  } catch (const Json::parse_error& e) {
    throw Error(Errc::ParseError, path + " at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

std::vector<HumanJudgment> judgments_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("judgments") || !j["judgments"].is_array()) {
    throw Error(Errc::SchemaError, "judgment file needs a \"judgments\" array");
  }
  std::vector<HumanJudgment> out;
  for (const auto& item : j["judgments"]) {
    HumanJudgment h;
    h.discrepancy = discrepancy_from_json(item);
    auto verdict = item.value("verdict", std::string());
    if (verdict == "correct") {
      h.verdict = Verdict::Correct;
    } else if (verdict == "wrong") {
      h.verdict = Verdict::Wrong;
    } else {
      throw Error(Errc::SchemaError, "verdict must be \"correct\" or \"wrong\", got '" + verdict + "'");
    }
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace smm
