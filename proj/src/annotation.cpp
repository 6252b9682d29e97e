#include "smm/annotation.hpp"

#include <fstream>
#include <iterator>
#include <set>

#include "smm/error.hpp"
#include "text_util.hpp"

namespace smm {

namespace {

constexpr std::array<std::string_view, kFieldCount> kFieldKeys = {
    "Searcher believes",
    "Director believes",
    "2nd order: Searcher believes that the director believes",
    "2nd order: Director believes that the searcher believes",
    "Searcher has committed to",
    "Director has committed to",
    "Director's goal is",
    "Searcher's goal is",
    "Common Belief",
};

// Accepted opening phrases per field. Common Belief is a free summary.
std::vector<std::string_view> stems_for(Field f) {
  switch (f) {
    case Field::SearcherBelieves:
    case Field::SearcherBelievesDirectorBelieves:
      return {"The searcher believes"};
    case Field::DirectorBelieves:
    case Field::DirectorBelievesSearcherBelieves:
      return {"The director believes"};
    case Field::SearcherCommittedTo:
      return {"The searcher is committed to", "The searcher has committed to"};
    case Field::DirectorCommittedTo:
      return {"The director is committed to", "The director has committed to"};
    case Field::DirectorGoal:
      return {"The director's goal is"};
    case Field::SearcherGoal:
      return {"The searcher's goal is"};
    case Field::CommonBelief:
      return {};
  }
  return {};
}

void lint_value(Field f, std::string_view value, ValidationReport& report) {
  if (is_no_change(value)) return;
  auto key = std::string(field_key(f));
  bool has_verb = false;
  for (auto verb : kRelationVerbs) {
    if (detail::contains_phrase(value, verb)) {
      has_verb = true;
      break;
    }
  }
  if (!has_verb) report.warnings.push_back("'" + key + "' uses none of the allowed relation verbs");
  auto stems = stems_for(f);
  if (stems.empty()) return;
  auto text = detail::trim(value);
  for (auto stem : stems) {
    if (detail::istarts_with(text, stem)) return;
  }
  report.warnings.push_back("'" + key + "' does not begin with \"" + std::string(stems.front()) + "\"");
}

}  // namespace

const std::array<std::string_view, 13> kRelationVerbs = {
    "at", "in", "holding", "connects", "near", "right of", "in front of",
    "on", "across from", "get", "go", "turn", "find",
};

std::string_view field_key(Field f) { return kFieldKeys[static_cast<std::size_t>(f)]; }

std::optional<Field> field_from_key(std::string_view key) {
  for (auto f : kAllFields) {
    if (field_key(f) == key) return f;
  }
  return std::nullopt;
}

bool is_no_change(std::string_view value) { return detail::iequals(detail::trim(value), kNoChange); }

bool MentalStateAnnotation::all_no_change() const {
  for (const auto& v : values) {
    if (!is_no_change(v)) return false;
  }
  return true;
}

std::string ValidationReport::error_summary() const {
  std::string out;
  for (const auto& e : errors) {
    if (!out.empty()) out += "; ";
    out += e;
  }
  return out;
}

ValidationReport validate_annotation(const Json& annotation) {
  ValidationReport report;
  if (!annotation.is_object()) {
    report.errors.push_back("annotation must be a JSON object");
    return report;
  }
  for (auto f : kAllFields) {
    auto key = std::string(field_key(f));
    auto it = annotation.find(key);
    if (it == annotation.end()) {
      report.errors.push_back("missing field '" + key + "'");
    } else if (!it->is_string()) {
      report.errors.push_back("field '" + key + "' must be a string");
    } else {
      lint_value(f, it->get_ref<const std::string&>(), report);
    }
  }
  for (const auto& [key, value] : annotation.items()) {
    if (!field_from_key(key)) report.errors.push_back("unexpected field '" + key + "'");
  }
  return report;
}

ValidationReport validate_annotation(const MentalStateAnnotation& a) {
  ValidationReport report;
  for (auto f : kAllFields) lint_value(f, a[f], report);
  return report;
}

MentalStateAnnotation annotation_from_json(const Json& annotation) {
  auto report = validate_annotation(annotation);
  if (!report.ok()) throw Error(Errc::ValidationError, report.error_summary());
  MentalStateAnnotation a;
  for (auto f : kAllFields) a[f] = annotation.at(std::string(field_key(f))).get<std::string>();
  return a;
}

Json annotation_to_json(const MentalStateAnnotation& a) {
  Json j = Json::object();
  for (auto f : kAllFields) j[std::string(field_key(f))] = a[f];
  return j;
}

bool MentalState::empty() const {
  for (const auto& s : slots) {
    if (s) return false;
  }
  return true;
}

MentalState fold_state(const MentalState& prior, const MentalStateAnnotation& a) {
  MentalState next = prior;
  for (auto f : kAllFields) {
    if (!is_no_change(a[f])) next.slots[static_cast<std::size_t>(f)] = a[f];
  }
  return next;
}

std::string render_state(const MentalState& state) {
  std::string out;
  for (auto f : kAllFields) {
    out += field_key(f);
    out += ": ";
    out += state[f] ? *state[f] : "EMPTY";
    out += '\n';
  }
  return out;
}

Json annotated_utterance_to_json(const AnnotatedUtterance& item, bool with_audit) {
  Json j;
  j["index"] = item.utterance.index;
  j["speaker"] = speaker_name(item.utterance.speaker);
  j["utterance"] = item.utterance.text;
  j["start"] = item.utterance.start;
  j["end"] = item.utterance.end;
  j["Annotation"] = annotation_to_json(item.annotation);
  if (with_audit) {
    j["raw_model_output"] = item.raw_model_output;
    j["attempts"] = item.attempts;
  }
  return j;
}

Json annotation_set_to_json(const AnnotationSet& set) {
  Json j;
  j["dialogue_id"] = set.dialogue_id;
  j["annotator_id"] = set.annotator_id;
  j["items"] = Json::array();
  for (const auto& item : set.items) j["items"].push_back(annotated_utterance_to_json(item));
  return j;
}

AnnotationSet annotation_set_from_json(const Json& j) {
  auto bad = [](const std::string& why) { return Error(Errc::SchemaError, "annotation set: " + why); };
  if (!j.is_object()) throw bad("top level must be an object");
  for (const char* key : {"dialogue_id", "annotator_id"}) {
    if (!j.contains(key) || !j[key].is_string()) throw bad(std::string("missing string '") + key + "'");
  }
  if (!j.contains("items") || !j["items"].is_array()) throw bad("missing 'items' array");
  AnnotationSet set;
  set.dialogue_id = j["dialogue_id"].get<std::string>();
  set.annotator_id = j["annotator_id"].get<std::string>();
  std::size_t pos = 0;
  for (const auto& item : j["items"]) {
    try {
      if (!item.is_object()) throw bad("items must be objects");
      AnnotatedUtterance au;
      au.utterance.index = item.contains("index") ? item.at("index").get<std::size_t>() : pos;
      au.utterance.speaker = parse_speaker(item.at("speaker").get<std::string>());
      au.utterance.text = item.at("utterance").get<std::string>();
      au.utterance.start = item.at("start").get<double>();
      au.utterance.end = item.at("end").get<double>();
      if (!item.contains("Annotation")) throw bad("item missing 'Annotation'");
      au.annotation = annotation_from_json(item["Annotation"]);
      au.raw_model_output = item.value("raw_model_output", std::string());
      au.attempts = item.value("attempts", std::size_t{1});
      if (au.attempts < 1) throw bad("attempts must be >= 1");
      set.items.push_back(std::move(au));
    } catch (const Error& e) {
      throw e.at_index(pos);
    } catch (const Json::exception& e) {
      throw Error(Errc::SchemaError, std::string("annotation set item: ") + e.what(), pos);
    }
    ++pos;
  }
  check_set_invariants(set);
  return set;
}

std::string serialize_annotation_set(const AnnotationSet& set) {
  return annotation_set_to_json(set).dump(2) + "\n";
}

AnnotationSet load_annotation_set(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IOError, "cannot read '" + path + "'");
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return annotation_set_from_json(Json::parse(text));
  } catch (const Json::parse_error& e) {
    throw Error(Errc::ParseError, path + " at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

void check_set_invariants(const AnnotationSet& set) {
  for (std::size_t i = 0; i < set.items.size(); ++i) {
    const auto& item = set.items[i];
    if (item.utterance.index != i) {
      throw Error(Errc::ValidationError,
                  "item index " + std::to_string(item.utterance.index) + " out of order", i);
    }
    if (item.attempts < 1) throw Error(Errc::ValidationError, "attempts must be >= 1", i);
  }
}

void check_set_covers(const AnnotationSet& set, const Dialogue& d) {
  if (set.dialogue_id != d.id()) {
    throw Error(Errc::DialogueMismatch, "set is for '" + set.dialogue_id + "', dialogue is '" + d.id() + "'");
  }
  check_set_invariants(set);
  if (set.items.size() != d.size()) {
    throw Error(Errc::ValidationError, "set has " + std::to_string(set.items.size()) +
                                           " items for a dialogue of " + std::to_string(d.size()));
  }
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (set.items[i].utterance.text != d.at(i).text) {
      throw Error(Errc::ValidationError, "item text differs from dialogue", i);
    }
  }
}

std::vector<MentalState> trajectory(const AnnotationSet& set) {
  check_set_invariants(set);
  std::vector<MentalState> out;
  out.reserve(set.items.size());
  MentalState state;
  for (const auto& item : set.items) {
    state = fold_state(state, item.annotation);
    out.push_back(state);
  }
  return out;
}

}  // namespace smm
