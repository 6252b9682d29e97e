#include "smm/annotator_pipeline.hpp"

#include <array>
#include <sstream>

#include "smm/json_extract.hpp"
#include "text_util.hpp"

namespace smm {

void AnnotatorConfig::validate() const {
  if (max_schema_retries < 0) throw Error(Errc::ConfigError, "max_schema_retries must be >= 0");
  if (prompt_template_id.empty()) throw Error(Errc::ConfigError, "prompt_template_id is empty");
}

AnnotationFailed::AnnotationFailed(std::size_t index, ValidationReport report, std::size_t attempts)
    : Error(Errc::AnnotationFailed,
            "no valid annotation after " + std::to_string(attempts) + " attempt(s): " + report.error_summary(),
            index),
      report_(std::move(report)),
      attempts_(attempts) {}

PromptTemplate resolve_annotation_template(const AnnotatorConfig& cfg) {
  PromptTemplate t;
  if (cfg.prompt_dir.empty()) {
    if (cfg.prompt_template_id != "default") {
      throw Error(Errc::TemplateError, "template '" + cfg.prompt_template_id + "' needs a prompt_dir");
    }
    t = builtin_annotation_template();
  } else {
    t = load_template(cfg.prompt_dir, cfg.prompt_template_id, "annotation");
  }
  require_placeholders(t.user, {"history", "current_move", "prior_state"});
  return t;
}

std::string render_utterance(const Utterance& u, bool with_times) {
  std::string out(speaker_name(u.speaker));
  out += ": \"" + u.text + "\"";
  if (with_times) {
    out += " [start=" + detail::format_number(u.start) + " end=" + detail::format_number(u.end) + "]";
  }
  return out;
}

ChatRequest build_annotation_prompt(const AnnotatorConfig& cfg, const PromptTemplate& tmpl, const Dialogue& d,
                                    std::size_t i, const MentalState& prior) {
  const auto& current = d.at(i);
  std::string history;
  for (const auto& u : history_window(d, i, cfg.history_window)) {
    if (!history.empty()) history += '\n';
    history += render_utterance(u, false);
  }
  std::string prior_block;
  if (cfg.include_prior_state) prior_block = "PRIOR STATE OF THE WORLD:\n" + render_state(prior) + "\n";

  ChatRequest req;
  req.system_prompt = tmpl.system;
  req.temperature = cfg.temperature;
  req.max_output_tokens = cfg.max_output_tokens;
  req.messages.push_back({Role::User, render_template(tmpl.user, {{"prior_state", prior_block},
                                                                  {"history", history},
                                                                  {"current_move", render_utterance(current, true)}})});
  return req;
}

ChatRequest build_annotation_prompt(const AnnotatorConfig& cfg, const Dialogue& d, std::size_t i,
                                    const MentalState& prior) {
  return build_annotation_prompt(cfg, resolve_annotation_template(cfg), d, i, prior);
}

std::string corrective_message(const ValidationReport& report) {
  return "Your previous output failed validation: " + report.error_summary() +
         ". Re-emit ONLY the JSON object.";
}

namespace {

ValidationReport check_response(const std::string& raw, MentalStateAnnotation& out) {
  ValidationReport report;
  Json parsed;
  try {
    parsed = extract_json(raw);
  } catch (const Error& e) {
    report.errors.emplace_back(e.what());
    return report;
  }
  if (!parsed.is_object() || !parsed.contains("Annotation")) {
    report.errors.emplace_back("output object has no 'Annotation' field");
    return report;
  }
  report = validate_annotation(parsed["Annotation"]);
  if (report.ok()) out = annotation_from_json(parsed["Annotation"]);
  return report;
}

}  // namespace

AnnotationSet annotate_dialogue(const AnnotatorConfig& cfg, ChatBackend& backend, const Dialogue& d,
                                const std::string& annotator_id) {
  cfg.validate();
  if (d.empty()) throw Error(Errc::InvalidDialogue, "dialogue '" + d.id() + "' is empty");
  auto tmpl = resolve_annotation_template(cfg);

  AnnotationSet set{d.id(), annotator_id, {}};
  MentalState state;
  const auto max_attempts = static_cast<std::size_t>(cfg.max_schema_retries) + 1;
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto req = build_annotation_prompt(cfg, tmpl, d, i, state);
    ValidationReport report;
    bool done = false;
    for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
      std::string raw;
      try {
        raw = backend.complete(req);
      } catch (const Error& e) {
        throw e.at_index(i);
      }
      MentalStateAnnotation annotation;
      report = check_response(raw, annotation);
      if (report.ok()) {
        // Timing always comes from the source utterance, never the model echo.
        set.items.push_back({d.at(i), std::move(annotation), raw, attempt});
        done = true;
        break;
      }
      req.messages.push_back({Role::Assistant, raw});
      req.messages.push_back({Role::User, corrective_message(report)});
    }
    if (!done) throw AnnotationFailed(i, std::move(report), max_attempts);
    state = fold_state(state, set.items.back().annotation);
  }
  check_set_covers(set, d);
  return set;
}

AnnotationSet annotate_dialogue(const AnnotatorConfig& cfg, const Dialogue& d) {
  auto backend = make_backend(cfg.backend);
  return annotate_dialogue(cfg, *backend, d, cfg.backend.model);
}

// ---- rule-based annotator ----

namespace {

constexpr std::array<std::string_view, 12> kAffirmations = {
    "yes", "yeah", "yea", "yep", "right", "kay", "okay", "ok", "sure", "alright", "i think so", "mhm",
};

bool is_affirmation(std::string_view text) {
  std::string joined;
  for (const auto& w : detail::words(text)) {
    if (!joined.empty()) joined += ' ';
    joined += w;
  }
  for (auto a : kAffirmations) {
    if (joined == a) return true;
  }
  return false;
}

bool mentions_green_box(std::string_view text) {
  return detail::contains_phrase(text, "green box") || detail::contains_phrase(text, "green boxes");
}

bool is_question(std::string_view text) {
  auto t = detail::trim(text);
  return !t.empty() && t.back() == '?';
}

constexpr std::array<std::string_view, 10> kDiscourseMarkers = {
    "okay", "ok", "so", "and", "a:nd", "now", "um", "uh", "well", "kay",
};

// Drops leading discourse markers and trailing punctuation from an assertion.
std::string assertion_content(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> tokens;
  for (std::string tok; in >> tok;) tokens.push_back(tok);
  std::size_t first = 0;
  while (first < tokens.size()) {
    auto bare = detail::lower(tokens[first]);
    while (!bare.empty() && (bare.back() == ',' || bare.back() == '.')) bare.pop_back();
    bool marker = bare.empty();
    for (auto m : kDiscourseMarkers) marker = marker || bare == m;
    if (!marker) break;
    ++first;
  }
  std::string out;
  for (std::size_t i = first; i < tokens.size(); ++i) {
    if (!out.empty()) out += ' ';
    out += tokens[i];
  }
  while (!out.empty() && (out.back() == '?' || out.back() == '.' || out.back() == '!' || out.back() == ' ')) {
    out.pop_back();
  }
  return out.empty() ? std::string(detail::trim(text)) : out;
}

constexpr std::string_view kGreenBoxGoal = "The searcher's goal is to get the green boxes.";
constexpr std::string_view kGreenBoxCommon = "Both the searcher and director have the shared goal to get green boxes.";

}  // namespace

AnnotationSet rule_based_annotator(const Dialogue& d, const std::string& annotator_id) {
  AnnotationSet set{d.id(), annotator_id, {}};
  bool goal_pending = false;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& u = d.at(i);
    MentalStateAnnotation a;
    bool searcher_affirms = u.speaker == SpeakerRole::Searcher && is_affirmation(u.text);

    if (mentions_green_box(u.text)) {
      if (is_question(u.text)) {
        goal_pending = true;
      } else {
        a[Field::SearcherGoal] = kGreenBoxGoal;
        goal_pending = false;
      }
    } else if (goal_pending && searcher_affirms) {
      a[Field::SearcherGoal] = kGreenBoxGoal;
      a[Field::CommonBelief] = kGreenBoxCommon;
      goal_pending = false;
    }

    if (searcher_affirms && i > 0) {
      const auto& prev = d.at(i - 1);
      if (prev.speaker == SpeakerRole::Director && !is_affirmation(prev.text)) {
        a[Field::SearcherBelieves] = "The searcher believes that " + assertion_content(prev.text) + ".";
      }
    }
    set.items.push_back({u, std::move(a), "", 1});
  }
  return set;
}

}  // namespace smm
