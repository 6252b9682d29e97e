#pragma once

#include <cstddef>
#include <string>

#include "smm/annotation.hpp"
#include "smm/corpus.hpp"
#include "smm/error.hpp"
#include "smm/llm_backend.hpp"
#include "smm/prompts.hpp"

namespace smm {

struct AnnotatorConfig {
  BackendConfig backend;
  std::size_t history_window = kDefaultHistoryWindow;
  int max_schema_retries = 2;
  bool include_prior_state = true;
  std::string prompt_template_id = "default";
  /// Directory of editable templates; empty uses the compiled-in defaults.
  std::string prompt_dir;
  double temperature = 0.0;
  int max_output_tokens = 2048;

  void validate() const;
};

/// Thrown when an utterance never produced a valid annotation.
class AnnotationFailed : public Error {
 public:
  AnnotationFailed(std::size_t index, ValidationReport report, std::size_t attempts);
  const ValidationReport& report() const noexcept { return report_; }
  std::size_t attempts() const noexcept { return attempts_; }

 private:
  ValidationReport report_;
  std::size_t attempts_;
};

/// Template for the config; checks the history/current-move/prior-state placeholders.
PromptTemplate resolve_annotation_template(const AnnotatorConfig& cfg);

/// `Searcher: "text"`, optionally followed by ` [start=.. end=..]`.
std::string render_utterance(const Utterance& u, bool with_times);

ChatRequest build_annotation_prompt(const AnnotatorConfig& cfg, const PromptTemplate& tmpl,
                                    const Dialogue& d, std::size_t i, const MentalState& prior);
ChatRequest build_annotation_prompt(const AnnotatorConfig& cfg, const Dialogue& d, std::size_t i,
                                    const MentalState& prior);

/// Text of the re-ask message sent after a failed validation.
std::string corrective_message(const ValidationReport& report);

/// Annotates utterances in order, folding state forward. Each failed
/// extraction or validation is re-asked up to cfg.max_schema_retries times.
AnnotationSet annotate_dialogue(const AnnotatorConfig& cfg, ChatBackend& backend, const Dialogue& d,
                                const std::string& annotator_id);
/// Builds the backend from cfg.backend; annotator id is the model name.
AnnotationSet annotate_dialogue(const AnnotatorConfig& cfg, const Dialogue& d);

/// Deterministic keyword annotator (no model calls):
///  - a green-box mention sets the searcher's goal; when the mention is a
///    question the goal lands on the next Searcher affirmation, together with
///    a shared-goal Common Belief;
///  - a Searcher affirmation right after a Director assertion copies the
///    assertion into "Searcher believes".
AnnotationSet rule_based_annotator(const Dialogue& d, const std::string& annotator_id = "rules");

}  // namespace smm
