#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "smm/corpus.hpp"
#include "smm/json.hpp"

namespace smm {

/// The nine slots of a per-utterance mental-state annotation, in prompt order.
enum class Field : std::size_t {
  SearcherBelieves,
  DirectorBelieves,
  SearcherBelievesDirectorBelieves,
  DirectorBelievesSearcherBelieves,
  SearcherCommittedTo,
  DirectorCommittedTo,
  DirectorGoal,
  SearcherGoal,
  CommonBelief,
};

inline constexpr std::size_t kFieldCount = 9;

inline constexpr std::array<Field, kFieldCount> kAllFields = {
    Field::SearcherBelieves,     Field::DirectorBelieves,
    Field::SearcherBelievesDirectorBelieves, Field::DirectorBelievesSearcherBelieves,
    Field::SearcherCommittedTo,  Field::DirectorCommittedTo,
    Field::DirectorGoal,         Field::SearcherGoal,
    Field::CommonBelief,
};

/// JSON key, byte-for-byte as the annotation prompt's output schema spells it.
std::string_view field_key(Field f);
std::optional<Field> field_from_key(std::string_view key);

inline constexpr std::string_view kNoChange = "no change";

/// Sentinel test: case-insensitive, surrounding whitespace ignored.
bool is_no_change(std::string_view value);

/// Verbs the annotation prompt allows for beliefs, goals and commitments.
extern const std::array<std::string_view, 13> kRelationVerbs;

struct MentalStateAnnotation {
  std::array<std::string, kFieldCount> values;

  MentalStateAnnotation() { values.fill(std::string(kNoChange)); }

  std::string& operator[](Field f) { return values[static_cast<std::size_t>(f)]; }
  const std::string& operator[](Field f) const { return values[static_cast<std::size_t>(f)]; }

  bool all_no_change() const;

  friend bool operator==(const MentalStateAnnotation&, const MentalStateAnnotation&) = default;
};

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  bool ok() const noexcept { return errors.empty(); }
  /// Errors joined with "; " (used in corrective prompts and error messages).
  std::string error_summary() const;
};

/// Checks a raw "Annotation" JSON object: exactly the nine keys, string values.
/// Lint warnings for non-sentinel text that uses none of the allowed verbs or
/// does not open with the field's phrasing stem.
ValidationReport validate_annotation(const Json& annotation);
ValidationReport validate_annotation(const MentalStateAnnotation& a);

/// Requires a report with no errors; throws ValidationError otherwise.
MentalStateAnnotation annotation_from_json(const Json& annotation);
Json annotation_to_json(const MentalStateAnnotation& a);

/// Folded current value per field; nullopt is EMPTY.
struct MentalState {
  std::array<std::optional<std::string>, kFieldCount> slots;

  const std::optional<std::string>& operator[](Field f) const {
    return slots[static_cast<std::size_t>(f)];
  }
  bool empty() const;

  friend bool operator==(const MentalState&, const MentalState&) = default;
};

/// Non-sentinel fields replace their slot; sentinel fields keep the prior value.
MentalState fold_state(const MentalState& prior, const MentalStateAnnotation& a);

/// Nine labeled lines, "<field key>: <value or EMPTY>".
std::string render_state(const MentalState& state);

struct AnnotatedUtterance {
  Utterance utterance;
  MentalStateAnnotation annotation;
  std::string raw_model_output;
  std::size_t attempts = 1;

  friend bool operator==(const AnnotatedUtterance&, const AnnotatedUtterance&) = default;
};

struct AnnotationSet {
  std::string dialogue_id;
  std::string annotator_id;
  std::vector<AnnotatedUtterance> items;

  friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;
};

/// Per-utterance record in the prompt's output object shape.
Json annotated_utterance_to_json(const AnnotatedUtterance& item, bool with_audit = true);
Json annotation_set_to_json(const AnnotationSet& set);
AnnotationSet annotation_set_from_json(const Json& j);
std::string serialize_annotation_set(const AnnotationSet& set);
AnnotationSet load_annotation_set(const std::string& path);

/// Items must cover indices 0..N-1 in order; with a dialogue, texts and count
/// must match too. Throws ValidationError naming the first bad index.
void check_set_invariants(const AnnotationSet& set);
void check_set_covers(const AnnotationSet& set, const Dialogue& d);

/// Element i is the fold of items 0..i from EMPTY.
std::vector<MentalState> trajectory(const AnnotationSet& set);

}  // namespace smm
