#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smm/annotation.hpp"
#include "smm/kinds.hpp"
#include "smm/llm_backend.hpp"
#include "smm/prompts.hpp"

namespace smm {

struct Discrepancy {
  DiscrepancyKind kind = DiscrepancyKind::Omission;
  std::string ground_truth_belief;
  std::string annotator_belief;
  std::string explanation;
  std::size_t utterance_index = 0;
  std::optional<Field> field;  // nullopt serializes as "UNSPECIFIED"

  friend bool operator==(const Discrepancy&, const Discrepancy&) = default;
};

// ---- structured beliefs ----

enum class Holder { Searcher, Director, SearcherAboutDirector, DirectorAboutSearcher };
enum class Polarity { Positive, Negative };

std::string_view holder_name(Holder h);

/// (holder, relation, object, polarity). `relation` is one of kRelationVerbs.
/// `source` records the annotation field a triple was read from and takes no
/// part in matching.
struct BeliefTriple {
  Holder holder = Holder::Searcher;
  std::string relation;
  std::string object;
  Polarity polarity = Polarity::Positive;
  std::optional<Field> source;
};

std::string render_triple(const BeliefTriple& t);

/// Four-way classification of a ground-truth triple set against an annotator
/// triple set. Both sides are de-duplicated on (holder, relation, object,
/// polarity), then each triple is consumed at most once:
///   1. identical triples agree and produce nothing;
///   2. same (holder, relation, object), opposite polarity: BeliefContradiction;
///   3. same (holder, relation), different object: FalseBelief, pairing
///      leftovers under one key in input order;
///   4. ground-truth leftovers are Omissions, annotator leftovers
///      UnsupportedBeliefs.
/// Output lists ground-truth-anchored discrepancies in ground-truth order,
/// then unsupported beliefs in annotator order.
std::vector<Discrepancy> classify_pair(std::span<const BeliefTriple> gt, std::span<const BeliefTriple> ann,
                                       std::size_t utterance_index = 0);

/// Heuristic reading of an annotation into triples: per clause, the first
/// allowed verb becomes the relation, the following words (articles dropped)
/// the object, and a negator before the verb flips polarity. Goal and
/// commitment fields count for the person they name; Common Belief is skipped.
std::vector<BeliefTriple> extract_triples(const MentalStateAnnotation& a);

/// Deterministic detector: classify_pair over extract_triples of both items.
std::vector<Discrepancy> detect_oracle(const AnnotatedUtterance& gt, const AnnotatedUtterance& ann);

// ---- LLM detector ----

struct DetectorConfig {
  BackendConfig backend;
  std::string prompt_template_id = "default";
  std::string prompt_dir;
  double temperature = 0.0;
  int max_output_tokens = 2048;
  /// Concurrent per-utterance requests inside one detect_set call.
  std::size_t parallelism = 1;
};

PromptTemplate resolve_detection_template(const DetectorConfig& cfg);

ChatRequest build_detection_prompt(const DetectorConfig& cfg, const PromptTemplate& tmpl,
                                   const AnnotatedUtterance& gt, const AnnotatedUtterance& ann);

/// Maps a detector reply's "Discrepancies" array. SchemaError on missing keys,
/// empty strings, or a type outside the four kinds.
std::vector<Discrepancy> parse_detection_response(const std::string& raw, std::size_t utterance_index);

std::vector<Discrepancy> detect_llm(const DetectorConfig& cfg, ChatBackend& backend, const PromptTemplate& tmpl,
                                    const AnnotatedUtterance& gt, const AnnotatedUtterance& ann);
std::vector<Discrepancy> detect_llm(const BackendConfig& cfg, const AnnotatedUtterance& gt,
                                    const AnnotatedUtterance& ann);

/// All per-utterance detections, sorted by utterance index.
std::vector<Discrepancy> detect_set(const DetectorConfig& cfg, ChatBackend& backend, const AnnotationSet& gt,
                                    const AnnotationSet& ann);
std::vector<Discrepancy> detect_set_oracle(const AnnotationSet& gt, const AnnotationSet& ann);

DiscrepancyCounts count_by_type(std::span<const Discrepancy> ds, std::string annotator = {},
                                std::string dialogue = {});

// ---- detector validation ----

enum class Verdict { Correct, Wrong };

struct HumanJudgment {
  Discrepancy discrepancy;
  Verdict verdict = Verdict::Correct;
};

struct DetectorAccuracy {
  std::size_t correct = 0;
  std::size_t wrong = 0;
  double accuracy = 0.0;  // full precision; round at presentation
};

DetectorAccuracy detector_accuracy(std::span<const HumanJudgment> judgments);
DetectorAccuracy detector_accuracy(std::size_t correct, std::size_t wrong);

// ---- files ----

Json discrepancy_to_json(const Discrepancy& d);
Discrepancy discrepancy_from_json(const Json& j);

struct DiscrepancyFile {
  std::string dialogue_id;
  std::string gt_annotator;
  std::string annotator;
  std::vector<Discrepancy> discrepancies;
};

std::string serialize_discrepancy_file(const DiscrepancyFile& f);
DiscrepancyFile discrepancy_file_from_json(const Json& j);
DiscrepancyFile load_discrepancy_file(const std::string& path);

/// `{"annotator": str, "judgments": [{<discrepancy keys>, "verdict": "correct"|"wrong"}]}`
std::vector<HumanJudgment> judgments_from_json(const Json& j);

}  // namespace smm
