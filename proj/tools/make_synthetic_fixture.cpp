// Builds fixtures/synthetic: three short dialogues, a ground-truth set per
// dialogue, and a response cache recorded from scripted annotator and detector
// backends, plus the outputs a replay run is expected to reproduce.
//
//   make_synthetic_fixture OUT_DIR

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "smm/annotator_pipeline.hpp"
#include "smm/discrepancy.hpp"
#include "smm/error.hpp"
#include "smm/scoring.hpp"

namespace fs = std::filesystem;
using namespace smm;

namespace {

const std::string kAnnotatorModel = "synth-annotator";
const std::string kDetectorModel = "synth-detector";
const std::string kGroundTruthId = "ground-truth";

using FieldValues = std::map<Field, std::string>;

struct Turn {
  SpeakerRole speaker;
  std::string text;
  FieldValues gt;
  FieldValues ann;
};

enum class Wrap { Bare, Fenced, FencedNoLang, Prose, TrailingComma, MissingFieldFirst };

struct Script {
  std::string id;
  std::vector<Turn> turns;
  std::vector<Wrap> wraps;
};

constexpr auto D = SpeakerRole::Director;
constexpr auto S = SpeakerRole::Searcher;

std::vector<Script> scripts() {
  const std::string kitchen_goal = "The director's goal is for the searcher to go to the kitchen.";
  const std::string green_on = "The searcher believes that the green box is on the counter.";
  const std::string blue_right = "The director believes that the blue box is in the right room.";
  const std::string find_blue = "The director's goal is for the searcher to find the blue box.";
  const std::string hallway = "The searcher believes that they are in the hallway.";
  const std::string holding = "The searcher believes that the searcher is holding the blue box.";
  const std::string find_across = "The director's goal is for the searcher to find a box across from the kitchen.";
  const std::string commit_across = "The searcher is committed to find a box across from the kitchen.";
  const std::string go_hall = "The director's goal is for the searcher to go to the hallway.";
  const std::string commit_hall = "The searcher is committed to go to the hallway.";
  return {
      {"S1",
       {
           {D, "go to the kitchen", {{Field::DirectorGoal, kitchen_goal}}, {{Field::DirectorGoal, kitchen_goal}}},
           {S, "okay",
            {{Field::SearcherCommittedTo, "The searcher is committed to go to the kitchen."},
             {Field::CommonBelief, "Both believe the searcher is heading to the kitchen."}},
            {{Field::SearcherCommittedTo, "The searcher is committed to go to the kitchen."}}},
           {S, "there is a green box on the counter",
            {{Field::SearcherBelieves, green_on},
             {Field::DirectorBelieves, "The director believes that the green box is on the counter."}},
            {{Field::SearcherBelieves, "The searcher believes that the green box is not on the counter."}}},
       },
       {Wrap::Bare, Wrap::Fenced, Wrap::Prose}},
      {"S2",
       {
           {D, "the blue box should be in the room on your right",
            {{Field::DirectorBelieves, blue_right}, {Field::DirectorGoal, find_blue}},
            {{Field::DirectorBelieves, "The director believes that the blue box is in the left room."},
             {Field::DirectorGoal, find_blue}}},
           {S, "kay",
            {{Field::SearcherBelievesDirectorBelieves,
              "The searcher believes that the director believes the blue box is in the right room."}},
            {{Field::SearcherBelievesDirectorBelieves,
              "The searcher believes that the director believes the blue box is in the right room."},
             {Field::SearcherBelieves, "The searcher believes that the blue box is near the stairs."}}},
           {S, "I am in the hallway", {{Field::SearcherBelieves, hallway}}, {{Field::SearcherBelieves, hallway}}},
           {D, "turn left at the door",
            {{Field::DirectorGoal, "The director's goal is for the searcher to turn left at the door."}},
            {}},
           {S, "I found the blue box", {{Field::SearcherBelieves, holding}},
            {{Field::SearcherBelieves, "The searcher believes that the searcher is not holding the blue box."},
             {Field::DirectorBelieves, "The director believes that the searcher is holding the blue box."}}},
       },
       {Wrap::MissingFieldFirst, Wrap::Bare, Wrap::TrailingComma, Wrap::FencedNoLang, Wrap::Fenced}},
      {"S3",
       {
           {D, "can you check the room across from the kitchen", {{Field::DirectorGoal, find_across}},
            {{Field::DirectorGoal, find_across}}},
           {S, "yes", {{Field::SearcherCommittedTo, commit_across}}, {{Field::SearcherCommittedTo, commit_across}}},
           {S, "the room is empty",
            {{Field::SearcherBelieves, "The searcher believes that no box is in the room across from the kitchen."},
             {Field::DirectorBelievesSearcherBelieves,
              "The director believes that the searcher believes the room is empty."}},
            {{Field::SearcherBelieves, "The searcher believes that a box is in the room across from the kitchen."},
             {Field::DirectorBelievesSearcherBelieves,
              "The director believes that the searcher believes the room is empty."}}},
           {D, "okay go back to the hallway", {{Field::DirectorGoal, go_hall}}, {{Field::DirectorGoal, go_hall}}},
           {S, "okay", {{Field::SearcherCommittedTo, commit_hall}}, {{Field::SearcherCommittedTo, commit_hall}}},
           {D, "great", {}, {}},
       },
       {Wrap::Prose, Wrap::Bare, Wrap::Fenced, Wrap::Bare, Wrap::FencedNoLang, Wrap::Bare}},
  };
}

MentalStateAnnotation annotation_of(const FieldValues& values) {
  MentalStateAnnotation a;
  for (const auto& [f, v] : values) a[f] = v;
  return a;
}

Dialogue dialogue_of(const Script& s) {
  std::vector<Utterance> us;
  double t = 0.0;
  for (std::size_t i = 0; i < s.turns.size(); ++i) {
    double dur = 0.5 + 0.25 * static_cast<double>(s.turns[i].text.size() % 7);
    us.push_back({i, s.turns[i].speaker, s.turns[i].text, t, t + dur});
    t += dur + 0.5;
  }
  return Dialogue::make(s.id, std::move(us));
}

// Model replies for one utterance, in the order they are served.
std::vector<std::string> replies(const Utterance& u, const MentalStateAnnotation& a, Wrap wrap) {
  Json j = annotated_utterance_to_json({u, a, "", 1}, false);
  j.erase("index");
  auto body = j.dump(2);
  switch (wrap) {
    case Wrap::Bare: return {body};
    case Wrap::Fenced: return {"```json\n" + body + "\n```"};
    case Wrap::FencedNoLang: return {"```\n" + body + "\n```"};
    case Wrap::Prose: return {"Here is the annotation for this move:\n\n" + body + "\n\nLet me know if you need more."};
    case Wrap::TrailingComma: {
      auto last = body.rfind('}');
      last = body.rfind('}', last - 1);
      return {body.substr(0, last) + "," + body.substr(last)};
    }
    case Wrap::MissingFieldFirst: {
      Json broken = j;
      broken["Annotation"].erase(std::string(field_key(Field::CommonBelief)));
      return {broken.dump(2), body};
    }
  }
  return {body};
}

AnnotationSet round_trip(const AnnotationSet& s) {
  return annotation_set_from_json(Json::parse(serialize_annotation_set(s)));
}

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IOError, "cannot write '" + p.string() + "'");
  out << text;
}

void build(const fs::path& out) {
  auto cache_path = out / "cache.jsonl";
  fs::remove(cache_path);
  auto cache = std::make_shared<ResponseCache>(cache_path.string());

  CountsGrid grid;
  LengthTable lengths;
  for (const auto& s : scripts()) {
    auto d = dialogue_of(s);
    lengths[d.id()] = d.size();
    write(out / "dialogues" / (d.id() + ".json"), serialize_dialogue(d));

    AnnotationSet gt{d.id(), kGroundTruthId, {}};
    std::vector<std::string> script;
    for (std::size_t i = 0; i < d.size(); ++i) {
      gt.items.push_back({d.at(i), annotation_of(s.turns[i].gt), "", 1});
      for (auto& r : replies(d.at(i), annotation_of(s.turns[i].ann), s.wraps.at(i))) script.push_back(std::move(r));
    }
    write(out / "ground_truth" / (d.id() + ".json"), serialize_annotation_set(gt));

    AnnotatorConfig acfg;
    acfg.backend.model = kAnnotatorModel;
    auto scripted = ScriptedBackend::from_list(kAnnotatorModel, script);
    RecordingBackend recorder(*scripted, cache);
    auto ann = round_trip(annotate_dialogue(acfg, recorder, d, kAnnotatorModel));
    write(out / "expected" / "annotations" / (d.id() + "." + kAnnotatorModel + ".json"),
          serialize_annotation_set(ann));

    // The scripted detector answers with what the rule-based oracle finds.
    DetectorConfig dcfg;
    dcfg.backend.model = kDetectorModel;
    auto tmpl = resolve_detection_template(dcfg);
    auto gt_rt = round_trip(gt);
    for (std::size_t i = 0; i < d.size(); ++i) {
      auto found = detect_oracle(gt_rt.items[i], ann.items[i]);
      Json reply;
      reply["Discrepancies"] = Json::array();
      for (const auto& x : found) {
        auto item = discrepancy_to_json(x);
        item.erase("utterance_index");
        reply["Discrepancies"].push_back(item);
      }
      auto text = i % 2 == 0 ? reply.dump(2) : "```json\n" + reply.dump(2) + "\n```";
      cache->store(request_digest(kDetectorModel, build_detection_prompt(dcfg, tmpl, gt_rt.items[i], ann.items[i])),
                   text);
    }
    auto found = detect_set_oracle(gt_rt, ann);
    write(out / "expected" / "discrepancies" / (d.id() + "." + kAnnotatorModel + ".json"),
          serialize_discrepancy_file({d.id(), kGroundTruthId, kAnnotatorModel, found}));
    grid.rows.push_back(count_by_type(found, kAnnotatorModel, d.id()));
  }
  write(out / "expected" / "counts.csv", format_counts_csv(grid));
  write(out / "lengths.csv", format_lengths_csv(lengths));
  write(out / "smm.ini",
        "# Replay-only configuration for the synthetic fixture.\n"
        "[run]\n"
        "cache = cache.jsonl\n"
        "detector = " + kDetectorModel + "\n"
        "\n"
        "[backend." + kAnnotatorModel + "]\n"
        "kind = scripted_replay\n"
        "model = " + kAnnotatorModel + "\n"
        "\n"
        "[backend." + kDetectorModel + "]\n"
        "kind = scripted_replay\n"
        "model = " + kDetectorModel + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_synthetic_fixture OUT_DIR\n";
    return 2;
  }
  try {
    build(argv[1]);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
