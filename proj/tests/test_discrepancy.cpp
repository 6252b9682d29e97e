#include <doctest.h>

#include <algorithm>
#include <random>

#include "smm/discrepancy.hpp"
#include "smm/json_extract.hpp"
#include "pairing_oracle.hpp"
#include "test_support.hpp"

using namespace smm;
using test::code_of;
using test::counts_of;

namespace {

constexpr auto kPos = Polarity::Positive;
constexpr auto kNeg = Polarity::Negative;

BeliefTriple triple(Holder h, std::string rel, std::string obj, Polarity p = kPos) {
  return {h, std::move(rel), std::move(obj), p, std::nullopt};
}

std::vector<DiscrepancyKind> kinds(const std::vector<Discrepancy>& ds) {
  std::vector<DiscrepancyKind> out;
  for (const auto& d : ds) out.push_back(d.kind);
  return out;
}

// ---- annotation helpers ----

MentalStateAnnotation with(std::initializer_list<std::pair<Field, std::string>> values) {
  MentalStateAnnotation a;
  for (const auto& [f, v] : values) a[f] = v;
  return a;
}

AnnotatedUtterance item(std::size_t i, MentalStateAnnotation a = {}) {
  return {{i, SpeakerRole::Searcher, "utterance " + std::to_string(i), 1.0 * i, 1.0 * i + 0.5}, std::move(a), "", 1};
}

AnnotationSet set_of(const std::string& dialogue, const std::string& annotator, std::vector<AnnotatedUtterance> items) {
  return {dialogue, annotator, std::move(items)};
}

Json prompt_example(int n) {
  auto prompt = builtin_detection_template().system;
  auto at = prompt.find("Example " + std::to_string(n) + ":");
  REQUIRE(at != std::string::npos);
  return extract_json(std::string_view(prompt).substr(at));
}

}  // namespace

TEST_CASE("pink-box examples") {
  const auto S = Holder::Searcher;
  auto g = std::vector{triple(S, "at", "pink box")};

  auto ds = classify_pair(g, std::vector{triple(S, "at", "pink box", kNeg)});
  CHECK(kinds(ds) == std::vector{DiscrepancyKind::BeliefContradiction});
  CHECK(ds[0].ground_truth_belief == "Searcher: at(pink box)");
  CHECK(ds[0].annotator_belief == "Searcher: NOT at(pink box)");

  ds = classify_pair(g, std::vector<BeliefTriple>{});
  CHECK(kinds(ds) == std::vector{DiscrepancyKind::Omission});
  CHECK(ds[0].annotator_belief == "No mention of Searcher at(...)");

  ds = classify_pair(std::vector{triple(S, "near", "pink box")}, std::vector{triple(S, "near", "green box")});
  CHECK(kinds(ds) == std::vector{DiscrepancyKind::FalseBelief});
  CHECK(ds[0].annotator_belief == "Searcher: near(green box)");

  ds = classify_pair(std::vector<BeliefTriple>{}, std::vector{triple(S, "get", "director's directions")});
  CHECK(kinds(ds) == std::vector{DiscrepancyKind::UnsupportedBelief});
  CHECK(ds[0].ground_truth_belief == "No corresponding ground-truth belief");
}

TEST_CASE("precedence and ordering") {
  const auto S = Holder::Searcher;
  const auto D = Holder::Director;
  std::vector gt = {triple(S, "at", "room 1"), triple(D, "near", "stairs"), triple(S, "holding", "box")};
  std::vector ann = {triple(S, "get", "boxes"), triple(S, "at", "room 1", kNeg), triple(S, "at", "room 2"),
                     triple(D, "near", "door")};
  auto ds = classify_pair(gt, ann, 7);
  CHECK(kinds(ds) == std::vector{DiscrepancyKind::BeliefContradiction, DiscrepancyKind::FalseBelief,
                                 DiscrepancyKind::Omission, DiscrepancyKind::UnsupportedBelief,
                                 DiscrepancyKind::UnsupportedBelief});
  for (const auto& d : ds) CHECK(d.utterance_index == 7);
  CHECK(ds[3].annotator_belief == "Searcher: get(boxes)");
  CHECK(ds[4].annotator_belief == "Searcher: at(room 2)");

  // Duplicates collapse before matching.
  auto dup = classify_pair(std::vector{triple(S, "at", "x"), triple(S, "at", "x")}, std::vector<BeliefTriple>{});
  CHECK(dup.size() == 1);
}

TEST_CASE("brute-force oracle, self-agreement and swap symmetry on random instances") {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    auto gt = test::random_triples(rng);
    auto ann = test::random_triples(rng);
    CAPTURE(trial);
    auto ds = classify_pair(gt, ann);
    auto c = counts_of(ds);
    CHECK(c == test::brute_force_counts(gt, ann));
    CHECK(count_by_type(ds).total() == ds.size());

    CHECK(classify_pair(gt, gt).empty());

    auto swapped = counts_of(classify_pair(ann, gt));
    CHECK(swapped.b == c.b);
    CHECK(swapped.f == c.f);
    CHECK(swapped.u == c.o);
    CHECK(swapped.o == c.u);
  }
}

TEST_CASE("extract_triples") {
  auto a = with({{Field::SearcherBelieves, "The searcher believes that the green box is not on the counter."},
                 {Field::DirectorGoal, "The director's goal is for the searcher to find the blue box."},
                 {Field::DirectorBelievesSearcherBelieves, "The director believes the searcher is in room 2."},
                 {Field::CommonBelief, "Both agents believe the searcher is at the door."}});
  auto ts = extract_triples(a);
  REQUIRE(ts.size() == 3);
  CHECK(ts[0].holder == Holder::Searcher);
  CHECK(ts[0].relation == "on");
  CHECK(ts[0].object == "counter");
  CHECK(ts[0].polarity == kNeg);
  CHECK(ts[0].source == std::optional<Field>(Field::SearcherBelieves));

  CHECK(ts[1].holder == Holder::DirectorAboutSearcher);
  CHECK(ts[1].relation == "in");
  CHECK(ts[1].object == "room 2");

  CHECK(ts[2].holder == Holder::Director);
  CHECK(ts[2].relation == "find");
  CHECK(ts[2].object == "blue box");
  CHECK(ts[2].polarity == kPos);

  auto two = extract_triples(with({{Field::SearcherBelieves, "The searcher is in the hallway and near the stairs."}}));
  REQUIRE(two.size() == 2);
  CHECK(two[1].relation == "near");
  CHECK(two[1].object == "stairs");

  CHECK(extract_triples(MentalStateAnnotation{}).empty());
  CHECK(render_triple(triple(Holder::SearcherAboutDirector, "in front of", "shelf", kNeg)) ==
        "Searcher-about-Director: NOT in front of(shelf)");
}

TEST_CASE("rule-based detection of a contradicted annotation") {
  auto gt = item(3, with({{Field::SearcherBelieves, "The searcher believes that the green box is on the counter."}}));
  auto ann = item(3, with({{Field::SearcherBelieves, "The searcher believes that the green box is not on the counter."}}));
  auto ds = detect_oracle(gt, ann);
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].kind == DiscrepancyKind::BeliefContradiction);
  CHECK(ds[0].utterance_index == 3);
  CHECK(ds[0].field == std::optional<Field>(Field::SearcherBelieves));
  CHECK(detect_oracle(gt, gt).empty());
  CHECK(code_of([&] { detect_oracle(gt, item(4)); }) == Errc::DialogueMismatch);
}

TEST_CASE("detection prompt") {
  DetectorConfig cfg;
  cfg.backend.model = "det";
  auto tmpl = resolve_detection_template(cfg);
  auto req = build_detection_prompt(cfg, tmpl, item(0, with({{Field::SearcherGoal, "The searcher's goal is to go."}})),
                                    item(0));
  CHECK(req.system_prompt == builtin_detection_template().system);
  auto& user = req.messages.at(0).content;
  auto gt_at = user.find("GROUND TRUTH:\n{");
  auto ann_at = user.find("ANNOTATOR:\n{");
  REQUIRE(gt_at != std::string::npos);
  REQUIRE(ann_at != std::string::npos);
  CHECK(gt_at < ann_at);
  CHECK(user.find("The searcher's goal is to go.") < ann_at);
}

TEST_CASE("LLM detector through a replay cache") {
  DetectorConfig cfg;
  cfg.backend.model = "det";
  auto tmpl = resolve_detection_template(cfg);
  auto gt = item(2);
  auto ann = item(2, with({{Field::SearcherBelieves, "The searcher is at room 1."}}));
  auto cache = std::make_shared<ResponseCache>();
  ReplayBackend replay("det", cache);
  auto digest = request_digest("det", build_detection_prompt(cfg, tmpl, gt, ann));

  cache->store(digest, "```json\n" + prompt_example(1).dump(4) + "\n```");
  auto ds = detect_llm(cfg, replay, tmpl, gt, ann);
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].kind == DiscrepancyKind::BeliefContradiction);
  CHECK(ds[0].ground_truth_belief == "The searcher is at the cardboard box");
  CHECK(ds[0].annotator_belief == "The searcher is at room 1");
  CHECK(ds[0].utterance_index == 2);
  CHECK_FALSE(ds[0].field.has_value());

  cache->store(digest, prompt_example(5).dump());
  CHECK(detect_llm(cfg, replay, tmpl, gt, ann).empty());

  for (int n : {2, 3, 4}) {
    cache->store(digest, prompt_example(n).dump());
    auto one = detect_llm(cfg, replay, tmpl, gt, ann);
    REQUIRE(one.size() == 1);
    CHECK(one[0].kind == std::vector{DiscrepancyKind::FalseBelief, DiscrepancyKind::Omission,
                                     DiscrepancyKind::UnsupportedBelief}[n - 2]);
  }

  auto bad = prompt_example(1);
  bad["Discrepancies"][0]["Discrepancy Type"] = "Second-Order Error";
  cache->store(digest, bad.dump());
  try {
    detect_llm(cfg, replay, tmpl, gt, ann);
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::SchemaError);
    CHECK(e.utterance_index() == std::optional<std::size_t>(2));
  }

  cache->store(digest, "{\"Discrepancies\": [{\"Discrepancy Type\": \"Omission\"}]}");
  CHECK(code_of([&] { detect_llm(cfg, replay, tmpl, gt, ann); }) == Errc::SchemaError);
  cache->store(digest, "{\"Findings\": []}");
  CHECK(code_of([&] { detect_llm(cfg, replay, tmpl, gt, ann); }) == Errc::SchemaError);
  cache->store(digest, "nothing to report");
  CHECK(code_of([&] { detect_llm(cfg, replay, tmpl, gt, ann); }) == Errc::NoJsonFound);

  auto miss = item(2, with({{Field::SearcherBelieves, "The searcher is at room 9."}}));
  try {
    detect_llm(cfg, replay, tmpl, gt, miss);
    FAIL("expected CacheMiss");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::CacheMiss);
    CHECK(e.utterance_index() == std::optional<std::size_t>(2));
  }
  CHECK(code_of([&] { detect_llm(cfg, replay, tmpl, gt, item(3)); }) == Errc::DialogueMismatch);
}

TEST_CASE("detect_set over a constructed replay cache") {
  auto gt = set_of("T", "gt", {item(0), item(1, with({{Field::SearcherBelieves, "The searcher is at room 1."}}))});
  auto ann = set_of("T", "m", {item(0), item(1)});
  for (std::size_t parallelism : {1, 2, 4}) {
    DetectorConfig cfg;
    cfg.backend.model = "det";
    cfg.parallelism = parallelism;
    auto tmpl = resolve_detection_template(cfg);
    auto cache = std::make_shared<ResponseCache>();
    cache->store(request_digest("det", build_detection_prompt(cfg, tmpl, gt.items[0], ann.items[0])),
                 "{\"Discrepancies\": []}");
    cache->store(request_digest("det", build_detection_prompt(cfg, tmpl, gt.items[1], ann.items[1])),
                 prompt_example(3).dump());
    ReplayBackend replay("det", cache);
    auto ds = detect_set(cfg, replay, gt, ann);
    REQUIRE(ds.size() == 1);
    CHECK(ds[0].utterance_index == 1);
    CHECK(ds[0].kind == DiscrepancyKind::Omission);
  }

  DetectorConfig cfg;
  cfg.backend.model = "det";
  ReplayBackend empty("det", std::make_shared<ResponseCache>());
  CHECK(code_of([&] { detect_set(cfg, empty, gt, set_of("U", "m", {item(0), item(1)})); }) ==
        Errc::DialogueMismatch);
  CHECK(code_of([&] { detect_set(cfg, empty, gt, set_of("T", "m", {item(0)})); }) == Errc::DialogueMismatch);
  try {
    detect_set(cfg, empty, gt, ann);
    FAIL("expected CacheMiss");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::CacheMiss);
    CHECK(e.utterance_index() == std::optional<std::size_t>(0));
  }
}

TEST_CASE("identical sets under a self-consistent detector") {
  auto gt = set_of("T", "gt", {item(0, with({{Field::DirectorGoal, "The director's goal is to go to room 2."}})), item(1)});
  DetectorConfig cfg;
  cfg.backend.model = "det";
  // Reports one omission unless the two records are identical.
  ScriptedBackend det("det", [](const ChatRequest& r) {
    const auto& u = r.messages.at(0).content;
    auto g = u.substr(0, u.find("\n\nANNOTATOR:\n")).substr(std::string("GROUND TRUTH:\n").size());
    auto a = u.substr(u.find("ANNOTATOR:\n") + std::string("ANNOTATOR:\n").size());
    return g == a ? std::string("{\"Discrepancies\": []}") : prompt_example(3).dump();
  });
  CHECK(detect_set(cfg, det, gt, gt).empty());
  CHECK(detect_set_oracle(gt, gt).empty());
  CHECK(detect_set(cfg, det, gt, set_of("T", "m", {item(0), item(1)})).size() == 1);
}

TEST_CASE("count_by_type") {
  CHECK(count_by_type({}) == DiscrepancyCounts{});
  Discrepancy om;
  std::vector one = {om};
  auto c = count_by_type(one, "a", "D1");
  CHECK(c.omissions == 1);
  CHECK(c.total() == 1);
  CHECK(c.annotator == "a");
  CHECK(c.dialogue == "D1");

  auto j = Json::parse(test::slurp(test::fixture("reference/judgments/Gemma_8.5B.json")));
  std::vector<Discrepancy> ds;
  for (const auto& h : judgments_from_json(j)) ds.push_back(h.discrepancy);
  REQUIRE(ds.size() == 186);
  auto g = count_by_type(ds);
  CHECK(g.belief_contradictions == 121);
  CHECK(g.omissions == 1);
  CHECK(g.unsupported_beliefs == 62);
  CHECK(g.false_beliefs == 2);
  CHECK(g.total() == ds.size());
}

TEST_CASE("detector accuracy") {
  CHECK(detector_accuracy(155, 22).accuracy == doctest::Approx(155.0 / 177.0));
  CHECK(detector_accuracy(155, 22).accuracy == doctest::Approx(0.876).epsilon(0.0005));
  CHECK(detector_accuracy(98, 89).accuracy == doctest::Approx(0.524).epsilon(0.0005));
  CHECK(detector_accuracy(0, 1).accuracy == 0.0);
  CHECK(detector_accuracy(3, 0).accuracy == 1.0);
  CHECK(code_of([] { detector_accuracy(0, 0); }) == Errc::EmptyJudgments);
  CHECK(code_of([] { detector_accuracy(std::vector<HumanJudgment>{}); }) == Errc::EmptyJudgments);

  for (const char* name : {"Claude_Sonnet_4", "Gemma_8.5B", "Naive_Human", "o3-mini"}) {
    CAPTURE(name);
    auto js = judgments_from_json(Json::parse(test::slurp(test::fixture(std::string("reference/judgments/") + name + ".json"))));
    std::size_t correct = std::count_if(js.begin(), js.end(), [](const HumanJudgment& h) { return h.verdict == Verdict::Correct; });
    auto acc = detector_accuracy(js);
    CHECK(acc.correct == correct);
    CHECK(acc.wrong == js.size() - correct);
  }

  Json bad = {{"judgments", Json::array({{{"Discrepancy Type", "Omission"}, {"Ground Truth Belief", "x"},
                                          {"Annotator Belief", "y"}, {"Explanation", "z"}, {"verdict", "maybe"}}})}};
  CHECK(code_of([&] { judgments_from_json(bad); }) == Errc::SchemaError);
}

TEST_CASE("discrepancy file round-trip") {
  Discrepancy a{DiscrepancyKind::FalseBelief, "g", "a", "e", 4, Field::DirectorBelieves};
  Discrepancy b{DiscrepancyKind::Omission, "g2", "a2", "e2", 5, std::nullopt};
  DiscrepancyFile f{"D1", "gt", "o3-mini", {a, b}};
  auto text = serialize_discrepancy_file(f);
  auto j = Json::parse(text);
  auto& first = j["discrepancies"][0];
  std::vector<std::string> keys;
  for (auto it = first.begin(); it != first.end(); ++it) keys.push_back(it.key());
  CHECK(keys == std::vector<std::string>{"Discrepancy Type", "Ground Truth Belief", "Annotator Belief", "Explanation",
                                         "utterance_index", "field"});
  CHECK(first["Discrepancy Type"] == "False Belief");
  CHECK(j["discrepancies"][1]["field"] == "UNSPECIFIED");

  test::TempDir dir;
  test::spit(dir / "d.json", text);
  auto back = load_discrepancy_file((dir / "d.json").string());
  CHECK(back.dialogue_id == "D1");
  CHECK(back.gt_annotator == "gt");
  CHECK(back.annotator == "o3-mini");
  CHECK(back.discrepancies == f.discrepancies);
  CHECK(serialize_discrepancy_file(back) == text);

  test::spit(dir / "broken.json", "{\"dialogue_id\": ");
  CHECK(code_of([&] { load_discrepancy_file((dir / "broken.json").string()); }) == Errc::ParseError);
  CHECK(code_of([&] { load_discrepancy_file((dir / "absent.json").string()); }) == Errc::IOError);
  CHECK(code_of([] { discrepancy_file_from_json(Json::parse("{\"dialogue_id\": \"x\"}")); }) == Errc::SchemaError);
}

TEST_CASE("kind names") {
  CHECK(kind_from_name(" belief contradiction ") == std::optional(DiscrepancyKind::BeliefContradiction));
  CHECK_FALSE(kind_from_name("Second-Order Error").has_value());
  CHECK(kind_slug(DiscrepancyKind::UnsupportedBelief) == "unsupported_beliefs");
  CHECK(severity(DiscrepancyKind::BeliefContradiction) > severity(DiscrepancyKind::FalseBelief));
  CHECK(severity(DiscrepancyKind::FalseBelief) > severity(DiscrepancyKind::UnsupportedBelief));
  CHECK(severity(DiscrepancyKind::UnsupportedBelief) > severity(DiscrepancyKind::Omission));
}
