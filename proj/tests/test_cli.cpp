#include <doctest.h>

#include "smm/discrepancy.hpp"
#include "smm/scoring.hpp"
#include "test_support.hpp"

using namespace smm;
namespace fs = std::filesystem;

namespace {

const fs::path kSynth = test::fixture("synthetic");
const fs::path kReference = test::fixture("reference");

test::RunResult smm_run(const std::string& args) { return test::run(test::quote(SMM_CLI_PATH) + " " + args); }

std::string q(const fs::path& p) { return test::quote(p); }

std::string synth_config() { return "--config " + q(kSynth / "smm.ini"); }

// The last line of a failing run, which must be its only line.
std::string error_line(const test::RunResult& r) {
  CHECK(r.exit_code != 0);
  auto text = r.output;
  while (!text.empty() && text.back() == '\n') text.pop_back();
  CHECK(text.find('\n') == std::string::npos);
  return text;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = test::slurp(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("ingest: reference fixtures") {
  test::TempDir out;
  std::string paths;
  for (const auto& e : fs::directory_iterator(kReference / "transcripts")) paths += " " + q(e.path());
  auto r = smm_run("ingest --out " + q(out.path()) + paths);
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  auto manifest = Json::parse(test::slurp(out / "manifest.json"));
  CHECK(manifest["total_utterances"] == 1142);
  REQUIRE(manifest["dialogues"].size() == 6);
  CHECK(manifest["dialogues"][0]["id"] == "D1");
  CHECK(manifest["dialogues"][0]["utterances"] == 173);
  CHECK(load_lengths_csv((out / "lengths.csv").string()) == load_lengths_csv((kReference / "lengths.csv").string()));
  CHECK(fs::exists(out / "dialogues/D6.json"));
}

TEST_CASE("ingest: errors") {
  test::TempDir out;
  auto r = smm_run("ingest --out " + q(out.path()));
  CHECK(error_line(r).find("NoInputs") != std::string::npos);

  auto d1 = kReference / "transcripts/D1.txt";
  test::spit(out / "copy/D1.txt", test::slurp(d1));
  r = smm_run("ingest --out " + q(out / "o") + " " + q(d1) + " " + q(out / "copy/D1.txt"));
  CHECK(error_line(r).find("DuplicateId") != std::string::npos);

  test::spit(out / "bad.txt", "Searcher: \"ok\"\nDirector: missing quotes\n");
  r = smm_run("ingest --out " + q(out / "o") + " " + q(out / "bad.txt"));
  auto line = error_line(r);
  CHECK(line.find("MalformedLine") != std::string::npos);
  CHECK(line.find("bad.txt") != std::string::npos);
  CHECK(line.find("line 2") != std::string::npos);
}

TEST_CASE("annotate: replay fixture and rule-based annotator") {
  test::TempDir out;
  auto r = smm_run(synth_config() + " --out " + q(out.path()) + " --backend synth-annotator --replay annotate --dialogue " +
                   q(kSynth / "dialogues/S1.json"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  auto set = Json::parse(test::slurp(out / "annotations/S1.synth-annotator.json"));
  CHECK(set["items"].size() == 3);
  CHECK(test::slurp(out / "annotations/S1.synth-annotator.json") ==
        test::slurp(kSynth / "expected/annotations/S1.synth-annotator.json"));
  auto log = Json::parse(test::slurp(out / "logs/annotate.S1.synth-annotator.json"));
  CHECK(log["backend_stats"]["network_requests"] == 0);
  CHECK(log["backend_stats"]["cache_hits"] == 3);

  r = smm_run("--out " + q(out.path()) + " --backend rules annotate --dialogue " + q(kSynth / "dialogues/S3.json"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  log = Json::parse(test::slurp(out / "logs/annotate.S3.rules.json"));
  CHECK(log["backend_stats"]["calls"] == 0);
  CHECK(log["backend_stats"]["cache_hits"] == 0);
  CHECK(log["backend_stats"]["cache_misses"] == 0);
  auto first = test::slurp(out / "annotations/S3.rules.json");
  CHECK(smm_run("--out " + q(out.path()) + " --backend rules annotate --dialogue " + q(kSynth / "dialogues/S3.json"))
            .exit_code == 0);
  CHECK(test::slurp(out / "annotations/S3.rules.json") == first);
}

TEST_CASE("annotate: dialogue id under the output directory") {
  test::TempDir out;
  REQUIRE(smm_run("ingest --out " + q(out.path()) + " " + q(kSynth / "dialogues/S2.json")).exit_code == 0);
  auto r = smm_run(synth_config() + " --out " + q(out.path()) + " --backend synth-annotator --replay annotate --dialogue S2");
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  auto log = Json::parse(test::slurp(out / "logs/annotate.S2.synth-annotator.json"));
  CHECK(log["attempts"][0] == 2);
  CHECK(log["attempts_total"] == 6);
}

TEST_CASE("annotate: cache miss names the digest") {
  test::TempDir out;
  auto cache = out / "cache.jsonl";
  auto entries = ResponseCache((kSynth / "cache.jsonl").string()).entries();
  REQUIRE_FALSE(entries.empty());
  ResponseCache copy(cache.string());
  for (const auto& e : entries) copy.store(e.request_digest, e.response_text);

  // The generator records S1 first, so the first entry is S1's opening prompt.
  auto first_digest = entries.front().request_digest;
  CHECK(smm_run("--cache " + q(cache) + " cache rm " + first_digest).exit_code == 0);
  auto r = smm_run(synth_config() + " --cache " + q(cache) + " --out " + q(out / "o") +
                   " --backend synth-annotator --replay annotate --dialogue " + q(kSynth / "dialogues/S1.json"));
  auto line = error_line(r);
  CHECK(line.rfind("error: CacheMiss at utterance 0", 0) == 0);
  CHECK(line.find(first_digest) != std::string::npos);

  auto ls = smm_run("--cache " + q(cache) + " cache ls");
  CHECK(ls.exit_code == 0);
  CHECK(ls.output.find(first_digest) == std::string::npos);
  CHECK(ls.output.find(entries.back().request_digest) != std::string::npos);
  CHECK(smm_run("--cache " + q(cache) + " cache rm " + first_digest).exit_code != 0);
}

TEST_CASE("detect: fixture replay, identical sets, and errors") {
  test::TempDir out;
  auto o = q(out.path());
  REQUIRE(smm_run(synth_config() + " --out " + o + " --backend synth-annotator --replay annotate --dialogue " +
                  q(kSynth / "dialogues/S2.json"))
              .exit_code == 0);
  auto r = smm_run(synth_config() + " --out " + o + " --replay detect --gt " + q(kSynth / "ground_truth/S2.json") +
                   " --ann " + q(out / "annotations/S2.synth-annotator.json"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  auto grid = load_counts_csv((out / "counts.csv").string());
  REQUIRE(grid.rows.size() == 1);
  CHECK(grid.rows[0].total() == 5);
  CHECK(test::slurp(out / "discrepancies/S2.synth-annotator.json") ==
        test::slurp(kSynth / "expected/discrepancies/S2.synth-annotator.json"));

  // A replay detector recorded to answer [] whenever both sides are the same.
  auto gt_path = kSynth / "ground_truth/S1.json";
  auto gt = load_annotation_set(gt_path.string());
  {
    ResponseCache cache((out / "self.jsonl").string());
    DetectorConfig cfg;
    auto tmpl = resolve_detection_template(cfg);
    for (const auto& item : gt.items) {
      cache.store(request_digest("self-check", build_detection_prompt(cfg, tmpl, item, item)), "{\"Discrepancies\": []}");
    }
  }
  test::spit(out / "self.ini", "[backend.self-check]\nkind = scripted_replay\ncache = self.jsonl\n");
  r = smm_run("--config " + q(out / "self.ini") + " --out " + q(out / "self") + " --backend self-check detect --gt " +
              q(gt_path) + " --ann " + q(gt_path));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  auto self = load_counts_csv((out / "self/counts.csv").string());
  REQUIRE(self.rows.size() == 1);
  CHECK(self.rows[0] == DiscrepancyCounts{"ground-truth", "S1", 0, 0, 0, 0});
  CHECK(load_discrepancy_file((out / "self/discrepancies/S1.ground-truth.json").string()).discrepancies.empty());

  r = smm_run("--out " + o + " detect --gt " + q(out / "nope.json") + " --ann " + q(gt_path));
  auto line = error_line(r);
  CHECK(line.find("IOError") != std::string::npos);
  CHECK(line.find("nope.json") != std::string::npos);

  r = smm_run("--out " + o + " detect --gt " + q(gt_path) + " --ann " + q(kSynth / "ground_truth/S2.json"));
  CHECK(error_line(r).find("DialogueMismatch") != std::string::npos);
}

TEST_CASE("detect: counts file is upserted in stable order") {
  test::TempDir out;
  auto o = q(out.path());
  for (const char* id : {"S3", "S1", "S2", "S1"}) {
    auto gt = q(kSynth / ("ground_truth/" + std::string(id) + ".json"));
    REQUIRE(smm_run("--out " + o + " detect --gt " + gt + " --ann " + gt).exit_code == 0);
  }
  auto grid = load_counts_csv((out / "counts.csv").string());
  REQUIRE(grid.rows.size() == 3);
  CHECK(grid.rows[0].dialogue == "S1");
  CHECK(grid.rows[2].dialogue == "S3");
  for (const auto& row : grid.rows) CHECK(row.total() == 0);
}

TEST_CASE("score, rates and report") {
  test::TempDir a, b, c;
  auto inputs = " --counts " + q(kReference / "counts.csv") + " --lengths " + q(kReference / "lengths.csv") + " --accuracy " +
                q(kReference / "accuracy.csv");
  auto r1 = smm_run("--out " + q(a.path()) + " score" + inputs);
  REQUIRE_MESSAGE(r1.exit_code == 0, r1.output);
  auto r2 = smm_run("--out " + q(b.path()) + " --weights 1,1,1,1 score" + inputs);
  REQUIRE(r2.exit_code == 0);
  CHECK(r1.output == r2.output);
  CHECK(snapshot(a.path()) == snapshot(b.path()));
  CHECK(r1.output.find("1.000") != std::string::npos);

  auto scores = test::slurp(a / "scores.csv");
  CHECK(scores.find("Claude Sonnet 4,D3,745,3.311,0.000\n") != std::string::npos);
  CHECK(test::slurp(a / "report/accuracy.csv").find("o3-mini,155,22,0.876") != std::string::npos);

  REQUIRE(smm_run("--out " + q(c.path()) + " --weights 2,2,1,1 score" + inputs).exit_code == 0);
  CHECK(test::slurp(c / "scores.csv").find("\no3-mini,D2,150,") != std::string::npos);

  auto rates = smm_run("--out " + q(a / "r") + " rates --counts " + q(kReference / "counts.csv") + " --lengths " +
                       q(kReference / "lengths.csv"));
  REQUIRE(rates.exit_code == 0);
  CHECK(test::slurp(a / "r/rates_omissions.csv").find("D1,0.832,0.006,0.301,0.318") != std::string::npos);

  auto rep = smm_run("--out " + q(a / "rep") + " report" + inputs);
  REQUIRE(rep.exit_code == 0);
  CHECK(snapshot(a / "rep/report") == snapshot(a / "report"));

  auto bad = smm_run("--out " + q(c.path()) + " --weights 1,1,1 score" + inputs);
  CHECK(error_line(bad).find("ConfigError") != std::string::npos);
  test::spit(c / "short.csv", "dialogue,utterances\nD1,173\n");
  bad = smm_run("--out " + q(c.path()) + " score --counts " + q(kReference / "counts.csv") + " --lengths " + q(c / "short.csv"));
  CHECK(error_line(bad).find("MissingLength") != std::string::npos);
}

TEST_CASE("validate-accuracy") {
  test::TempDir out;
  std::string paths;
  for (const auto& e : fs::directory_iterator(kReference / "judgments")) paths += " " + q(e.path());
  auto r = smm_run("--out " + q(out.path()) + " validate-accuracy" + paths);
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  auto text = test::slurp(out / "accuracy.csv");
  CHECK(text.find("o3-mini,155,22,0.876") != std::string::npos);
  CHECK(text.find("Naive Human,98,89,0.524") != std::string::npos);
  CHECK(text.find("Claude Sonnet 4,383,145,0.725") != std::string::npos);
}

TEST_CASE("every command is idempotent") {
  test::TempDir out;
  auto o = q(out.path());
  std::vector<std::string> commands = {
      "ingest " + q(kSynth / "dialogues/S1.json") + " " + q(kSynth / "dialogues/S2.json") + " " +
          q(kSynth / "dialogues/S3.json"),
      "--backend rules annotate --dialogue S1",
      "detect --gt " + q(kSynth / "ground_truth/S1.json") + " --ann " + q(out / "annotations/S1.rules.json"),
      "score --counts " + q(out / "counts.csv") + " --lengths " + q(out / "lengths.csv"),
      "rates --counts " + q(out / "counts.csv") + " --lengths " + q(out / "lengths.csv"),
  };
  for (const auto& cmd : commands) {
    CAPTURE(cmd);
    auto r = smm_run("--out " + o + " " + cmd);
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);
    auto before = snapshot(out.path());
    auto again = smm_run("--out " + o + " " + cmd);
    CHECK(again.exit_code == 0);
    CHECK(again.output == r.output);
    CHECK(snapshot(out.path()) == before);
  }
}

TEST_CASE("configuration errors") {
  test::TempDir dir;
  test::spit(dir / "key.ini", "[backend.openai]\nkind = http_api\nendpoint = https://api.example.com/v1\napi_key = sk-x\n");
  auto r = smm_run("--config " + q(dir / "key.ini") + " --out " + q(dir / "o") + " --backend openai annotate --dialogue " +
                   q(kSynth / "dialogues/S1.json"));
  auto line = error_line(r);
  CHECK(line.find("ConfigError") != std::string::npos);
  CHECK(line.find("sk-x") == std::string::npos);

  r = smm_run("--out " + q(dir / "o") + " --backend undefined annotate --dialogue " + q(kSynth / "dialogues/S1.json"));
  CHECK(error_line(r).find("ConfigError") != std::string::npos);

  test::spit(dir / "http.ini", "[backend.remote]\nkind = http_api\nendpoint = http://127.0.0.1:1/v1/chat\n");
  unsetenv("REMOTE_API_KEY");
  r = smm_run("--config " + q(dir / "http.ini") + " --out " + q(dir / "o") + " --backend remote annotate --dialogue " +
              q(kSynth / "dialogues/S1.json"));
  line = error_line(r);
  CHECK(line.find("AuthError") != std::string::npos);
  CHECK(line.find("REMOTE_API_KEY") != std::string::npos);

  test::spit(dir / "unknown.ini", "[mystery]\nx = 1\n");
  r = smm_run("--config " + q(dir / "unknown.ini") + " cache ls");
  CHECK(error_line(r).find("ConfigError") != std::string::npos);

  r = smm_run("frobnicate");
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("UsageError") != std::string::npos);
}
