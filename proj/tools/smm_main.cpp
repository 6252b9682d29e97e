// smm: command-line entry point for the annotate -> detect -> score pipeline.

#include <CLI11.hpp>

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "smm/annotator_pipeline.hpp"
#include "smm/corpus.hpp"
#include "smm/discrepancy.hpp"
#include "smm/error.hpp"
#include "smm/reporting.hpp"
#include "smm/scoring.hpp"
#include "text_util.hpp"

namespace fs = std::filesystem;
using namespace smm;

namespace {

constexpr const char* kRulesBackend = "rules";

struct RunConfig {
  std::string out = "out";
  std::string cache;
  std::size_t window = kDefaultHistoryWindow;
  Weights weights;
  std::vector<std::string> annotator_order;
  std::string prompt_dir;
  std::string detector = kRulesBackend;
  int max_schema_retries = 2;
  std::size_t parallelism = 1;
  std::map<std::string, BackendConfig> backends;
};

std::string trimmed(std::string_view s) { return std::string(detail::trim(s)); }

std::string env_name_for(const std::string& backend) {
  std::string out;
  for (unsigned char c : backend) out.push_back(std::isalnum(c) ? static_cast<char>(std::toupper(c)) : '_');
  return out + "_API_KEY";
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto& part : detail::split(s, ',')) {
    auto t = trimmed(part);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

template <typename T>
T number(const boost::property_tree::ptree& section, const std::string& key, T fallback, const std::string& where) {
  auto raw = section.get_optional<std::string>(key);
  if (!raw) return fallback;
  double v = 0;
  if (!detail::parse_double(trimmed(*raw), v)) {
    throw Error(Errc::ConfigError, where + ": '" + key + "' is not a number: '" + *raw + "'");
  }
  return static_cast<T>(v);
}

BackendConfig backend_from_section(const std::string& name, const boost::property_tree::ptree& s) {
  auto where = "[backend." + name + "]";
  BackendConfig cfg;
  auto kind = detail::lower(trimmed(s.get<std::string>("kind", "http_api")));
  if (kind == "http_api") {
    cfg.kind = BackendKind::HttpApi;
  } else if (kind == "scripted_replay" || kind == "replay") {
    cfg.kind = BackendKind::ScriptedReplay;
  } else {
    throw Error(Errc::ConfigError, where + ": unknown kind '" + kind + "'");
  }
  cfg.wire = WireFormat::preset(trimmed(s.get<std::string>("preset", "openai")));
  cfg.endpoint = trimmed(s.get<std::string>("endpoint", ""));
  cfg.model = trimmed(s.get<std::string>("model", name));
  cfg.api_key_env = trimmed(s.get<std::string>("api_key_env", env_name_for(name)));
  cfg.timeout_seconds = number<double>(s, "timeout", cfg.timeout_seconds, where);
  cfg.max_retries = number<int>(s, "max_retries", cfg.max_retries, where);
  cfg.requests_per_minute = number<int>(s, "rpm", cfg.requests_per_minute, where);
  cfg.backoff_initial_seconds = number<double>(s, "backoff", cfg.backoff_initial_seconds, where);
  cfg.cache_path = trimmed(s.get<std::string>("cache", ""));
  if (s.get_optional<std::string>("api_key")) {
    throw Error(Errc::ConfigError, where + ": API keys belong in the environment variable named by api_key_env");
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  RunConfig rc;
  if (path.empty()) return rc;
  if (!fs::exists(path)) throw Error(Errc::IOError, "config file '" + path + "' does not exist");
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::read_ini(path, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(Errc::ConfigError, path + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  // Relative paths in the file are relative to the file itself.
  auto base = fs::absolute(path).parent_path();
  auto located = [&](const std::string& p) { return p.empty() || fs::path(p).is_absolute() ? p : (base / p).string(); };
  for (const auto& [section, body] : pt) {
    if (section == "run") {
      rc.out = located(trimmed(body.get<std::string>("out", rc.out)));
      rc.cache = located(trimmed(body.get<std::string>("cache", rc.cache)));
      rc.window = number<std::size_t>(body, "window", rc.window, "[run]");
      if (auto w = body.get_optional<std::string>("weights")) rc.weights = Weights::parse(trimmed(*w));
      rc.annotator_order = split_list(body.get<std::string>("annotator_order", ""));
      rc.prompt_dir = located(trimmed(body.get<std::string>("prompt_dir", "")));
      rc.detector = trimmed(body.get<std::string>("detector", rc.detector));
      rc.max_schema_retries = number<int>(body, "max_schema_retries", rc.max_schema_retries, "[run]");
      rc.parallelism = number<std::size_t>(body, "parallelism", rc.parallelism, "[run]");
    } else if (section.rfind("backend.", 0) == 0 && section.size() > 8) {
      auto name = section.substr(8);
      auto cfg = backend_from_section(name, body);
      cfg.cache_path = located(cfg.cache_path);
      rc.backends[name] = std::move(cfg);
    } else {
      throw Error(Errc::ConfigError, path + ": unknown section [" + section + "]");
    }
  }
  if (!rc.prompt_dir.empty() && !fs::is_directory(rc.prompt_dir)) {
    throw Error(Errc::ConfigError, "prompt_dir '" + rc.prompt_dir + "' is not a directory");
  }
  return rc;
}

BackendConfig resolve_backend(const RunConfig& rc, const std::string& name, bool replay) {
  BackendConfig cfg;
  if (auto it = rc.backends.find(name); it != rc.backends.end()) {
    cfg = it->second;
  } else if (replay) {
    cfg.model = name;
  } else {
    throw Error(Errc::ConfigError, "no [backend." + name + "] section in the config (or pass --replay)");
  }
  if (replay) cfg.kind = BackendKind::ScriptedReplay;
  if (cfg.cache_path.empty()) cfg.cache_path = rc.cache;
  if (cfg.kind == BackendKind::ScriptedReplay && cfg.cache_path.empty()) {
    throw Error(Errc::ConfigError, "replay needs a cache path (--cache or [run] cache)");
  }
  if (cfg.kind == BackendKind::ScriptedReplay && !fs::exists(cfg.cache_path)) {
    throw Error(Errc::IOError, "replay cache '" + cfg.cache_path + "' does not exist");
  }
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IOError, "cannot read '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error(Errc::IOError, "cannot create '" + path.parent_path().string() + "': " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IOError, "cannot write '" + path.string() + "'");
  out << content;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// File stem safe for any annotator name.
std::string file_stem(const std::string& id) {
  std::string out;
  for (unsigned char c : id) out.push_back(std::isalnum(c) || c == '-' || c == '.' || c == '_' ? static_cast<char>(c) : '_');
  return out;
}

Dialogue resolve_dialogue(const std::string& arg, const std::string& out) {
  if (fs::exists(arg)) return load_dialogue(arg);
  auto path = fs::path(out) / "dialogues" / (arg + ".json");
  if (fs::exists(path)) return load_dialogue(path.string());
  throw Error(Errc::IOError, "no dialogue file '" + arg + "' (also looked for '" + path.string() + "')");
}

Json stats_json(const BackendStats& s) {
  Json j;
  j["calls"] = s.calls;
  j["cache_hits"] = s.cache_hits;
  j["cache_misses"] = s.cache_misses;
  j["network_requests"] = s.network_requests;
  j["retries"] = s.retries;
  return j;
}

// ---- commands ----

struct Common {
  std::string config;
  std::string out;
  std::string cache;
  std::string backend;
  bool replay = false;
  std::optional<std::size_t> window;
  std::string weights;
};

RunConfig effective(const Common& c) {
  auto rc = load_config(c.config);
  if (!c.out.empty()) rc.out = c.out;
  if (!c.cache.empty()) rc.cache = c.cache;
  if (c.window) rc.window = *c.window;
  if (!c.weights.empty()) rc.weights = Weights::parse(c.weights);
  return rc;
}

void cmd_ingest(const Common& c, const std::vector<std::string>& paths) {
  auto rc = effective(c);
  if (paths.empty()) throw Error(Errc::NoInputs, "ingest needs at least one transcript");
  std::vector<Dialogue> dialogues;
  std::set<std::string> ids;
  for (const auto& p : paths) {
    auto d = load_dialogue(p);
    if (!ids.insert(d.id()).second) throw Error(Errc::DuplicateId, "dialogue id '" + d.id() + "' appears twice (" + p + ")");
    dialogues.push_back(std::move(d));
  }
  std::sort(dialogues.begin(), dialogues.end(),
            [](const Dialogue& a, const Dialogue& b) { return natural_less(a.id(), b.id()); });
  Json manifest;
  manifest["dialogues"] = Json::array();
  LengthTable lengths;
  std::size_t total = 0;
  for (const auto& d : dialogues) {
    write_file(fs::path(rc.out) / "dialogues" / (file_stem(d.id()) + ".json"), serialize_dialogue(d));
    manifest["dialogues"].push_back({{"id", d.id()}, {"utterances", d.size()}});
    lengths[d.id()] = d.size();
    total += d.size();
  }
  manifest["total_utterances"] = total;
  write_file(fs::path(rc.out) / "manifest.json", dump(manifest));
  write_file(fs::path(rc.out) / "lengths.csv", format_lengths_csv(lengths));
  std::cout << "ingested " << dialogues.size() << " dialogues, " << total << " utterances\n";
}

void cmd_annotate(const Common& c, const std::string& dialogue_arg, std::string annotator) {
  auto rc = effective(c);
  auto d = resolve_dialogue(dialogue_arg, rc.out);
  auto backend_name = c.backend.empty() ? annotator : c.backend;
  if (backend_name.empty()) throw Error(Errc::ConfigError, "annotate needs --annotator or --backend");
  if (annotator.empty()) annotator = backend_name;

  AnnotationSet set;
  BackendStats stats;
  if (backend_name == kRulesBackend) {
    set = rule_based_annotator(d, annotator);
  } else {
    AnnotatorConfig cfg;
    cfg.backend = resolve_backend(rc, backend_name, c.replay);
    cfg.history_window = rc.window;
    cfg.max_schema_retries = rc.max_schema_retries;
    cfg.prompt_dir = rc.prompt_dir;
    auto backend = make_backend(cfg.backend);
    set = annotate_dialogue(cfg, *backend, d, annotator);
    stats = backend->stats();
  }

  auto stem = file_stem(d.id()) + "." + file_stem(annotator);
  auto set_path = fs::path(rc.out) / "annotations" / (stem + ".json");
  write_file(set_path, serialize_annotation_set(set));

  Json log;
  log["dialogue"] = d.id();
  log["annotator"] = annotator;
  log["backend"] = backend_name;
  log["utterances"] = set.items.size();
  std::size_t attempts = 0;
  Json per_item = Json::array();
  for (const auto& item : set.items) {
    attempts += item.attempts;
    per_item.push_back(item.attempts);
  }
  log["attempts_total"] = attempts;
  log["attempts"] = std::move(per_item);
  log["backend_stats"] = stats_json(stats);
  write_file(fs::path(rc.out) / "logs" / ("annotate." + stem + ".json"), dump(log));
  std::cout << "wrote " << set_path.string() << " (" << set.items.size() << " items, " << stats.cache_hits
            << " cache hits)\n";
}

void upsert_counts(const fs::path& path, const DiscrepancyCounts& row) {
  CountsGrid grid;
  if (fs::exists(path)) grid = load_counts_csv(path.string());
  auto it = std::find_if(grid.rows.begin(), grid.rows.end(), [&](const DiscrepancyCounts& c) {
    return c.annotator == row.annotator && c.dialogue == row.dialogue;
  });
  if (it != grid.rows.end()) {
    *it = row;
  } else {
    grid.rows.push_back(row);
  }
  std::sort(grid.rows.begin(), grid.rows.end(), [](const DiscrepancyCounts& a, const DiscrepancyCounts& b) {
    if (a.annotator != b.annotator) return a.annotator < b.annotator;
    return natural_less(a.dialogue, b.dialogue);
  });
  write_file(path, format_counts_csv(grid));
}

void cmd_detect(const Common& c, const std::string& gt_path, const std::string& ann_path) {
  auto rc = effective(c);
  auto gt = load_annotation_set(gt_path);
  auto ann = load_annotation_set(ann_path);
  auto detector = c.backend.empty() ? rc.detector : c.backend;

  std::vector<Discrepancy> found;
  BackendStats stats;
  if (detector == kRulesBackend) {
    found = detect_set_oracle(gt, ann);
  } else {
    DetectorConfig cfg;
    cfg.backend = resolve_backend(rc, detector, c.replay);
    cfg.prompt_dir = rc.prompt_dir;
    cfg.parallelism = rc.parallelism;
    auto backend = make_backend(cfg.backend);
    found = detect_set(cfg, *backend, gt, ann);
    stats = backend->stats();
  }

  DiscrepancyFile file{ann.dialogue_id, gt.annotator_id, ann.annotator_id, found};
  auto stem = file_stem(ann.dialogue_id) + "." + file_stem(ann.annotator_id);
  auto path = fs::path(rc.out) / "discrepancies" / (stem + ".json");
  write_file(path, serialize_discrepancy_file(file));
  auto counts = count_by_type(found, ann.annotator_id, ann.dialogue_id);
  upsert_counts(fs::path(rc.out) / "counts.csv", counts);

  Json log;
  log["dialogue"] = ann.dialogue_id;
  log["ground_truth"] = gt.annotator_id;
  log["annotator"] = ann.annotator_id;
  log["detector"] = detector;
  for (auto k : kAllKinds) log["counts"][std::string(kind_slug(k))] = counts[k];
  log["backend_stats"] = stats_json(stats);
  write_file(fs::path(rc.out) / "logs" / ("detect." + stem + ".json"), dump(log));
  std::cout << "wrote " << path.string() << " (B=" << counts.belief_contradictions << " F=" << counts.false_beliefs
            << " U=" << counts.unsupported_beliefs << " O=" << counts.omissions << ")\n";
}

struct ScoreInputs {
  std::string counts;
  std::string lengths;
  std::string accuracy;
};

ReportBundle bundle_for(const RunConfig& rc, const ScoreInputs& in) {
  if (in.counts.empty() || in.lengths.empty()) throw Error(Errc::ConfigError, "--counts and --lengths are required");
  auto grid = load_counts_csv(in.counts);
  auto lengths = load_lengths_csv(in.lengths);
  if (grid.rows.empty()) throw Error(Errc::EmptyMatrix, in.counts + " has no rows");
  std::vector<AccuracyRow> accuracy;
  if (!in.accuracy.empty()) accuracy = load_accuracy_csv(in.accuracy);
  return make_bundle(grid, lengths, rc.weights, std::move(accuracy), rc.annotator_order);
}

void cmd_score(const Common& c, const ScoreInputs& in) {
  auto rc = effective(c);
  auto b = bundle_for(rc, in);
  write_file(fs::path(rc.out) / "scores.csv", format_scores_csv(b.scores));
  write_report(b, (fs::path(rc.out) / "report").string());
  std::cout << render_markdown(build_tables(b)[2]);
}

void cmd_report(const Common& c, const ScoreInputs& in) {
  auto rc = effective(c);
  auto b = bundle_for(rc, in);
  write_report(b, (fs::path(rc.out) / "report").string());
  std::cout << "wrote " << (fs::path(rc.out) / "report").string() << "\n";
}

void cmd_rates(const Common& c, const ScoreInputs& in) {
  auto rc = effective(c);
  auto b = bundle_for(rc, in);
  for (const auto& t : build_tables(b)) {
    if (t.name.rfind("rates_", 0) != 0) continue;
    write_file(fs::path(rc.out) / (t.name + ".csv"), render_csv(t));
    std::cout << render_markdown(t) << "\n";
  }
}

void cmd_validate_accuracy(const Common& c, const std::vector<std::string>& judgment_files) {
  auto rc = effective(c);
  if (judgment_files.empty()) throw Error(Errc::NoInputs, "validate-accuracy needs judgment files");
  std::vector<AccuracyRow> rows;
  std::set<std::string> seen;
  for (const auto& path : judgment_files) {
    Json j;
    try {
      j = Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
      throw Error(Errc::ParseError, path + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("annotator") || !j["annotator"].is_string()) {
      throw Error(Errc::SchemaError, path + ": needs a string \"annotator\"");
    }
    auto name = j["annotator"].get<std::string>();
    if (!seen.insert(name).second) throw Error(Errc::DuplicateId, "judgments for '" + name + "' given twice");
    auto judgments = judgments_from_json(j);
    rows.push_back({name, detector_accuracy(judgments)});
  }
  std::sort(rows.begin(), rows.end(), [](const AccuracyRow& a, const AccuracyRow& b) {
    return detail::lower(a.annotator) < detail::lower(b.annotator);
  });
  auto text = format_accuracy_csv(rows);
  write_file(fs::path(rc.out) / "accuracy.csv", text);
  std::cout << text;
}

std::string cache_path_for(const Common& c) {
  auto rc = effective(c);
  if (rc.cache.empty()) throw Error(Errc::ConfigError, "no cache path (--cache or [run] cache)");
  if (!fs::exists(rc.cache)) throw Error(Errc::IOError, "cache '" + rc.cache + "' does not exist");
  return rc.cache;
}

void cmd_cache_ls(const Common& c) {
  ResponseCache cache(cache_path_for(c));
  auto entries = cache.entries();
  std::map<std::string, const CacheEntry*> latest;
  for (const auto& e : entries) latest[e.request_digest] = &e;
  for (const auto& [digest, e] : latest) {
    std::cout << digest << "  " << e->created_at << "  " << e->response_text.size() << " bytes\n";
  }
  std::cout << latest.size() << " entries\n";
}

void cmd_cache_rm(const Common& c, const std::string& digest) {
  ResponseCache cache(cache_path_for(c));
  if (!cache.remove(digest)) throw Error(Errc::CacheMiss, "no cache entry for digest " + digest);
  std::cout << "removed " << digest << "\n";
}

// One line: "error: <Code>[ at utterance i]: <message>".
int fail(const std::string& line) {
  std::cerr << "error: " << detail::replace_all(line, "\n", " ") << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Annotate team dialogues, detect discrepancies against a ground truth, and score them."};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config, "INI configuration file");
  app.add_option("--out", common.out, "output directory (default: [run] out, else ./out)");
  app.add_option("--cache", common.cache, "JSON-lines response cache");
  app.add_option("--backend", common.backend, "backend section name, or 'rules'");
  app.add_flag("--replay", common.replay, "serve model calls from the cache only");
  app.add_option("--window", common.window, "history window K");
  app.add_option("--weights", common.weights, "severity weights b,f,u,o");

  std::vector<std::string> ingest_paths;
  auto* ingest = app.add_subcommand("ingest", "canonicalize transcripts and write a manifest");
  ingest->add_option("paths", ingest_paths, "transcript files");

  std::string dialogue_arg, annotator;
  auto* annotate = app.add_subcommand("annotate", "annotate one dialogue");
  annotate->add_option("--dialogue", dialogue_arg, "dialogue file or id under <out>/dialogues")->required();
  annotate->add_option("--annotator", annotator, "annotator name (default: the backend name)");

  std::string gt_path, ann_path;
  auto* detect = app.add_subcommand("detect", "compare an annotation set against the ground truth");
  detect->add_option("--gt", gt_path, "ground-truth annotation set")->required();
  detect->add_option("--ann", ann_path, "annotator annotation set")->required();

  ScoreInputs inputs;
  auto add_score_options = [&](CLI::App* sub, bool with_accuracy) {
    sub->add_option("--counts", inputs.counts, "counts CSV")->required();
    sub->add_option("--lengths", inputs.lengths, "lengths CSV")->required();
    if (with_accuracy) sub->add_option("--accuracy", inputs.accuracy, "accuracy CSV (annotator,correct,wrong)");
  };
  auto* score = app.add_subcommand("score", "raw, per-utterance and normalized scores plus the report");
  add_score_options(score, true);
  auto* rates = app.add_subcommand("rates", "per-utterance rate tables for each discrepancy type");
  add_score_options(rates, false);
  auto* report = app.add_subcommand("report", "write the report directory");
  add_score_options(report, true);

  std::vector<std::string> judgment_files;
  auto* validate = app.add_subcommand("validate-accuracy", "detector accuracy from human judgments");
  validate->add_option("judgments", judgment_files, "judgment JSON files");

  std::string digest;
  auto* cache = app.add_subcommand("cache", "inspect the response cache");
  cache->require_subcommand(1);
  cache->fallthrough();
  auto* cache_ls = cache->add_subcommand("ls", "list cached digests");
  auto* cache_rm = cache->add_subcommand("rm", "remove one cached response");
  cache_rm->add_option("digest", digest, "request digest")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail(std::string("UsageError: ") + e.what());
    return 2;
  }

  try {
    if (*ingest) cmd_ingest(common, ingest_paths);
    else if (*annotate) cmd_annotate(common, dialogue_arg, annotator);
    else if (*detect) cmd_detect(common, gt_path, ann_path);
    else if (*score) cmd_score(common, inputs);
    else if (*rates) cmd_rates(common, inputs);
    else if (*report) cmd_report(common, inputs);
    else if (*validate) cmd_validate_accuracy(common, judgment_files);
    else if (*cache_ls) cmd_cache_ls(common);
    else if (*cache_rm) cmd_cache_rm(common, digest);
  } catch (const Error& e) {
    return fail(e.what());
  } catch (const std::exception& e) {
    return fail(std::string("InternalError: ") + e.what());
  }
  return 0;
}
