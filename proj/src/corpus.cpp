#include "smm/corpus.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "smm/error.hpp"
#include "text_util.hpp"

namespace smm {

using detail::trim;

std::string_view speaker_name(SpeakerRole role) {
  return role == SpeakerRole::Searcher ? "Searcher" : "Director";
}

SpeakerRole parse_speaker(std::string_view label) {
  if (label == "Searcher") return SpeakerRole::Searcher;
  if (label == "Director") return SpeakerRole::Director;
  throw Error(Errc::UnknownSpeaker, "unknown speaker label '" + std::string(label) + "'");
}

Dialogue Dialogue::make(std::string id, std::vector<Utterance> utterances) {
  if (id.empty()) throw Error(Errc::InvalidDialogue, "dialogue id is empty");
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    const auto& u = utterances[i];
    auto where = "dialogue " + id + ", utterance " + std::to_string(i) + ": ";
    if (u.index != i) {
      throw Error(Errc::InvalidDialogue, where + "index " + std::to_string(u.index) +
                                             " is not contiguous");
    }
    if (trim(u.text).empty()) throw Error(Errc::InvalidDialogue, where + "empty text");
    if (!(u.start >= 0.0) || !(u.end >= 0.0)) {
      throw Error(Errc::InvalidDialogue, where + "negative timestamp");
    }
    if (u.start > u.end) throw Error(Errc::InvalidDialogue, where + "start is after end");
    if (i > 0 && u.start < utterances[i - 1].start) {
      throw Error(Errc::InvalidDialogue, where + "start precedes previous utterance start");
    }
  }
  Dialogue d;
  d.id_ = std::move(id);
  d.utterances_ = std::move(utterances);
  return d;
}

const Utterance& Dialogue::at(std::size_t i) const {
  if (i >= utterances_.size()) {
    throw Error(Errc::OutOfRange, "utterance " + std::to_string(i) + " out of range for dialogue " +
                                      id_ + " (N=" + std::to_string(utterances_.size()) + ")");
  }
  return utterances_[i];
}

namespace {

Utterance parse_line(std::string_view line, std::size_t lineno, std::size_t index) {
  auto fail = [&](const std::string& why) {
    return Error(Errc::MalformedLine, "line " + std::to_string(lineno) + ": " + why);
  };
  auto colon = line.find(':');
  if (colon == std::string_view::npos) throw fail("missing 'Speaker:' prefix");
  auto label = trim(line.substr(0, colon));
  Utterance u;
  try {
    u.speaker = parse_speaker(label);
  } catch (const Error& e) {
    throw Error(Errc::UnknownSpeaker, "line " + std::to_string(lineno) + ": " + e.detail());
  }
  auto rest = trim(line.substr(colon + 1));
  if (rest.empty() || rest.front() != '"') throw fail("utterance text must be double-quoted");
  auto close = rest.rfind('"');
  if (close == 0) throw fail("unterminated quoted text");
  u.text = std::string(rest.substr(1, close - 1));
  if (trim(u.text).empty()) throw fail("empty utterance text");
  u.index = index;
  u.start = static_cast<double>(index);
  u.end = static_cast<double>(index + 1);

  auto tail = trim(rest.substr(close + 1));
  if (!tail.empty()) {
    if (tail.front() != '[' || tail.back() != ']') throw fail("expected '[start end]' after text");
    auto inner = trim(tail.substr(1, tail.size() - 2));
    auto sp = inner.find_first_of(" \t");
    if (sp == std::string_view::npos) throw fail("timestamps need both start and end");
    double s = 0, e = 0;
    if (!detail::parse_double(inner.substr(0, sp), s) ||
        !detail::parse_double(inner.substr(sp + 1), e)) {
      throw fail("unreadable timestamp");
    }
    if (s < 0 || e < 0 || s > e) throw fail("timestamps must satisfy 0 <= start <= end");
    u.start = s;
    u.end = e;
  }
  return u;
}

}  // namespace

Dialogue parse_transcript_text(std::string_view source, const std::string& id) {
  auto body = trim(source);
  if (body.empty()) throw Error(Errc::EmptyTranscript, "transcript '" + id + "' has no content");
  if (body.front() == '{') {
    Json j;
    try {
      j = Json::parse(body);
    } catch (const Json::parse_error& e) {
      throw Error(Errc::ParseError, "dialogue '" + id + "' at byte " + std::to_string(e.byte) +
                                        ": " + e.what());
    }
    return dialogue_from_json(j);
  }

  std::vector<Utterance> out;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= source.size()) {
    auto nl = source.find('\n', pos);
    auto line = source.substr(pos, nl == std::string_view::npos ? source.npos : nl - pos);
    ++lineno;
    if (!trim(line).empty()) out.push_back(parse_line(trim(line), lineno, out.size()));
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  if (out.empty()) throw Error(Errc::EmptyTranscript, "transcript '" + id + "' has no utterances");
  return Dialogue::make(id, std::move(out));
}

Dialogue parse_transcript(std::istream& source, const std::string& id) {
  std::string text{std::istreambuf_iterator<char>(source), std::istreambuf_iterator<char>()};
  return parse_transcript_text(text, id);
}

Dialogue load_dialogue(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IOError, "cannot read '" + path + "'");
  auto stem = path.substr(path.find_last_of('/') + 1);
  if (auto dot = stem.find('.'); dot != std::string::npos) stem.resize(dot);
  try {
    return parse_transcript(in, stem);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.detail());
  }
}

Json utterance_to_json(const Utterance& u) {
  Json j;
  j["index"] = u.index;
  j["speaker"] = speaker_name(u.speaker);
  j["text"] = u.text;
  j["start"] = u.start;
  j["end"] = u.end;
  return j;
}

Json dialogue_to_json(const Dialogue& d) {
  Json j;
  j["id"] = d.id();
  j["utterances"] = Json::array();
  for (const auto& u : d.utterances()) j["utterances"].push_back(utterance_to_json(u));
  return j;
}

Dialogue dialogue_from_json(const Json& j) {
  auto bad = [](const std::string& why) { return Error(Errc::SchemaError, "dialogue file: " + why); };
  if (!j.is_object()) throw bad("top level must be an object");
  if (!j.contains("id") || !j["id"].is_string()) throw bad("missing string 'id'");
  if (!j.contains("utterances") || !j["utterances"].is_array()) throw bad("missing 'utterances' array");
  std::vector<Utterance> us;
  for (const auto& item : j["utterances"]) {
    if (!item.is_object()) throw bad("utterance entries must be objects");
    Utterance u;
    if (!item.contains("index") || !item["index"].is_number_integer() || item["index"].get<long long>() < 0) {
      throw bad("utterance 'index' must be a nonnegative integer");
    }
    u.index = item["index"].get<std::size_t>();
    if (!item.contains("speaker") || !item["speaker"].is_string()) throw bad("utterance 'speaker' missing");
    u.speaker = parse_speaker(item["speaker"].get<std::string>());
    if (!item.contains("text") || !item["text"].is_string()) throw bad("utterance 'text' missing");
    u.text = item["text"].get<std::string>();
    if (!item.contains("start") || !item["start"].is_number()) throw bad("utterance 'start' missing");
    if (!item.contains("end") || !item["end"].is_number()) throw bad("utterance 'end' missing");
    u.start = item["start"].get<double>();
    u.end = item["end"].get<double>();
    us.push_back(std::move(u));
  }
  if (us.empty()) throw Error(Errc::EmptyTranscript, "dialogue '" + j["id"].get<std::string>() + "' has no utterances");
  return Dialogue::make(j["id"].get<std::string>(), std::move(us));
}

std::string serialize_dialogue(const Dialogue& d) { return dialogue_to_json(d).dump(2) + "\n"; }

std::vector<Utterance> history_window(const Dialogue& d, std::size_t upto, std::size_t k) {
  d.at(upto);
  auto count = std::min(k, upto);
  auto all = d.utterances();
  return {all.begin() + static_cast<std::ptrdiff_t>(upto - count),
          all.begin() + static_cast<std::ptrdiff_t>(upto)};
}

}  // namespace smm
