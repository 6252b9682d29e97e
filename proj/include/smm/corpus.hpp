#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smm/json.hpp"

namespace smm {

enum class SpeakerRole { Searcher, Director };

std::string_view speaker_name(SpeakerRole role);
/// Exact label match; anything other than "Searcher"/"Director" throws UnknownSpeaker.
SpeakerRole parse_speaker(std::string_view label);

struct Utterance {
  std::size_t index = 0;
  SpeakerRole speaker = SpeakerRole::Searcher;
  std::string text;
  double start = 0.0;
  double end = 0.0;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

/// One task dialogue. Construct through `Dialogue::make` (or the parsers) so the
/// index/timestamp invariants always hold.
class Dialogue {
 public:
  Dialogue() = default;

  /// Validates: contiguous indices from 0, nonempty text, start <= end,
  /// nondecreasing starts. Throws InvalidDialogue.
  static Dialogue make(std::string id, std::vector<Utterance> utterances);

  const std::string& id() const noexcept { return id_; }
  std::span<const Utterance> utterances() const noexcept { return utterances_; }
  const Utterance& at(std::size_t i) const;
  std::size_t size() const noexcept { return utterances_.size(); }
  bool empty() const noexcept { return utterances_.empty(); }

  friend bool operator==(const Dialogue&, const Dialogue&) = default;

 private:
  std::string id_;
  std::vector<Utterance> utterances_;
};

inline constexpr std::size_t kDefaultHistoryWindow = 12;

/// Reads either the line format `Speaker: "text" [start end]` or a canonical
/// JSON dialogue file (detected by a leading '{'). For JSON input the file's
/// own "id" wins over `id`.
Dialogue parse_transcript(std::istream& source, const std::string& id);
Dialogue parse_transcript_text(std::string_view source, const std::string& id);
Dialogue load_dialogue(const std::string& path);

Json utterance_to_json(const Utterance& u);
Json dialogue_to_json(const Dialogue& d);
Dialogue dialogue_from_json(const Json& j);
std::string serialize_dialogue(const Dialogue& d);

/// Up to `k` utterances immediately preceding `upto`, oldest first.
std::vector<Utterance> history_window(const Dialogue& d, std::size_t upto, std::size_t k);

}  // namespace smm
