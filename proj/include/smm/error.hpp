#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace smm {

enum class Errc {
  EmptyTranscript,
  UnknownSpeaker,
  MalformedLine,
  InvalidDialogue,
  OutOfRange,
  SchemaError,
  ValidationError,
  NoJsonFound,
  UnbalancedBraces,
  ParseError,
  CacheMiss,
  Timeout,
  TransportError,
  AuthError,
  RateLimited,
  TemplateError,
  AnnotationFailed,
  DialogueMismatch,
  EmptyJudgments,
  ZeroLengthDialogue,
  EmptyMatrix,
  MissingLength,
  InconsistentBundle,
  DuplicateId,
  NoInputs,
  IOError,
  ConfigError,
};

std::string_view errc_name(Errc code);

/// Every failure surfaced by the toolkit. `what()` carries the full message,
/// prefixed with the utterance index when one is attached.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);
  Error(Errc code, const std::string& message, std::size_t utterance_index);

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  std::optional<std::size_t> utterance_index() const noexcept { return index_; }

  /// Same error with an utterance index attached (keeps an existing one).
  Error at_index(std::size_t index) const;

 private:
  Errc code_;
  std::string detail_;
  std::optional<std::size_t> index_;
};

}  // namespace smm
