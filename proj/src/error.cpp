#include "smm/error.hpp"

namespace smm {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::EmptyTranscript: return "EmptyTranscript";
    case Errc::UnknownSpeaker: return "UnknownSpeaker";
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::InvalidDialogue: return "InvalidDialogue";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::SchemaError: return "SchemaError";
    case Errc::ValidationError: return "ValidationError";
    case Errc::NoJsonFound: return "NoJsonFound";
    case Errc::UnbalancedBraces: return "UnbalancedBraces";
    case Errc::ParseError: return "ParseError";
    case Errc::CacheMiss: return "CacheMiss";
    case Errc::Timeout: return "Timeout";
    case Errc::TransportError: return "TransportError";
    case Errc::AuthError: return "AuthError";
    case Errc::RateLimited: return "RateLimited";
    case Errc::TemplateError: return "TemplateError";
    case Errc::AnnotationFailed: return "AnnotationFailed";
    case Errc::DialogueMismatch: return "DialogueMismatch";
    case Errc::EmptyJudgments: return "EmptyJudgments";
    case Errc::ZeroLengthDialogue: return "ZeroLengthDialogue";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::MissingLength: return "MissingLength";
    case Errc::InconsistentBundle: return "InconsistentBundle";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::NoInputs: return "NoInputs";
    case Errc::IOError: return "IOError";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

namespace {

std::string compose(Errc code, const std::string& message,
                    const std::optional<std::size_t>& index) {
  std::string out(errc_name(code));
  if (index) out += " at utterance " + std::to_string(*index);
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(compose(code, message, std::nullopt)),
      code_(code),
      detail_(message) {}

Error::Error(Errc code, const std::string& message, std::size_t utterance_index)
    : std::runtime_error(compose(code, message, utterance_index)),
      code_(code),
      detail_(message),
      index_(utterance_index) {}

Error Error::at_index(std::size_t index) const {
  if (index_) return *this;
  return Error(code_, detail_, index);
}

}  // namespace smm
