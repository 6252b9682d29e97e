#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace smm {

/// Declared in descending severity.
enum class DiscrepancyKind { BeliefContradiction, FalseBelief, UnsupportedBelief, Omission };

inline constexpr std::array<DiscrepancyKind, 4> kAllKinds = {
    DiscrepancyKind::BeliefContradiction,
    DiscrepancyKind::FalseBelief,
    DiscrepancyKind::UnsupportedBelief,
    DiscrepancyKind::Omission,
};

/// Prompt spelling, e.g. "Belief Contradiction".
std::string_view kind_name(DiscrepancyKind k);
/// snake_case plural used in CSV headers and file names, e.g. "belief_contradictions".
std::string_view kind_slug(DiscrepancyKind k);
/// Case- and surrounding-whitespace-insensitive match against kind_name.
std::optional<DiscrepancyKind> kind_from_name(std::string_view name);
/// 4 for BeliefContradiction down to 1 for Omission.
int severity(DiscrepancyKind k);

/// B, F, U, O for one (annotator, dialogue) pair.
struct DiscrepancyCounts {
  std::string annotator;
  std::string dialogue;
  std::size_t belief_contradictions = 0;
  std::size_t false_beliefs = 0;
  std::size_t unsupported_beliefs = 0;
  std::size_t omissions = 0;

  std::size_t& operator[](DiscrepancyKind k);
  std::size_t operator[](DiscrepancyKind k) const;
  std::size_t total() const {
    return belief_contradictions + false_beliefs + unsupported_beliefs + omissions;
  }

  friend bool operator==(const DiscrepancyCounts&, const DiscrepancyCounts&) = default;
};

}  // namespace smm
