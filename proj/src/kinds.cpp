#include "smm/kinds.hpp"

#include "text_util.hpp"

namespace smm {

std::string_view kind_name(DiscrepancyKind k) {
  switch (k) {
    case DiscrepancyKind::BeliefContradiction: return "Belief Contradiction";
    case DiscrepancyKind::FalseBelief: return "False Belief";
    case DiscrepancyKind::UnsupportedBelief: return "Unsupported Belief";
    case DiscrepancyKind::Omission: return "Omission";
  }
  return "";
}

std::string_view kind_slug(DiscrepancyKind k) {
  switch (k) {
    case DiscrepancyKind::BeliefContradiction: return "belief_contradictions";
    case DiscrepancyKind::FalseBelief: return "false_beliefs";
    case DiscrepancyKind::UnsupportedBelief: return "unsupported_beliefs";
    case DiscrepancyKind::Omission: return "omissions";
  }
  return "";
}

std::optional<DiscrepancyKind> kind_from_name(std::string_view name) {
  for (auto k : kAllKinds) {
    if (detail::iequals(detail::trim(name), kind_name(k))) return k;
  }
  return std::nullopt;
}

int severity(DiscrepancyKind k) {
  switch (k) {
    case DiscrepancyKind::BeliefContradiction: return 4;
    case DiscrepancyKind::FalseBelief: return 3;
    case DiscrepancyKind::UnsupportedBelief: return 2;
    case DiscrepancyKind::Omission: return 1;
  }
  return 0;
}

std::size_t& DiscrepancyCounts::operator[](DiscrepancyKind k) {
  switch (k) {
    case DiscrepancyKind::BeliefContradiction: return belief_contradictions;
    case DiscrepancyKind::FalseBelief: return false_beliefs;
    case DiscrepancyKind::UnsupportedBelief: return unsupported_beliefs;
    case DiscrepancyKind::Omission: break;
  }
  return omissions;
}

std::size_t DiscrepancyCounts::operator[](DiscrepancyKind k) const {
  return const_cast<DiscrepancyCounts&>(*this)[k];
}

}  // namespace smm
