#include "triage/team.hpp"

#include "triage/errors.hpp"

namespace triage {

namespace {

constexpr std::array<std::string_view, kTeamCount> kCodes = {"ED", "ID", "OA", "EIP", "PN"};
constexpr std::array<std::string_view, kTeamCount> kNames = {
    "Eating disorders", "Intellectual disability", "Older adults",
    "Early intervention in psychosis", "Peri-natal"};

}  // namespace

Team team_from_index(int index) {
  if (index < 0 || index >= static_cast<int>(kTeamCount)) {
    throw ArgumentError("team index out of range: " + std::to_string(index));
  }
  return static_cast<Team>(index);
}

std::string_view team_code(Team t) { return kCodes[static_cast<std::size_t>(team_index(t))]; }

std::string_view team_display_name(Team t) {
  return kNames[static_cast<std::size_t>(team_index(t))];
}

std::optional<Team> parse_team(std::string_view code) {
  for (std::size_t i = 0; i < kTeamCount; ++i) {
    if (kCodes[i] == code) return static_cast<Team>(i);
  }
  return std::nullopt;
}

}  // namespace triage
