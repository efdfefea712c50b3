#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace triage {

// Sub-specialty teams a referral can be triaged to. The integer encoding is
// stable and used as the class index everywhere.
enum class Team : int { ED = 0, ID = 1, OA = 2, EIP = 3, PN = 4 };

inline constexpr std::size_t kTeamCount = 5;

inline constexpr std::array<Team, kTeamCount> kAllTeams = {Team::ED, Team::ID, Team::OA, Team::EIP,
                                                           Team::PN};

constexpr int team_index(Team t) { return static_cast<int>(t); }
Team team_from_index(int index);

std::string_view team_code(Team t);
std::string_view team_display_name(Team t);
std::optional<Team> parse_team(std::string_view code);

}  // namespace triage
