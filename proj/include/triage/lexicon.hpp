#pragma once

#include <string>
#include <vector>

#include "triage/team.hpp"

namespace triage {

// Team-specific vocabulary used by the synthetic generator. Lexicons are
// pairwise disjoint and disjoint from the filler lexicon.
const std::vector<std::string>& team_lexicon(Team team);

// Team-agnostic words shared by all documents.
const std::vector<std::string>& filler_lexicon();

}  // namespace triage
