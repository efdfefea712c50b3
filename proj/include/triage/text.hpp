#pragma once

#include <string>
#include <string_view>

namespace triage {

// Removes carriage returns, tabs and other control characters, drops bytes
// that are not valid UTF-8, collapses whitespace runs to a single space and
// trims both ends. Idempotent.
std::string clean_text(std::string_view raw);

}  // namespace triage
