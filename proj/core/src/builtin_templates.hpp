#pragma once

#include <span>
#include <string_view>
#include <utility>

namespace medsum::detail {

// Generated at configure time from core/templates/*.txt.
std::span<const std::pair<std::string_view, std::string_view>> builtin_templates();

}  // namespace medsum::detail
