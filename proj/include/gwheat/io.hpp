#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace gwheat {

// Shortest round-trip decimal form ('.' separator, no locale).
std::string format_double(double x);

// 64-bit FNV-1a of the text, as 16 lowercase hex digits.
std::string hash_text(std::string_view text);

}  // namespace gwheat
