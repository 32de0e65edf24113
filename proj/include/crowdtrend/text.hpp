#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace crowdtrend::text {

bool valid_utf8(std::string_view s);

/// NFC-normalizes UTF-8 input. Returns nullopt when the input is not valid UTF-8.
std::optional<std::string> nfc_normalize(std::string_view utf8);

/// Unicode-aware lowercase (root locale).
std::string to_lower(std::string_view utf8);

/// True when the string is empty or only unicode whitespace.
bool is_blank(std::string_view utf8);

}  // namespace crowdtrend::text
