#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace kinfuse::text {

/// ASCII-lowercased copy; bytes >= 0x80 pass through untouched.
std::string to_lower(std::string_view s);

/// Lowercase, split on ASCII non-alphanumerics, drop empty tokens.
/// Non-ASCII bytes are treated as word characters so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view s);

/// Trim and collapse internal whitespace runs to a single space.
std::string normalize_whitespace(std::string_view s);

/// Split on ASCII whitespace; no case folding.
std::vector<std::string> split_whitespace(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool is_valid_utf8(std::string_view s);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view s, std::uint64_t seed = 14695981039346656037ULL);

}  // namespace kinfuse::text
