#pragma once

#include <string>
#include <string_view>

namespace perin::utf8 {

// Decodes UTF-8 into Unicode scalar values. Invalid sequences decode to
// U+FFFD one byte at a time.
std::u32string decode(std::string_view text);

std::string encode(std::u32string_view text);

// Number of Unicode scalar values in `text`.
std::size_t length(std::string_view text);

// Substring by scalar-value offsets [from, to).
std::string substr(std::string_view text, std::size_t from, std::size_t to);

std::string to_lower(std::string_view text);

}  // namespace perin::utf8
