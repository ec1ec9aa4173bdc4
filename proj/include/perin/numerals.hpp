#pragma once

#include <optional>
#include <string>
#include <vector>

namespace perin {

// Parses an English cardinal written in words ("forty two", "forty-two",
// "one hundred and five", "twelve thousand three hundred") into its decimal
// digits. Covers 0 to 999,999. Tokens are matched case-insensitively;
// hyphens split compounds and "and" is accepted between groups.
std::optional<std::string> parse_word_numeral(const std::vector<std::string>& tokens);

// Inverse of parse_word_numeral for 0 <= value <= 999,999, without "and"
// and with spaces between words (e.g. 342 -> "three hundred forty two").
std::string spell_number(int value);

}  // namespace perin
