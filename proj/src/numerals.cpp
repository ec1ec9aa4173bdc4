#include "perin/numerals.hpp"

#include <map>

#include "perin/utf8.hpp"

namespace perin {

namespace {

const std::map<std::string, int>& unit_words() {
  static const std::map<std::string, int> words = {
      {"zero", 0},       {"one", 1},        {"two", 2},        {"three", 3},
      {"four", 4},       {"five", 5},       {"six", 6},        {"seven", 7},
      {"eight", 8},      {"nine", 9},       {"ten", 10},       {"eleven", 11},
      {"twelve", 12},    {"thirteen", 13},  {"fourteen", 14},  {"fifteen", 15},
      {"sixteen", 16},   {"seventeen", 17}, {"eighteen", 18},  {"nineteen", 19}};
  return words;
}

const std::map<std::string, int>& tens_words() {
  static const std::map<std::string, int> words = {
      {"twenty", 20}, {"thirty", 30},  {"forty", 40},  {"fifty", 50},
      {"sixty", 60},  {"seventy", 70}, {"eighty", 80}, {"ninety", 90}};
  return words;
}

// Parses words[pos..] as a number below 1000; advances pos. Grammar:
//   [unit "hundred" ["and"]] [tens [unit] | unit]
std::optional<int> parse_below_thousand(const std::vector<std::string>& words,
                                        std::size_t& pos) {
  const auto& units = unit_words();
  const auto& tens = tens_words();
  int value = 0;
  bool any = false;
  std::size_t p = pos;

  if (p + 1 < words.size() && words[p + 1] == "hundred") {
    auto u = units.find(words[p]);
    if (u == units.end() || u->second == 0 || u->second > 9) return std::nullopt;
    value = u->second * 100;
    any = true;
    p += 2;
    if (p < words.size() && words[p] == "and") {
      if (p + 1 >= words.size()) return std::nullopt;
      ++p;
    }
  }
  if (p < words.size()) {
    if (auto t = tens.find(words[p]); t != tens.end()) {
      value += t->second;
      any = true;
      ++p;
      if (p < words.size()) {
        auto u = units.find(words[p]);
        if (u != units.end() && u->second >= 1 && u->second <= 9) {
          value += u->second;
          ++p;
        }
      }
    } else if (auto u = units.find(words[p]); u != units.end()) {
      if (u->second == 0 && any) return std::nullopt;
      value += u->second;
      any = true;
      ++p;
    }
  }
  if (!any) return std::nullopt;
  pos = p;
  return value;
}

}  // namespace

std::optional<std::string> parse_word_numeral(
    const std::vector<std::string>& tokens) {
  std::vector<std::string> words;
  for (const auto& token : tokens) {
    const std::string lower = utf8::to_lower(token);
    std::size_t start = 0;
    while (start <= lower.size()) {
      auto dash = lower.find('-', start);
      if (dash == std::string::npos) dash = lower.size();
      if (dash == start) return std::nullopt;  // empty piece: "--" or "-x"
      words.push_back(lower.substr(start, dash - start));
      start = dash + 1;
    }
  }
  if (words.empty()) return std::nullopt;
  if (words.size() == 1 && words[0] == "zero") return std::string("0");

  std::size_t pos = 0;
  auto first = parse_below_thousand(words, pos);
  if (!first || *first == 0) return std::nullopt;
  long value = *first;
  if (pos < words.size() && words[pos] == "thousand") {
    value *= 1000;
    ++pos;
    if (pos < words.size()) {
      if (words[pos] == "and") ++pos;
      auto rest = parse_below_thousand(words, pos);
      if (!rest || *rest == 0) return std::nullopt;
      value += *rest;
    }
  }
  if (pos != words.size()) return std::nullopt;
  return std::to_string(value);
}

std::string spell_number(int value) {
  static const char* kUnits[] = {"zero",    "one",       "two",      "three",
                                 "four",    "five",      "six",      "seven",
                                 "eight",   "nine",      "ten",      "eleven",
                                 "twelve",  "thirteen",  "fourteen", "fifteen",
                                 "sixteen", "seventeen", "eighteen", "nineteen"};
  static const char* kTens[] = {"",      "",      "twenty",  "thirty", "forty",
                                "fifty", "sixty", "seventy", "eighty", "ninety"};
  auto below_thousand = [&](int v) {
    std::string out;
    auto append = [&](const std::string& w) {
      if (!out.empty()) out += ' ';
      out += w;
    };
    if (v >= 100) {
      append(kUnits[v / 100]);
      append("hundred");
      v %= 100;
    }
    if (v >= 20) {
      append(kTens[v / 10]);
      if (v % 10) append(kUnits[v % 10]);
    } else if (v > 0) {
      append(kUnits[v]);
    }
    return out;
  };
  if (value == 0) return "zero";
  std::string out;
  if (value >= 1000) {
    out = below_thousand(value / 1000) + " thousand";
    value %= 1000;
    if (value > 0) out += " " + below_thousand(value);
    return out;
  }
  return below_thousand(value);
}

}  // namespace perin
