#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace perin {

// The seven-tuple shared by token and lemma rules: drop `drop_left` /
// `drop_right` items, join the rest with `separator`, strip `strip_left` /
// `strip_right` characters, then add `prefix` and `suffix`.
struct AffixTransform {
  int drop_left = 0;
  int drop_right = 0;
  std::string separator;
  int strip_left = 0;
  int strip_right = 0;
  std::string prefix;
  std::string suffix;

  auto operator<=>(const AffixTransform&) const = default;
};

struct TokenRule {
  AffixTransform transform;
  auto operator<=>(const TokenRule&) const = default;
};

struct LemmaRule {
  AffixTransform transform;
  auto operator<=>(const LemmaRule&) const = default;
};

// Word numerals to digits: ["forty", "two"] -> "42".
struct NumberRule {
  auto operator<=>(const NumberRule&) const = default;
};

// Ignores the anchored tokens and always yields `label`.
struct AbsoluteRule {
  std::string label;
  auto operator<=>(const AbsoluteRule&) const = default;
};

using Rule = std::variant<TokenRule, LemmaRule, NumberRule, AbsoluteRule>;

inline bool is_absolute(const Rule& rule) {
  return std::holds_alternative<AbsoluteRule>(rule);
}

// Label produced from the anchored tokens and their lemmas (parallel lists),
// or nothing when the rule is inapplicable: too few tokens survive the drop,
// strip counts exceed the joined length, or the numeral is unrecognized.
std::optional<std::string> apply_rule(const Rule& rule,
                                      std::span<const std::string> tokens,
                                      std::span<const std::string> lemmas);

// A rule as a one-line JSON array, e.g. ["token",0,1,"+",0,0,"_","_a_1"],
// ["number"], ["absolute","person"].
std::string rule_to_string(const Rule& rule);
// Throws DataError on malformed input.
Rule rule_from_string(std::string_view text);

struct RuleSpaceBounds {
  int max_drop = 2;
  int max_strip = 4;
  std::vector<std::string> separators = {"", "+", "-", "_", " "};
  int max_affix = 6;  // in characters
  bool lemma_rules = true;
  bool number_rules = true;
};

// All rules within `bounds` that map (tokens, lemmas) to `label`, sorted and
// unique. Always contains AbsoluteRule{label}. Token and lemma rules must keep
// at least one character of the joined string.
std::vector<Rule> enumerate_applicable_rules(std::span<const std::string> tokens,
                                             std::span<const std::string> lemmas,
                                             const std::string& label,
                                             const RuleSpaceBounds& bounds = {});

// The classifier's output space: rules in fixed order, with one extra
// class at index size() standing for "no node".
class RuleTable {
 public:
  RuleTable() = default;
  explicit RuleTable(std::vector<Rule> rules);

  std::size_t size() const { return rules_.size(); }
  std::size_t num_classes() const { return rules_.size() + 1; }
  std::size_t null_class() const { return rules_.size(); }
  const Rule& operator[](std::size_t i) const { return rules_[i]; }
  const std::vector<Rule>& rules() const { return rules_; }

  // Index of `rule`, or -1.
  int find(const Rule& rule) const;
  // Table indices of the rules that produce `label` from the tokens.
  std::vector<int> applicable(std::span<const std::string> tokens,
                              std::span<const std::string> lemmas,
                              const std::string& label) const;

  // One rule_to_string line per rule.
  std::string to_text() const;
  static RuleTable from_text(std::string_view text);
  void save(const std::string& path) const;
  static RuleTable load(const std::string& path);

 private:
  std::vector<Rule> rules_;
  std::vector<std::size_t> sorted_;  // indices ordered by rule, for find()
};

// Target distribution over table classes for one query. Real nodes spread
// mass uniformly over `applicable`; null queries put it on the null class.
// The result is then mixed with the uniform distribution at rate
// `smoothing`. Throws InfeasibleError for a real node with no applicable
// rule.
std::vector<double> build_rule_target(std::span<const int> applicable,
                                      std::size_t num_classes, double smoothing,
                                      bool is_null = false);

// Label of the most probable applicable rule, or nothing when the null
// class is the most probable. Throws DataError when no rule applies.
std::optional<std::string> decode_label(std::span<const double> probs,
                                        std::span<const std::string> tokens,
                                        std::span<const std::string> lemmas,
                                        const RuleTable& table);

}  // namespace perin
