#include "perin/rules.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "perin/error.hpp"
#include "perin/numerals.hpp"
#include "perin/utf8.hpp"

namespace perin {

namespace {

using nlohmann::json;

std::optional<std::u32string> join_surviving(const AffixTransform& t,
                                             std::span<const std::string> items) {
  if (t.drop_left < 0 || t.drop_right < 0) return std::nullopt;
  const std::size_t dropped =
      static_cast<std::size_t>(t.drop_left) + static_cast<std::size_t>(t.drop_right);
  if (dropped >= items.size()) return std::nullopt;
  std::string joined;
  for (std::size_t i = t.drop_left; i < items.size() - t.drop_right; ++i) {
    if (i > static_cast<std::size_t>(t.drop_left)) joined += t.separator;
    joined += items[i];
  }
  return utf8::decode(joined);
}

std::optional<std::string> apply_transform(const AffixTransform& t,
                                           std::span<const std::string> items) {
  auto joined = join_surviving(t, items);
  if (!joined || t.strip_left < 0 || t.strip_right < 0) return std::nullopt;
  const std::size_t strip =
      static_cast<std::size_t>(t.strip_left) + static_cast<std::size_t>(t.strip_right);
  if (strip > joined->size()) return std::nullopt;
  const std::u32string middle =
      joined->substr(t.strip_left, joined->size() - strip);
  return t.prefix + utf8::encode(middle) + t.suffix;
}

// Every (strip, affix) completion of `joined` into `label` keeping at least
// one character.
template <typename RuleT>
void collect_transforms(std::span<const std::string> items, const std::string& label,
                        const RuleSpaceBounds& bounds, std::vector<Rule>& out) {
  const int n = static_cast<int>(items.size());
  const std::u32string target = utf8::decode(label);
  for (int dl = 0; dl <= bounds.max_drop && dl < n; ++dl) {
    for (int dr = 0; dr <= bounds.max_drop && dl + dr < n; ++dr) {
      const int surviving = n - dl - dr;
      std::vector<std::string> separators =
          surviving == 1 ? std::vector<std::string>{""} : bounds.separators;
      for (const auto& separator : separators) {
        AffixTransform t;
        t.drop_left = dl;
        t.drop_right = dr;
        t.separator = separator;
        const std::u32string joined = *join_surviving(t, items);
        const int length = static_cast<int>(joined.size());
        for (int sl = 0; sl <= bounds.max_strip; ++sl) {
          for (int sr = 0; sr <= bounds.max_strip && sl + sr < length; ++sr) {
            const std::u32string middle = joined.substr(sl, length - sl - sr);
            for (std::size_t p = target.find(middle); p != std::u32string::npos;
                 p = target.find(middle, p + 1)) {
              const std::size_t tail = target.size() - p - middle.size();
              if (static_cast<int>(p) > bounds.max_affix ||
                  static_cast<int>(tail) > bounds.max_affix) {
                continue;
              }
              t.strip_left = sl;
              t.strip_right = sr;
              t.prefix = utf8::encode(target.substr(0, p));
              t.suffix = utf8::encode(target.substr(p + middle.size()));
              out.push_back(RuleT{t});
            }
          }
        }
      }
    }
  }
}

json transform_fields(const char* kind, const AffixTransform& t) {
  return json::array({kind, t.drop_left, t.drop_right, t.separator, t.strip_left,
                      t.strip_right, t.prefix, t.suffix});
}

AffixTransform transform_from(const json& array) {
  if (array.size() != 8) throw DataError("affix rule needs 7 fields");
  AffixTransform t;
  t.drop_left = array[1].get<int>();
  t.drop_right = array[2].get<int>();
  t.separator = array[3].get<std::string>();
  t.strip_left = array[4].get<int>();
  t.strip_right = array[5].get<int>();
  t.prefix = array[6].get<std::string>();
  t.suffix = array[7].get<std::string>();
  return t;
}

}  // namespace

std::optional<std::string> apply_rule(const Rule& rule,
                                      std::span<const std::string> tokens,
                                      std::span<const std::string> lemmas) {
  struct Visitor {
    std::span<const std::string> tokens;
    std::span<const std::string> lemmas;
    std::optional<std::string> operator()(const TokenRule& r) const {
      return apply_transform(r.transform, tokens);
    }
    std::optional<std::string> operator()(const LemmaRule& r) const {
      return apply_transform(r.transform, lemmas);
    }
    std::optional<std::string> operator()(const NumberRule&) const {
      if (tokens.empty()) return std::nullopt;
      return parse_word_numeral(std::vector<std::string>(tokens.begin(), tokens.end()));
    }
    std::optional<std::string> operator()(const AbsoluteRule& r) const {
      return r.label;
    }
  };
  return std::visit(Visitor{tokens, lemmas}, rule);
}

std::string rule_to_string(const Rule& rule) {
  struct Visitor {
    json operator()(const TokenRule& r) const { return transform_fields("token", r.transform); }
    json operator()(const LemmaRule& r) const { return transform_fields("lemma", r.transform); }
    json operator()(const NumberRule&) const { return json::array({"number"}); }
    json operator()(const AbsoluteRule& r) const {
      return json::array({"absolute", r.label});
    }
  };
  return std::visit(Visitor{}, rule).dump();
}

Rule rule_from_string(std::string_view text) {
  try {
    const json array = json::parse(text);
    if (!array.is_array() || array.empty()) throw DataError("rule must be a JSON array");
    const std::string kind = array[0].get<std::string>();
    if (kind == "token") return TokenRule{transform_from(array)};
    if (kind == "lemma") return LemmaRule{transform_from(array)};
    if (kind == "number") return NumberRule{};
    if (kind == "absolute" && array.size() == 2) {
      return AbsoluteRule{array[1].get<std::string>()};
    }
    throw DataError("unknown rule kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw DataError("malformed rule '" + std::string(text) + "': " + e.what());
  }
}

std::vector<Rule> enumerate_applicable_rules(std::span<const std::string> tokens,
                                             std::span<const std::string> lemmas,
                                             const std::string& label,
                                             const RuleSpaceBounds& bounds) {
  std::vector<Rule> out;
  collect_transforms<TokenRule>(tokens, label, bounds, out);
  if (bounds.lemma_rules) collect_transforms<LemmaRule>(lemmas, label, bounds, out);
  if (bounds.number_rules && !tokens.empty()) {
    auto number = parse_word_numeral(std::vector<std::string>(tokens.begin(), tokens.end()));
    if (number && *number == label) out.push_back(NumberRule{});
  }
  out.push_back(AbsoluteRule{label});
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

RuleTable::RuleTable(std::vector<Rule> rules) : rules_(std::move(rules)) {
  sorted_.resize(rules_.size());
  std::iota(sorted_.begin(), sorted_.end(), 0);
  std::sort(sorted_.begin(), sorted_.end(),
            [&](std::size_t a, std::size_t b) { return rules_[a] < rules_[b]; });
}

int RuleTable::find(const Rule& rule) const {
  auto it = std::lower_bound(
      sorted_.begin(), sorted_.end(), rule,
      [&](std::size_t index, const Rule& r) { return rules_[index] < r; });
  if (it == sorted_.end() || rules_[*it] != rule) return -1;
  return static_cast<int>(*it);
}

std::vector<int> RuleTable::applicable(std::span<const std::string> tokens,
                                       std::span<const std::string> lemmas,
                                       const std::string& label) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    auto produced = apply_rule(rules_[i], tokens, lemmas);
    if (produced && *produced == label) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::string RuleTable::to_text() const {
  std::string out;
  for (const auto& r : rules_) {
    out += rule_to_string(r);
    out += '\n';
  }
  return out;
}

RuleTable RuleTable::from_text(std::string_view text) {
  std::vector<Rule> rules;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rules.push_back(rule_from_string(line));
  }
  return RuleTable(std::move(rules));
}

void RuleTable::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write rule table '" + path + "'");
  out << to_text();
}

RuleTable RuleTable::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read rule table '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_text(buffer.str());
}

std::vector<double> build_rule_target(std::span<const int> applicable,
                                      std::size_t num_classes, double smoothing,
                                      bool is_null) {
  if (num_classes == 0) throw ConfigError("rule target needs at least one class");
  std::vector<double> target(num_classes, 0.0);
  if (is_null) {
    target[num_classes - 1] = 1.0;
  } else {
    if (applicable.empty()) {
      throw InfeasibleError("node has no applicable rule in the rule table");
    }
    const double mass = 1.0 / static_cast<double>(applicable.size());
    for (int index : applicable) {
      if (index < 0 || static_cast<std::size_t>(index) + 1 >= num_classes) {
        throw ConfigError("rule index " + std::to_string(index) + " out of range");
      }
      target[index] += mass;
    }
  }
  if (smoothing > 0.0) {
    const double uniform = smoothing / static_cast<double>(num_classes);
    for (double& p : target) p = (1.0 - smoothing) * p + uniform;
  }
  return target;
}

std::optional<std::string> decode_label(std::span<const double> probs,
                                        std::span<const std::string> tokens,
                                        std::span<const std::string> lemmas,
                                        const RuleTable& table) {
  if (probs.size() != table.num_classes()) {
    throw DataError("decode_label: " + std::to_string(probs.size()) +
                    " probabilities for " + std::to_string(table.num_classes()) +
                    " classes");
  }
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  if (order.front() == table.null_class()) return std::nullopt;
  for (std::size_t index : order) {
    if (index == table.null_class()) continue;
    if (auto label = apply_rule(table[index], tokens, lemmas)) return label;
  }
  throw DataError("decode_label: no rule is applicable to the anchored tokens");
}

}  // namespace perin
