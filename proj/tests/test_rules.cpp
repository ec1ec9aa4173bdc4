#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>

#include "perin/error.hpp"
#include "perin/hitting_set.hpp"
#include "perin/numerals.hpp"
#include "perin/rules.hpp"

using namespace perin;

namespace {

using Strings = std::vector<std::string>;

TokenRule token_rule(int dl, int dr, std::string s, int rl, int rr, std::string al, std::string ar) {
  return TokenRule{AffixTransform{dl, dr, std::move(s), rl, rr, std::move(al), std::move(ar)}};
}

bool contains(const std::vector<Rule>& rules, const Rule& r) {
  return std::find(rules.begin(), rules.end(), r) != rules.end();
}

RuleSetProblem make_problem(int universe, std::vector<std::vector<int>> sets) {
  RuleSetProblem p;
  p.universe_size = universe;
  p.per_node = std::move(sets);
  return p;
}

RuleSetProblem random_problem(std::mt19937& gen, int max_nodes, int max_rules) {
  std::uniform_int_distribution<int> nodes_d(1, max_nodes), rules_d(1, max_rules);
  const int nodes = nodes_d(gen);
  const int rules = rules_d(gen);
  RuleSetProblem p;
  p.universe_size = rules;
  std::uniform_int_distribution<int> pick(0, rules - 1), size_d(1, std::min(rules, 4));
  for (int n = 0; n < nodes; ++n) {
    std::set<int> s;
    const int k = size_d(gen);
    while (static_cast<int>(s.size()) < k) s.insert(pick(gen));
    p.per_node.emplace_back(s.begin(), s.end());
  }
  return p;
}

// Independent enumeration of token rules: every way to cut the label into
// prefix + core + suffix where the core is a stripped join of the tokens.
std::set<Rule> token_oracle(const Strings& tokens, const std::string& label,
                            const RuleSpaceBounds& b) {
  std::set<Rule> out;
  const int n = static_cast<int>(tokens.size());
  for (int dl = 0; dl <= b.max_drop; ++dl) {
    for (int dr = 0; dr <= b.max_drop; ++dr) {
      if (dl + dr >= n) continue;
      // one surviving token: the separator is irrelevant, canonically ""
      const Strings seps = n - dl - dr == 1 ? Strings{""} : b.separators;
      for (const auto& sep : seps) {
        std::string joined;
        for (int i = dl; i < n - dr; ++i) joined += (i > dl ? sep : "") + tokens[i];
        const int len = static_cast<int>(joined.size());
        for (int rl = 0; rl <= b.max_strip; ++rl) {
          for (int rr = 0; rr <= b.max_strip; ++rr) {
            if (rl + rr >= len) continue;
            const std::string core = joined.substr(rl, len - rl - rr);
            for (std::size_t pos = label.find(core); pos != std::string::npos;
                 pos = label.find(core, pos + 1)) {
              const std::string al = label.substr(0, pos);
              const std::string ar = label.substr(pos + core.size());
              if (static_cast<int>(al.size()) > b.max_affix ||
                  static_cast<int>(ar.size()) > b.max_affix) {
                continue;
              }
              out.insert(token_rule(dl, dr, sep, rl, rr, al, ar));
            }
          }
        }
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("token rule: multiword EDS example") {
  const Strings tokens = {"at", "the", "very", "least", ","};
  CHECK(apply_rule(token_rule(0, 1, "+", 0, 0, "_", "_a_1"), tokens, tokens) ==
        "_at+the+very+least_a_1");
}

TEST_CASE("token rule: diving -> dive") {
  const Strings tokens = {"diving"};
  CHECK(apply_rule(token_rule(0, 0, "", 0, 3, "", "e"), tokens, tokens) == "dive");
}

TEST_CASE("number rule: forty two -> 42") {
  const Strings tokens = {"forty", "two"};
  CHECK(apply_rule(NumberRule{}, tokens, tokens) == "42");
  CHECK_FALSE(apply_rule(NumberRule{}, Strings{"forty", "cats"}, Strings{"forty", "cats"}));
}

TEST_CASE("inapplicable rules") {
  const Strings one = {"ab"};
  CHECK_FALSE(apply_rule(token_rule(1, 0, "", 0, 0, "", ""), one, one));
  CHECK_FALSE(apply_rule(token_rule(0, 0, "", 2, 1, "", ""), one, one));
  CHECK_FALSE(apply_rule(token_rule(0, 0, "", 0, 0, "", ""), Strings{}, Strings{}));
  CHECK(apply_rule(AbsoluteRule{"x"}, Strings{}, Strings{}) == "x");
}

TEST_CASE("lemma rules read the lemmas") {
  const Strings tokens = {"Went"}, lemmas = {"go"};
  const Rule r = LemmaRule{AffixTransform{0, 0, "", 0, 0, "", "-02"}};
  CHECK(apply_rule(r, tokens, lemmas) == "go-02");
}

TEST_CASE("enumerate: diving/dive") {
  const auto rules = enumerate_applicable_rules(Strings{"diving"}, Strings{"dive"}, "dive");
  CHECK(contains(rules, token_rule(0, 0, "", 0, 3, "", "e")));
  const bool identity = std::any_of(rules.begin(), rules.end(), [](const Rule& r) {
    const auto* l = std::get_if<LemmaRule>(&r);
    return l && l->transform.drop_left == 0 && l->transform.drop_right == 0 &&
           l->transform.strip_left == 0 && l->transform.strip_right == 0 &&
           l->transform.prefix.empty() && l->transform.suffix.empty();
  });
  CHECK(identity);
  CHECK(contains(rules, AbsoluteRule{"dive"}));
}

TEST_CASE("enumerate: no overlap leaves only the absolute rule") {
  const auto rules = enumerate_applicable_rules(Strings{"abc"}, Strings{"abc"}, "xyz");
  CHECK(rules == std::vector<Rule>{AbsoluteRule{"xyz"}});
}

TEST_CASE("enumerate: numerals") {
  const auto rules = enumerate_applicable_rules(Strings{"forty", "two"}, Strings{"forty", "two"}, "42");
  CHECK(contains(rules, NumberRule{}));
}

TEST_CASE("enumerate: sound and complete for token rules") {
  RuleSpaceBounds b;
  b.max_drop = 1;
  b.max_strip = 2;
  b.max_affix = 3;
  b.lemma_rules = false;
  b.number_rules = false;
  const std::vector<std::pair<Strings, std::string>> cases = {
      {{"diving"}, "dive"},         {{"the", "cat"}, "cat"},   {{"New", "York"}, "New_York"},
      {{"taking"}, "take-01"},      {{"aa"}, "aaa"},           {{"x", "y", "z"}, "y"},
      {{"eating", "quickly"}, "eat"}};
  for (const auto& [tokens, label] : cases) {
    CAPTURE(label);
    const auto rules = enumerate_applicable_rules(tokens, tokens, label, b);
    std::set<Rule> token_rules;
    for (const auto& r : rules) {
      CHECK(apply_rule(r, tokens, tokens) == label);
      if (std::holds_alternative<TokenRule>(r)) token_rules.insert(r);
    }
    CHECK(token_rules == token_oracle(tokens, label, b));
  }
}

TEST_CASE("rule text format") {
  const std::vector<Rule> rules = {token_rule(0, 1, "+", 0, 0, "_", "_a_1"),
                                   LemmaRule{AffixTransform{1, 0, " ", 2, 0, "", "x"}},
                                   NumberRule{}, AbsoluteRule{"per son"}};
  for (const auto& r : rules) CHECK(rule_from_string(rule_to_string(r)) == r);
  CHECK(rule_to_string(rules[0]) == R"(["token",0,1,"+",0,0,"_","_a_1"])");
  const RuleTable table(rules);
  const RuleTable again = RuleTable::from_text(table.to_text());
  CHECK(again.rules() == table.rules());
  CHECK(table.num_classes() == 5);
  CHECK(table.null_class() == 4);
  CHECK(table.find(NumberRule{}) == 2);
  CHECK(table.find(AbsoluteRule{"nope"}) == -1);
  CHECK_THROWS_AS(rule_from_string("[\"token\",1]"), DataError);
  CHECK_THROWS_AS(rule_from_string("not json"), DataError);
}

TEST_CASE("minimal rule set: small instances") {
  const auto shared = make_problem(3, {{0, 1}, {1, 2}});
  CHECK(minimal_rule_set(shared) == std::vector<int>{1});
  CHECK(brute_force_min_hitting_set(shared) == std::vector<int>{1});
  const auto disjoint = make_problem(2, {{0}, {1}});
  CHECK(minimal_rule_set(disjoint) == std::vector<int>{0, 1});
  CHECK(brute_force_min_hitting_set(disjoint) == std::vector<int>{0, 1});
}

TEST_CASE("minimal rule set: lexicographic tie-break") {
  const auto p = make_problem(4, {{2, 3}, {0, 1}});
  CHECK(minimal_rule_set(p) == std::vector<int>{0, 2});
  CHECK(brute_force_min_hitting_set(p) == std::vector<int>{0, 2});
}

TEST_CASE("minimal rule set: empty node is infeasible") {
  const auto p = make_problem(2, {{0}, {}});
  CHECK_THROWS_AS(minimal_rule_set(p), InfeasibleError);
  CHECK_THROWS_AS(brute_force_min_hitting_set(make_problem(21, {{0}})), ConfigError);
}

TEST_CASE("minimal rule set equals the brute-force oracle") {
  std::mt19937 gen(7);
  for (int i = 0; i < 300; ++i) {
    const auto p = random_problem(gen, 8, 12);
    const auto fast = minimal_rule_set(p);
    const auto slow = brute_force_min_hitting_set(p);
    CHECK(hits_every_set(p, fast));
    CHECK(fast == slow);
  }
}

TEST_CASE("minimal rule set: larger instances still hit every set") {
  std::mt19937 gen(11);
  for (int i = 0; i < 20; ++i) {
    const auto p = random_problem(gen, 60, 40);
    CHECK(hits_every_set(p, minimal_rule_set(p)));
  }
}

TEST_CASE("rule set builder is independent of node order") {
  const std::vector<std::vector<Rule>> nodes = {
      enumerate_applicable_rules(Strings{"diving"}, Strings{"diving"}, "dive-01"),
      enumerate_applicable_rules(Strings{"taking"}, Strings{"taking"}, "take-01"),
      enumerate_applicable_rules(Strings{"eating"}, Strings{"eating"}, "eat-01")};
  RuleSetBuilder a, b;
  for (const auto& n : nodes) a.add_node(n);
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) b.add_node(*it);
  const auto pa = a.build(), pb = b.build();
  CHECK(pa.rules == pb.rules);
  std::vector<Rule> sa, sb;
  for (int i : minimal_rule_set(pa)) sa.push_back(pa.rules[i]);
  for (int i : minimal_rule_set(pb)) sb.push_back(pb.rules[i]);
  CHECK(sa == sb);
  // dive and take share the e-restoring rule; eat needs another
  CHECK(sa.size() == 2);
  CHECK(sa.size() < 3);
}

TEST_CASE("compression: shared relative rules beat absolute ones") {
  RuleSetBuilder builder;
  std::set<std::string> labels;
  for (const auto& w : Strings{"eating", "reading", "walking", "singing", "jumping"}) {
    const std::string label = w.substr(0, w.size() - 3) + "-01";
    labels.insert(label);
    builder.add_node(enumerate_applicable_rules(Strings{w}, Strings{w}, label));
  }
  const auto solution = minimal_rule_set(builder.build());
  CHECK(solution.size() == 1);
  CHECK(solution.size() <= labels.size());
}

TEST_CASE("solution cache") {
  const auto dir = std::filesystem::temp_directory_path() / "perin-cache-test";
  std::filesystem::remove_all(dir);
  std::mt19937 gen(3);
  const auto p = random_problem(gen, 8, 12);
  const auto first = minimal_rule_set_cached(p, dir.string());
  CHECK(std::distance(std::filesystem::directory_iterator(dir), {}) == 1);
  CHECK(minimal_rule_set_cached(p, dir.string()) == first);
  CHECK(first == minimal_rule_set(p));
  CHECK(content_hash(p) == content_hash(p));
  auto q = p;
  q.per_node.push_back({0});
  CHECK(content_hash(q) != content_hash(p));
  std::filesystem::remove_all(dir);
}

TEST_CASE("artificial anchors") {
  // A: "dive-01" in "diving fast"; B: "take-01" on "taking"; C: "person" in
  // "a big cat" (no character overlap).
  const std::vector<std::pair<std::string, Strings>> nodes = {
      {"dive-01", {"diving", "fast"}}, {"take-01", {"taking"}}, {"person", {"a", "big", "cat"}}};
  RuleSetBuilder builder;
  std::vector<std::vector<std::vector<Rule>>> per_candidate;
  for (const auto& [label, tokens] : nodes) {
    std::vector<Rule> all;
    per_candidate.emplace_back();
    for (const auto& t : tokens) {
      auto rules = enumerate_applicable_rules(Strings{t}, Strings{t}, label);
      per_candidate.back().push_back(rules);
      all.insert(all.end(), rules.begin(), rules.end());
    }
    builder.add_node(all);
  }
  const auto problem = builder.build();
  const auto solution = minimal_rule_set(problem);
  auto index = [&](const Rule& r) {
    return static_cast<int>(std::find(problem.rules.begin(), problem.rules.end(), r) - problem.rules.begin());
  };
  std::vector<AnchorCandidates> candidates;
  for (const auto& node : per_candidate) {
    AnchorCandidates c;
    std::set<int> absolute;
    for (const auto& rules : node) {
      c.relative_rules.emplace_back();
      for (const auto& r : rules) {
        if (is_absolute(r)) {
          absolute.insert(index(r));
        } else {
          c.relative_rules.back().push_back(index(r));
        }
      }
    }
    c.absolute_rules.assign(absolute.begin(), absolute.end());
    candidates.push_back(std::move(c));
  }
  const auto anchors = assign_artificial_anchors(candidates, solution);
  REQUIRE(anchors.size() == 3);
  CHECK(anchors[0] == std::vector<int>{0});  // "diving", not "fast"
  CHECK(anchors[1] == std::vector<int>{0});
  CHECK(anchors[2].empty());                 // absolute only
  for (std::size_t n = 0; n < anchors.size(); ++n) {
    for (int a : anchors[n]) CHECK(a < static_cast<int>(candidates[n].relative_rules.size()));
  }
}

TEST_CASE("rule targets") {
  const std::vector<int> two = {0, 2};
  auto t = build_rule_target(two, 4, 0.0);
  CHECK(t == std::vector<double>{0.5, 0.0, 0.5, 0.0});

  t = build_rule_target(two, 4, 0.1);
  CHECK(t[1] == doctest::Approx(0.1 / 4).epsilon(1e-15));
  CHECK(t[0] == doctest::Approx(0.9 * 0.5 + 0.1 / 4).epsilon(1e-15));
  double sum = 0;
  for (double v : t) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));

  t = build_rule_target({}, 4, 0.0, true);
  CHECK(t == std::vector<double>{0, 0, 0, 1});
  CHECK_THROWS_AS(build_rule_target({}, 4, 0.1), InfeasibleError);
}

TEST_CASE("decode label") {
  const RuleTable table({token_rule(0, 0, "", 0, 3, "", "e"), token_rule(0, 0, "", 9, 0, "", ""),
                         AbsoluteRule{"x"}});
  const Strings diving = {"diving"};
  CHECK(decode_label(std::vector<double>{1, 0, 0, 0}, diving, diving, table) == "dive");
  CHECK(decode_label(std::vector<double>{0.1, 0.6, 0.3, 0}, diving, diving, table) == "x");
  CHECK_FALSE(decode_label(std::vector<double>{0, 0, 0, 1}, diving, diving, table));
  const RuleTable no_absolute({token_rule(0, 0, "", 9, 0, "", "")});
  CHECK_THROWS_AS(decode_label(std::vector<double>{1, 0}, diving, diving, no_absolute), DataError);
}

TEST_CASE("encode/decode consistency on training nodes") {
  const std::vector<std::pair<Strings, std::string>> nodes = {
      {{"diving"}, "dive-01"}, {{"taking"}, "take-01"}, {{"eating"}, "eat-01"},
      {{"forty", "two"}, "42"}, {{"someone"}, "person"}, {{"cats"}, "cat"}};
  RuleSetBuilder builder;
  for (const auto& [t, l] : nodes) builder.add_node(enumerate_applicable_rules(t, t, l));
  const auto problem = builder.build();
  std::vector<Rule> kept;
  for (int i : minimal_rule_set(problem)) kept.push_back(problem.rules[i]);
  const RuleTable table(kept);
  for (const auto& [t, l] : nodes) {
    const auto applicable = table.applicable(t, t, l);
    REQUIRE_FALSE(applicable.empty());
    const auto target = build_rule_target(applicable, table.num_classes(), 0.1);
    CHECK(decode_label(target, t, t, table) == l);
  }
}

TEST_CASE("word numerals") {
  CHECK(parse_word_numeral({"forty", "two"}) == "42");
  CHECK(parse_word_numeral({"forty-two"}) == "42");
  CHECK(parse_word_numeral({"one", "hundred", "and", "five"}) == "105");
  CHECK(parse_word_numeral({"twelve", "thousand", "three", "hundred"}) == "12300");
  CHECK(parse_word_numeral({"Zero"}) == "0");
  CHECK_FALSE(parse_word_numeral({"forty", "forty"}));
  CHECK_FALSE(parse_word_numeral({}));
  CHECK_FALSE(parse_word_numeral({"hundred", "hundred"}));
  for (int v : {0, 7, 13, 20, 42, 100, 105, 999, 1000, 12300, 500017, 999999}) {
    CAPTURE(v);
    std::vector<std::string> words;
    std::istringstream in(spell_number(v));
    for (std::string w; in >> w;) words.push_back(w);
    CHECK(parse_word_numeral(words) == std::to_string(v));
  }
  CHECK(spell_number(342) == "three hundred forty two");
}
