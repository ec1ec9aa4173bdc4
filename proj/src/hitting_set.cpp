#include "perin/hitting_set.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "perin/error.hpp"

namespace perin {

namespace {

// Dense bitset over set ids, sized once per component.
class Bits {
 public:
  Bits() = default;
  explicit Bits(std::size_t n) : words_((n + 63) / 64, 0) {}

  void set(std::size_t i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }
  bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1; }

  // Bits of `this` that are also in `mask`, as a subset test against `other`.
  bool subset_of(const Bits& other, const Bits& mask) const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      if ((words_[w] & mask.words_[w]) & ~other.words_[w]) return false;
    }
    return true;
  }
  bool equal_on(const Bits& other, const Bits& mask) const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      if ((words_[w] ^ other.words_[w]) & mask.words_[w]) return false;
    }
    return true;
  }

 private:
  std::vector<std::uint64_t> words_;
};

// One connected component with local element and set ids.
struct Component {
  int num_elements = 0;
  std::vector<std::vector<int>> sets;          // set -> sorted local elements
  std::vector<std::vector<int>> element_sets;  // element -> sets
  std::vector<int> global;                     // local element -> global index
};

struct SearchState {
  std::vector<char> covered;   // per set
  std::vector<char> excluded;  // per element
  std::vector<char> chosen;    // per element
  int num_chosen = 0;
};

class Solver {
 public:
  explicit Solver(const Component& c) : c_(c) {
    cover_.reserve(c.num_elements);
    for (int e = 0; e < c.num_elements; ++e) {
      Bits bits(c.sets.size());
      for (int s : c.element_sets[e]) bits.set(s);
      cover_.push_back(std::move(bits));
    }
  }

  SearchState initial() const {
    SearchState s;
    s.covered.assign(c_.sets.size(), 0);
    s.excluded.assign(c_.num_elements, 0);
    s.chosen.assign(c_.num_elements, 0);
    return s;
  }

  void include(SearchState& s, int e) const {
    if (s.chosen[e]) return;
    s.chosen[e] = 1;
    ++s.num_chosen;
    for (int set : c_.element_sets[e]) s.covered[set] = 1;
  }

  bool all_covered(const SearchState& s) const {
    return std::all_of(s.covered.begin(), s.covered.end(), [](char c) { return c != 0; });
  }

  // Is there a hitting set extending `s` with at most `budget` more
  // elements?
  bool feasible(SearchState s, int budget) const {
    if (!reduce(s, budget, /*prune_dominated=*/true)) return false;
    return search(s, budget);
  }

  // Smallest k such that feasible(initial(), k).
  int minimum_size() const {
    SearchState s = initial();
    int forced_budget = static_cast<int>(c_.num_elements);
    if (!reduce(s, forced_budget, true)) {
      throw InfeasibleError("hitting set instance is infeasible");
    }
    const int forced = s.num_chosen;
    int k = forced + packing_bound(s);
    const int upper = forced + greedy_size(s);
    for (; k < upper; ++k) {
      if (search(s, k - forced)) return k;
    }
    return upper;
  }

 private:
  int available_count(const SearchState& s, int set) const {
    int n = 0;
    for (int e : c_.sets[set]) n += !s.excluded[e];
    return n;
  }

  // Forced singletons, redundant-set removal and dominated-element
  // exclusion until a fixpoint. Consumes budget for forced elements.
  bool reduce(SearchState& s, int& budget, bool prune_dominated) const {
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t set = 0; set < c_.sets.size(); ++set) {
        if (s.covered[set]) continue;
        int available = 0;
        int last = -1;
        for (int e : c_.sets[set]) {
          if (!s.excluded[e]) {
            ++available;
            last = e;
          }
        }
        if (available == 0) return false;
        if (available == 1) {
          include(s, last);
          if (--budget < 0) return false;
          changed = true;
        }
      }
      if (!prune_dominated) break;
      // Dominance: e is useless when another available element covers a
      // superset of e's uncovered sets.
      Bits open(c_.sets.size());
      for (std::size_t set = 0; set < c_.sets.size(); ++set) {
        if (!s.covered[set]) open.set(set);
      }
      for (int e = 0; e < c_.num_elements; ++e) {
        if (s.excluded[e] || s.chosen[e]) continue;
        bool useful = false;
        for (int set : c_.element_sets[e]) useful |= !s.covered[set];
        if (!useful) {
          s.excluded[e] = 1;
          continue;
        }
        for (int f = 0; f < c_.num_elements; ++f) {
          if (f == e || s.excluded[f] || s.chosen[f]) continue;
          if (!cover_[e].subset_of(cover_[f], open)) continue;
          if (cover_[e].equal_on(cover_[f], open) && f > e) continue;
          s.excluded[e] = 1;
          changed = true;
          break;
        }
      }
    }
    return true;
  }

  // Lower bound: number of pairwise disjoint uncovered sets, chosen
  // greedily from the smallest.
  int packing_bound(const SearchState& s) const {
    std::vector<std::pair<int, int>> open;
    for (std::size_t set = 0; set < c_.sets.size(); ++set) {
      if (!s.covered[set]) open.emplace_back(available_count(s, set), static_cast<int>(set));
    }
    std::sort(open.begin(), open.end());
    std::vector<char> used(c_.num_elements, 0);
    int bound = 0;
    for (auto [count, set] : open) {
      bool disjoint = true;
      for (int e : c_.sets[set]) {
        if (!s.excluded[e] && used[e]) {
          disjoint = false;
          break;
        }
      }
      if (!disjoint) continue;
      ++bound;
      for (int e : c_.sets[set]) used[e] = 1;
    }
    return bound;
  }

  int greedy_size(SearchState s) const {
    int added = 0;
    while (!all_covered(s)) {
      int best = -1;
      int best_gain = 0;
      for (int e = 0; e < c_.num_elements; ++e) {
        if (s.excluded[e] || s.chosen[e]) continue;
        int gain = 0;
        for (int set : c_.element_sets[e]) gain += !s.covered[set];
        if (gain > best_gain) {
          best_gain = gain;
          best = e;
        }
      }
      if (best < 0) return c_.num_elements + 1;
      include(s, best);
      ++added;
    }
    return added;
  }

  bool search(SearchState s, int budget) const {
    if (!reduce(s, budget, false)) return false;
    if (all_covered(s)) return true;
    if (budget <= 0) return false;
    if (packing_bound(s) > budget) return false;

    int branch_set = -1;
    int fewest = 0;
    for (std::size_t set = 0; set < c_.sets.size(); ++set) {
      if (s.covered[set]) continue;
      const int n = available_count(s, set);
      if (branch_set < 0 || n < fewest) {
        branch_set = static_cast<int>(set);
        fewest = n;
      }
    }
    for (int e : c_.sets[branch_set]) {
      if (s.excluded[e]) continue;
      SearchState child = s;
      include(child, e);
      if (search(std::move(child), budget - 1)) return true;
      s.excluded[e] = 1;
    }
    return false;
  }

  const Component& c_;
  std::vector<Bits> cover_;
};

std::vector<int> solve_component(const Component& c) {
  Solver solver(c);
  const int k = solver.minimum_size();

  // Lexicographically smallest solution of size k: decide elements in
  // increasing global order.
  std::vector<int> order(c.num_elements);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return c.global[a] < c.global[b]; });

  SearchState fixed = solver.initial();
  std::vector<int> solution;
  for (int e : order) {
    if (solver.all_covered(fixed)) break;
    bool useful = false;
    for (int set : c.element_sets[e]) useful |= !fixed.covered[set];
    if (!useful) {
      fixed.excluded[e] = 1;
      continue;
    }
    SearchState trial = fixed;
    solver.include(trial, e);
    if (solver.feasible(trial, k - trial.num_chosen)) {
      solver.include(fixed, e);
      solution.push_back(c.global[e]);
    } else {
      fixed.excluded[e] = 1;
    }
  }
  return solution;
}

void check_problem(const RuleSetProblem& problem) {
  for (std::size_t n = 0; n < problem.per_node.size(); ++n) {
    if (problem.per_node[n].empty()) {
      throw InfeasibleError("node " + std::to_string(n) + " has no applicable rule");
    }
    for (int r : problem.per_node[n]) {
      if (r < 0 || r >= problem.universe_size) {
        throw ConfigError("node " + std::to_string(n) + " cites rule " +
                          std::to_string(r) + " outside the universe");
      }
    }
  }
}

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

bool hits_every_set(const RuleSetProblem& problem, const std::vector<int>& solution) {
  std::vector<char> in(problem.universe_size, 0);
  for (int r : solution) {
    if (r >= 0 && r < problem.universe_size) in[r] = 1;
  }
  for (const auto& set : problem.per_node) {
    if (std::none_of(set.begin(), set.end(), [&](int r) { return in[r] != 0; })) {
      return false;
    }
  }
  return true;
}

std::vector<int> minimal_rule_set(const RuleSetProblem& problem) {
  check_problem(problem);

  // Unique sorted sets.
  std::vector<std::vector<int>> sets;
  for (auto set : problem.per_node) {
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
    sets.push_back(std::move(set));
  }
  std::sort(sets.begin(), sets.end());
  sets.erase(std::unique(sets.begin(), sets.end()), sets.end());

  // Connected components over rules.
  std::vector<int> parent(problem.universe_size);
  std::iota(parent.begin(), parent.end(), 0);
  for (const auto& set : sets) {
    for (std::size_t i = 1; i < set.size(); ++i) {
      parent[find_root(parent, set[i])] = find_root(parent, set[0]);
    }
  }
  std::map<int, Component> components;
  std::map<int, std::map<int, int>> local_ids;
  for (const auto& set : sets) {
    const int root = find_root(parent, set[0]);
    Component& c = components[root];
    auto& ids = local_ids[root];
    std::vector<int> local;
    for (int r : set) {
      auto [it, inserted] = ids.emplace(r, c.num_elements);
      if (inserted) {
        ++c.num_elements;
        c.global.push_back(r);
        c.element_sets.emplace_back();
      }
      local.push_back(it->second);
    }
    const int set_id = static_cast<int>(c.sets.size());
    for (int e : local) c.element_sets[e].push_back(set_id);
    c.sets.push_back(std::move(local));
  }

  std::vector<int> solution;
  for (const auto& [root, c] : components) {
    auto part = solve_component(c);
    solution.insert(solution.end(), part.begin(), part.end());
  }
  std::sort(solution.begin(), solution.end());
  return solution;
}

std::vector<int> brute_force_min_hitting_set(const RuleSetProblem& problem) {
  if (problem.universe_size > 20) {
    throw ConfigError("brute force limited to 20 rules, got " +
                      std::to_string(problem.universe_size));
  }
  check_problem(problem);
  const int n = problem.universe_size;
  std::vector<std::uint32_t> masks;
  for (const auto& set : problem.per_node) {
    std::uint32_t mask = 0;
    for (int r : set) mask |= std::uint32_t{1} << r;
    masks.push_back(mask);
  }
  for (int k = 0; k <= n; ++k) {
    // Combinations of size k in lexicographic order.
    std::vector<int> pick(k);
    std::iota(pick.begin(), pick.end(), 0);
    while (true) {
      std::uint32_t chosen = 0;
      for (int r : pick) chosen |= std::uint32_t{1} << r;
      if (std::all_of(masks.begin(), masks.end(),
                      [&](std::uint32_t m) { return (m & chosen) != 0; })) {
        return pick;
      }
      int i = k - 1;
      while (i >= 0 && pick[i] == n - k + i) --i;
      if (i < 0) break;
      ++pick[i];
      for (int j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
    }
  }
  throw InfeasibleError("no hitting set exists");
}

std::uint64_t content_hash(const RuleSetProblem& problem) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 1099511628211ull;
    }
  };
  mix(static_cast<std::uint64_t>(problem.universe_size));
  mix(problem.per_node.size());
  for (const auto& set : problem.per_node) {
    mix(set.size());
    for (int r : set) mix(static_cast<std::uint64_t>(r));
  }
  for (const auto& rule : problem.rules) {
    for (unsigned char ch : rule_to_string(rule)) {
      h ^= ch;
      h *= 1099511628211ull;
    }
    mix(0xFF);
  }
  return h;
}

std::vector<int> minimal_rule_set_cached(const RuleSetProblem& problem,
                                         const std::string& cache_dir) {
  if (cache_dir.empty()) return minimal_rule_set(problem);
  namespace fs = std::filesystem;
  char name[32];
  std::snprintf(name, sizeof(name), "%016llx.ruleset",
                static_cast<unsigned long long>(content_hash(problem)));
  const fs::path path = fs::path(cache_dir) / name;

  if (std::ifstream in(path); in) {
    std::string header;
    std::getline(in, header);
    if (header == "perin-ruleset 1") {
      std::vector<int> solution;
      int r = 0;
      while (in >> r) solution.push_back(r);
      if (hits_every_set(problem, solution)) return solution;
    }
  }

  auto solution = minimal_rule_set(problem);
  std::error_code ec;
  fs::create_directories(cache_dir, ec);
  std::ostringstream tmp_name;
  tmp_name << name << ".tmp." << std::this_thread::get_id();
  const fs::path tmp = fs::path(cache_dir) / tmp_name.str();
  {
    std::ofstream out(tmp);
    if (!out) return solution;  // unwritable cache: still return the result
    out << "perin-ruleset 1\n";
    for (std::size_t i = 0; i < solution.size(); ++i) {
      out << (i ? " " : "") << solution[i];
    }
    out << '\n';
  }
  fs::rename(tmp, path, ec);
  return solution;
}

int RuleSetBuilder::add_node(const std::vector<Rule>& applicable) {
  std::vector<int> ids;
  for (const auto& rule : applicable) {
    auto [it, inserted] = ids_.emplace(rule, static_cast<int>(by_id_.size()));
    if (inserted) by_id_.push_back(rule);
    ids.push_back(it->second);
  }
  nodes_.push_back(std::move(ids));
  return static_cast<int>(nodes_.size()) - 1;
}

RuleSetProblem RuleSetBuilder::build() const {
  RuleSetProblem problem;
  problem.universe_size = static_cast<int>(by_id_.size());
  std::vector<int> position(by_id_.size());
  int next = 0;
  for (const auto& [rule, id] : ids_) {
    position[id] = next++;
    problem.rules.push_back(rule);
  }
  for (const auto& node : nodes_) {
    std::vector<int> set;
    for (int id : node) set.push_back(position[id]);
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
    problem.per_node.push_back(std::move(set));
  }
  return problem;
}

std::vector<std::vector<int>> assign_artificial_anchors(
    const std::vector<AnchorCandidates>& nodes, const std::vector<int>& solution) {
  std::vector<int> sorted = solution;
  std::sort(sorted.begin(), sorted.end());
  auto retained = [&](int r) { return std::binary_search(sorted.begin(), sorted.end(), r); };
  std::vector<std::vector<int>> out;
  for (const auto& node : nodes) {
    std::vector<int> anchors;
    for (std::size_t a = 0; a < node.relative_rules.size(); ++a) {
      const auto& rules = node.relative_rules[a];
      if (std::any_of(rules.begin(), rules.end(), retained)) {
        anchors.push_back(static_cast<int>(a));
      }
    }
    out.push_back(std::move(anchors));
  }
  return out;
}

}  // namespace perin
