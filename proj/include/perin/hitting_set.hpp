#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "perin/rules.hpp"

namespace perin {

// Minimal encoding rule set as a hitting-set instance: rule indices
// 0..universe_size-1 and, per node, the indices of its applicable rules.
struct RuleSetProblem {
  int universe_size = 0;
  std::vector<std::vector<int>> per_node;
  // Rule behind each index; optional, used for hashing and reporting.
  std::vector<Rule> rules;
};

// Smallest set of rule indices intersecting every per-node set. Among
// minimum-cardinality solutions the lexicographically smallest sorted index
// list is returned. Exact branch and bound with forced-singleton
// propagation, subsumption and dominance pruning, solved per connected
// component. Throws InfeasibleError naming the first node with an empty set.
std::vector<int> minimal_rule_set(const RuleSetProblem& problem);

// Exhaustive reference: subsets in increasing size, lexicographic order.
// Throws ConfigError when universe_size > 20.
std::vector<int> brute_force_min_hitting_set(const RuleSetProblem& problem);

bool hits_every_set(const RuleSetProblem& problem, const std::vector<int>& solution);

// Stable 64-bit FNV-1a hash of the instance (sets and rule texts).
std::uint64_t content_hash(const RuleSetProblem& problem);

// minimal_rule_set with a persistent cache in `cache_dir`, one file per
// content hash. Writes go through a temporary file and a rename so that
// concurrent readers never observe partial entries. An empty `cache_dir`
// disables caching.
std::vector<int> minimal_rule_set_cached(const RuleSetProblem& problem,
                                         const std::string& cache_dir);

// Accumulates per-node applicable rule sets and assigns universe indices in
// sorted rule order, so the result does not depend on node order.
class RuleSetBuilder {
 public:
  // Returns the node's position.
  int add_node(const std::vector<Rule>& applicable);
  RuleSetProblem build() const;
  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  std::map<Rule, int> ids_;  // rule -> insertion id
  std::vector<Rule> by_id_;
  std::vector<std::vector<int>> nodes_;
};

// One node's candidate anchorings for flavor-2 artificial anchoring.
struct AnchorCandidates {
  // Per candidate anchoring a, the non-absolute rule indices of S_n^a.
  std::vector<std::vector<int>> relative_rules;
  // Absolute rule indices of the node (independent of the anchoring).
  std::vector<int> absolute_rules;
};

// For each node, the candidates a with S_n^a intersecting `solution`. Nodes
// covered only through absolute rules get no anchors.
std::vector<std::vector<int>> assign_artificial_anchors(
    const std::vector<AnchorCandidates>& nodes, const std::vector<int>& solution);

}  // namespace perin
