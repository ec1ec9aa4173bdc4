#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace perin {

using Matrix = Eigen::MatrixXd;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Query x target scores. Columns at or beyond `num_real_targets` are null
// padding.
struct MatchProblem {
  Matrix label_score;
  Matrix anchor_score;
  int num_real_targets = 0;
};

struct Assignment {
  std::vector<int> perm;  // query -> target column
  double score = 0.0;     // sum of the matched entries
};

// Elementwise label * anchor; null columns are zero.
Matrix match_score(const Matrix& label_score, const Matrix& anchor_score,
                   int num_real_targets);
inline Matrix match_score(const MatchProblem& p) {
  return match_score(p.label_score, p.anchor_score, p.num_real_targets);
}

// Geometric mean computed in log space; probabilities below `floor` are
// clamped to it.
double geomean_anchor(std::span<const double> probs, double floor = 1e-12);

// Replaces anchor factors of forbidden (query, target) pairs by `epsilon`.
Matrix apply_anchor_mask(const Matrix& anchor_score, const BoolMatrix& allowed,
                         double epsilon);

// Permutation maximizing the total score of a square matrix: Hungarian
// method with potentials, O(n^3). Throws std::invalid_argument for
// non-square or non-finite input.
Assignment optimal_assignment(const Matrix& scores);

// Groups of real target columns with identical label and anchor columns
// (within `tolerance`); only groups of two or more are returned.
std::vector<std::vector<int>> tie_groups(const MatchProblem& problem,
                                         double tolerance = 1e-12);

using EdgeLoss = std::function<double(const std::vector<int>& perm)>;

struct TieBreakResult {
  Assignment assignment;
  std::vector<std::string> warnings;
};

// Among the optimal assignments that differ only by permuting targets within
// tie groups, returns the one with the lowest edge loss. Groups larger than
// `max_group` keep the given assignment and add a warning.
TieBreakResult break_ties(const MatchProblem& problem, const Assignment& optimal,
                          const EdgeLoss& edge_loss, int max_group = 6,
                          double tolerance = 1e-12);

// Per-sentence model outputs used by the matcher.
struct QueryPredictions {
  Matrix label_probs;   // queries x rule classes
  Matrix anchor_probs;  // queries x tokens; may be empty
  std::vector<int> source_token;
};

struct TargetNode {
  std::vector<int> label_classes;  // applicable rule-table indices
  std::vector<int> anchor_tokens;  // sorted token indices
};

struct MatchConfig {
  bool anchor_mask = true;
  double mask_epsilon = 1e-8;
  double anchor_floor = 1e-12;
  int max_tie_group = 6;
};

struct Alignment {
  Assignment assignment;
  MatchProblem problem;
  std::vector<std::string> warnings;

  // Target node matched to `query`, or -1 for null.
  int target_of(int query) const;
};

MatchProblem build_match_problem(const QueryPredictions& predictions,
                                 const std::vector<TargetNode>& targets,
                                 const MatchConfig& config);

// Pads the targets with nulls, scores every pair, solves the assignment and
// breaks ties with `edge_loss` when given. Throws InfeasibleError when there
// are more targets than queries.
Alignment align_targets(const QueryPredictions& predictions,
                        const std::vector<TargetNode>& targets,
                        const MatchConfig& config = {},
                        const EdgeLoss& edge_loss = nullptr);

}  // namespace perin
