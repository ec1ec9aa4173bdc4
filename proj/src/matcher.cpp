#include "perin/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "perin/error.hpp"

namespace perin {

namespace {

// Total of the matched entries, accumulated in query order.
double total_score(const Matrix& scores, const std::vector<int>& perm) {
  double total = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) total += scores(i, perm[i]);
  return total;
}

bool columns_equal(const Matrix& m, int a, int b, double tolerance) {
  return ((m.col(a) - m.col(b)).cwiseAbs().array() <= tolerance).all();
}

}  // namespace

Matrix match_score(const Matrix& label_score, const Matrix& anchor_score,
                   int num_real_targets) {
  if (label_score.rows() != anchor_score.rows() ||
      label_score.cols() != anchor_score.cols()) {
    throw std::invalid_argument("match_score: label and anchor shapes differ");
  }
  Matrix out = label_score.cwiseProduct(anchor_score);
  for (Eigen::Index j = std::max(num_real_targets, 0); j < out.cols(); ++j) {
    out.col(j).setZero();
  }
  return out;
}

double geomean_anchor(std::span<const double> probs, double floor) {
  if (probs.empty()) return 1.0;
  double log_sum = 0.0;
  for (double p : probs) log_sum += std::log(std::max(p, floor));
  return std::exp(log_sum / static_cast<double>(probs.size()));
}

Matrix apply_anchor_mask(const Matrix& anchor_score, const BoolMatrix& allowed,
                         double epsilon) {
  if (anchor_score.rows() != allowed.rows() || anchor_score.cols() != allowed.cols()) {
    throw std::invalid_argument("apply_anchor_mask: shape mismatch");
  }
  return allowed.select(anchor_score, Matrix::Constant(anchor_score.rows(),
                                                       anchor_score.cols(), epsilon));
}

Assignment optimal_assignment(const Matrix& scores) {
  if (scores.rows() != scores.cols()) {
    throw std::invalid_argument("optimal_assignment: matrix is not square");
  }
  if (!scores.allFinite()) {
    throw std::invalid_argument("optimal_assignment: non-finite entry");
  }
  const int n = static_cast<int>(scores.rows());
  Assignment result;
  if (n == 0) return result;

  // Minimum-cost assignment on the negated scores; 1-based potentials.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> row_of(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    row_of[0] = i;
    int j0 = 0;
    std::vector<double> min_v(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = row_of[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -scores(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < min_v[j]) {
          min_v[j] = cur;
          way[j] = j0;
        }
        if (min_v[j] < delta) {
          delta = min_v[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of[j]] += delta;
          v[j] -= delta;
        } else {
          min_v[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of[j0] != 0);
    do {
      const int j1 = way[j0];
      row_of[j0] = row_of[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  result.perm.assign(n, -1);
  for (int j = 1; j <= n; ++j) result.perm[row_of[j] - 1] = j - 1;
  result.score = total_score(scores, result.perm);
  return result;
}

std::vector<std::vector<int>> tie_groups(const MatchProblem& problem,
                                         double tolerance) {
  std::vector<std::vector<int>> groups;
  std::vector<char> grouped(problem.num_real_targets, 0);
  for (int a = 0; a < problem.num_real_targets; ++a) {
    if (grouped[a]) continue;
    std::vector<int> group = {a};
    for (int b = a + 1; b < problem.num_real_targets; ++b) {
      if (grouped[b]) continue;
      if (columns_equal(problem.label_score, a, b, tolerance) &&
          columns_equal(problem.anchor_score, a, b, tolerance)) {
        group.push_back(b);
        grouped[b] = 1;
      }
    }
    if (group.size() > 1) groups.push_back(std::move(group));
  }
  return groups;
}

TieBreakResult break_ties(const MatchProblem& problem, const Assignment& optimal,
                          const EdgeLoss& edge_loss, int max_group,
                          double tolerance) {
  TieBreakResult result{optimal, {}};
  if (!edge_loss) return result;

  struct Slot {
    std::vector<int> queries;  // sorted query indices matched into the group
    std::vector<int> targets;  // their targets, sorted
  };
  std::vector<Slot> slots;
  for (const auto& group : tie_groups(problem, tolerance)) {
    if (static_cast<int>(group.size()) > max_group) {
      result.warnings.push_back("tie group of " + std::to_string(group.size()) +
                                " targets exceeds bound " + std::to_string(max_group) +
                                "; keeping the first optimum");
      continue;
    }
    Slot slot;
    for (std::size_t q = 0; q < optimal.perm.size(); ++q) {
      if (std::find(group.begin(), group.end(), optimal.perm[q]) != group.end()) {
        slot.queries.push_back(static_cast<int>(q));
        slot.targets.push_back(optimal.perm[q]);
      }
    }
    std::sort(slot.targets.begin(), slot.targets.end());
    slots.push_back(std::move(slot));
  }
  if (slots.empty()) return result;

  std::vector<int> best_perm = optimal.perm;
  double best_loss = edge_loss(best_perm);
  std::vector<int> perm = optimal.perm;

  // Cartesian product of within-group permutations.
  auto recurse = [&](auto&& self, std::size_t index) -> void {
    if (index == slots.size()) {
      const double loss = edge_loss(perm);
      if (loss < best_loss) {
        best_loss = loss;
        best_perm = perm;
      }
      return;
    }
    std::vector<int> order = slots[index].targets;
    do {
      for (std::size_t k = 0; k < order.size(); ++k) {
        perm[slots[index].queries[k]] = order[k];
      }
      self(self, index + 1);
    } while (std::next_permutation(order.begin(), order.end()));
  };
  recurse(recurse, 0);

  result.assignment.perm = best_perm;
  result.assignment.score = total_score(match_score(problem), best_perm);
  return result;
}

int Alignment::target_of(int query) const {
  const int target = assignment.perm.at(query);
  return target < problem.num_real_targets ? target : -1;
}

MatchProblem build_match_problem(const QueryPredictions& predictions,
                                 const std::vector<TargetNode>& targets,
                                 const MatchConfig& config) {
  const int queries = static_cast<int>(predictions.label_probs.rows());
  const int real = static_cast<int>(targets.size());
  if (real > queries) {
    throw InfeasibleError("capacity: " + std::to_string(real) + " target nodes but only " +
                          std::to_string(queries) + " queries");
  }
  const bool has_anchor_head = predictions.anchor_probs.size() > 0;
  const int tokens = static_cast<int>(predictions.anchor_probs.cols());

  MatchProblem problem;
  problem.num_real_targets = real;
  problem.label_score = Matrix::Zero(queries, queries);
  problem.anchor_score = Matrix::Ones(queries, queries);
  BoolMatrix allowed = BoolMatrix::Constant(queries, queries, true);

  std::vector<double> factors(tokens);
  for (int j = 0; j < real; ++j) {
    const TargetNode& target = targets[j];
    std::vector<char> anchored(tokens, 0);
    for (int t : target.anchor_tokens) {
      if (t >= 0 && t < tokens) anchored[t] = 1;
    }
    for (int i = 0; i < queries; ++i) {
      double label = 0.0;
      for (int c : target.label_classes) label += predictions.label_probs(i, c);
      problem.label_score(i, j) = label;
      if (has_anchor_head) {
        for (int t = 0; t < tokens; ++t) {
          const double p = predictions.anchor_probs(i, t);
          factors[t] = anchored[t] ? p : 1.0 - p;
        }
        problem.anchor_score(i, j) = geomean_anchor(factors, config.anchor_floor);
      }
      if (config.anchor_mask && !target.anchor_tokens.empty()) {
        const int source = predictions.source_token.at(i);
        allowed(i, j) = std::find(target.anchor_tokens.begin(),
                                  target.anchor_tokens.end(),
                                  source) != target.anchor_tokens.end();
      }
    }
  }
  if (config.anchor_mask) {
    problem.anchor_score =
        apply_anchor_mask(problem.anchor_score, allowed, config.mask_epsilon);
  }
  return problem;
}

Alignment align_targets(const QueryPredictions& predictions,
                        const std::vector<TargetNode>& targets,
                        const MatchConfig& config, const EdgeLoss& edge_loss) {
  Alignment alignment;
  alignment.problem = build_match_problem(predictions, targets, config);
  const Assignment optimal = optimal_assignment(match_score(alignment.problem));
  auto broken = break_ties(alignment.problem, optimal, edge_loss, config.max_tie_group);
  alignment.assignment = std::move(broken.assignment);
  alignment.warnings = std::move(broken.warnings);
  return alignment;
}

}  // namespace perin
