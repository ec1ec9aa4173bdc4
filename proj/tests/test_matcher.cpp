#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>
#include <tuple>

#include "perin/error.hpp"
#include "perin/matcher.hpp"
#include "support.hpp"

using namespace perin;
using perin::testing::brute_force_assignment;

namespace {

Matrix random_matrix(std::mt19937& gen, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = u(gen);
  return m;
}

bool is_bijection(const std::vector<int>& perm) {
  std::vector<int> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < static_cast<int>(sorted.size()); ++i)
    if (sorted[i] != i) return false;
  return true;
}

double total(const Matrix& m, const std::vector<int>& perm) {
  double s = 0;
  for (int i = 0; i < static_cast<int>(perm.size()); ++i) s += m(i, perm[i]);
  return s;
}

// Random but well-formed model outputs.
QueryPredictions random_predictions(std::mt19937& gen, int tokens, int per_token, int classes) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  const int q = tokens * per_token;
  QueryPredictions p;
  p.label_probs.resize(q, classes);
  p.anchor_probs.resize(q, tokens);
  for (int i = 0; i < q; ++i) {
    double sum = 0;
    for (int c = 0; c < classes; ++c) sum += p.label_probs(i, c) = u(gen);
    p.label_probs.row(i) /= sum;
    for (int t = 0; t < tokens; ++t) p.anchor_probs(i, t) = u(gen);
    p.source_token.push_back(i / per_token);
  }
  return p;
}

}  // namespace

TEST_CASE("match score") {
  Matrix label(2, 2), anchor(2, 2);
  label << 0.8, 0.3, 0.6, 0.2;
  anchor << 0.5, 1.0, 0.5, 0.7;
  const Matrix m = match_score(label, anchor, 1);
  CHECK(m(0, 0) == doctest::Approx(0.4));
  CHECK(m(1, 0) == doctest::Approx(0.3));
  CHECK(m(0, 1) == 0.0);
  CHECK(m(1, 1) == 0.0);
  CHECK_THROWS(match_score(label, Matrix::Ones(3, 2), 1));
}

TEST_CASE("geometric mean of anchor factors") {
  CHECK(geomean_anchor(std::vector<double>{0.25, 1.0}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(geomean_anchor(std::vector<double>{0.37}) == doctest::Approx(0.37).epsilon(1e-15));
  CHECK(geomean_anchor(std::vector<double>{0.9, 0.9, 0.9}) == doctest::Approx(0.9).epsilon(1e-15));
  const std::vector<double> many(1000, 0.9);
  CHECK(std::abs(geomean_anchor(many) - 0.9) < 1e-12);
  CHECK(geomean_anchor(std::vector<double>{0.0, 1.0}, 1e-12) == doctest::Approx(1e-6));
}

TEST_CASE("anchor mask") {
  Matrix anchor(2, 2);
  anchor << 0.5, 0.6, 0.7, 0.8;
  CHECK(apply_anchor_mask(anchor, BoolMatrix::Constant(2, 2, true), 1e-8) == anchor);
  BoolMatrix allowed = BoolMatrix::Constant(2, 2, true);
  allowed(1, 0) = allowed(1, 1) = false;
  const Matrix masked = apply_anchor_mask(anchor, allowed, 1e-8);
  CHECK(masked(0, 1) == 0.6);
  CHECK(masked(1, 0) == 1e-8);
  CHECK(masked(1, 1) == 1e-8);
}

TEST_CASE("assignment fixtures") {
  const Matrix eye = Matrix::Identity(4, 4);
  auto a = optimal_assignment(eye);
  CHECK(a.perm == std::vector<int>{0, 1, 2, 3});
  CHECK(a.score == 4.0);

  Matrix anti(2, 2);
  anti << 0.1, 0.9, 0.9, 0.1;
  a = optimal_assignment(anti);
  CHECK(a.perm == std::vector<int>{1, 0});
  CHECK(a.score == doctest::Approx(1.8));

  Matrix three(3, 3);
  three << 1, 2, 3, 2, 4, 6, 3, 6, 9;
  CHECK(optimal_assignment(three).score == brute_force_assignment(three));

  CHECK(optimal_assignment(Matrix(0, 0)).perm.empty());
  CHECK_THROWS_AS(optimal_assignment(Matrix::Ones(2, 3)), std::invalid_argument);
  Matrix bad = Matrix::Ones(2, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(optimal_assignment(bad), std::invalid_argument);
}

TEST_CASE("assignment equals brute force up to n = 7") {
  std::mt19937 gen(5);
  for (int n = 1; n <= 7; ++n) {
    for (int k = 0; k < (n < 7 ? 30 : 5); ++k) {
      const Matrix m = random_matrix(gen, n);
      const auto a = optimal_assignment(m);
      CHECK(is_bijection(a.perm));
      CHECK(a.score == total(m, a.perm));
      CHECK(a.score == brute_force_assignment(m));
    }
  }
}

TEST_CASE("assignment handles negative and zero entries") {
  std::mt19937 gen(9);
  for (int k = 0; k < 20; ++k) {
    Matrix m = random_matrix(gen, 5).array() - 0.5;
    m(0, 0) = 0.0;
    CHECK(optimal_assignment(m).score == doctest::Approx(brute_force_assignment(m)).epsilon(1e-14));
  }
}

TEST_CASE("optimal total is monotone in every entry") {
  std::mt19937 gen(13);
  std::uniform_int_distribution<int> idx(0, 4);
  for (int k = 0; k < 30; ++k) {
    Matrix m = random_matrix(gen, 5);
    const double before = optimal_assignment(m).score;
    m(idx(gen), idx(gen)) += 0.3;
    CHECK(optimal_assignment(m).score >= before);
  }
}

TEST_CASE("tie groups") {
  MatchProblem p;
  p.label_score.resize(3, 3);
  p.label_score << 0.5, 0.5, 0.1, 0.2, 0.2, 0.3, 0.3, 0.3, 0.6;
  p.anchor_score = Matrix::Ones(3, 3);
  p.num_real_targets = 3;
  CHECK(tie_groups(p) == std::vector<std::vector<int>>{{0, 1}});
  p.num_real_targets = 1;
  CHECK(tie_groups(p).empty());
}

TEST_CASE("tie breaking follows the edge loss") {
  MatchProblem p;
  p.label_score = Matrix::Constant(2, 2, 0.5);
  p.anchor_score = Matrix::Ones(2, 2);
  p.num_real_targets = 2;
  const Assignment optimal = optimal_assignment(match_score(p));
  // the loss is low only when query 0 takes target 1
  const EdgeLoss loss = [](const std::vector<int>& perm) { return perm[0] == 1 ? 0.1 : 2.0; };
  const auto swapped = break_ties(p, optimal, loss);
  CHECK(swapped.assignment.perm == std::vector<int>{1, 0});
  CHECK(swapped.assignment.score == optimal.score);
  CHECK(swapped.warnings.empty());
  const EdgeLoss other = [](const std::vector<int>& perm) { return perm[0] == 0 ? 0.1 : 2.0; };
  CHECK(break_ties(p, optimal, other).assignment.perm == std::vector<int>{0, 1});
}

TEST_CASE("tie breaking: no ties leaves the assignment alone") {
  MatchProblem p;
  p.label_score.resize(2, 2);
  p.label_score << 0.9, 0.1, 0.2, 0.8;
  p.anchor_score = Matrix::Ones(2, 2);
  p.num_real_targets = 2;
  const Assignment optimal = optimal_assignment(match_score(p));
  int calls = 0;
  const EdgeLoss loss = [&](const std::vector<int>&) { return static_cast<double>(++calls); };
  CHECK(break_ties(p, optimal, loss).assignment.perm == optimal.perm);
}

TEST_CASE("tie breaking: group of three tries all orders") {
  MatchProblem p;
  p.label_score = Matrix::Constant(3, 3, 0.4);
  p.anchor_score = Matrix::Ones(3, 3);
  p.num_real_targets = 3;
  const Assignment optimal = optimal_assignment(match_score(p));
  std::set<std::vector<int>> seen;
  const EdgeLoss loss = [&](const std::vector<int>& perm) {
    seen.insert(perm);
    return perm == std::vector<int>{2, 0, 1} ? 0.0 : 1.0;
  };
  const auto r = break_ties(p, optimal, loss);
  CHECK(seen.size() == 6);
  CHECK(r.assignment.perm == std::vector<int>{2, 0, 1});
}

TEST_CASE("tie breaking: oversized group warns") {
  MatchProblem p;
  p.label_score = Matrix::Constant(4, 4, 0.4);
  p.anchor_score = Matrix::Ones(4, 4);
  p.num_real_targets = 4;
  const Assignment optimal = optimal_assignment(match_score(p));
  const EdgeLoss loss = [](const std::vector<int>&) { return 0.0; };
  const auto r = break_ties(p, optimal, loss, 3);
  CHECK(r.assignment.perm == optimal.perm);
  CHECK(r.warnings.size() == 1);
}

TEST_CASE("align: nulls fill the remaining queries") {
  std::mt19937 gen(17);
  // two queries per token, three tokens, four real nodes
  const auto preds = random_predictions(gen, 3, 2, 5);
  const std::vector<TargetNode> targets = {
      {{0}, {0}}, {{1}, {1}}, {{2, 3}, {1}}, {{4}, {2}}};
  const auto a = align_targets(preds, targets);
  int nulls = 0;
  for (int q = 0; q < 6; ++q) nulls += a.target_of(q) < 0;
  CHECK(nulls == 2);
  CHECK(is_bijection(a.assignment.perm));

  QueryPredictions small = random_predictions(gen, 1, 3, 2);
  CHECK_THROWS_AS(align_targets(small, std::vector<TargetNode>(4, TargetNode{{0}, {0}})),
                  InfeasibleError);
}

TEST_CASE("align: masking keeps nodes on their own tokens") {
  std::mt19937 gen(19);
  for (int k = 0; k < 20; ++k) {
    const auto preds = random_predictions(gen, 4, 2, 6);
    std::vector<TargetNode> targets;
    for (int t = 0; t < 4; ++t) targets.push_back({{t}, {t}});  // one node per token
    const auto a = align_targets(preds, targets);
    for (int q = 0; q < 8; ++q) {
      const int target = a.target_of(q);
      if (target >= 0) CHECK(preds.source_token[q] == targets[target].anchor_tokens[0]);
    }
  }
}

TEST_CASE("align: masked entries fall to epsilon") {
  std::mt19937 gen(23);
  const auto preds = random_predictions(gen, 2, 1, 3);
  const std::vector<TargetNode> targets = {{{0}, {1}}};
  const MatchProblem p = build_match_problem(preds, targets, MatchConfig{});
  CHECK(p.anchor_score(0, 0) == 1e-8);
  CHECK(p.anchor_score(1, 0) > 1e-8);
  CHECK(p.label_score(0, 1) == 0.0);
  MatchConfig off;
  off.anchor_mask = false;
  CHECK(build_match_problem(preds, targets, off).anchor_score(0, 0) > 1e-8);
}

TEST_CASE("align: invariant under target order") {
  std::mt19937 gen(29);
  for (int k = 0; k < 30; ++k) {
    const auto preds = random_predictions(gen, 4, 2, 7);
    std::uniform_int_distribution<int> cls(0, 6), tok(0, 3);
    std::vector<TargetNode> targets;
    for (int j = 0; j < 5; ++j) targets.push_back({{cls(gen)}, {tok(gen)}});
    std::vector<int> order = {0, 1, 2, 3, 4};
    std::shuffle(order.begin(), order.end(), gen);
    std::vector<TargetNode> shuffled;
    for (int j : order) shuffled.push_back(targets[j]);

    const auto a = align_targets(preds, targets);
    const auto b = align_targets(preds, shuffled);
    CHECK(a.assignment.score == doctest::Approx(b.assignment.score).epsilon(1e-14));
    // identical targets are interchangeable, so compare by content
    using Pair = std::tuple<int, std::vector<int>, std::vector<int>>;
    std::set<Pair> pa, pb;
    for (int q = 0; q < 8; ++q) {
      if (const int t = a.target_of(q); t >= 0)
        pa.insert({q, targets[t].label_classes, targets[t].anchor_tokens});
      if (const int t = b.target_of(q); t >= 0)
        pb.insert({q, shuffled[t].label_classes, shuffled[t].anchor_tokens});
    }
    CHECK(pa == pb);
  }
}
