#pragma once

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "perin/graph.hpp"

namespace perin::testing {

inline std::string fixture_path(const std::string& name) {
  return std::string(PERIN_FIXTURES) + "/" + name;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<Graph> load_fixture(const std::string& name) {
  std::vector<Graph> out;
  std::istringstream in(read_file(fixture_path(name)));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(parse_graph(line));
  }
  return out;
}

inline const std::vector<std::string>& fixture_names() {
  static const std::vector<std::string> names = {"amr.jsonl", "drg.jsonl", "eds.jsonl",
                                                 "ptg.jsonl", "ucca.jsonl"};
  return names;
}

inline Graph fixture(const std::string& name) { return load_fixture(name).at(0); }

// Best total over all n! permutations.
inline double brute_force_assignment(const Eigen::MatrixXd& scores) {
  const int n = static_cast<int>(scores.rows());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1e300;
  do {
    double total = 0;
    for (int i = 0; i < n; ++i) total += scores(i, perm[i]);
    best = std::max(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace perin::testing
