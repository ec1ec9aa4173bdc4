#include "perin/cli.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "perin/error.hpp"
#include "perin/eval.hpp"
#include "perin/graph.hpp"
#include "perin/hitting_set.hpp"
#include "perin/matcher.hpp"
#include "perin/model.hpp"
#include "perin/rules.hpp"
#include "perin/trainer.hpp"
#include "perin/transform.hpp"

namespace perin {

namespace {

struct Options {
  std::string framework;
  std::string input = "-";
  std::string output = "-";
  std::string config;
  std::string rule_table;
  std::string cache_dir;
  std::string model;
  std::string gold;
  std::uint64_t seed = 1;
  bool seed_given = false;
  int jobs = 1;
  bool inverse = false;
};

std::string read_all(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> lines;
  std::istringstream in(read_all(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back(line);
  }
  return lines;
}

// Output sink: a file when a path is given, `fallback` otherwise.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (path != "-" && !path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw DataError("cannot write '" + path + "'");
      stream_ = file_.get();
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

// Applies `fn` to every index on `jobs` threads. Results keep input order and
// the first failing index (by position, not by time) is rethrown.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t n, int jobs, Fn fn) {
  std::vector<T> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

std::vector<Graph> read_graphs(const Options& o) {
  const auto lines = read_lines(o.input);
  return parallel_map<Graph>(lines.size(), o.jobs, [&](std::size_t i) {
    try {
      return parse_graph(lines[i]);
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(i + 1) + ": " + e.what());
    }
  });
}

Framework require_framework(const Options& o) {
  if (o.framework.empty()) throw ConfigError("--framework is required");
  try {
    return framework_from_string(o.framework);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

FrameworkConfig framework_config(const Options& o) {
  if (o.config.empty()) return {};
  return FrameworkConfig::from(KeyValueConfig::load(o.config));
}

int cmd_validate(const Options& o, std::ostream& out) {
  const auto graphs = read_graphs(o);
  const auto found = parallel_map<std::vector<Violation>>(
      graphs.size(), o.jobs, [&](std::size_t i) { return validate(graphs[i]); });
  std::size_t total = 0;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    for (const auto& v : found[i]) {
      out << Json{{"id", graphs[i].id},
                  {"rule", v.rule},
                  {"subject", v.subject},
                  {"message", v.message}}
                 .dump()
          << "\n";
      ++total;
    }
  }
  out << Json{{"graphs", graphs.size()}, {"violations", total}, {"valid", total == 0}}.dump()
      << "\n";
  if (total) throw DataError(std::to_string(total) + " violation(s)");
  return 0;
}

// Pre-processed graphs carry their trace in a "trace" field; --inverse reads
// that field back and restores the original form.
int cmd_preprocess(const Options& o, std::ostream& out) {
  const Framework fw = require_framework(o);
  const FrameworkConfig fc = framework_config(o);
  const auto graphs = read_graphs(o);
  const auto lines = parallel_map<std::string>(graphs.size(), o.jobs, [&](std::size_t i) {
    if (o.inverse) {
      Graph g = graphs[i];
      TransformTrace trace;
      if (g.extra.contains("trace")) {
        trace = trace_from_json(g.extra["trace"]);
        g.extra.erase("trace");
      }
      return serialize_graph(postprocess(fw, g, trace, fc));
    }
    auto [processed, trace] = preprocess(fw, graphs[i], fc);
    Json j = graph_to_json(processed);
    j["trace"] = trace_to_json(trace);
    return j.dump();
  });
  Sink sink(o.output, out);
  for (const auto& l : lines) *sink << l << "\n";
  return 0;
}

Json rule_stats(const CompiledRules& r) {
  return Json{{"nodes", r.nodes},
              {"labels", r.distinct_labels},
              {"candidate_rules", r.problem.universe_size},
              {"rules", r.solution.size()}};
}

int cmd_rules_infer(const Options& o, std::ostream& out) {
  const Framework fw = require_framework(o);
  const auto compiled = compile_rules(read_graphs(o), fw, {}, o.cache_dir, framework_config(o));
  if (o.output == "-" || o.output.empty()) {
    out << compiled.table.to_text();
  } else {
    Sink sink(o.output, out);
    *sink << compiled.table.to_text();
  }
  out << rule_stats(compiled).dump() << "\n";
  return 0;
}

int cmd_rules_stats(const Options& o, std::ostream& out) {
  const Framework fw = require_framework(o);
  const auto compiled = compile_rules(read_graphs(o), fw, {}, o.cache_dir, framework_config(o));
  out << rule_stats(compiled).dump() << "\n";
  return 0;
}

int cmd_rules_apply(const Options& o, std::ostream& out) {
  const Framework fw = require_framework(o);
  if (o.rule_table.empty()) throw ConfigError("--rule-table is required");
  const RuleTable table = RuleTable::from_text(read_all(o.rule_table));
  const FrameworkConfig fc = framework_config(o);
  const auto graphs = read_graphs(o);
  const auto lines = parallel_map<std::string>(graphs.size(), o.jobs, [&](std::size_t i) {
    Graph g = graphs[i];
    ensure_tokens(g);
    const Graph p = preprocess(fw, g, fc).first;
    Json nodes = Json::array();
    for (const auto& node : p.nodes) {
      std::vector<std::string> forms, lemmas;
      for (int t : anchored_tokens(p.tokens, node.anchors)) {
        forms.push_back(p.tokens[t].form);
        lemmas.push_back(p.tokens[t].lemma);
      }
      const std::string label = node.label.value_or("");
      const auto classes = table.applicable(forms, lemmas, label);
      if (classes.empty()) {
        throw InfeasibleError("graph " + g.id + ": node " + std::to_string(node.id) +
                              " label '" + label + "' has no applicable rule");
      }
      nodes.push_back({{"id", node.id}, {"label", label}, {"rules", classes}});
    }
    return Json{{"id", g.id}, {"nodes", nodes}}.dump();
  });
  Sink sink(o.output, out);
  for (const auto& l : lines) *sink << l << "\n";
  return 0;
}

// Text format: the size n, then n rows of n numbers.
int cmd_match(const Options& o, std::ostream& out) {
  std::istringstream in(read_all(o.input));
  long n = 0;
  if (!(in >> n) || n < 0) throw DataError("match: expected a matrix size");
  Matrix m(n, n);
  for (long r = 0; r < n; ++r) {
    for (long c = 0; c < n; ++c) {
      if (!(in >> m(r, c))) throw DataError("match: expected " + std::to_string(n * n) + " numbers");
    }
  }
  std::string rest;
  if (in >> rest) throw DataError("match: trailing data");
  Assignment a;
  try {
    a = optimal_assignment(m);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("match: ") + e.what());
  }
  Json j{{"perm", a.perm}, {"score", a.score}};
  out << j.dump() << "\n";
  return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
  KeyValueConfig kv;
  if (!o.config.empty()) kv = KeyValueConfig::load(o.config);
  if (o.seed_given) kv.set("seed", std::to_string(o.seed));
  if (!o.framework.empty()) kv.set("framework", o.framework);
  const TrainConfig config = TrainConfig::from(kv);
  auto result = train(
      config, [&](const EpochMetrics& m) { out << m.to_json().dump() << "\n" << std::flush; },
      o.cache_dir);
  Json summary = rule_stats(result.rules);
  summary["epochs"] = result.epochs.size();
  if (!result.epochs.empty()) summary["heldout"] = result.epochs.back().heldout.to_json();
  out << Json{{"summary", summary}}.dump() << "\n";
  if (!o.model.empty()) result.model.save(o.model);
  return 0;
}

int cmd_predict(const Options& o, std::ostream& out) {
  if (o.model.empty()) throw ConfigError("--model is required");
  const ToyModel model = ToyModel::load(o.model);
  const auto lines = read_lines(o.input);
  const auto outputs = parallel_map<std::string>(lines.size(), o.jobs, [&](std::size_t i) {
    // JSONL graphs contribute their input string; other lines are raw text.
    if (lines[i].front() == '{') {
      const Graph g = parse_graph(lines[i]);
      return serialize_graph(predict(model, g.input, g.id));
    }
    return serialize_graph(predict(model, lines[i], std::to_string(i)));
  });
  Sink sink(o.output, out);
  for (const auto& l : outputs) *sink << l << "\n";
  return 0;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  if (o.gold.empty()) throw ConfigError("--gold is required");
  Options gold_options = o;
  gold_options.input = o.gold;
  const auto gold = read_graphs(gold_options);
  const auto predicted = read_graphs(o);
  if (gold.size() != predicted.size()) {
    throw DataError("evaluate: " + std::to_string(gold.size()) + " gold vs " +
                    std::to_string(predicted.size()) + " predicted graphs");
  }
  const auto reports = parallel_map<ScoreReport>(gold.size(), o.jobs, [&](std::size_t i) {
    return score_pair(gold[i], predicted[i]);
  });
  out << aggregate(reports).to_json().dump() << "\n";
  return 0;
}

void error_line(std::ostream& err, const char* kind, const std::string& message) {
  err << Json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"perin: permutation-invariant semantic parsing toolkit"};
  app.require_subcommand(1, 1);
  Options o;
  if (const char* env = std::getenv("PERIN_CACHE_DIR")) o.cache_dir = env;

  auto add_common = [&](CLI::App* sub, bool framework) {
    sub->add_option("--input", o.input, "input path, '-' for standard input");
    sub->add_option("--output", o.output, "output path, '-' for standard output");
    sub->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
    if (framework) {
      sub->add_option("--framework", o.framework, "amr, drg, eds, ptg or ucca");
      sub->add_option("--config", o.config, "key = value configuration file");
    }
  };
  auto* validate_cmd = app.add_subcommand("validate", "check graphs against the schema");
  add_common(validate_cmd, false);
  auto* preprocess_cmd = app.add_subcommand("preprocess", "apply (or undo) the training transforms");
  add_common(preprocess_cmd, true);
  preprocess_cmd->add_flag("--inverse", o.inverse, "restore graphs from their trace");
  auto* infer_cmd = app.add_subcommand("rules-infer", "compile a minimal rule table");
  add_common(infer_cmd, true);
  infer_cmd->add_option("--cache-dir", o.cache_dir, "solved rule-set cache");
  auto* apply_cmd = app.add_subcommand("rules-apply", "list the applicable rules of every node");
  add_common(apply_cmd, true);
  apply_cmd->add_option("--rule-table", o.rule_table, "rule table file");
  auto* stats_cmd = app.add_subcommand("rules-stats", "label and rule counts");
  add_common(stats_cmd, true);
  stats_cmd->add_option("--cache-dir", o.cache_dir, "solved rule-set cache");
  auto* match_cmd = app.add_subcommand("match", "optimal assignment of a square score matrix");
  match_cmd->add_option("--input", o.input, "matrix file, '-' for standard input");
  auto* train_cmd = app.add_subcommand("train-toy", "train on the synthetic corpus");
  train_cmd->add_option("--config", o.config, "key = value training configuration");
  train_cmd->add_option("--framework", o.framework, "framework");
  train_cmd->add_option("--cache-dir", o.cache_dir, "solved rule-set cache");
  train_cmd->add_option("--model", o.model, "where to save the trained model");
  auto* seed_opt = train_cmd->add_option("--seed", o.seed, "random seed");
  auto* predict_cmd = app.add_subcommand("predict", "parse sentences with a trained model");
  add_common(predict_cmd, false);
  predict_cmd->add_option("--model", o.model, "trained model path");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "score predictions against gold graphs");
  add_common(evaluate_cmd, false);
  evaluate_cmd->add_option("--gold", o.gold, "gold JSONL");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    error_line(err, "usage", e.what());
    return 1;
  }
  o.seed_given = seed_opt->count() > 0;

  try {
    if (validate_cmd->parsed()) return cmd_validate(o, out);
    if (preprocess_cmd->parsed()) return cmd_preprocess(o, out);
    if (infer_cmd->parsed()) return cmd_rules_infer(o, out);
    if (apply_cmd->parsed()) return cmd_rules_apply(o, out);
    if (stats_cmd->parsed()) return cmd_rules_stats(o, out);
    if (match_cmd->parsed()) return cmd_match(o, out);
    if (train_cmd->parsed()) return cmd_train(o, out);
    if (predict_cmd->parsed()) return cmd_predict(o, out);
    if (evaluate_cmd->parsed()) return cmd_evaluate(o, out);
  } catch (const ConfigError& e) {
    error_line(err, "usage", e.what());
    return 1;
  } catch (const DataError& e) {
    error_line(err, "data", e.what());
    return 2;
  } catch (const InfeasibleError& e) {
    error_line(err, "infeasible", e.what());
    return 3;
  } catch (const Json::exception& e) {
    error_line(err, "data", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    error_line(err, "data", e.what());
    return 2;
  }
  return 1;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace perin
