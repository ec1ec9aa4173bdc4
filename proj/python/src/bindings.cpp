#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "perin/cli.hpp"
#include "perin/error.hpp"
#include "perin/eval.hpp"
#include "perin/graph.hpp"
#include "perin/matcher.hpp"
#include "perin/rules.hpp"
#include "perin/trainer.hpp"
#include "perin/transform.hpp"

namespace py = pybind11;
using namespace perin;

namespace {

// Graphs cross the boundary as MRP JSON lines.
std::vector<Graph> parse_lines(const std::vector<std::string>& lines) {
  std::vector<Graph> out;
  out.reserve(lines.size());
  for (const auto& l : lines) out.push_back(parse_graph(l));
  return out;
}

py::dict report_dict(const ScoreReport& r) {
  py::dict d;
  for (Metric m : kAllMetrics) {
    const MetricCounts& c = r[m];
    py::dict entry;
    entry["gold"] = c.gold;
    entry["predicted"] = c.predicted;
    entry["matched"] = c.matched;
    entry["precision"] = c.precision();
    entry["recall"] = c.recall();
    entry["f1"] = c.f1();
    d[py::str(std::string(to_string(m)))] = entry;
  }
  d["macro_f1"] = r.macro_f1();
  return d;
}

}  // namespace

PYBIND11_MODULE(_perin, m) {
  m.doc() = "Permutation-invariant semantic parsing core";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("normalize", [](const std::string& line) { return serialize_graph(parse_graph(line)); },
        py::arg("line"), "Parse one MRP line and serialize it back in canonical form.");

  m.def(
      "validate",
      [](const std::string& line) {
        std::vector<std::tuple<std::string, std::string, std::string>> out;
        for (const auto& v : validate(parse_graph(line))) out.emplace_back(v.rule, v.subject, v.message);
        return out;
      },
      py::arg("line"), "Structural violations of one graph as (rule, subject, message) tuples.");

  m.def(
      "tokenize",
      [](const std::string& text) {
        std::vector<std::tuple<std::string, int, int>> out;
        for (const auto& t : tokenize(text)) out.emplace_back(t.form, t.span.from, t.span.to);
        return out;
      },
      py::arg("text"));

  m.def(
      "preprocess",
      [](const std::string& framework, const std::string& line) {
        auto [g, trace] = preprocess(framework_from_string(framework), parse_graph(line));
        return py::make_tuple(serialize_graph(g), trace_to_json(trace).dump());
      },
      py::arg("framework"), py::arg("line"), "Returns (processed line, trace JSON).");

  m.def(
      "postprocess",
      [](const std::string& framework, const std::string& line, const std::string& trace) {
        return serialize_graph(postprocess(framework_from_string(framework), parse_graph(line),
                                           trace_from_json(Json::parse(trace))));
      },
      py::arg("framework"), py::arg("line"), py::arg("trace"));

  m.def(
      "optimal_assignment",
      [](const Matrix& scores) {
        const Assignment a = optimal_assignment(scores);
        return py::make_tuple(a.perm, a.score);
      },
      py::arg("scores"), "Max-sum assignment of a square matrix: (perm, score).");

  m.def(
      "applicable_rules",
      [](const std::vector<std::string>& tokens, const std::vector<std::string>& lemmas,
         const std::string& label) {
        if (tokens.size() != lemmas.size()) throw DataError("tokens and lemmas differ in length");
        std::vector<std::string> out;
        for (const auto& r : enumerate_applicable_rules(tokens, lemmas, label)) out.push_back(rule_to_string(r));
        return out;
      },
      py::arg("tokens"), py::arg("lemmas"), py::arg("label"));

  m.def(
      "apply_rule",
      [](const std::string& rule, const std::vector<std::string>& tokens,
         const std::vector<std::string>& lemmas) { return apply_rule(rule_from_string(rule), tokens, lemmas); },
      py::arg("rule"), py::arg("tokens"), py::arg("lemmas"));

  m.def(
      "infer_rules",
      [](const std::vector<std::string>& lines, const std::string& framework) {
        const CompiledRules c = compile_rules(parse_lines(lines), framework_from_string(framework));
        py::dict d;
        d["table"] = c.table.to_text();
        d["rules"] = c.solution.size();
        d["labels"] = c.distinct_labels;
        d["nodes"] = c.nodes;
        return d;
      },
      py::arg("lines"), py::arg("framework"), "Minimal rule set covering every node.");

  m.def(
      "score",
      [](const std::vector<std::string>& gold, const std::vector<std::string>& predicted) {
        if (gold.size() != predicted.size()) throw DataError("gold and prediction differ in length");
        std::vector<ScoreReport> reports;
        for (std::size_t i = 0; i < gold.size(); ++i)
          reports.push_back(score_pair(parse_graph(gold[i]), parse_graph(predicted[i])));
        return report_dict(aggregate(reports));
      },
      py::arg("gold"), py::arg("predicted"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a subcommand in-process: (exit code, stdout, stderr).");
}
