// Python bindings for the core operations: checking, running under a
// protocol mode, the soundness oracle, the corpus runner and the depth
// sweep.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include "ivl/corpus.hpp"
#include "ivl/fuzz.hpp"
#include "ivl/interp.hpp"
#include "ivl/oracle.hpp"
#include "ivl/parser.hpp"
#include "ivl/report.hpp"

namespace py = pybind11;

namespace {

py::list diagnostics_to_list(const std::vector<ivl::Diagnostic>& ds,
                             const char* pass) {
    py::list out;
    for (const auto& d : ds) {
        py::dict item;
        item["pass"] = pass;
        item["rule"] = d.rule_id;
        item["line"] = d.span.line;
        item["col"] = d.span.col;
        item["message"] = d.message;
        out.append(item);
    }
    return out;
}

py::dict check_source(const std::string& source) {
    ivl::LoadResult lr = ivl::load_source(source);
    py::dict out;
    out["ok"] = lr.ok();
    out["parse_ok"] = lr.parse_ok;
    if (!lr.parse_ok) out["parse_error"] = lr.parse_error;
    py::list diags = diagnostics_to_list(lr.wf, "wf");
    for (auto d : diagnostics_to_list(lr.types, "typecheck")) diags.append(d);
    out["diagnostics"] = diags;
    return out;
}

py::dict run_source(const std::string& source, const std::string& mode_name,
                    uint64_t fuel, bool count_only) {
    ivl::LoadResult lr = ivl::load_source(source);
    if (!lr.ok()) {
        py::dict out = check_source(source);
        out["outcome"] = "rejected";
        return out;
    }
    ivl::ProtocolMode mode{ivl::protocol_from_name(mode_name), count_only};
    ivl::RunResult r = ivl::run(lr.program, mode, fuel);
    py::dict out;
    out["ok"] = true;
    out["outcome"] = ivl::outcome_name(r.outcome);
    out["mode"] = ivl::protocol_name(mode.kind);
    out["total"] = r.checks.total;
    py::dict per_class;
    for (const auto& [cls, n] : r.checks.per_class)
        per_class[py::str(cls)] = n;
    out["per_class"] = per_class;
    py::dict per_site;
    for (const auto& [site, n] : r.checks.per_site)
        per_site[py::str(ivl::check_site_name(site))] = n;
    out["per_site"] = per_site;
    out["steps"] = r.steps;
    py::list log;
    for (const auto& line : r.mem.output_log) log.append(line);
    out["output"] = log;
    if (r.outcome == ivl::RunResult::Value)
        out["value"] = ivl::pretty_expr(ivl::value_to_expr(r.value));
    return out;
}

py::dict oracle_scan(const std::string& source, uint64_t max_steps,
                     uint64_t sample_every) {
    ivl::LoadResult lr = ivl::load_source(source);
    if (!lr.ok()) throw std::invalid_argument("program rejected");
    ivl::Machine m(lr.program, {ivl::ProtocolKind::Paper, false});
    ivl::OracleChecker oc(lr.program);
    py::list violations;
    while (m.cfg.steps < max_steps) {
        if (m.cfg.steps % sample_every == 0) {
            ivl::OkVerdict v = oc.assert_ok_full(m.cfg);
            for (const auto& viol : v.violations) {
                py::dict d;
                d["step"] = m.cfg.steps;
                d["loc"] = viol.loc;
                d["reason"] = viol.reason;
                violations.append(d);
            }
        }
        if (!m.step()) break;
    }
    py::dict out;
    out["steps"] = m.cfg.steps;
    out["violations"] = violations;
    return out;
}

}  // namespace

PYBIND11_MODULE(_ivl, m) {
    m.doc() = "ivl: type modifiers, object capabilities and runtime-checked "
              "class invariants";

    m.def("check", &check_source, py::arg("source"),
          "Parse, wf-check and typecheck a source; returns diagnostics.");
    m.def("run", &run_source, py::arg("source"), py::arg("mode") = "paper",
          py::arg("fuel") = ivl::kDefaultFuel, py::arg("count_only") = false,
          "Execute a program under the given invariant protocol.");
    m.def("run_file",
          [](const std::string& path, const std::string& mode, uint64_t fuel) {
              std::ifstream in(path);
              if (!in) throw std::invalid_argument("cannot open " + path);
              std::ostringstream os;
              os << in.rdbuf();
              return run_source(os.str(), mode, fuel, false);
          },
          py::arg("path"), py::arg("mode") = "paper",
          py::arg("fuel") = ivl::kDefaultFuel);
    m.def("pretty",
          [](const std::string& source) {
              return ivl::pretty_program(ivl::parse_program(source));
          },
          py::arg("source"), "Canonical surface rendering.");
    m.def("oracle_scan", &oracle_scan, py::arg("source"),
          py::arg("max_steps") = 100000, py::arg("sample_every") = 1,
          "Run under the per-step soundness oracle (paper mode).");
    m.def("fuzz",
          [](uint64_t seed, int n, int budget) {
              py::list out;
              for (auto& c : ivl::fuzz_programs(seed, n, budget))
                  out.append(c.source);
              return out;
          },
          py::arg("seed") = 0, py::arg("n") = 10, py::arg("budget") = 12);
    m.def("run_corpus",
          [](const std::string& filter) {
              py::list out;
              for (const auto& r : ivl::run_corpus(filter)) {
                  py::dict d;
                  d["name"] = r.name;
                  d["passed"] = r.passed;
                  d["detail"] = r.detail;
                  out.append(d);
              }
              return out;
          },
          py::arg("filter") = "");
    m.def("gui_depth_sweep",
          [](int max_depth) {
              py::list out;
              for (const auto& r : ivl::gui_depth_sweep(max_depth)) {
                  py::dict d;
                  d["depth"] = r.depth;
                  d["paper"] = r.paper;
                  d["d"] = r.d;
                  d["eiffel"] = r.eiffel;
                  d["complete"] =
                      r.paper_done && r.d_done && r.eiffel_done;
                  out.append(d);
              }
              return out;
          },
          py::arg("max_depth") = 3);

    m.attr("__version__") = "0.1.0";
}
