// Loading pipeline (parse → wf-check → typecheck) and the corpus runner:
// golden check-count expectations per protocol mode, expected rejections for
// the negative cases, and the GUI nesting-depth sweep.

#ifndef IVL_CORPUS_HPP
#define IVL_CORPUS_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ivl/ast.hpp"
#include "ivl/diagnostics.hpp"
#include "ivl/interp.hpp"

namespace ivl {

struct LoadResult {
    bool parse_ok = false;
    std::string parse_error;
    Program parsed;              // surface program (pre-elaboration)
    std::vector<Diagnostic> wf;
    std::vector<Diagnostic> types;
    Program program;             // elaborated; valid when ok()
    bool wf_ok() const { return parse_ok && !has_errors(wf); }
    bool types_ok() const { return wf_ok() && !has_errors(types); }
    bool ok() const { return types_ok(); }
};

LoadResult load_source(const std::string& source);
LoadResult load_file(const std::string& path);

/// Directory holding the corpus .ivl files; overridable via IVL_CORPUS_DIR.
std::string corpus_dir();

struct CorpusExpectation {
    enum Kind { WfReject, TypecheckReject, RunOk, RunError } kind = RunOk;
    std::string rule_id;
    std::map<std::string, uint64_t> totals;  // mode name -> check total
    std::map<std::string, uint64_t> per_site_paper;
    std::map<std::string, uint64_t> per_site_d;
};

struct CorpusCase {
    std::string name;
    std::string path;
    CorpusExpectation expect;
};

/// Reads corpus/manifest.json.
std::vector<CorpusCase> corpus_manifest();

struct CaseResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

std::vector<CaseResult> run_corpus(const std::string& filter = "",
                                   uint64_t fuel = kDefaultFuel);

struct SweepRow {
    int depth = 0;
    uint64_t paper = 0, d = 0, eiffel = 0;
    bool paper_done = false, d_done = false, eiffel_done = false;
    uint64_t d_steps = 0;
};

/// Nested SafeMovable trees of increasing depth over a fixed widget count
/// and press script; reports check totals per protocol mode.
std::vector<SweepRow> gui_depth_sweep(int max_depth,
                                      uint64_t fuel = 100'000'000);

/// Source generator behind the sweep (also handy for tests).
std::string build_gui_sweep_source(int depth, int total_movables, int presses);

}  // namespace ivl

#endif
