#include "ivl/corpus.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "ivl/parser.hpp"
#include "ivl/typecheck.hpp"
#include "ivl/wf.hpp"

namespace ivl {

LoadResult load_source(const std::string& source) {
    LoadResult r;
    try {
        r.parsed = parse_program(source);
        r.parse_ok = true;
    } catch (const ParseError& e) {
        std::ostringstream os;
        os << e.line << ':' << e.col << ": "
           << (e.pkind == ParseError::StandardForm ? "standard-form: " : "")
           << e.what();
        r.parse_error = os.str();
        return r;
    }
    r.wf = wf_check_program(r.parsed);
    if (has_errors(r.wf)) return r;
    TypeckResult t = typecheck_program(r.parsed);
    r.types = t.diagnostics;
    if (!has_errors(r.types)) r.program = std::move(t.program);
    return r;
}

LoadResult load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        LoadResult r;
        r.parse_error = "cannot open " + path;
        return r;
    }
    std::ostringstream os;
    os << in.rdbuf();
    return load_source(os.str());
}

std::string corpus_dir() {
    if (const char* env = std::getenv("IVL_CORPUS_DIR")) return env;
#ifdef IVL_CORPUS_DIR
    return IVL_CORPUS_DIR;
#else
    return "corpus";
#endif
}

std::vector<CorpusCase> corpus_manifest() {
    std::string path = corpus_dir() + "/manifest.json";
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus manifest " + path);
    nlohmann::json j;
    in >> j;
    std::vector<CorpusCase> out;
    for (const auto& c : j.at("cases")) {
        CorpusCase cc;
        cc.name = c.at("name").get<std::string>();
        cc.path = c.at("path").get<std::string>();
        std::string kind = c.at("expect").get<std::string>();
        if (kind == "wf_reject") {
            cc.expect.kind = CorpusExpectation::WfReject;
        } else if (kind == "typecheck_reject") {
            cc.expect.kind = CorpusExpectation::TypecheckReject;
        } else if (kind == "run_ok") {
            cc.expect.kind = CorpusExpectation::RunOk;
        } else if (kind == "run_error") {
            cc.expect.kind = CorpusExpectation::RunError;
        } else {
            throw std::runtime_error("unknown expectation " + kind);
        }
        if (c.contains("rule")) cc.expect.rule_id = c.at("rule");
        if (c.contains("totals"))
            for (const auto& [k, v] : c.at("totals").items())
                cc.expect.totals[k] = v.get<uint64_t>();
        if (c.contains("per_site_paper"))
            for (const auto& [k, v] : c.at("per_site_paper").items())
                cc.expect.per_site_paper[k] = v.get<uint64_t>();
        if (c.contains("per_site_d"))
            for (const auto& [k, v] : c.at("per_site_d").items())
                cc.expect.per_site_d[k] = v.get<uint64_t>();
        out.push_back(std::move(cc));
    }
    return out;
}

namespace {

std::map<std::string, uint64_t> site_map(const CheckCounters& c) {
    std::map<std::string, uint64_t> m;
    for (const auto& [site, n] : c.per_site) m[check_site_name(site)] = n;
    return m;
}

bool check_sites(const std::map<std::string, uint64_t>& expected,
                 const CheckCounters& got, std::string& detail) {
    auto m = site_map(got);
    for (const auto& [k, v] : expected) {
        uint64_t g = m.count(k) ? m[k] : 0;
        if (g != v) {
            detail += " per_site[" + k + "]=" + std::to_string(g) +
                      " expected " + std::to_string(v) + ";";
            return false;
        }
    }
    // no unexpected sites
    for (const auto& [k, v] : m) {
        if (v != 0 && !expected.count(k)) {
            detail += " unexpected per_site[" + k + "]=" + std::to_string(v) + ";";
            return false;
        }
    }
    return true;
}

}  // namespace

std::vector<CaseResult> run_corpus(const std::string& filter, uint64_t fuel) {
    std::vector<CaseResult> out;
    for (const auto& c : corpus_manifest()) {
        if (!filter.empty() && c.name.find(filter) == std::string::npos)
            continue;
        CaseResult res;
        res.name = c.name;
        LoadResult lr = load_file(corpus_dir() + "/" + c.path);
        if (!lr.parse_ok) {
            res.detail = "parse error: " + lr.parse_error;
            out.push_back(res);
            continue;
        }
        switch (c.expect.kind) {
            case CorpusExpectation::WfReject:
                res.passed = has_rule(lr.wf, c.expect.rule_id);
                if (!res.passed)
                    res.detail = "expected wf rule " + c.expect.rule_id;
                break;
            case CorpusExpectation::TypecheckReject:
                res.passed = lr.wf_ok() && has_rule(lr.types, c.expect.rule_id);
                if (!res.passed)
                    res.detail = "expected typecheck rule " + c.expect.rule_id;
                break;
            case CorpusExpectation::RunOk:
            case CorpusExpectation::RunError: {
                if (!lr.ok()) {
                    for (const auto& d : lr.wf)
                        res.detail += render_diagnostic(d, c.path) + "; ";
                    for (const auto& d : lr.types)
                        res.detail += render_diagnostic(d, c.path) + "; ";
                    break;
                }
                bool all_ok = true;
                for (const auto& [mode_name, total] : c.expect.totals) {
                    ProtocolMode mode{protocol_from_name(mode_name), false};
                    RunResult r = run(lr.program, mode, fuel);
                    bool want_error =
                        c.expect.kind == CorpusExpectation::RunError;
                    if (want_error ? r.outcome != RunResult::Error
                                   : r.outcome != RunResult::Value) {
                        res.detail += mode_name + ": outcome " +
                                      std::to_string(r.outcome) + ";";
                        all_ok = false;
                        continue;
                    }
                    if (r.checks.total != total) {
                        res.detail += " " + mode_name + ": total " +
                                      std::to_string(r.checks.total) +
                                      " expected " + std::to_string(total) +
                                      ";";
                        all_ok = false;
                    }
                    if (mode.kind == ProtocolKind::Paper &&
                        !c.expect.per_site_paper.empty())
                        all_ok = check_sites(c.expect.per_site_paper, r.checks,
                                             res.detail) && all_ok;
                    if (mode.kind == ProtocolKind::DVisibleState &&
                        !c.expect.per_site_d.empty())
                        all_ok = check_sites(c.expect.per_site_d, r.checks,
                                             res.detail) && all_ok;
                }
                res.passed = all_ok;
                break;
            }
        }
        out.push_back(std::move(res));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Depth sweep: a fixed population of movable containers rearranged into
// chains of increasing nesting depth, driven by a fixed two-press script.

std::string build_gui_sweep_source(int depth, int total_movables,
                                   int presses) {
    std::ostringstream os;
    os << R"(capability class Cap {
  mut List<Int> queue;
  mut method Void push(Int event) { this.queue.add(event); }
  mut method Int next(Int i) { return this.queue.get(i); }
}
interface Widget {
  read method Int left();
  read method Int top();
  read method Int width();
  read method Int height();
  mut method Void dispatch(Int event);
}
class Box {
  Int l;
  Int t;
  mut List<mut Widget> c;
  Box(Int l, Int t, mut List<mut Widget> c) {
    this.l = l;
    this.t = t;
    this.c = c;
  }
  mut method Void addChild(mut Widget w) { this.c.add(w); }
}
class MoveAction {
  mut Box outer;
  MoveAction(mut Box outer) { this.outer = outer; }
  mut method Void process(Int event) { this.outer.l := this.outer.l + 1; }
}
class Button implements Widget {
  Int bid;
  Int l;
  Int t;
  Int w;
  Int h;
  mut MoveAction action;
  Button(Int bid, Int l, Int t, Int w, Int h, mut MoveAction action) {
    this.bid = bid;
    this.l = l;
    this.t = t;
    this.w = w;
    this.h = h;
    this.action = action;
  }
  read method Int left() { return this.l; }
  read method Int top() { return this.t; }
  read method Int width() { return this.w; }
  read method Int height() { return this.h; }
  mut method Void dispatch(Int event) {
    if (event == this.bid) { this.action.process(event); }
  }
}
uniform class SafeMovable implements Widget {
  capsule Box box;
  Int w;
  Int h;
  SafeMovable(capsule Box box, Int w, Int h) {
    this.box = box;
    this.w = w;
    this.h = h;
  }
  read method Int left() { return this.box.l; }
  read method Int top() { return this.box.t; }
  read method Int width() { return this.w; }
  read method Int height() { return this.h; }
  read method Bool invariant() {
    for (read Widget w1 : this.box.c) {
      if (!this.inside(w1)) { return false; }
    }
    return true;
  }
  read method Bool inside(read Widget w1) {
    return w1.left() >= this.left() && w1.top() >= this.top()
        && w1.left() + w1.width() <= this.left() + this.width()
        && w1.top() + w1.height() <= this.top() + this.height();
  }
  mut method Void dispatch(Int event) {
    for (mut Widget w : this.box.c) { w.dispatch(event); }
  }
}
class Builder {
)";
    // level k movable: size s(k) = 20k + 10, one button, one nested movable
    // below level 1. The chain root is oversized and also hosts the flat
    // movables so the total widget population stays fixed across depths.
    auto size_of = [](int k) { return 20 * k + 10; };
    os << R"(  static method capsule Box flatBox(Int x, Int y, Int bid) {
    mut List<mut Widget> cs = new List<mut Widget>();
    mut Box b = new Box(x, y, cs);
    b.addChild(new Button(bid, x + 4, y + 4, 4, 4, new MoveAction(b)));
    return b;
  }
  static method mut SafeMovable flat(Int x, Int y, Int bid) {
    return new SafeMovable(Builder.flatBox(x, y, bid), 30, 30);
  }
)";
    for (int k = 1; k <= depth; ++k) {
        os << "  static method capsule Box level" << k
           << "Box(Int x, Int y, Int bid) {\n"
           << "    mut List<mut Widget> cs = new List<mut Widget>();\n"
           << "    mut Box b = new Box(x, y, cs);\n"
           << "    b.addChild(new Button(bid, x + 4, y + 4, 4, 4, "
              "new MoveAction(b)));\n";
        if (k > 1) {
            os << "    b.addChild(Builder.level" << (k - 1)
               << "(x + 14, y + 14, bid - 1));\n";
        }
        if (k == depth) {
            for (int f = 0; f < total_movables - depth; ++f) {
                os << "    b.addChild(Builder.flat(x + " << (400 + 60 * f)
                   << ", y + 4, " << (depth + 1 + f) << "));\n";
            }
        }
        os << "    return b;\n  }\n";
        bool root = k == depth;
        os << "  static method mut SafeMovable level" << k
           << "(Int x, Int y, Int bid) {\n"
           << "    return new SafeMovable(Builder.level" << k
           << "Box(x, y, bid), " << (root ? 2000 : size_of(k)) << ", "
           << (root ? 2000 : size_of(k)) << ");\n  }\n";
    }
    os << "}\n";
    os << "main {\n";
    os << "  mut SafeMovable root = Builder.level" << depth << "(0, 0, "
       << depth << ");\n";
    for (int p = 0; p < presses; ++p) os << "  cap.push(" << (p + 1) << ");\n";
    os << "  for (Int e = 0; e < " << presses << "; e++) {\n"
       << "    root.dispatch(cap.next(e));\n  }\n";
    os << "  root.invariant();\n}\n";
    return os.str();
}

std::vector<SweepRow> gui_depth_sweep(int max_depth, uint64_t fuel) {
    if (max_depth < 1 || max_depth > 6)
        throw std::invalid_argument("gui_depth_sweep: max_depth must be 1..6");
    std::vector<SweepRow> rows;
    constexpr int kMovables = 6;
    constexpr int kPresses = 2;
    for (int d = 1; d <= max_depth; ++d) {
        std::string src = build_gui_sweep_source(d, kMovables, kPresses);
        LoadResult lr = load_source(src);
        if (!lr.ok()) {
            std::string msg = "sweep source rejected at depth " +
                              std::to_string(d) + ": " + lr.parse_error;
            for (const auto& di : lr.wf) msg += " " + render_diagnostic(di, "");
            for (const auto& di : lr.types)
                msg += " " + render_diagnostic(di, "");
            throw std::runtime_error(msg);
        }
        SweepRow row;
        row.depth = d;
        {
            RunResult r = run(lr.program,
                              ProtocolMode{ProtocolKind::Paper, false}, fuel);
            row.paper = r.checks.total;
            row.paper_done = r.outcome == RunResult::Value;
        }
        {
            RunResult r = run(lr.program,
                              ProtocolMode{ProtocolKind::DVisibleState, false},
                              fuel);
            row.d = r.checks.total;
            row.d_done = r.outcome == RunResult::Value;
            row.d_steps = r.steps;
        }
        {
            RunResult r = run(
                lr.program,
                ProtocolMode{ProtocolKind::EiffelVisibleState, false}, fuel);
            row.eiffel = r.checks.total;
            row.eiffel_done = r.outcome == RunResult::Value;
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace ivl
