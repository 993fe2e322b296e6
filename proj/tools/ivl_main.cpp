// Command-line front end: check, run, count, trace, oracle, sweep, fuzz and
// corpus subcommands over .ivl sources.
//
// Exit codes: 0 success, 1 diagnostics or corpus mismatch, 2 soundness
// violation, 3 usage, 4 fuel exhausted.

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ivl/corpus.hpp"
#include "ivl/fuzz.hpp"
#include "ivl/interp.hpp"
#include "ivl/oracle.hpp"
#include "ivl/parser.hpp"
#include "ivl/report.hpp"

namespace {

uint64_t default_fuel() {
    if (const char* env = std::getenv("IVL_FUEL")) {
        try {
            return std::stoull(env);
        } catch (...) {
            std::cerr << "ignoring malformed IVL_FUEL\n";
        }
    }
    return ivl::kDefaultFuel;
}

int report_diagnostics(const ivl::LoadResult& lr, const std::string& file,
                       bool json_format) {
    if (!lr.parse_ok) {
        if (json_format) {
            nlohmann::json j;
            j["kind"] = "parse-error";
            j["message"] = lr.parse_error;
            std::cout << j.dump() << '\n';
        } else {
            std::cout << file << ':' << lr.parse_error << '\n';
        }
        return 1;
    }
    bool any = false;
    auto emit = [&](const std::vector<ivl::Diagnostic>& ds,
                    const char* pass) {
        for (const auto& d : ds) {
            any = true;
            if (json_format) {
                nlohmann::json j;
                j["kind"] = "diagnostic";
                j["pass"] = pass;
                j["rule"] = d.rule_id;
                j["line"] = d.span.line;
                j["col"] = d.span.col;
                j["message"] = d.message;
                std::cout << j.dump() << '\n';
            } else {
                std::cout << render_diagnostic(d, file) << '\n';
            }
        }
    };
    emit(lr.wf, "wf");
    emit(lr.types, "typecheck");
    return any ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ivl: interpreter and invariant-protocol toolkit"};
    app.require_subcommand(1);

    std::string file;
    std::string mode_name = "paper";
    std::string format = "text";
    std::string oracle_policy = "off";
    uint64_t fuel = default_fuel();
    bool with_count = false;
    bool count_only = false;

    auto* check = app.add_subcommand("check", "run wf-check and typecheck");
    check->add_option("file", file)->required();
    check->add_option("--format", format)->check(CLI::IsMember({"text", "json"}));

    auto* run_cmd = app.add_subcommand("run", "execute a program");
    run_cmd->add_option("file", file)->required();
    run_cmd->add_option("--mode", mode_name)
        ->check(CLI::IsMember({"paper", "d", "eiffel"}));
    run_cmd->add_flag("--count", with_count, "print the counter report");
    run_cmd->add_flag("--count-only", count_only,
                      "tolerate failed checks and keep counting");
    run_cmd->add_option("--fuel", fuel);
    run_cmd->add_option("--format", format)
        ->check(CLI::IsMember({"text", "json"}));

    auto* count_cmd =
        app.add_subcommand("count", "execute and print the counter report");
    count_cmd->add_option("file", file)->required();
    count_cmd->add_option("--mode", mode_name)
        ->check(CLI::IsMember({"paper", "d", "eiffel"}));
    count_cmd->add_option("--fuel", fuel);
    count_cmd->add_option("--format", format)
        ->check(CLI::IsMember({"text", "json"}));

    auto* trace = app.add_subcommand("trace", "execute printing one line per step");
    trace->add_option("file", file)->required();
    trace->add_option("--mode", mode_name)
        ->check(CLI::IsMember({"paper", "d", "eiffel"}));
    trace->add_option("--fuel", fuel);

    auto* oracle_cmd = app.add_subcommand(
        "oracle", "execute under the soundness oracle (paper mode)");
    oracle_cmd->add_option("file", file)->required();
    oracle_cmd->add_option("--policy", oracle_policy,
                           "every-step or sampled:<k>");
    oracle_cmd->add_option("--fuel", fuel);

    int max_depth = 5;
    auto* sweep = app.add_subcommand("sweep", "GUI nesting-depth check sweep");
    sweep->add_option("--max-depth", max_depth)->check(CLI::Range(1, 6));
    sweep->add_option("--fuel", fuel);

    uint64_t seed = 0;
    int fuzz_n = 100;
    int fuzz_budget = 12;
    uint64_t fuzz_steps = 200;
    auto* fuzz_cmd =
        app.add_subcommand("fuzz", "differential soundness fuzzing");
    fuzz_cmd->add_option("--seed", seed);
    fuzz_cmd->add_option("-n", fuzz_n);
    fuzz_cmd->add_option("--size", fuzz_budget);
    fuzz_cmd->add_option("--steps", fuzz_steps, "step budget per program");

    std::string filter;
    auto* corpus_cmd = app.add_subcommand("corpus", "run the golden corpus");
    corpus_cmd->add_option("--filter", filter);
    corpus_cmd->add_option("--fuel", fuel);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 3;
    }

    try {
        if (check->parsed()) {
            ivl::LoadResult lr = ivl::load_file(file);
            return report_diagnostics(lr, file, format == "json");
        }

        if (run_cmd->parsed() || count_cmd->parsed()) {
            if (count_cmd->parsed()) with_count = true;
            ivl::LoadResult lr = ivl::load_file(file);
            if (!lr.ok()) return report_diagnostics(lr, file, format == "json");
            ivl::ProtocolMode mode{ivl::protocol_from_name(mode_name),
                                   count_only};
            ivl::RunResult r = ivl::run(lr.program, mode, fuel);
            if (with_count) {
                std::cout << (format == "json"
                                  ? ivl::counter_report_json(mode, r)
                                  : ivl::counter_report_text(mode, r));
                if (format == "json") std::cout << '\n';
            } else {
                std::cout << "outcome: " << ivl::outcome_name(r.outcome);
                if (r.outcome == ivl::RunResult::Value)
                    std::cout << " "
                              << ivl::pretty_expr(ivl::value_to_expr(r.value));
                std::cout << '\n';
                for (const auto& line : r.mem.output_log)
                    std::cout << line << '\n';
            }
            return r.outcome == ivl::RunResult::FuelExhausted ? 4 : 0;
        }

        if (trace->parsed()) {
            ivl::LoadResult lr = ivl::load_file(file);
            if (!lr.ok()) return report_diagnostics(lr, file, false);
            ivl::Machine m(lr.program,
                           {ivl::protocol_from_name(mode_name), false});
            while (m.cfg.steps < fuel) {
                ivl::Decomp d = ivl::decompose(m.cfg.expr);
                uint64_t before = m.cfg.checks.total;
                auto rule = m.step();
                if (!rule) break;
                std::cout << ivl::trace_line(m.cfg.steps, *rule, d.redex,
                                             m.cfg.checks.total - before)
                          << '\n';
            }
            if (m.cfg.steps >= fuel) return 4;
            return 0;
        }

        if (oracle_cmd->parsed()) {
            ivl::LoadResult lr = ivl::load_file(file);
            if (!lr.ok()) return report_diagnostics(lr, file, false);
            uint64_t every = 1;
            if (oracle_policy.rfind("sampled:", 0) == 0)
                every = std::stoull(oracle_policy.substr(8));
            ivl::Machine m(lr.program, {ivl::ProtocolKind::Paper, false});
            ivl::OracleChecker oc(lr.program);
            uint64_t violations = 0;
            while (m.cfg.steps < fuel) {
                if (m.cfg.steps % every == 0) {
                    ivl::OkVerdict v = oc.assert_ok_full(m.cfg);
                    for (const auto& viol : v.violations) {
                        ++violations;
                        std::cout << "VIOLATION at step " << m.cfg.steps
                                  << ": " << viol.reason << '\n';
                    }
                }
                if (!m.step()) break;
            }
            std::cout << "steps: " << m.cfg.steps
                      << " violations: " << violations << '\n';
            if (violations) return 2;
            return m.cfg.steps >= fuel ? 4 : 0;
        }

        if (sweep->parsed()) {
            auto rows = ivl::gui_depth_sweep(max_depth, fuel);
            std::cout << "depth paper d eiffel\n";
            for (const auto& r : rows) {
                std::cout << r.depth << ' ' << r.paper
                          << (r.paper_done ? "" : "*") << ' ' << r.d
                          << (r.d_done ? "" : "*") << ' ' << r.eiffel
                          << (r.eiffel_done ? "" : "*") << '\n';
            }
            std::cout << "(* = step budget exhausted before completion)\n";
            return 0;
        }

        if (fuzz_cmd->parsed()) {
            auto cases = ivl::fuzz_programs(seed, fuzz_n, fuzz_budget);
            uint64_t violations = 0;
            for (size_t i = 0; i < cases.size(); ++i) {
                ivl::Machine m(cases[i].program,
                               {ivl::ProtocolKind::Paper, false});
                ivl::OracleChecker oc(cases[i].program);
                while (m.cfg.steps < fuzz_steps) {
                    ivl::OkVerdict v = oc.assert_ok_full(m.cfg);
                    for (const auto& viol : v.violations) {
                        ++violations;
                        std::cout << "VIOLATION in case " << i << " at step "
                                  << m.cfg.steps << ": " << viol.reason
                                  << '\n';
                    }
                    if (!m.step()) break;
                }
            }
            std::cout << "cases: " << cases.size()
                      << " violations: " << violations << '\n';
            return violations ? 2 : 0;
        }

        if (corpus_cmd->parsed()) {
            auto results = ivl::run_corpus(filter, fuel);
            bool all = true;
            for (const auto& r : results) {
                std::cout << (r.passed ? "PASS " : "FAIL ") << r.name;
                if (!r.detail.empty()) std::cout << "  (" << r.detail << ')';
                std::cout << '\n';
                all = all && r.passed;
            }
            return all ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 3;
}
