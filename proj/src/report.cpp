#include "ivl/report.hpp"

#include <sstream>

#include "json.hpp"

namespace ivl {

const char* outcome_name(RunResult::Outcome o) {
    switch (o) {
        case RunResult::Value: return "value";
        case RunResult::Error: return "error";
        case RunResult::FuelExhausted: return "fuel-exhausted";
    }
    return "?";
}

std::string counter_report_json(const ProtocolMode& mode, const RunResult& r) {
    nlohmann::json j;
    j["schema_version"] = kReportSchemaVersion;
    j["mode"] = protocol_name(mode.kind);
    j["total"] = r.checks.total;
    nlohmann::json pc = nlohmann::json::object();
    for (const auto& [cls, n] : r.checks.per_class) pc[cls] = n;
    j["per_class"] = pc;
    nlohmann::json ps = nlohmann::json::object();
    for (const auto& [site, n] : r.checks.per_site)
        ps[check_site_name(site)] = n;
    j["per_site"] = ps;
    j["steps"] = r.steps;
    j["outcome"] = outcome_name(r.outcome);
    return j.dump();
}

std::string counter_report_text(const ProtocolMode& mode, const RunResult& r) {
    std::ostringstream os;
    os << "mode: " << protocol_name(mode.kind) << '\n';
    os << "outcome: " << outcome_name(r.outcome) << '\n';
    os << "steps: " << r.steps << '\n';
    os << "total checks: " << r.checks.total << '\n';
    for (const auto& [site, n] : r.checks.per_site)
        os << "  " << check_site_name(site) << ": " << n << '\n';
    for (const auto& [cls, n] : r.checks.per_class)
        os << "  class " << cls << ": " << n << '\n';
    return os.str();
}

}  // namespace ivl
