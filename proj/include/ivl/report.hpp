#ifndef IVL_REPORT_HPP
#define IVL_REPORT_HPP

#include <string>

#include "ivl/interp.hpp"
#include "ivl/protocols.hpp"

namespace ivl {

constexpr int kReportSchemaVersion = 1;

/// Counter report as a line-delimited JSON record:
/// {schema_version, mode, total, per_class, per_site, steps, outcome}.
std::string counter_report_json(const ProtocolMode& mode, const RunResult& r);

std::string counter_report_text(const ProtocolMode& mode, const RunResult& r);

const char* outcome_name(RunResult::Outcome o);

}  // namespace ivl

#endif
