#pragma once

#include <string>

#include "choreeq/equilibrium.hpp"
#include "choreeq/extensions.hpp"
#include "choreeq/instance.hpp"
#include "choreeq/solver.hpp"

namespace choreeq {

// Renders a solve outcome as deterministic JSON: allocation, prices, the
// achieved certificate quantities, the verification report, and an optional
// pointer to the trace file. Re-rendering identical inputs yields identical
// bytes.
std::string result_json(const EquilibriumCertificate& eq, const KktCertificate* kkt,
                        const VerifyReport* verify, const std::string& category = "",
                        const std::string& trace_file = "");

// Mixed-manna outcome (category plus the regime's payload).
std::string mixed_result_json(const MixedSolution& sol, const VerifyReport* verify,
                              const std::string& trace_file = "");

}  // namespace choreeq
