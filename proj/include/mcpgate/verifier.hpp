#ifndef MCPGATE_VERIFIER_HPP
#define MCPGATE_VERIFIER_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcpgate/cta.hpp"
#include "mcpgate/ift.hpp"
#include "mcpgate/lattice.hpp"
#include "mcpgate/model.hpp"
#include "mcpgate/util.hpp"

namespace mcpgate {

struct Violation {
    std::uint64_t seq = 0;
    std::string witness;
};

/// Outcome of one property check. Reporting is minimal by design: the
/// first violating event plus a count of all violations found.
struct VerificationReport {
    std::string property;
    bool holds = true;
    std::optional<Violation> first;
    std::size_t violation_count = 0;
    std::size_t events_checked = 0;
    double wall_ms = 0.0;

    json to_json() const;
};

/// Tool integrity: every allowed invocation carries an attestation whose
/// definition hash equals the pinned approval. Constant work per event.
VerificationReport check_tool_integrity(std::span<const TraceEvent> events,
                                        const PinStore& pins);
VerificationReport check_tool_integrity(const Trace& trace, const PinStore& pins);

/// Data confinement: walks the trace once, tracking every introduced
/// datum's label and the domains it has reached; a datum entering a
/// domain whose clearance cannot hold its label without an explicit
/// declassification is a violation. Each (datum, domain) pair is judged
/// at its first crossing.
VerificationReport check_data_confinement(
    std::span<const TraceEvent> events, const Lattice& lattice,
    const std::vector<TrustDomain>& domains,
    const std::vector<DeclassificationRule>& declass);
VerificationReport check_data_confinement(
    const Trace& trace, const Lattice& lattice,
    const std::vector<TrustDomain>& domains,
    const std::vector<DeclassificationRule>& declass);

/// Independent confinement oracle: enumerates each datum's propagation
/// separately with a full event scan per datum. Refuses traces longer
/// than kOracleEventBound events.
inline constexpr std::size_t kOracleEventBound = 12;
VerificationReport brute_force_confinement_oracle(
    std::span<const TraceEvent> events, const Lattice& lattice,
    const std::vector<TrustDomain>& domains,
    const std::vector<DeclassificationRule>& declass);

/// Privilege boundedness: replays the trace against the system model and
/// checks every exercised permission against eff(σ, a) recomputed in the
/// pre-state of the event.
VerificationReport check_privilege_boundedness(std::span<const TraceEvent> events,
                                               const SystemModel& model);
VerificationReport check_privilege_boundedness(const Trace& trace,
                                               const SystemModel& model);

/// Context isolation: knowledge learned from server s_i may not appear in
/// the inputs of a call to a different server s_j unless the domain pair
/// is flow-policy permitted.
VerificationReport check_context_isolation(std::span<const TraceEvent> events,
                                           const FlowPolicy& policy,
                                           const std::vector<TrustDomain>& domains);
VerificationReport check_context_isolation(const Trace& trace,
                                           const FlowPolicy& policy,
                                           const std::vector<TrustDomain>& domains);

std::vector<VerificationReport> verify_all(
    const Trace& trace, const PinStore& pins, const SystemModel& model,
    const Lattice& lattice, const std::vector<TrustDomain>& domains,
    const std::vector<DeclassificationRule>& declass, const FlowPolicy& policy);

json reports_to_json(const std::vector<VerificationReport>& reports);

} // namespace mcpgate

#endif
