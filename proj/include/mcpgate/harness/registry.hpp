#ifndef MCPGATE_HARNESS_REGISTRY_HPP
#define MCPGATE_HARNESS_REGISTRY_HPP

#include <set>
#include <string>
#include <vector>

namespace mcpgate::harness {

/// One attack vector from the threat taxonomy. `covered_by` is the
/// per-vector analysis of which defense layers address it; it is the
/// ground truth for every coverage number this project reports.
struct ThreatVector {
    std::string id;            // "TV1"
    std::string category;      // "TC1"
    std::string category_name; // "Tool Poisoning"
    std::string name;          // "Description injection"
    std::string surface;       // S_tool | S_server | S_compose | S_transport
    std::string actor;         // Developer | External | Server
    std::set<std::string> covered_by; // subset of {cac, cta, ift, rpe}
    /// Layer the gateway names when it blocks the executable scenario
    /// ("protocol" for envelope/lifecycle defenses); empty when the vector
    /// has no end-to-end scenario.
    std::string expected_blocked_by;
    bool implemented = false;  // full end-to-end scenario exists
    bool partial = false;      // scenario approximates the vector
    /// Offline verification property the undefended trace violates, when one
    /// applies: tool-integrity | data-confinement | privilege-boundedness |
    /// context-isolation.
    std::string mapped_property;
};

const std::vector<ThreatVector>& threat_registry();
const ThreatVector* find_vector(const std::string& id);

/// Stable CSV rendering of the registry (frozen by a golden-file test).
std::string registry_csv();

/// Layer rows of the coverage matrix, computed from covered_by sets, with
/// the reference percentages the original analysis reported. Rows whose
/// computed percentage differs from the reference carry a flag.
struct CoverageRow {
    std::string layer;               // "cac" | "cta" | "ift" | "rpe" | "combined"
    std::set<std::string> vectors;   // covered vector ids
    int computed_pct = 0;            // round(100 * vectors / 23)
    int reference_pct = 0;
    bool matches_reference = false;
    /// Per-category coverage: category id -> (covered, total).
    std::vector<std::pair<std::string, std::pair<int, int>>> cells;
};

struct CoverageReport {
    std::vector<CoverageRow> rows;   // cac, cta, ift, rpe, combined
    std::set<std::string> uncovered; // vector ids no layer addresses
    std::string render() const;      // human-readable table
};

CoverageReport compute_coverage();

} // namespace mcpgate::harness

#endif
