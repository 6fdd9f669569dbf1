#include "mcpgate/harness/registry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>

namespace mcpgate::harness {

namespace {

std::vector<ThreatVector> build_registry() {
    std::vector<ThreatVector> v;
    auto add = [&v](std::string id, std::string cat, std::string cat_name,
                    std::string name, std::string surface, std::string actor,
                    std::set<std::string> covered, std::string expected,
                    bool implemented, bool partial, std::string property) {
        v.push_back(ThreatVector{std::move(id), std::move(cat),
                                 std::move(cat_name), std::move(name),
                                 std::move(surface), std::move(actor),
                                 std::move(covered), std::move(expected),
                                 implemented, partial, std::move(property)});
    };

    // TC1: Tool Poisoning
    add("TV1", "TC1", "Tool Poisoning", "Description injection", "S_tool",
        "Developer", {"cta", "rpe"}, "rpe", true, false, "");
    add("TV2", "TC1", "Tool Poisoning", "Schema manipulation", "S_tool",
        "Developer", {"cac", "cta", "rpe"}, "rpe", false, true, "");
    add("TV3", "TC1", "Tool Poisoning", "Return value poisoning", "S_tool",
        "External", {"cta", "rpe"}, "rpe", true, false, "");
    add("TV4", "TC1", "Tool Poisoning", "Tool shadowing", "S_tool",
        "Developer", {"cta", "rpe"}, "cta", true, false, "tool-integrity");

    // TC2: Rug Pull & Mutation
    add("TV5", "TC2", "Rug Pull & Mutation", "Post-approval mutation",
        "S_server", "Developer", {"cta"}, "cta", true, false,
        "tool-integrity");
    add("TV6", "TC2", "Rug Pull & Mutation", "Version rollback", "S_server",
        "Developer", {"cta"}, "cta", true, false, "");
    add("TV7", "TC2", "Rug Pull & Mutation", "Capability escalation",
        "S_server", "Developer", {"cta", "rpe"}, "cac", false, true, "");

    // TC3: Cross-Server Data Leakage
    add("TV8", "TC3", "Cross-Server Data Leakage", "Exfiltration via logging",
        "S_compose", "External", {"ift", "rpe"}, "ift", true, false,
        "data-confinement");
    add("TV9", "TC3", "Cross-Server Data Leakage", "Context bleed",
        "S_compose", "External", {"ift"}, "ift", true, false,
        "context-isolation");
    add("TV10", "TC3", "Cross-Server Data Leakage", "Channel coercion",
        "S_compose", "External", {}, "", false, false, "");
    add("TV11", "TC3", "Cross-Server Data Leakage", "Sampling abuse",
        "S_transport", "Server", {"ift"}, "ift", false, true,
        "data-confinement");

    // TC4: Privilege Escalation
    add("TV12", "TC4", "Privilege Escalation", "Capability chaining",
        "S_compose", "External", {"cac", "ift", "rpe"}, "cac", true, false,
        "privilege-boundedness");
    add("TV13", "TC4", "Privilege Escalation", "Consent bypass", "S_tool",
        "External", {"cac", "rpe"}, "rpe", true, false, "");
    add("TV14", "TC4", "Privilege Escalation", "Role confusion",
        "S_transport", "External", {"cac", "rpe"}, "cac", false, true, "");

    // TC5: Server Trust Violations
    add("TV15", "TC5", "Server Trust Violations", "Impersonation", "S_server",
        "External", {"cta"}, "cta", true, false, "tool-integrity");
    add("TV16", "TC5", "Server Trust Violations", "Supply chain compromise",
        "S_server", "Developer", {"cta", "rpe"}, "", false, false,
        "tool-integrity");
    add("TV17", "TC5", "Server Trust Violations", "Dependency hijacking",
        "S_server", "External", {"cta"}, "", false, false, "tool-integrity");

    // TC6: Context Manipulation
    add("TV18", "TC6", "Context Manipulation", "Prompt injection via tool",
        "S_tool", "External", {"ift", "rpe"}, "rpe", true, false, "");
    add("TV19", "TC6", "Context Manipulation", "Memory poisoning", "S_compose",
        "External", {}, "", false, false, "");
    add("TV20", "TC6", "Context Manipulation", "Resource injection", "S_tool",
        "External", {"ift", "rpe"}, "rpe", true, false, "");

    // TC7: Protocol-Level Vulnerabilities
    add("TV21", "TC7", "Protocol-Level Vulnerabilities", "Session hijacking",
        "S_transport", "External", {"rpe"}, "protocol", true, false, "");
    add("TV22", "TC7", "Protocol-Level Vulnerabilities", "Replay attacks",
        "S_transport", "External", {"cta", "rpe"}, "protocol", true, false,
        "");
    add("TV23", "TC7", "Protocol-Level Vulnerabilities",
        "Cross-protocol confusion", "S_compose", "External", {"rpe"}, "",
        false, false, "context-isolation");

    return v;
}

const std::array<std::pair<const char*, int>, 5> kReferencePct = {{
    {"cac", 17},
    {"cta", 39},
    {"ift", 22},
    {"rpe", 70},
    {"combined", 91},
}};

int reference_pct(const std::string& layer) {
    for (const auto& [name, pct] : kReferencePct)
        if (layer == name) return pct;
    return 0;
}

std::string join_sorted(const std::set<std::string>& items, char sep) {
    std::string out;
    for (const auto& s : items) {
        if (!out.empty()) out += sep;
        out += s;
    }
    return out;
}

} // namespace

const std::vector<ThreatVector>& threat_registry() {
    static const std::vector<ThreatVector> registry = build_registry();
    return registry;
}

const ThreatVector* find_vector(const std::string& id) {
    for (const auto& tv : threat_registry())
        if (tv.id == id) return &tv;
    return nullptr;
}

std::string registry_csv() {
    std::ostringstream out;
    out << "id,category,category_name,name,surface,actor,covered_by,"
           "expected_blocked_by,implemented,partial,mapped_property\n";
    for (const auto& tv : threat_registry()) {
        out << tv.id << ',' << tv.category << ",\"" << tv.category_name
            << "\",\"" << tv.name << "\"," << tv.surface << ',' << tv.actor
            << ',' << join_sorted(tv.covered_by, ';') << ','
            << tv.expected_blocked_by << ',' << (tv.implemented ? "yes" : "no")
            << ',' << (tv.partial ? "yes" : "no") << ',' << tv.mapped_property
            << '\n';
    }
    return out.str();
}

CoverageReport compute_coverage() {
    const auto& registry = threat_registry();
    const int total = static_cast<int>(registry.size());

    std::vector<std::string> categories;
    std::map<std::string, int> category_sizes;
    for (const auto& tv : registry) {
        if (!category_sizes.count(tv.category)) categories.push_back(tv.category);
        ++category_sizes[tv.category];
    }

    CoverageReport report;
    auto make_row = [&](const std::string& layer,
                        const std::set<std::string>& vectors) {
        CoverageRow row;
        row.layer = layer;
        row.vectors = vectors;
        row.computed_pct = static_cast<int>(std::lround(
            100.0 * static_cast<double>(vectors.size()) / total));
        row.reference_pct = reference_pct(layer);
        row.matches_reference = row.computed_pct == row.reference_pct;
        for (const auto& cat : categories) {
            int covered = 0;
            for (const auto& tv : registry)
                if (tv.category == cat && vectors.count(tv.id)) ++covered;
            row.cells.emplace_back(cat,
                                   std::make_pair(covered, category_sizes[cat]));
        }
        return row;
    };

    std::set<std::string> combined;
    for (const char* layer : {"cac", "cta", "ift", "rpe"}) {
        std::set<std::string> covered;
        for (const auto& tv : registry)
            if (tv.covered_by.count(layer)) covered.insert(tv.id);
        combined.insert(covered.begin(), covered.end());
        report.rows.push_back(make_row(layer, covered));
    }
    report.rows.push_back(make_row("combined", combined));
    for (const auto& tv : registry)
        if (!combined.count(tv.id)) report.uncovered.insert(tv.id);
    return report;
}

std::string CoverageReport::render() const {
    std::ostringstream out;
    out << "layer     ";
    if (!rows.empty())
        for (const auto& [cat, counts] : rows.front().cells) out << ' ' << cat;
    out << "  computed  reference\n";
    for (const auto& row : rows) {
        out << row.layer;
        for (std::size_t i = row.layer.size(); i < 10; ++i) out << ' ';
        for (const auto& [cat, counts] : row.cells) {
            const auto [covered, total] = counts;
            const char* glyph = covered == 0        ? " - "
                                : covered == total  ? " * "
                                                    : " o ";
            out << glyph << ' ';
        }
        out << "  " << row.computed_pct << "%       " << row.reference_pct
            << '%';
        if (!row.matches_reference)
            out << "  (!) computed value differs from the reference analysis";
        out << '\n';
    }
    out << "uncovered:";
    for (const auto& id : uncovered) out << ' ' << id;
    out << '\n';
    return out.str();
}

} // namespace mcpgate::harness
