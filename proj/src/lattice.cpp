#include "mcpgate/lattice.hpp"

#include <algorithm>
#include <optional>

#include <nlohmann/json.hpp>

#include "mcpgate/crypto.hpp"

namespace mcpgate {

namespace {

// Reflexive-transitive closure over the declared pairs (Floyd-Warshall on
// the adjacency matrix; lattices here are small).
std::vector<std::vector<bool>> closure(
    std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    std::vector<std::vector<bool>> leq(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) leq[i][i] = true;
    for (auto [lo, hi] : edges) leq[lo][hi] = true;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            if (leq[i][k])
                for (std::size_t j = 0; j < n; ++j)
                    if (leq[k][j]) leq[i][j] = true;
    return leq;
}

} // namespace

LatticeReport validate_lattice(const LatticeDecl& decl) {
    LatticeReport report;
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < decl.labels.size(); ++i) {
        if (!index.emplace(decl.labels[i], i).second) {
            report.issues.push_back({LatticeIssue::Kind::DuplicateLabel,
                                     "duplicate label '" + decl.labels[i] + "'"});
        }
    }
    auto lookup = [&](const std::string& id) -> std::optional<std::size_t> {
        auto it = index.find(id);
        if (it == index.end()) {
            report.issues.push_back(
                {LatticeIssue::Kind::UnknownLabel, "unknown label '" + id + "'"});
            return std::nullopt;
        }
        return it->second;
    };

    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& [lo, hi] : decl.order) {
        auto a = lookup(lo);
        auto b = lookup(hi);
        if (a && b) edges.emplace_back(*a, *b);
    }
    auto bot = lookup(decl.bottom);
    auto top = lookup(decl.top);
    if (!report.issues.empty() && (!bot || !top)) return report;

    const std::size_t n = decl.labels.size();
    auto leq = closure(n, edges);

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (leq[i][j] && leq[j][i]) {
                report.issues.push_back(
                    {LatticeIssue::Kind::AntisymmetryViolation,
                     "labels '" + decl.labels[i] + "' and '" + decl.labels[j] +
                         "' flow to each other"});
            }
        }
    }
    if (bot) {
        for (std::size_t i = 0; i < n; ++i) {
            if (!leq[*bot][i]) {
                report.issues.push_back({LatticeIssue::Kind::MissingBottom,
                                         "bottom does not flow to '" +
                                             decl.labels[i] + "'"});
            }
            if (!leq[*bot][i] || i == *bot) continue;
            // reachability from bottom equals the bound check on closures
        }
    }
    if (top) {
        for (std::size_t i = 0; i < n; ++i) {
            if (!leq[i][*top]) {
                report.issues.push_back({LatticeIssue::Kind::MissingTop,
                                         "'" + decl.labels[i] +
                                             "' does not flow to top"});
            }
        }
    }

    // Every pair needs a least upper bound: a common upper bound that flows
    // to all other common upper bounds.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            std::vector<std::size_t> ubs;
            for (std::size_t u = 0; u < n; ++u)
                if (leq[i][u] && leq[j][u]) ubs.push_back(u);
            bool found = false;
            for (std::size_t u : ubs) {
                if (std::all_of(ubs.begin(), ubs.end(),
                                [&](std::size_t v) { return leq[u][v]; })) {
                    found = true;
                    break;
                }
            }
            if (!found) {
                report.issues.push_back({LatticeIssue::Kind::MissingJoin,
                                         "no join for ('" + decl.labels[i] +
                                             "', '" + decl.labels[j] + "')"});
            }
        }
    }
    return report;
}

Lattice::Lattice(LatticeDecl decl) : decl_(std::move(decl)) {
    auto report = validate_lattice(decl_);
    if (!report.ok()) {
        std::string what = "invalid lattice:";
        for (const auto& issue : report.issues) what += " " + issue.detail + ";";
        throw ConfigError(what);
    }
    for (std::size_t i = 0; i < decl_.labels.size(); ++i)
        index_.emplace(decl_.labels[i], i);

    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& [lo, hi] : decl_.order)
        edges.emplace_back(index_.at(lo), index_.at(hi));
    const std::size_t n = decl_.labels.size();
    leq_ = closure(n, edges);

    join_.assign(n, std::vector<std::size_t>(n, 0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            std::vector<std::size_t> ubs;
            for (std::size_t u = 0; u < n; ++u)
                if (leq_[i][u] && leq_[j][u]) ubs.push_back(u);
            for (std::size_t u : ubs) {
                if (std::all_of(ubs.begin(), ubs.end(),
                                [&](std::size_t v) { return leq_[u][v]; })) {
                    join_[i][j] = u;
                    break;
                }
            }
        }
    }
}

std::size_t Lattice::index_of(std::string_view id) const {
    auto it = index_.find(id);
    if (it == index_.end())
        throw ConfigError("unknown security label '" + std::string(id) + "'");
    return it->second;
}

bool Lattice::has_label(std::string_view id) const {
    return index_.find(id) != index_.end();
}

bool Lattice::can_flow_to(std::string_view a, std::string_view b) const {
    return leq_[index_of(a)][index_of(b)];
}

const std::string& Lattice::join(std::string_view a, std::string_view b) const {
    return decl_.labels[join_[index_of(a)][index_of(b)]];
}

Digest Lattice::digest() const {
    nlohmann::json j;
    j["labels"] = decl_.labels;
    auto order = decl_.order;
    std::sort(order.begin(), order.end());
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& [lo, hi] : order) pairs.push_back({lo, hi});
    j["order"] = pairs;
    j["bottom"] = decl_.bottom;
    j["top"] = decl_.top;
    return sha256(j.dump());
}

Lattice Lattice::default_chain() {
    LatticeDecl decl;
    decl.labels = {"public", "internal", "confidential", "restricted"};
    decl.order = {{"public", "internal"},
                  {"internal", "confidential"},
                  {"confidential", "restricted"}};
    decl.bottom = "public";
    decl.top = "restricted";
    return Lattice(std::move(decl));
}

std::vector<std::string> validate_domains(
    const std::vector<TrustDomain>& domains,
    const std::set<std::string>& servers,
    const std::map<std::string, std::string>& tool_servers) {
    std::vector<std::string> problems;
    std::map<std::string, std::string> owner; // server -> domain
    for (const auto& d : domains) {
        for (const auto& s : d.servers) {
            auto [it, inserted] = owner.emplace(s, d.id);
            if (!inserted) {
                problems.push_back("server '" + s + "' listed in domains '" +
                                   it->second + "' and '" + d.id + "'");
            }
            if (!servers.count(s))
                problems.push_back("domain '" + d.id + "' lists unknown server '" +
                                   s + "'");
        }
        for (const auto& t : d.tools) {
            auto it = tool_servers.find(t);
            if (it == tool_servers.end()) {
                problems.push_back("domain '" + d.id + "' lists unknown tool '" +
                                   t + "'");
            } else if (!d.servers.count(it->second)) {
                problems.push_back("tool '" + t + "' in domain '" + d.id +
                                   "' is hosted by unlisted server '" +
                                   it->second + "'");
            }
        }
    }
    for (const auto& s : servers) {
        if (!owner.count(s))
            problems.push_back("server '" + s + "' belongs to no domain");
    }
    return problems;
}

const std::string& LabelAssignment::label_of(const std::string& id) const {
    auto it = labels_.find(id);
    return it == labels_.end() ? default_label_ : it->second;
}

void LabelAssignment::assign(const std::string& id, const std::string& label) {
    labels_[id] = label;
}

} // namespace mcpgate
