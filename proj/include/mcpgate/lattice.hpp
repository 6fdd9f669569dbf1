#ifndef MCPGATE_LATTICE_HPP
#define MCPGATE_LATTICE_HPP

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mcpgate/util.hpp"

namespace mcpgate {

/// Declared form of a finite security lattice: labels, directed order pairs
/// (lower, higher), and the designated bounds. Labels are identified by
/// their symbolic name.
struct LatticeDecl {
    std::vector<std::string> labels;
    std::vector<std::pair<std::string, std::string>> order;
    std::string bottom;
    std::string top;
};

struct LatticeIssue {
    enum class Kind {
        DuplicateLabel,
        UnknownLabel,
        AntisymmetryViolation, // cycle through distinct labels
        MissingBottom,         // bottom does not flow to some label
        MissingTop,            // some label does not flow to top
        MissingJoin,           // pair without a least upper bound
        Unreachable,           // label not reachable from bottom
    };
    Kind kind;
    std::string detail;
};

struct LatticeReport {
    std::vector<LatticeIssue> issues;
    bool ok() const { return issues.empty(); }
};

/// Reports every violated lattice axiom in the declaration. An empty report
/// means Lattice construction will succeed and all operations are total.
LatticeReport validate_lattice(const LatticeDecl& decl);

/// Finite security lattice. Immutable after construction; the can-flow-to
/// relation is the reflexive-transitive closure of the declared order.
class Lattice {
public:
    /// Throws ConfigError when the declaration fails validation.
    explicit Lattice(LatticeDecl decl);

    bool has_label(std::string_view id) const;
    bool can_flow_to(std::string_view a, std::string_view b) const;
    const std::string& join(std::string_view a, std::string_view b) const;

    const std::string& bottom() const { return decl_.bottom; }
    const std::string& top() const { return decl_.top; }
    const std::vector<std::string>& labels() const { return decl_.labels; }
    const LatticeDecl& decl() const { return decl_; }
    std::size_t size() const { return decl_.labels.size(); }

    /// Hash of the canonical declaration; embedded in trace headers.
    Digest digest() const;

    /// The shipped default: public ⊑ internal ⊑ confidential ⊑ restricted.
    static Lattice default_chain();

private:
    std::size_t index_of(std::string_view id) const; // throws ConfigError

    LatticeDecl decl_;
    std::map<std::string, std::size_t, std::less<>> index_;
    std::vector<std::vector<bool>> leq_;       // closure matrix
    std::vector<std::vector<std::size_t>> join_; // precomputed joins
};

/// Group of servers and tools governed by one trust policy, with a
/// clearance label for inbound flows.
struct TrustDomain {
    std::string id;
    std::set<std::string> servers;
    std::set<std::string> tools;
    std::string policy;
    std::string clearance;
};

/// Checks that domains partition the configured server set and that every
/// listed tool is hosted by a listed server. Returns problem descriptions.
std::vector<std::string> validate_domains(
    const std::vector<TrustDomain>& domains,
    const std::set<std::string>& servers,
    const std::map<std::string, std::string>& tool_servers);

/// Total labeling of tools and resources. Unassigned ids default to the
/// most restrictive label.
class LabelAssignment {
public:
    LabelAssignment() = default;
    LabelAssignment(std::map<std::string, std::string> labels,
                    std::string default_label)
        : labels_(std::move(labels)), default_label_(std::move(default_label)) {}

    const std::string& label_of(const std::string& id) const;
    void assign(const std::string& id, const std::string& label);
    const std::map<std::string, std::string>& entries() const { return labels_; }
    const std::string& default_label() const { return default_label_; }

private:
    std::map<std::string, std::string> labels_;
    std::string default_label_ = "restricted";
};

} // namespace mcpgate

#endif
