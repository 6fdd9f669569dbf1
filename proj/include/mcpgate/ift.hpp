#ifndef MCPGATE_IFT_HPP
#define MCPGATE_IFT_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcpgate/lattice.hpp"
#include "mcpgate/model.hpp"
#include "mcpgate/util.hpp"

namespace mcpgate {

/// Provenance record for one value that entered the agent's context.
/// The raw bytes are retained so later calls can be screened for partial
/// copies, not just verbatim reuse.
struct TaintedValue {
    std::string value;
    Digest digest{};
    std::string label;
    std::string origin_domain;
    std::string origin_server;
    std::uint64_t seq = 0;

    json to_json() const;
    static TaintedValue from_json(const json& j);
};

/// Per-session store of tainted values, partitioned by origin server.
class TaintStore {
public:
    void add(TaintedValue v);
    const std::vector<TaintedValue>& values() const { return values_; }
    std::vector<const TaintedValue*> from_server(const std::string& server) const;
    void clear();
    std::size_t size() const { return values_.size(); }

private:
    std::vector<TaintedValue> values_;
};

/// Labels every string leaf of a response plus the whole response body
/// with join(tool label, join of input taint labels).
std::vector<TaintedValue> label_response(const json& response_body,
                                         const ToolDescriptor& tool,
                                         const std::string& origin_domain,
                                         const std::vector<std::string>& input_labels,
                                         const Lattice& lattice,
                                         std::uint64_t seq);

/// Explicit downgrade authorization. A rule matches a taint when label
/// and origin domain equal and, if digest_hex is set, the digest too.
struct DeclassificationRule {
    std::string label;
    std::string origin_domain;
    std::string target_domain;
    std::string authorizer;
    std::optional<std::string> digest_hex;

    bool matches(const TaintedValue& taint, const std::string& target) const;

    json to_json() const;
    static DeclassificationRule from_json(const json& j);
};

/// Permitted cross-domain transfer pairs for context isolation.
class FlowPolicy {
public:
    void permit(const std::string& from, const std::string& to);
    bool permits(const std::string& from, const std::string& to) const;

    json to_json() const;
    static FlowPolicy from_json(const json& j);

private:
    std::vector<std::pair<std::string, std::string>> pairs_;
};

struct TaintMatch {
    const TaintedValue* taint = nullptr;
    std::string arg_path; // JSON pointer of the matched argument leaf
};

struct IftVerdict {
    bool allowed = true;
    std::string arg_path;
    std::string label;
    std::string reason;
    /// Declassification rules applied, one audit note per use.
    std::vector<std::string> audit_notes;
};

/// Finds tainted content inside the argument object: exact digest match
/// for any stored value, substring match for stored values once any
/// span of span_threshold bytes reappears.
std::vector<TaintMatch> scan_arguments(const json& args, const TaintStore& store,
                                       std::size_t span_threshold);

/// Outflow check: every taint reaching the target domain must satisfy
/// label ⊑ clearance or carry an explicit declassification.
IftVerdict check_outflow(const json& args, const TrustDomain& target,
                         const TaintStore& store, const Lattice& lattice,
                         const std::vector<DeclassificationRule>& declass,
                         std::size_t span_threshold);

/// Context isolation check: content fetched from server s_i may not
/// appear in a call to server s_j unless the domain pair is permitted.
IftVerdict check_context_transfer(const json& args, const std::string& target_server,
                                  const std::string& target_domain,
                                  const TaintStore& store,
                                  const FlowPolicy& policy,
                                  std::size_t span_threshold);

} // namespace mcpgate

#endif
