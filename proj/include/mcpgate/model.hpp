#ifndef MCPGATE_MODEL_HPP
#define MCPGATE_MODEL_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcpgate/lattice.hpp"
#include "mcpgate/protocol.hpp"
#include "mcpgate/util.hpp"

namespace mcpgate {

enum class Scope { Read, Write, Execute };

std::string_view scope_name(Scope s);
Scope scope_from_name(std::string_view name);

/// One declared permission: an operation kind on a resource class.
struct Permission {
    Scope kind = Scope::Execute;
    std::string resource_class;

    auto operator<=>(const Permission&) const = default;
    std::string to_string() const;
    static Permission parse(std::string_view s); // "read:fs"
};

/// Advertised tool definition plus the gateway-side annotations (hosting
/// server, declared permissions, security label).
struct ToolDescriptor {
    std::string name;
    std::string description;
    json schema;
    std::string version;
    std::vector<Permission> perm;
    std::string server;
    std::string label;

    /// Canonical definition object: sorted keys, no insignificant
    /// whitespace, covering name, description, schema only.
    json definition_json() const;
    Digest def_hash() const;

    json to_json() const;
    static ToolDescriptor from_json(const json& j);
};

struct SystemModel {
    std::set<std::string> agents;
    std::set<std::string> servers;
    std::map<std::string, ToolDescriptor> tools;
    std::set<std::string> resources;
    std::set<std::pair<std::string, std::string>> connections;
    LabelAssignment labeling;
    std::vector<TrustDomain> domains;
    /// Static capability grants: agent -> permissions held at Σ₀.
    std::map<std::string, std::set<Permission>> static_grants;

    const TrustDomain* domain_of_server(const std::string& server) const;
    const TrustDomain* domain_by_id(const std::string& id) const;
    const ToolDescriptor* find_tool(const std::string& name) const;

    Digest digest() const;
};

struct KnowledgeAdd {
    Digest digest{};
    std::string label;
    std::string origin_server;
    std::string origin_domain;

    json to_json() const;
    static KnowledgeAdd from_json(const json& j);
};

struct GrantDelta {
    bool revoke = false;
    std::string agent;
    Permission permission;

    json to_json() const;
    static GrantDelta from_json(const json& j);
};

enum class VerdictKind { Allow, Deny, Modify, Flag, Skip };

std::string_view verdict_kind_name(VerdictKind k);
VerdictKind verdict_kind_from_name(std::string_view name);

struct LayerVerdict {
    VerdictKind kind = VerdictKind::Skip;
    std::string reason;
};

/// One serialized LTS step. Events carry everything the offline verifier
/// needs: the action, per-layer verdicts, integrity hash, flow digests,
/// knowledge/permission deltas, and the state digest chain.
struct TraceEvent {
    std::uint64_t seq = 0;
    std::string session;
    std::int64_t ts_ms = 0;

    ActionLabel action = ActionLabel::Other;
    std::string method;
    std::string tool;
    std::string agent;
    std::string server;
    Digest arg_digest{};

    std::map<std::string, LayerVerdict> verdicts;

    std::optional<Digest> tar_def_hash;
    std::vector<Digest> input_digests;
    std::vector<KnowledgeAdd> knowledge_added;
    std::vector<Permission> exercised;
    std::vector<GrantDelta> grants;
    std::vector<std::string> activated_tools;
    /// Full descriptors for tools first admitted by this event, so a trace
    /// read back from disk carries enough to rebuild perm(t) during replay.
    std::vector<ToolDescriptor> tool_defs;

    Digest pre_digest{};
    Digest post_digest{};

    json to_json() const;
    static TraceEvent from_json(const json& j);
};

/// An event counts as allowed when no layer recorded a deny verdict.
bool event_allowed(const TraceEvent& event);

/// Mutable per-session state σ = (connections, knowledge, permissions).
/// Effective permissions are always recomputed from capabilities and
/// active tools, never cached.
class SystemState {
public:
    void connect(const std::string& agent, const std::string& server);
    void disconnect(const std::string& agent, const std::string& server);
    bool connected(const std::string& agent, const std::string& server) const;

    void add_knowledge(const std::string& agent, const std::string& server,
                       const KnowledgeAdd& k);
    const std::vector<KnowledgeAdd>* knowledge(const std::string& agent,
                                               const std::string& server) const;
    const std::map<std::string, std::vector<KnowledgeAdd>>* knowledge_partitions(
        const std::string& agent) const;

    void grant(const std::string& agent, const Permission& p);
    void revoke(const std::string& agent, const Permission& p);
    const std::set<Permission>& capabilities(const std::string& agent) const;

    void activate(const std::string& agent, const std::string& tool);
    const std::set<std::string>& active_tools(const std::string& agent) const;

    /// eff(σ, a) = cap(a) ∩ ⋃_{t ∈ active(σ,a)} perm(t), recomputed.
    std::set<Permission> effective_permissions(const std::string& agent,
                                               const SystemModel& model) const;

    json canonical_json() const;
    Digest digest() const;

    static SystemState initial(const SystemModel& model);

private:
    std::set<std::pair<std::string, std::string>> connections_;
    std::map<std::string, std::map<std::string, std::vector<KnowledgeAdd>>>
        knowledge_;
    std::map<std::string, std::set<Permission>> permissions_;
    std::map<std::string, std::set<std::string>> active_;
};

/// Applies one recorded event to the state (transition σ →λ σ′). Throws
/// ModelError when the event references an unknown tool or agent.
void apply_event(SystemState& state, const SystemModel& model,
                 const TraceEvent& event);

/// Value-semantics step wrapper.
SystemState step(const SystemState& state, const SystemModel& model,
                 const TraceEvent& event);

struct TraceHeader {
    Digest model_digest{};
    Digest lattice_digest{};
    Digest config_digest{};
    std::string session;
    std::int64_t created_ms = 0;

    json to_json() const;
    static TraceHeader from_json(const json& j);
};

struct CorruptTraceError : std::runtime_error {
    CorruptTraceError(const std::string& what, std::size_t index)
        : std::runtime_error(what), first_break(index) {}
    std::size_t first_break;
};

/// Durable event chain. Events are append-only and hash-chained through
/// pre/post state digests.
class Trace {
public:
    Trace() = default;
    explicit Trace(TraceHeader header) : header_(std::move(header)) {}

    const TraceHeader& header() const { return header_; }
    const std::vector<TraceEvent>& events() const { return events_; }
    std::vector<TraceEvent>& mutable_events() { return events_; }

    /// Appends after checking seq monotonicity and digest-chain
    /// continuity. Throws CorruptTraceError on a mismatch.
    void record(TraceEvent event);

    void save(const std::string& path) const;
    std::string serialize() const; // JSON-Lines
    static Trace load(const std::string& path);
    static Trace parse(std::string_view jsonl);

    bool operator==(const Trace& other) const;

private:
    TraceHeader header_;
    std::vector<TraceEvent> events_;
};

} // namespace mcpgate

#endif
