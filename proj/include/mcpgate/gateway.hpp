#ifndef MCPGATE_GATEWAY_HPP
#define MCPGATE_GATEWAY_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcpgate/cac.hpp"
#include "mcpgate/config.hpp"
#include "mcpgate/cta.hpp"
#include "mcpgate/envelope.hpp"
#include "mcpgate/ift.hpp"
#include "mcpgate/model.hpp"
#include "mcpgate/protocol.hpp"
#include "mcpgate/rpe.hpp"
#include "mcpgate/util.hpp"

namespace mcpgate {

/// JSON-RPC error codes the gateway emits when a layer blocks an action.
inline constexpr int kErrCapabilityDenied = -32050;
inline constexpr int kErrIntegrityFailure = -32051;
inline constexpr int kErrFlowViolation = -32052;
inline constexpr int kErrPolicySuppressed = -32053;
inline constexpr int kErrConsentDenied = -32054;
inline constexpr int kErrUpstreamUnavailable = -32000;
inline constexpr int kErrProtocolViolation = -32600;

/// Upstream MCP server as the gateway sees it: sealed request in, sealed
/// response out. Notifications yield no response.
class Upstream {
public:
    virtual ~Upstream() = default;
    virtual std::string id() const = 0;
    virtual std::optional<SignedEnvelope> handle(const SignedEnvelope& request) = 0;
};

struct AuditEvent {
    std::int64_t ts_ms = 0;
    std::string session;
    std::uint64_t seq = 0; // trace event the verdict belongs to
    std::string layer;
    std::string verdict; // deny | modify | flag
    std::string reason;
    std::string subject; // tool or method
    std::string payload_sha256;

    json to_json() const;
};

/// Proxy pipeline between one host agent and its upstream servers. Each
/// client message runs the full defense stack, is sealed toward the
/// upstream, and the response runs the return stack before delivery.
class Gateway {
public:
    struct Outcome {
        enum class Status { Delivered, Pending, NoResponse };
        Status status = Status::Delivered;
        McpMessage response;
        std::string consent_id;
        /// Layer that generated an error response, empty when forwarded.
        std::string blocked_by;
        std::string reason;

        bool blocked() const { return !blocked_by.empty(); }
    };

    Gateway(GatewayConfig config, std::shared_ptr<Clock> clock,
            std::string session_id = "session-1");

    void register_upstream(std::shared_ptr<Upstream> upstream);

    void add_capability(Capability cap);
    const EcdsaPrivateKey& signing_key() const { return key_; }
    const std::string& id() const { return gateway_id_; }

    PinStore& pins() { return pins_; }
    const PinStore& pins() const { return pins_; }
    /// Pins the tool exactly as described, as if the user approved it now.
    void approve(const ToolDescriptor& tool, const Digest& deps_digest);

    Outcome client_request(const std::string& server, const McpMessage& msg);

    std::vector<ConsentBroker::Request> pending_consents();
    struct ConsentAnswer {
        bool ok = false;
        std::string error; // "not-found" | "conflict"
        bool approved = false;
        std::optional<Outcome> released;
    };
    ConsentAnswer answer_consent(const std::string& id, bool approve);
    /// Times out overdue consents, suppressing their held actions.
    std::vector<std::pair<std::string, Outcome>> sweep_consents();

    const Trace& trace() const { return trace_; }
    const std::vector<AuditEvent>& audit() const { return audit_; }
    const SystemModel& model() const { return model_; }
    const GatewayConfig& config() const { return config_; }
    const AttestationLog& attestation_log() const { return attestation_log_; }
    const Lattice& lattice() const { return lattice_; }
    const TaintStore& taints() const { return taints_; }
    SessionPhase phase(const std::string& server) const;

    /// Persists trace and audit log under the configured paths.
    void flush();

private:
    struct UpstreamSession {
        UpstreamSession(std::string session, std::string agent, std::string server)
            : protocol(std::move(session), std::move(agent), std::move(server)) {}
        SessionState protocol;
        std::map<std::string, ToolDescriptor> tools;
        std::map<std::string, ToolAttestationRecord> tars;
    };

    /// Everything accumulated for one client action as it moves through
    /// the stages; carried across a consent hold.
    struct PipelineState {
        std::string server;
        ActionContext ctx;
        TraceEvent event;
        std::optional<ToolDescriptor> descriptor;
        std::vector<std::string> input_labels;
        std::size_t resume_index = 0;
    };

    UpstreamSession& session(const std::string& server);
    const TrustDomain* domain_of(const std::string& server) const;
    void audit_verdict(const TraceEvent& event, const std::string& layer);
    void record_event(TraceEvent event);
    Outcome fail(PipelineState& ps, const std::string& layer, int code,
                 const std::string& reason);
    Outcome forward_and_deliver(UpstreamSession& sess, PipelineState& ps);
    void ingest_tools_list(UpstreamSession& sess, PipelineState& ps,
                           McpMessage& resp);
    void ingest_data_response(UpstreamSession& sess, PipelineState& ps,
                              const McpMessage& resp);
    Outcome resolve_consent(const std::string& id, bool approve,
                            const char* denial_reason);

    GatewayConfig config_;
    std::shared_ptr<Clock> clock_;
    std::string session_id_;
    std::string gateway_id_ = "gateway";

    EcdsaPrivateKey key_;
    Keyring server_keys_;
    Keyring authority_keys_;

    Lattice lattice_;
    SystemModel model_;
    SystemState state_;
    Trace trace_;
    std::uint64_t next_seq_ = 1;

    PinStore pins_;
    AttestationLog attestation_log_;

    std::vector<Capability> capabilities_;
    CompositionPolicy composition_;
    std::vector<std::string> tool_history_;

    TaintStore taints_;
    FlowPolicy flow_policy_;

    std::unique_ptr<SanitizerAutomaton> sanitizer_;
    PolicyStack post_stack_;
    ConsentBroker broker_;
    std::map<std::string, PipelineState> held_;

    std::map<std::string, std::shared_ptr<Upstream>> upstreams_;
    std::map<std::string, UpstreamSession> sessions_;
    NonceCache nonce_cache_;

    std::vector<AuditEvent> audit_;
};

} // namespace mcpgate

#endif
