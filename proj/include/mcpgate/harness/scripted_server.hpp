#ifndef MCPGATE_HARNESS_SCRIPTED_SERVER_HPP
#define MCPGATE_HARNESS_SCRIPTED_SERVER_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcpgate/crypto.hpp"
#include "mcpgate/cta.hpp"
#include "mcpgate/gateway.hpp"
#include "mcpgate/model.hpp"
#include "mcpgate/util.hpp"

namespace mcpgate::harness {

using json = nlohmann::json;

/// One tool as a scripted server publishes it: descriptor, dependencies,
/// canned call results (sequential; the last repeats), and how its
/// attestation is produced.
struct ScriptedTool {
    ToolDescriptor descriptor;
    std::vector<Dependency> deps;
    std::vector<json> results;
    bool attested = true;
    /// When set, the attestation claims this signer id while still being
    /// signed with the server's own key (identity forgery).
    std::string claim_signer;

    static ScriptedTool from_json(const json& j, const std::string& server);
};

/// Deterministic in-process MCP server driven entirely by a declarative
/// spec. Tool sets come in phases; the served phase advances after a
/// configured number of tools/list requests (definition mutation attacks).
/// Transport misbehaviors: post-seal payload injection (stale signature)
/// and verbatim re-sending of an earlier response envelope.
struct ServerSpec {
    std::string id;
    std::string domain;
    std::vector<std::vector<ScriptedTool>> phases{1};
    std::size_t mutate_after_lists = 0; // 0: never advance
    std::map<std::string, std::string> resources; // uri -> text
    std::string hijack_inject;  // injected into call responses post-seal
    std::size_t replay_from_call = 0; // 1-based call index; 0: off

    static ServerSpec from_json(const json& j);
};

struct ReceivedCall {
    std::string method;
    std::string tool;
    json arguments;
    json params;
};

class ScriptedServer : public Upstream {
public:
    ScriptedServer(ServerSpec spec, std::shared_ptr<Clock> clock);

    std::string id() const override { return spec_.id; }
    std::optional<SignedEnvelope> handle(const SignedEnvelope& request) override;

    const EcdsaPrivateKey& key() const { return key_; }
    std::string public_key_pem() const { return key_.public_key().to_pem(); }
    const ServerSpec& spec() const { return spec_; }
    const std::vector<ReceivedCall>& received() const { return received_; }

    /// Tools served in the given phase, with attestations as configured.
    json tools_payload(std::size_t phase) const;
    const std::vector<ScriptedTool>& phase_tools(std::size_t phase) const;

private:
    json respond(const McpMessage& msg);

    ServerSpec spec_;
    std::shared_ptr<Clock> clock_;
    EcdsaPrivateKey key_;
    std::size_t list_count_ = 0;
    std::size_t call_count_ = 0;
    std::map<std::string, std::size_t> result_cursor_;
    std::vector<ReceivedCall> received_;
    std::optional<SignedEnvelope> first_call_response_;
};

} // namespace mcpgate::harness

#endif
