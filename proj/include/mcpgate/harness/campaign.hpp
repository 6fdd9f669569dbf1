#ifndef MCPGATE_HARNESS_CAMPAIGN_HPP
#define MCPGATE_HARNESS_CAMPAIGN_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcpgate/config.hpp"
#include "mcpgate/gateway.hpp"
#include "mcpgate/harness/agent.hpp"
#include "mcpgate/harness/registry.hpp"
#include "mcpgate/harness/scripted_server.hpp"
#include "mcpgate/verifier.hpp"

namespace mcpgate::harness {

/// How a scenario decides whether the attack reached its goal.
///   needle_received   - a server's tool saw an argument containing `needle`
///   tool_called       - a server's tool was invoked at all
///   message_delivered - the agent saw `needle` at least `min_count` times
struct AttackPredicate {
    std::string kind;
    std::string server;
    std::string tool;
    std::string needle;
    std::size_t min_count = 1;

    static AttackPredicate from_json(const json& j);
};

/// Declarative end-to-end scenario: a world of scripted servers, seeded
/// approvals and capabilities, an agent script, and (for attacks) the
/// predicate telling whether the attack succeeded.
struct Scenario {
    std::string id;          // "TV8" or "benign-03"
    std::string vector_id;   // empty for benign scenarios
    std::string description;
    bool partial = false;
    std::string consent_policy = "deny"; // approve | deny | ignore
    json config;             // gateway config fragments (labels, domains, ...)
    std::vector<ServerSpec> servers;
    std::vector<json> approvals;    // {server, tool, phase?, version?}
    std::vector<json> capabilities; // {tool, scope, params?, ttl_ms?}
    std::vector<json> script;
    std::string expected_blocked_by;
    std::optional<AttackPredicate> attack;

    static Scenario from_json(const json& j);
    static Scenario load(const std::string& path);
};

/// Everything one scenario run produced, enough to re-verify offline.
struct RunResult {
    std::string scenario_id;
    std::string vector_id;
    std::string category;      // registry category, or "benign"
    bool is_attack = false;
    bool partial = false;
    bool attack_succeeded = false;
    bool blocked = false;
    std::string blocking_layer;
    std::string reason;
    std::string expected_blocked_by;
    LayerToggles layers;
    Trace trace;
    GatewayConfig config_used;
    PinStore pins_used;
    SystemModel model_used;
};

RunResult run_scenario(const Scenario& scenario, const LayerToggles& layers,
                       std::int64_t start_ms = 1700000000000LL);

/// Loads every *.json scenario under a directory, sorted by filename.
std::vector<Scenario> load_scenarios(const std::string& dir);

/// CSV with one row per run: vector_id,category,outcome,blocking_layer,reason.
std::string results_csv(const std::vector<RunResult>& results);

/// Offline verification of a run's trace against the world it ran in.
std::vector<VerificationReport> verify_run(const RunResult& run);

} // namespace mcpgate::harness

#endif
