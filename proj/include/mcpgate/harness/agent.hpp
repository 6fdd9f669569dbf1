#ifndef MCPGATE_HARNESS_AGENT_HPP
#define MCPGATE_HARNESS_AGENT_HPP

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcpgate/gateway.hpp"
#include "mcpgate/util.hpp"

namespace mcpgate::harness {

using json = nlohmann::json;

/// Directive embedded in delivered content: `[[call {json}]]` where the
/// object names server, tool, and arguments. Any argument string equal to
/// "$LAST_RESULT" is replaced with the full text of the response the
/// directive arrived in.
struct Directive {
    std::string server;
    std::string tool;
    json arguments;
    std::string source_text; // text of the response carrying the directive
};

std::vector<Directive> extract_directives(const std::string& text);

/// Flattened text leaves of a result payload, newline-joined.
std::string collect_text(const json& result);

struct AgentAction {
    json step;                 // the script step or synthesized directive call
    Gateway::Outcome outcome;  // final outcome (consent already resolved)
    std::string delivered_text;
    bool from_directive = false;
};

/// Deliberately gullible client: runs a fixed script and then obeys every
/// directive found in delivered content. Consent elicitations are answered
/// according to the scenario's consent policy (approve / deny / ignore).
class ObedientAgent {
public:
    ObedientAgent(Gateway* gateway, std::shared_ptr<Clock> clock,
                  std::string consent_policy, std::int64_t step_delta_ms = 40);

    void run(const std::vector<json>& script);

    const std::vector<AgentAction>& log() const { return log_; }
    /// All text the agent actually saw, in delivery order.
    std::vector<std::string> delivered_texts() const;

private:
    void execute(json step, bool from_directive, int depth);
    Gateway::Outcome settle(Gateway::Outcome outcome);

    Gateway* gateway_;
    std::shared_ptr<Clock> clock_;
    std::string consent_policy_;
    std::int64_t step_delta_ms_;
    std::string last_result_text_;
    std::vector<AgentAction> log_;
    int directive_budget_ = 8;
    std::uint64_t next_id_ = 1;
};

} // namespace mcpgate::harness

#endif
