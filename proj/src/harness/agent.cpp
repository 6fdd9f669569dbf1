#include "mcpgate/harness/agent.hpp"

#include <functional>

#include "mcpgate/protocol.hpp"

namespace mcpgate::harness {

namespace {

constexpr std::string_view kDirectivePrefix = "[[call ";
constexpr std::string_view kDirectiveSuffix = "]]";

void substitute_last_result(json& node, const std::string& text) {
    if (node.is_string()) {
        if (node.get<std::string>() == "$LAST_RESULT") node = text;
        return;
    }
    if (node.is_object() || node.is_array())
        for (auto& child : node) substitute_last_result(child, text);
}

} // namespace

std::vector<Directive> extract_directives(const std::string& text) {
    std::vector<Directive> out;
    std::size_t pos = 0;
    while ((pos = text.find(kDirectivePrefix, pos)) != std::string::npos) {
        const std::size_t body = pos + kDirectivePrefix.size();
        const std::size_t open = text.find('{', body);
        if (open == std::string::npos) break;
        int depth = 0;
        std::size_t end = open;
        bool in_string = false;
        bool escaped = false;
        for (; end < text.size(); ++end) {
            const char c = text[end];
            if (escaped) {
                escaped = false;
                continue;
            }
            if (c == '\\') {
                escaped = true;
                continue;
            }
            if (c == '"') in_string = !in_string;
            if (in_string) continue;
            if (c == '{') ++depth;
            if (c == '}' && --depth == 0) break;
        }
        if (end >= text.size()) break;
        if (text.compare(end + 1, kDirectiveSuffix.size(), kDirectiveSuffix) != 0) {
            pos = end;
            continue;
        }
        try {
            const json obj = json::parse(text.substr(open, end - open + 1));
            Directive d;
            d.server = obj.value("server", "");
            d.tool = obj.value("tool", "");
            d.arguments = obj.value("arguments", json::object());
            d.source_text = text;
            out.push_back(std::move(d));
        } catch (const json::exception&) {
            // Malformed directives are ignored, like any other prose.
        }
        pos = end + 1 + kDirectiveSuffix.size();
    }
    return out;
}

std::string collect_text(const json& result) {
    std::string out;
    std::function<void(const json&)> walk = [&](const json& node) {
        if (node.is_string()) {
            if (!out.empty()) out += '\n';
            out += node.get<std::string>();
            return;
        }
        if (node.is_object()) {
            for (const auto& [key, child] : node.items()) {
                (void)key;
                walk(child);
            }
            return;
        }
        if (node.is_array())
            for (const auto& child : node) walk(child);
    };
    walk(result);
    return out;
}

ObedientAgent::ObedientAgent(Gateway* gateway, std::shared_ptr<Clock> clock,
                             std::string consent_policy,
                             std::int64_t step_delta_ms)
    : gateway_(gateway),
      clock_(std::move(clock)),
      consent_policy_(std::move(consent_policy)),
      step_delta_ms_(step_delta_ms) {}

void ObedientAgent::run(const std::vector<json>& script) {
    for (const json& step : script) execute(step, false, 0);
}

std::vector<std::string> ObedientAgent::delivered_texts() const {
    std::vector<std::string> out;
    for (const AgentAction& a : log_)
        if (!a.delivered_text.empty()) out.push_back(a.delivered_text);
    return out;
}

Gateway::Outcome ObedientAgent::settle(Gateway::Outcome outcome) {
    if (outcome.status != Gateway::Outcome::Status::Pending) return outcome;
    const std::string id = outcome.consent_id;
    if (consent_policy_ == "approve" || consent_policy_ == "deny") {
        const auto answer =
            gateway_->answer_consent(id, consent_policy_ == "approve");
        if (answer.released) return *answer.released;
        return outcome;
    }
    // "ignore": let the request expire, then sweep the timeout through.
    auto* manual = dynamic_cast<ManualClock*>(clock_.get());
    if (manual) manual->advance(gateway_->config().policies.consent_timeout_ms + 1);
    auto swept = gateway_->sweep_consents();
    for (auto& [swept_id, released] : swept)
        if (swept_id == id) return released;
    return outcome;
}

void ObedientAgent::execute(json step, bool from_directive, int depth) {
    auto* manual = dynamic_cast<ManualClock*>(clock_.get());
    if (manual) manual->advance(step_delta_ms_);

    const std::string op = step.value("op", "call");
    const std::string server = step.value("server", "");
    std::uint64_t& next_id = next_id_;

    McpMessage msg;
    if (op == "initialize") {
        msg = McpMessage::request(json(next_id++), "initialize",
                                  json{{"protocolVersion", "2025-03-26"},
                                       {"clientInfo", json{{"name", "agent"}}}});
    } else if (op == "list_tools") {
        msg = McpMessage::request(json(next_id++), "tools/list", json::object());
    } else if (op == "read_resource") {
        msg = McpMessage::request(json(next_id++), "resources/read",
                                  json{{"uri", step.value("uri", "")}});
    } else if (op == "sample") {
        json text = step.value("text", json("summarize"));
        substitute_last_result(text, last_result_text_);
        msg = McpMessage::request(
            json(next_id++), "sampling/createMessage",
            json{{"messages",
                  json::array({json{{"role", "user"},
                                    {"content", json{{"type", "text"},
                                                     {"text", text}}}}})}});
    } else if (op == "shutdown") {
        msg = McpMessage::request(json(next_id++), "shutdown", json::object());
    } else { // tools/call
        json args = step.value("arguments", json::object());
        substitute_last_result(args, last_result_text_);
        msg = McpMessage::request(json(next_id++), "tools/call",
                                  json{{"name", step.value("tool", "")},
                                       {"arguments", std::move(args)}});
    }

    Gateway::Outcome outcome = settle(gateway_->client_request(server, msg));

    AgentAction action;
    action.step = std::move(step);
    action.from_directive = from_directive;
    const bool delivered =
        outcome.status == Gateway::Outcome::Status::Delivered &&
        !outcome.blocked() && outcome.response.error.is_null();
    if (delivered) action.delivered_text = collect_text(outcome.response.result);
    action.outcome = std::move(outcome);
    log_.push_back(action);
    if (delivered && !action.delivered_text.empty())
        last_result_text_ = action.delivered_text;

    if (!delivered || depth >= 3) return;

    // Obey directives found in what was just delivered.
    const std::vector<Directive> directives =
        extract_directives(action.delivered_text);
    if (directives.empty()) return;
    const std::string source = action.delivered_text;
    for (const Directive& d : directives) {
        if (directive_budget_-- <= 0) return;
        last_result_text_ = source;
        json call{{"op", "call"},
                  {"server", d.server.empty() ? action.step.value("server", "")
                                              : d.server},
                  {"tool", d.tool},
                  {"arguments", d.arguments}};
        execute(std::move(call), true, depth + 1);
    }
}

} // namespace mcpgate::harness
