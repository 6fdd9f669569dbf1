#include "mcpgate/protocol.hpp"

#include <algorithm>

namespace mcpgate {

std::string_view action_label_name(ActionLabel label) {
    switch (label) {
        case ActionLabel::Discovery: return "disc";
        case ActionLabel::Invocation: return "inv";
        case ActionLabel::ResourceRead: return "read";
        case ActionLabel::Sampling: return "samp";
        case ActionLabel::Admin: return "admin";
        case ActionLabel::Other: return "other";
    }
    return "other";
}

std::string_view method_name(Method m) {
    switch (m) {
        case Method::Initialize: return "initialize";
        case Method::Shutdown: return "shutdown";
        case Method::ToolsList: return "tools/list";
        case Method::ToolsCall: return "tools/call";
        case Method::ResourcesList: return "resources/list";
        case Method::ResourcesRead: return "resources/read";
        case Method::SamplingCreateMessage: return "sampling/createMessage";
        case Method::Unknown: return "unknown";
    }
    return "unknown";
}

Method method_from_name(std::string_view name) {
    if (name == "initialize") return Method::Initialize;
    if (name == "shutdown") return Method::Shutdown;
    if (name == "tools/list") return Method::ToolsList;
    if (name == "tools/call") return Method::ToolsCall;
    if (name == "resources/list") return Method::ResourcesList;
    if (name == "resources/read") return Method::ResourcesRead;
    if (name == "sampling/createMessage") return Method::SamplingCreateMessage;
    return Method::Unknown;
}

std::string McpMessage::method_label() const {
    if (method != Method::Unknown) return method_raw;
    return "unknown:" + method_raw;
}

json McpMessage::to_json() const {
    json j;
    j["jsonrpc"] = "2.0";
    if (!id.is_null()) j["id"] = id;
    if (kind != MessageKind::Response) {
        j["method"] = method_raw;
        if (!params.is_null()) j["params"] = params;
    } else {
        if (!error.is_null()) {
            j["error"] = error;
        } else {
            j["result"] = result;
        }
    }
    return j;
}

std::string McpMessage::serialize() const { return to_json().dump(); }

McpMessage McpMessage::request(json id, const std::string& method, json params) {
    McpMessage m;
    m.kind = MessageKind::Request;
    m.id = std::move(id);
    m.method_raw = method;
    m.method = method_from_name(method);
    m.params = std::move(params);
    return m;
}

McpMessage McpMessage::notification(const std::string& method, json params) {
    McpMessage m;
    m.kind = MessageKind::Notification;
    m.method_raw = method;
    m.method = method_from_name(method);
    m.params = std::move(params);
    return m;
}

McpMessage McpMessage::response(json id, json result) {
    McpMessage m;
    m.kind = MessageKind::Response;
    m.id = std::move(id);
    m.result = std::move(result);
    return m;
}

McpMessage McpMessage::error_response(json id, int code, const std::string& message,
                                      json data) {
    McpMessage m;
    m.kind = MessageKind::Response;
    m.id = std::move(id);
    m.error = json{{"code", code}, {"message", message}};
    if (!data.is_null()) m.error["data"] = data;
    return m;
}

McpMessage parse_message(std::string_view frame) {
    json j;
    try {
        j = json::parse(frame);
    } catch (const json::parse_error& e) {
        throw ProtocolError(std::string("malformed JSON-RPC frame: ") + e.what(),
                            e.byte);
    }
    if (!j.is_object())
        throw ProtocolError("JSON-RPC frame is not an object", 0);
    if (!j.contains("jsonrpc") || j["jsonrpc"] != "2.0")
        throw ProtocolError("missing or unsupported jsonrpc version", 0);

    McpMessage m;
    if (j.contains("id")) m.id = j["id"];
    if (j.contains("method")) {
        if (!j["method"].is_string())
            throw ProtocolError("method is not a string", 0);
        m.method_raw = j["method"].get<std::string>();
        m.method = method_from_name(m.method_raw);
        m.kind = m.id.is_null() ? MessageKind::Notification : MessageKind::Request;
        if (j.contains("params")) m.params = j["params"];
    } else {
        if (m.id.is_null())
            throw ProtocolError("message has neither method nor id", 0);
        bool has_result = j.contains("result");
        bool has_error = j.contains("error");
        if (has_result == has_error)
            throw ProtocolError(
                "response must carry exactly one of result or error", 0);
        m.kind = MessageKind::Response;
        if (has_result) m.result = j["result"];
        if (has_error) m.error = j["error"];
    }
    return m;
}

ActionLabel classify_action(const McpMessage& msg) {
    if (msg.kind == MessageKind::Response) return ActionLabel::Other;
    switch (msg.method) {
        case Method::ToolsList:
        case Method::ResourcesList: return ActionLabel::Discovery;
        case Method::ToolsCall: return ActionLabel::Invocation;
        case Method::ResourcesRead: return ActionLabel::ResourceRead;
        case Method::SamplingCreateMessage: return ActionLabel::Sampling;
        case Method::Initialize:
        case Method::Shutdown: return ActionLabel::Admin;
        case Method::Unknown: return ActionLabel::Other;
    }
    return ActionLabel::Other;
}

std::string_view phase_name(SessionPhase p) {
    switch (p) {
        case SessionPhase::Init: return "init";
        case SessionPhase::Discovery: return "discovery";
        case SessionPhase::Operation: return "operation";
        case SessionPhase::Terminated: return "terminated";
    }
    return "init";
}

NonceCache::NonceCache(std::size_t capacity, std::int64_t window_ms)
    : capacity_(capacity), window_ms_(window_ms) {}

void NonceCache::prune(std::int64_t now_ms) {
    while (!order_.empty() && order_.front().first < now_ms - window_ms_) {
        seen_.erase(order_.front().second);
        order_.pop_front();
    }
}

bool NonceCache::check_and_insert(const Nonce& nonce, std::int64_t ts_ms) {
    prune(ts_ms);
    if (ts_ms <= floor_ts_) return false; // possibly evicted; fail closed
    if (seen_.count(nonce)) return false;
    if (order_.size() >= capacity_) {
        floor_ts_ = std::max(floor_ts_, order_.front().first);
        seen_.erase(order_.front().second);
        order_.pop_front();
    }
    seen_.emplace(nonce, ts_ms);
    order_.emplace_back(ts_ms, nonce);
    return true;
}

SessionState::SessionState(std::string session_id, std::string agent_id,
                           std::string server_id)
    : session_id_(std::move(session_id)),
      agent_id_(std::move(agent_id)),
      server_id_(std::move(server_id)) {}

std::optional<LifecycleViolation> SessionState::advance(const McpMessage& msg) {
    const ActionLabel label = classify_action(msg);
    switch (phase_) {
        case SessionPhase::Init:
            if (msg.method == Method::Initialize) {
                if (msg.kind == MessageKind::Response ||
                    (msg.kind == MessageKind::Notification &&
                     msg.method_raw == "initialize")) {
                    phase_ = SessionPhase::Discovery;
                }
                return std::nullopt;
            }
            if (msg.kind == MessageKind::Response) {
                // Response to the initialize request completes the handshake.
                phase_ = SessionPhase::Discovery;
                return std::nullopt;
            }
            if (msg.kind == MessageKind::Notification &&
                msg.method == Method::Unknown) {
                return std::nullopt; // lifecycle notifications pass
            }
            return LifecycleViolation{"'" + msg.method_label() +
                                      "' before initialize completed"};
        case SessionPhase::Discovery:
            if (msg.method == Method::Initialize && msg.kind == MessageKind::Request)
                return LifecycleViolation{"initialize repeated after handshake"};
            if (msg.method == Method::Shutdown) {
                phase_ = SessionPhase::Terminated;
                return std::nullopt;
            }
            if (label == ActionLabel::Invocation && msg.kind == MessageKind::Request)
                phase_ = SessionPhase::Operation;
            return std::nullopt;
        case SessionPhase::Operation:
            if (msg.method == Method::Initialize && msg.kind == MessageKind::Request)
                return LifecycleViolation{"initialize repeated after handshake"};
            if (msg.method == Method::Shutdown) {
                phase_ = SessionPhase::Terminated;
                return std::nullopt;
            }
            return std::nullopt;
        case SessionPhase::Terminated:
            return LifecycleViolation{"message after session termination"};
    }
    return std::nullopt;
}

} // namespace mcpgate
