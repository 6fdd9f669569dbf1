#ifndef MCPGATE_PROTOCOL_HPP
#define MCPGATE_PROTOCOL_HPP

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "mcpgate/util.hpp"

namespace mcpgate {

using json = nlohmann::json;

enum class MessageKind { Request, Response, Notification };

enum class Method {
    Initialize,
    Shutdown,
    ToolsList,
    ToolsCall,
    ResourcesList,
    ResourcesRead,
    SamplingCreateMessage,
    Unknown,
};

/// Action alphabet of the session transition system. Every message maps to
/// exactly one label.
enum class ActionLabel { Discovery, Invocation, ResourceRead, Sampling, Admin, Other };

std::string_view action_label_name(ActionLabel label);
std::string_view method_name(Method m);
Method method_from_name(std::string_view name);

struct ProtocolError : std::runtime_error {
    ProtocolError(const std::string& what, std::size_t byte_offset)
        : std::runtime_error(what), offset(byte_offset) {}
    std::size_t offset;
};

/// One JSON-RPC 2.0 message. `id` is null for notifications; `method_raw`
/// is empty for responses. Serialization preserves the original method
/// name, so unknown methods round-trip unchanged.
struct McpMessage {
    MessageKind kind = MessageKind::Notification;
    json id;
    std::string method_raw;
    Method method = Method::Unknown;
    json params;
    json result;
    json error;

    /// Supported method name, or "unknown:<name>" for passthrough methods.
    std::string method_label() const;

    json to_json() const;
    std::string serialize() const;

    static McpMessage request(json id, const std::string& method, json params);
    static McpMessage notification(const std::string& method, json params);
    static McpMessage response(json id, json result);
    static McpMessage error_response(json id, int code, const std::string& message,
                                     json data = nullptr);

    bool operator==(const McpMessage& other) const {
        return to_json() == other.to_json();
    }
};

/// Parses one complete frame (newline-delimited for stdio, one HTTP body
/// for HTTP transport). Throws ProtocolError with the byte offset of the
/// first malformed input.
McpMessage parse_message(std::string_view frame);

/// Assigns the unique action label of the message.
ActionLabel classify_action(const McpMessage& msg);

enum class SessionPhase { Init, Discovery, Operation, Terminated };

std::string_view phase_name(SessionPhase p);

struct LifecycleViolation {
    std::string reason;
};

/// Replay window for signed envelopes. Bounded LRU; on eviction the floor
/// timestamp rises so that an envelope old enough to have been evicted is
/// rejected rather than trusted.
class NonceCache {
public:
    explicit NonceCache(std::size_t capacity = std::size_t(1) << 16,
                        std::int64_t window_ms = 10 * 60 * 1000);

    /// Returns true and records the nonce when it is fresh; false when the
    /// nonce was already seen or falls below the eviction floor.
    bool check_and_insert(const Nonce& nonce, std::int64_t ts_ms);

    std::size_t size() const { return order_.size(); }
    std::int64_t floor_ts() const { return floor_ts_; }

private:
    void prune(std::int64_t now_ms);

    std::size_t capacity_;
    std::int64_t window_ms_;
    std::int64_t floor_ts_ = -1;
    std::map<Nonce, std::int64_t> seen_; // nonce -> ts
    std::deque<std::pair<std::int64_t, Nonce>> order_;
};

/// Per-session lifecycle state machine. Phases advance only along
/// init -> discovery -> operation -> terminated.
class SessionState {
public:
    SessionState(std::string session_id, std::string agent_id,
                 std::string server_id);

    SessionPhase phase() const { return phase_; }
    const std::string& session_id() const { return session_id_; }
    const std::string& agent_id() const { return agent_id_; }
    const std::string& server_id() const { return server_id_; }

    /// Applies the message to the lifecycle automaton. Returns a violation
    /// (leaving the phase unchanged) when the transition is illegal.
    std::optional<LifecycleViolation> advance(const McpMessage& msg);

    void activate_tool(const std::string& tool) { active_.insert(tool); }
    const std::set<std::string>& active_tools() const { return active_; }

    NonceCache& nonce_cache() { return nonce_cache_; }

private:
    std::string session_id_;
    std::string agent_id_;
    std::string server_id_;
    SessionPhase phase_ = SessionPhase::Init;
    std::set<std::string> active_;
    NonceCache nonce_cache_;
};

} // namespace mcpgate

#endif
