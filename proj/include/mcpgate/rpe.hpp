#ifndef MCPGATE_RPE_HPP
#define MCPGATE_RPE_HPP

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcpgate/protocol.hpp"
#include "mcpgate/util.hpp"

namespace mcpgate {

inline constexpr std::string_view kRedactionMarker = "[REDACTED]";
inline constexpr std::string_view kConsentMethod = "elicitation/requestConsent";

enum class Direction { ClientToServer, ServerToClient };

/// One classified action flowing through a session, mutable so automata
/// can rewrite the message. `suppressed` records that an earlier
/// automaton already struck the action; later automata still step but
/// treat it as a non-event.
struct ActionContext {
    std::string session;
    std::string agent;
    std::string server;
    Direction direction = Direction::ClientToServer;
    ActionLabel label = ActionLabel::Other;
    std::string tool;
    std::int64_t ts_ms = 0;
    McpMessage msg;
    bool suppressed = false;
};

struct RpeVerdict {
    enum class Kind { Allow, Suppress, Modify };
    Kind kind = Kind::Allow;
    bool flag = false;
    std::string reason;

    static RpeVerdict allow() { return {}; }
    static RpeVerdict flagged(std::string reason);
    static RpeVerdict suppress(std::string reason);
    static RpeVerdict modify(std::string reason);
};

/// Edit automaton: observes every action exactly once, may allow,
/// suppress, or rewrite it in place.
class SecurityAutomaton {
public:
    virtual ~SecurityAutomaton() = default;
    virtual std::string_view name() const = 0;
    virtual std::string_view description() const = 0;
    virtual RpeVerdict step(ActionContext& ctx) = 0;
};

/// Consent lifecycle shared between the gate automaton, the gateway, and
/// the control endpoint. Pending requests expire after timeout_ms.
class ConsentBroker {
public:
    enum class State { Pending, Approved, Denied, Expired };
    enum class AnswerResult { Ok, NotFound, Conflict };

    struct Request {
        std::string id;
        std::string session;
        std::string tool;
        std::string summary;
        std::int64_t created_ms = 0;
        State state = State::Pending;
    };

    explicit ConsentBroker(std::int64_t timeout_ms = 60000)
        : timeout_ms_(timeout_ms) {}

    std::string open(const std::string& session, const std::string& tool,
                     const std::string& summary, std::int64_t now_ms);
    AnswerResult answer(const std::string& id, bool approve, std::int64_t now_ms);
    std::optional<State> state(const std::string& id, std::int64_t now_ms);
    std::vector<Request> pending(std::int64_t now_ms);
    /// Marks overdue requests Expired; returns their ids.
    std::vector<std::string> sweep(std::int64_t now_ms);
    std::int64_t timeout_ms() const { return timeout_ms_; }

private:
    void expire_if_due(Request& r, std::int64_t now_ms);

    std::int64_t timeout_ms_;
    std::uint64_t next_id_ = 1;
    std::map<std::string, Request> requests_;
};

/// Suppresses the (threshold+1)-th invocation inside any sliding window
/// (now - window, now]. Only admitted invocations consume budget.
class RateLimitAutomaton : public SecurityAutomaton {
public:
    RateLimitAutomaton(std::size_t threshold, std::int64_t window_ms);

    std::string_view name() const override { return "rate_limit"; }
    std::string_view description() const override {
        return "suppresses invocation bursts above the configured threshold";
    }
    RpeVerdict step(ActionContext& ctx) override;

private:
    std::size_t threshold_;
    std::int64_t window_ms_;
    std::deque<std::int64_t> admitted_;
};

/// Rewrites the first occurrence of a high-risk invocation into a consent
/// elicitation; the gateway holds the original action until the broker
/// answers. Denial, timeout, or a missing broker suppress fail-closed.
class ConsentGateAutomaton : public SecurityAutomaton {
public:
    ConsentGateAutomaton(std::vector<std::string> high_risk_tools,
                         ConsentBroker* broker);

    std::string_view name() const override { return "consent_gate"; }
    std::string_view description() const override {
        return "holds high-risk invocations until a human answers";
    }
    RpeVerdict step(ActionContext& ctx) override;

private:
    std::vector<std::string> high_risk_;
    ConsentBroker* broker_;
    std::map<std::string, std::string> consent_by_tool_;
};

/// Literal markers and line-anchored regexes over descriptions, results,
/// and outbound arguments; matched lines are replaced with the redaction
/// marker. Patterns prone to catastrophic backtracking are rejected at
/// construction.
class SanitizerAutomaton : public SecurityAutomaton {
public:
    SanitizerAutomaton(std::vector<std::string> literals,
                       const std::vector<std::string>& regex_patterns);

    std::string_view name() const override { return "sanitizer"; }
    std::string_view description() const override {
        return "redacts injection markers from descriptions, results, and args";
    }
    RpeVerdict step(ActionContext& ctx) override;

    /// The built-in marker set; literals match case-insensitively.
    static const std::vector<std::string>& default_markers();

    /// Line-level redaction. Returns the rewritten text and sets
    /// *changed when any line was redacted.
    std::string redact(const std::string& text, bool* changed) const;

private:
    bool line_matches(const std::string& line) const;
    bool redact_json_strings(json& node);

    std::vector<std::string> literals_lower_;
    std::vector<std::regex> regexes_;
};

/// Throws ConfigError when the pattern looks susceptible to catastrophic
/// backtracking (quantified group under an outer quantifier).
void reject_pathological_pattern(const std::string& pattern);

/// Tool-bigram frequency table learned offline from benign sequences.
class BigramProfile {
public:
    static constexpr std::string_view kStart = "^";

    void train_sequence(const std::vector<std::string>& tools);
    void observe(const std::string& prev, const std::string& cur);
    double probability(const std::string& prev, const std::string& cur) const;
    std::uint64_t total() const { return total_; }
    bool empty() const { return total_ == 0; }

    json to_json() const;
    static BigramProfile from_json(const json& j);
    void save(const std::string& path) const;
    static BigramProfile load(const std::string& path);

private:
    std::map<std::pair<std::string, std::string>, std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

/// Flags invocations whose (previous tool, current tool) bigram falls
/// below the probability threshold. Audit-only: never suppresses.
class AnomalyFlagAutomaton : public SecurityAutomaton {
public:
    AnomalyFlagAutomaton(BigramProfile profile, double threshold);

    std::string_view name() const override { return "anomaly_flag"; }
    std::string_view description() const override {
        return "flags tool bigrams unseen or rare in the trained profile";
    }
    RpeVerdict step(ActionContext& ctx) override;

private:
    BigramProfile profile_;
    double threshold_;
    std::string prev_tool_ = std::string(BigramProfile::kStart);
};

/// Ordered automaton composition. Suppress anywhere wins; modifications
/// apply left to right; a consent rewrite halts the pass so the held
/// action can resume at the next automaton after approval.
class PolicyStack {
public:
    struct Outcome {
        enum class Status { Allow, Suppress, Held };
        Status status = Status::Allow;
        McpMessage msg;
        bool modified = false;
        std::vector<std::string> flags;
        std::string reason;
        std::string suppressor;
        std::string consent_id;
        std::size_t resume_index = 0;
    };

    void push(std::unique_ptr<SecurityAutomaton> automaton);
    std::size_t size() const { return automata_.size(); }

    Outcome enforce(ActionContext ctx) { return run(std::move(ctx), 0); }
    Outcome resume(ActionContext ctx, std::size_t from_index) {
        return run(std::move(ctx), from_index);
    }

private:
    Outcome run(ActionContext ctx, std::size_t from);

    std::vector<std::unique_ptr<SecurityAutomaton>> automata_;
};

} // namespace mcpgate

#endif
