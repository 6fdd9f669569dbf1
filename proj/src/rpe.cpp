#include "mcpgate/rpe.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace mcpgate {

RpeVerdict RpeVerdict::flagged(std::string reason) {
    return RpeVerdict{Kind::Allow, true, std::move(reason)};
}

RpeVerdict RpeVerdict::suppress(std::string reason) {
    return RpeVerdict{Kind::Suppress, false, std::move(reason)};
}

RpeVerdict RpeVerdict::modify(std::string reason) {
    return RpeVerdict{Kind::Modify, false, std::move(reason)};
}

std::string ConsentBroker::open(const std::string& session, const std::string& tool,
                                const std::string& summary, std::int64_t now_ms) {
    Request r;
    r.id = "consent-" + std::to_string(next_id_++);
    r.session = session;
    r.tool = tool;
    r.summary = summary;
    r.created_ms = now_ms;
    const std::string id = r.id;
    requests_.emplace(id, std::move(r));
    return id;
}

void ConsentBroker::expire_if_due(Request& r, std::int64_t now_ms) {
    if (r.state == State::Pending && now_ms - r.created_ms >= timeout_ms_)
        r.state = State::Expired;
}

ConsentBroker::AnswerResult ConsentBroker::answer(const std::string& id,
                                                  bool approve,
                                                  std::int64_t now_ms) {
    auto it = requests_.find(id);
    if (it == requests_.end()) return AnswerResult::NotFound;
    expire_if_due(it->second, now_ms);
    if (it->second.state != State::Pending) return AnswerResult::Conflict;
    it->second.state = approve ? State::Approved : State::Denied;
    return AnswerResult::Ok;
}

std::optional<ConsentBroker::State> ConsentBroker::state(const std::string& id,
                                                         std::int64_t now_ms) {
    auto it = requests_.find(id);
    if (it == requests_.end()) return std::nullopt;
    expire_if_due(it->second, now_ms);
    return it->second.state;
}

std::vector<ConsentBroker::Request> ConsentBroker::pending(std::int64_t now_ms) {
    std::vector<Request> out;
    for (auto& [id, r] : requests_) {
        (void)id;
        expire_if_due(r, now_ms);
        if (r.state == State::Pending) out.push_back(r);
    }
    return out;
}

std::vector<std::string> ConsentBroker::sweep(std::int64_t now_ms) {
    std::vector<std::string> expired;
    for (auto& [id, r] : requests_) {
        const State before = r.state;
        expire_if_due(r, now_ms);
        if (before == State::Pending && r.state == State::Expired)
            expired.push_back(id);
    }
    return expired;
}

RateLimitAutomaton::RateLimitAutomaton(std::size_t threshold,
                                       std::int64_t window_ms)
    : threshold_(threshold), window_ms_(window_ms) {
    if (threshold == 0) throw ConfigError("rate limit threshold must be >= 1");
}

RpeVerdict RateLimitAutomaton::step(ActionContext& ctx) {
    if (ctx.label != ActionLabel::Invocation || ctx.suppressed)
        return RpeVerdict::allow();
    while (!admitted_.empty() && admitted_.front() <= ctx.ts_ms - window_ms_)
        admitted_.pop_front();
    if (admitted_.size() >= threshold_)
        return RpeVerdict::suppress(
            "rate limit exceeded: " + std::to_string(threshold_) + " calls per " +
            std::to_string(window_ms_) + " ms");
    admitted_.push_back(ctx.ts_ms);
    return RpeVerdict::allow();
}

ConsentGateAutomaton::ConsentGateAutomaton(std::vector<std::string> high_risk_tools,
                                           ConsentBroker* broker)
    : high_risk_(std::move(high_risk_tools)), broker_(broker) {}

RpeVerdict ConsentGateAutomaton::step(ActionContext& ctx) {
    if (ctx.label != ActionLabel::Invocation || ctx.suppressed)
        return RpeVerdict::allow();
    if (std::find(high_risk_.begin(), high_risk_.end(), ctx.tool) ==
        high_risk_.end())
        return RpeVerdict::allow();
    if (broker_ == nullptr)
        return RpeVerdict::suppress("consent channel unavailable");

    auto it = consent_by_tool_.find(ctx.tool);
    if (it != consent_by_tool_.end()) {
        const auto state = broker_->state(it->second, ctx.ts_ms);
        if (state) {
            switch (*state) {
            case ConsentBroker::State::Approved:
                return RpeVerdict::allow();
            case ConsentBroker::State::Denied:
                return RpeVerdict::suppress("consent denied for '" + ctx.tool + "'");
            case ConsentBroker::State::Expired:
                return RpeVerdict::suppress("consent timed out for '" + ctx.tool +
                                            "'");
            case ConsentBroker::State::Pending:
                return RpeVerdict::suppress("consent still pending for '" +
                                            ctx.tool + "'");
            }
        }
    }

    std::string summary = "tools/call " + ctx.tool;
    if (ctx.msg.params.is_object() && ctx.msg.params.contains("arguments")) {
        std::string args = ctx.msg.params.at("arguments").dump();
        if (args.size() > 160) args = args.substr(0, 160) + "...";
        summary += " " + args;
    }
    const std::string id = broker_->open(ctx.session, ctx.tool, summary, ctx.ts_ms);
    consent_by_tool_[ctx.tool] = id;

    json params{{"consent_id", id}, {"tool", ctx.tool}, {"summary", summary}};
    ctx.msg = McpMessage::request(ctx.msg.id, std::string(kConsentMethod),
                                  std::move(params));
    return RpeVerdict::modify("high-risk invocation held for consent (" + id + ")");
}

namespace {

std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

} // namespace

void reject_pathological_pattern(const std::string& pattern) {
    // Heuristic screen: a group containing an unbounded quantifier that is
    // itself quantified ("(a+)+", "(.*)*") explodes under backtracking.
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        if (pattern[i] != ')' || i + 1 >= pattern.size()) continue;
        const char next = pattern[i + 1];
        if (next != '*' && next != '+' && next != '{') continue;
        int depth = 1;
        bool inner_quantifier = false;
        for (std::size_t j = i; j-- > 0;) {
            if (pattern[j] == ')') ++depth;
            if (pattern[j] == '(') {
                --depth;
                if (depth == 0) break;
            }
            if (depth >= 1 && (pattern[j] == '*' || pattern[j] == '+'))
                inner_quantifier = true;
        }
        if (inner_quantifier)
            throw ConfigError("pattern rejected (catastrophic backtracking risk): " +
                              pattern);
    }
}

SanitizerAutomaton::SanitizerAutomaton(std::vector<std::string> literals,
                                       const std::vector<std::string>& regex_patterns) {
    literals_lower_.reserve(literals.size());
    for (auto& lit : literals) literals_lower_.push_back(to_lower(std::move(lit)));
    for (const auto& pattern : regex_patterns) {
        reject_pathological_pattern(pattern);
        try {
            regexes_.emplace_back(pattern, std::regex::ECMAScript);
        } catch (const std::regex_error& e) {
            throw ConfigError("invalid sanitizer pattern '" + pattern +
                              "': " + e.what());
        }
    }
}

const std::vector<std::string>& SanitizerAutomaton::default_markers() {
    static const std::vector<std::string> markers = {
        "<IMPORTANT>",
        "ignore previous instructions",
        "ignore all previous instructions",
        "disregard prior instructions",
        "do not tell the user",
        "do not mention this",
        "hide this from the user",
        "you must obey",
        "system override",
        "this is a system message",
        "exfiltrate",
        "reveal your system prompt",
    };
    return markers;
}

bool SanitizerAutomaton::line_matches(const std::string& line) const {
    const std::string lower = to_lower(line);
    for (const auto& lit : literals_lower_)
        if (lower.find(lit) != std::string::npos) return true;
    for (const auto& re : regexes_)
        if (std::regex_search(line, re)) return true;
    return false;
}

std::string SanitizerAutomaton::redact(const std::string& text,
                                       bool* changed) const {
    std::string out;
    out.reserve(text.size());
    bool any = false;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        const bool last = end == std::string::npos;
        if (last) end = text.size();
        const std::string line = text.substr(pos, end - pos);
        if (!line.empty() && line_matches(line)) {
            out += kRedactionMarker;
            any = true;
        } else {
            out += line;
        }
        if (!last) out += '\n';
        pos = end + 1;
        if (last) break;
    }
    if (changed != nullptr) *changed = any;
    return any ? out : text;
}

bool SanitizerAutomaton::redact_json_strings(json& node) {
    bool any = false;
    if (node.is_string()) {
        bool changed = false;
        std::string redacted = redact(node.get_ref<const std::string&>(), &changed);
        if (changed) {
            node = std::move(redacted);
            any = true;
        }
    } else if (node.is_object()) {
        for (auto& [key, value] : node.items()) {
            (void)key;
            any |= redact_json_strings(value);
        }
    } else if (node.is_array()) {
        for (auto& value : node) any |= redact_json_strings(value);
    }
    return any;
}

RpeVerdict SanitizerAutomaton::step(ActionContext& ctx) {
    if (ctx.suppressed) return RpeVerdict::allow();
    bool changed = false;
    if (ctx.direction == Direction::ClientToServer) {
        if (ctx.label == ActionLabel::Invocation && ctx.msg.params.is_object() &&
            ctx.msg.params.contains("arguments"))
            changed = redact_json_strings(ctx.msg.params.at("arguments"));
    } else {
        if (!ctx.msg.result.is_null()) changed = redact_json_strings(ctx.msg.result);
    }
    if (!changed) return RpeVerdict::allow();
    return RpeVerdict::modify("injection pattern redacted");
}

void BigramProfile::observe(const std::string& prev, const std::string& cur) {
    ++counts_[{prev, cur}];
    ++total_;
}

void BigramProfile::train_sequence(const std::vector<std::string>& tools) {
    std::string prev(kStart);
    for (const auto& tool : tools) {
        observe(prev, tool);
        prev = tool;
    }
}

double BigramProfile::probability(const std::string& prev,
                                  const std::string& cur) const {
    if (total_ == 0) return 0.0;
    auto it = counts_.find({prev, cur});
    if (it == counts_.end()) return 0.0;
    return static_cast<double>(it->second) / static_cast<double>(total_);
}

json BigramProfile::to_json() const {
    json bigrams = json::array();
    for (const auto& [pair, count] : counts_)
        bigrams.push_back(json::array({pair.first, pair.second, count}));
    return json{{"total", total_}, {"bigrams", bigrams}};
}

BigramProfile BigramProfile::from_json(const json& j) {
    BigramProfile p;
    for (const auto& row : j.at("bigrams")) {
        const auto count = row.at(2).get<std::uint64_t>();
        p.counts_[{row.at(0).get<std::string>(), row.at(1).get<std::string>()}] =
            count;
    }
    p.total_ = j.at("total").get<std::uint64_t>();
    return p;
}

void BigramProfile::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write profile: " + path);
    out << to_json().dump(2) << '\n';
}

BigramProfile BigramProfile::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read profile: " + path);
    json j;
    in >> j;
    return from_json(j);
}

AnomalyFlagAutomaton::AnomalyFlagAutomaton(BigramProfile profile, double threshold)
    : profile_(std::move(profile)), threshold_(threshold) {}

RpeVerdict AnomalyFlagAutomaton::step(ActionContext& ctx) {
    if (ctx.label != ActionLabel::Invocation || ctx.suppressed)
        return RpeVerdict::allow();
    if (profile_.empty()) return RpeVerdict::allow(); // inert without training
    const double p = profile_.probability(prev_tool_, ctx.tool);
    RpeVerdict verdict = RpeVerdict::allow();
    if (p < threshold_) {
        std::ostringstream reason;
        reason << "anomalous bigram " << prev_tool_ << " -> " << ctx.tool
               << " (p=" << p << " < " << threshold_ << ")";
        verdict = RpeVerdict::flagged(reason.str());
    }
    prev_tool_ = ctx.tool; // the call was admitted; advance the context
    return verdict;
}

void PolicyStack::push(std::unique_ptr<SecurityAutomaton> automaton) {
    automata_.push_back(std::move(automaton));
}

PolicyStack::Outcome PolicyStack::run(ActionContext ctx, std::size_t from) {
    Outcome outcome;
    for (std::size_t i = from; i < automata_.size(); ++i) {
        SecurityAutomaton& automaton = *automata_[i];
        RpeVerdict verdict;
        try {
            verdict = automaton.step(ctx);
        } catch (const std::exception& e) {
            // Fail closed: an automaton error must never let the action
            // through unexamined.
            verdict = RpeVerdict::suppress(std::string("internal error in ") +
                                           std::string(automaton.name()) + ": " +
                                           e.what());
            verdict.flag = true;
        }
        if (verdict.flag)
            outcome.flags.push_back(std::string(automaton.name()) + ": " +
                                    verdict.reason);
        switch (verdict.kind) {
        case RpeVerdict::Kind::Allow:
            break;
        case RpeVerdict::Kind::Modify:
            if (ctx.msg.method_raw == kConsentMethod) {
                // Consent rewrite: hold here, resume after this automaton.
                outcome.status = Outcome::Status::Held;
                outcome.msg = std::move(ctx.msg);
                outcome.consent_id =
                    outcome.msg.params.value("consent_id", std::string());
                outcome.reason = verdict.reason;
                outcome.suppressor = std::string(automaton.name());
                outcome.resume_index = i + 1;
                return outcome;
            }
            outcome.modified = true;
            break;
        case RpeVerdict::Kind::Suppress:
            if (!ctx.suppressed) {
                ctx.suppressed = true;
                outcome.reason = verdict.reason;
                outcome.suppressor = std::string(automaton.name());
            }
            break;
        }
    }
    outcome.status = ctx.suppressed ? Outcome::Status::Suppress
                                    : Outcome::Status::Allow;
    outcome.msg = std::move(ctx.msg);
    return outcome;
}

} // namespace mcpgate
