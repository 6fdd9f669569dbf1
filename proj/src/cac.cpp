#include "mcpgate/cac.hpp"

#include <algorithm>

namespace mcpgate {

bool ParamConstraint::admits(const json& value) const {
    switch (kind) {
    case Kind::Any:
        return true;
    case Kind::Exact:
        return value == exact;
    case Kind::Prefix: {
        if (!value.is_string()) return false;
        const auto& s = value.get_ref<const std::string&>();
        return s.size() >= prefix.size() &&
               s.compare(0, prefix.size(), prefix) == 0;
    }
    case Kind::Range: {
        if (!value.is_number()) return false;
        double v = value.get<double>();
        return v >= min && v <= max;
    }
    }
    return false;
}

json ParamConstraint::to_json() const {
    switch (kind) {
    case Kind::Any:
        return json{{"kind", "any"}};
    case Kind::Exact:
        return json{{"kind", "exact"}, {"value", exact}};
    case Kind::Prefix:
        return json{{"kind", "prefix"}, {"value", prefix}};
    case Kind::Range:
        return json{{"kind", "range"}, {"min", min}, {"max", max}};
    }
    return json{{"kind", "any"}};
}

ParamConstraint ParamConstraint::from_json(const json& j) {
    ParamConstraint c;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "any") {
        c.kind = Kind::Any;
    } else if (kind == "exact") {
        c.kind = Kind::Exact;
        c.exact = j.at("value");
    } else if (kind == "prefix") {
        c.kind = Kind::Prefix;
        c.prefix = j.at("value").get<std::string>();
    } else if (kind == "range") {
        c.kind = Kind::Range;
        c.min = j.at("min").get<double>();
        c.max = j.at("max").get<double>();
    } else {
        throw ConfigError("unknown param constraint kind: " + kind);
    }
    return c;
}

ParamConstraint ParamConstraint::any() { return {}; }

ParamConstraint ParamConstraint::exactly(json v) {
    ParamConstraint c;
    c.kind = Kind::Exact;
    c.exact = std::move(v);
    return c;
}

ParamConstraint ParamConstraint::with_prefix(std::string p) {
    ParamConstraint c;
    c.kind = Kind::Prefix;
    c.prefix = std::move(p);
    return c;
}

ParamConstraint ParamConstraint::in_range(double lo, double hi) {
    ParamConstraint c;
    c.kind = Kind::Range;
    c.min = lo;
    c.max = hi;
    return c;
}

std::vector<std::uint8_t> Capability::signing_input() const {
    json params_json = json::object();
    for (const auto& [key, constraint] : params) params_json[key] = constraint.to_json();
    const json canonical{{"holder", holder},
                         {"params", params_json},
                         {"scope", std::string(scope_name(scope))},
                         {"tool", tool},
                         {"ttl_ms", ttl_ms}};
    const std::string encoded = canonical.dump();
    return {encoded.begin(), encoded.end()};
}

bool Capability::verify(const Keyring& issuers) const {
    const EcdsaPublicKey* key = issuers.find(issuer);
    if (key == nullptr) return false;
    return key->verify(signing_input(), sig);
}

json Capability::to_json() const {
    json params_json = json::object();
    for (const auto& [key, constraint] : params) params_json[key] = constraint.to_json();
    return json{{"tool", tool},
                {"params", params_json},
                {"scope", std::string(scope_name(scope))},
                {"ttl_ms", ttl_ms},
                {"holder", holder},
                {"issuer", issuer},
                {"sig_b64", base64_encode(sig)}};
}

Capability Capability::from_json(const json& j) {
    Capability c;
    c.tool = j.at("tool").get<std::string>();
    for (const auto& [key, value] : j.at("params").items())
        c.params.emplace(key, ParamConstraint::from_json(value));
    c.scope = scope_from_name(j.at("scope").get<std::string>());
    c.ttl_ms = j.at("ttl_ms").get<std::int64_t>();
    c.holder = j.at("holder").get<std::string>();
    c.issuer = j.at("issuer").get<std::string>();
    c.sig = base64_decode(j.at("sig_b64").get<std::string>());
    return c;
}

Capability issue(const EcdsaPrivateKey& authority, const std::string& issuer_id,
                 const std::string& agent, const ToolDescriptor& tool,
                 std::map<std::string, ParamConstraint> params, Scope scope,
                 std::int64_t ttl_ms) {
    const json* properties = nullptr;
    if (tool.schema.is_object() && tool.schema.contains("properties"))
        properties = &tool.schema.at("properties");
    for (const auto& [key, constraint] : params) {
        (void)constraint;
        const bool known =
            properties != nullptr ? properties->contains(key)
                                  : tool.schema.is_object() && tool.schema.contains(key);
        if (!known)
            throw ConfigError("capability param '" + key +
                              "' absent from schema of tool '" + tool.name + "'");
    }
    Capability c;
    c.tool = tool.name;
    c.params = std::move(params);
    c.scope = scope;
    c.ttl_ms = ttl_ms;
    c.holder = agent;
    c.issuer = issuer_id;
    c.sig = authority.sign(c.signing_input());
    return c;
}

CacVerdict CacVerdict::allow() { return CacVerdict{true, 0, {}}; }

CacVerdict CacVerdict::deny(int check, std::string reason) {
    return CacVerdict{false, check, std::move(reason)};
}

bool scope_covers(Scope held, Scope required) {
    return static_cast<int>(held) >= static_cast<int>(required);
}

std::vector<Scope> required_scopes(Method method, const ToolDescriptor* tool) {
    if (method == Method::ResourcesRead) return {Scope::Read};
    if (method != Method::ToolsCall) return {};
    std::vector<Scope> kinds;
    if (tool != nullptr)
        for (const auto& p : tool->perm)
            if (std::find(kinds.begin(), kinds.end(), p.kind) == kinds.end())
                kinds.push_back(p.kind);
    if (kinds.empty()) kinds.push_back(Scope::Execute);
    return kinds;
}

namespace {

bool args_covered(const Capability& cap, const json& args) {
    if (args.is_null()) return true;
    if (!args.is_object()) return false;
    for (const auto& [key, value] : args.items()) {
        auto it = cap.params.find(key);
        if (it == cap.params.end()) return false;
        if (!it->second.admits(value)) return false;
    }
    return true;
}

bool scopes_covered(const Capability& cap, const std::vector<Scope>& required) {
    return std::all_of(required.begin(), required.end(),
                       [&](Scope s) { return scope_covers(cap.scope, s); });
}

} // namespace

CacVerdict check_invocation(const std::vector<Capability>& held,
                            const std::string& agent, const std::string& tool,
                            const json& args, const std::vector<Scope>& required,
                            std::int64_t now_ms, const Keyring& issuers) {
    // Progressive filtering keeps "first failed check" well defined with
    // several candidate capabilities: the verdict reports the earliest
    // check at which the last surviving candidate was eliminated.
    std::vector<const Capability*> candidates;
    for (const auto& cap : held)
        if (cap.tool == tool && cap.holder == agent && cap.verify(issuers))
            candidates.push_back(&cap);
    if (candidates.empty())
        return CacVerdict::deny(1, "no valid capability for tool '" + tool + "'");

    std::erase_if(candidates,
                  [&](const Capability* c) { return !args_covered(*c, args); });
    if (candidates.empty())
        return CacVerdict::deny(2, "arguments exceed capability params for '" +
                                       tool + "'");

    std::erase_if(candidates,
                  [&](const Capability* c) { return !scopes_covered(*c, required); });
    if (candidates.empty())
        return CacVerdict::deny(3, "operation outside capability scope for '" +
                                       tool + "'");

    std::erase_if(candidates,
                  [&](const Capability* c) { return now_ms >= c->ttl_ms; });
    if (candidates.empty())
        return CacVerdict::deny(4, "capability expired for '" + tool + "'");

    return CacVerdict::allow();
}

std::string_view composition_verdict_name(CompositionVerdict v) {
    switch (v) {
    case CompositionVerdict::Allow:
        return "allow";
    case CompositionVerdict::Audit:
        return "audit";
    case CompositionVerdict::Deny:
        return "deny";
    }
    return "allow";
}

CompositionVerdict composition_verdict_from_name(std::string_view name) {
    if (name == "allow") return CompositionVerdict::Allow;
    if (name == "audit") return CompositionVerdict::Audit;
    if (name == "deny") return CompositionVerdict::Deny;
    throw ConfigError("unknown composition verdict: " + std::string(name));
}

void CompositionPolicy::add_rule(const std::string& prev, const std::string& next,
                                 CompositionVerdict v) {
    rules_[{prev, next}] = v;
}

CompositionVerdict CompositionPolicy::lookup(const std::string& prev,
                                             const std::string& next) const {
    if (auto it = rules_.find({prev, next}); it != rules_.end()) return it->second;
    if (auto it = rules_.find({prev, "*"}); it != rules_.end()) return it->second;
    if (auto it = rules_.find({"*", next}); it != rules_.end()) return it->second;
    return default_;
}

json CompositionPolicy::to_json() const {
    json rules = json::array();
    for (const auto& [pair, verdict] : rules_)
        rules.push_back(json{{"prev", pair.first},
                             {"next", pair.second},
                             {"verdict", std::string(composition_verdict_name(verdict))}});
    return json{{"default", std::string(composition_verdict_name(default_))},
                {"rules", rules}};
}

CompositionPolicy CompositionPolicy::from_json(const json& j) {
    CompositionPolicy policy(
        composition_verdict_from_name(j.value("default", "allow")));
    if (j.contains("rules"))
        for (const auto& rule : j.at("rules"))
            policy.add_rule(rule.at("prev").get<std::string>(),
                            rule.at("next").get<std::string>(),
                            composition_verdict_from_name(
                                rule.at("verdict").get<std::string>()));
    return policy;
}

CompositionResult check_composition(const CompositionPolicy& policy,
                                    const std::vector<std::string>& history,
                                    const std::string& next_tool) {
    CompositionResult result;
    result.verdict = history.empty() ? policy.default_verdict()
                                     : CompositionVerdict::Allow;
    for (const auto& prev : history) {
        const CompositionVerdict v = policy.lookup(prev, next_tool);
        if (static_cast<int>(v) > static_cast<int>(result.verdict)) {
            result.verdict = v;
            result.offending_prev = prev;
        }
    }
    return result;
}

} // namespace mcpgate
