#include "mcpgate/harness/campaign.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

namespace mcpgate::harness {

namespace {

Scope scope_from_name(const std::string& name) {
    if (name == "read") return Scope::Read;
    if (name == "write") return Scope::Write;
    if (name == "execute") return Scope::Execute;
    throw ConfigError("unknown scope: " + name);
}

std::string csv_escape(const std::string& raw) {
    std::string out = "\"";
    for (const char c : raw) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

const ScriptedTool* find_tool(const std::vector<ServerSpec>& servers,
                              const std::string& server_hint,
                              const std::string& tool, std::size_t phase) {
    for (const ServerSpec& s : servers) {
        if (!server_hint.empty() && s.id != server_hint) continue;
        const auto& tools = s.phases[std::min(phase, s.phases.size() - 1)];
        for (const ScriptedTool& t : tools)
            if (t.descriptor.name == tool) return &t;
    }
    return nullptr;
}

} // namespace

AttackPredicate AttackPredicate::from_json(const json& j) {
    AttackPredicate p;
    p.kind = j.at("kind").get<std::string>();
    p.server = j.value("server", "");
    p.tool = j.value("tool", "");
    p.needle = j.value("needle", "");
    p.min_count = j.value("min_count", std::size_t{1});
    return p;
}

Scenario Scenario::from_json(const json& j) {
    Scenario s;
    s.id = j.at("id").get<std::string>();
    s.vector_id = j.value("vector_id", "");
    s.description = j.value("description", "");
    s.partial = j.value("partial", false);
    s.consent_policy = j.value("consent_policy", "deny");
    s.config = j.value("config", json::object());
    for (const auto& server : j.value("servers", json::array()))
        s.servers.push_back(ServerSpec::from_json(server));
    for (const auto& a : j.value("approvals", json::array())) s.approvals.push_back(a);
    for (const auto& c : j.value("capabilities", json::array()))
        s.capabilities.push_back(c);
    for (const auto& step : j.value("script", json::array())) s.script.push_back(step);
    const json expect = j.value("expect", json::object());
    s.expected_blocked_by = expect.value("blocked_by", "");
    if (expect.contains("attack"))
        s.attack = AttackPredicate::from_json(expect.at("attack"));
    return s;
}

Scenario Scenario::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read scenario: " + path);
    json j;
    in >> j;
    return from_json(j);
}

std::vector<Scenario> load_scenarios(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<Scenario> out;
    out.reserve(files.size());
    for (const auto& f : files) out.push_back(Scenario::load(f.string()));
    return out;
}

RunResult run_scenario(const Scenario& scenario, const LayerToggles& layers,
                       std::int64_t start_ms) {
    auto clock = std::make_shared<ManualClock>(start_ms);
    const EcdsaPrivateKey authority = EcdsaPrivateKey::generate();

    std::vector<std::shared_ptr<ScriptedServer>> servers;
    servers.reserve(scenario.servers.size());
    for (const ServerSpec& spec : scenario.servers)
        servers.push_back(std::make_shared<ScriptedServer>(spec, clock));

    GatewayConfig config = GatewayConfig::from_json(scenario.config);
    config.agent = "agent";
    config.issuer_id = "authority";
    config.authority_public_key_pem = authority.public_key().to_pem();
    config.layers = layers;
    for (std::size_t i = 0; i < servers.size(); ++i) {
        UpstreamConfig up;
        up.server = scenario.servers[i].id;
        up.transport = "inproc";
        up.public_key_pem = servers[i]->public_key_pem();
        up.domain = scenario.servers[i].domain;
        config.upstreams.push_back(std::move(up));
    }
    if (config.domains.empty()) {
        // Synthesize one permissive domain per declared group so benign
        // worlds work out of the box; attack scenarios declare their own.
        const Lattice lattice = lattice_of(config);
        std::map<std::string, TrustDomain> groups;
        for (const ServerSpec& spec : scenario.servers) {
            const std::string id =
                spec.domain.empty() ? spec.id + "-domain" : spec.domain;
            TrustDomain& d = groups[id];
            d.id = id;
            d.servers.insert(spec.id);
            d.clearance = lattice.top();
        }
        for (auto& [id, domain] : groups) config.domains.push_back(domain);
    }
    // A known-good dependency digest of "auto" resolves to the digest of the
    // dependency list the scripted tool actually ships, so scenarios do not
    // have to hard-code hash values.
    for (auto& [tool, digests] : config.known_good_deps) {
        for (std::string& hex : digests) {
            if (hex != "auto") continue;
            const ScriptedTool* t = find_tool(scenario.servers, "", tool, 0);
            if (!t) throw ConfigError("known_good_deps names unknown tool: " + tool);
            hex = to_hex(deps_hash(t->deps));
        }
    }

    Gateway gateway(config, clock, scenario.id);
    for (const auto& server : servers) gateway.register_upstream(server);

    for (const json& approval : scenario.approvals) {
        const std::string server_hint = approval.value("server", "");
        const std::string tool = approval.at("tool").get<std::string>();
        const std::size_t phase = approval.value("phase", std::size_t{0});
        const ScriptedTool* t = find_tool(scenario.servers, server_hint, tool, phase);
        if (!t) throw ConfigError("approval names unknown tool: " + tool);
        ApprovalPin pin;
        pin.tool = t->descriptor.name;
        pin.def_hash = t->descriptor.def_hash();
        pin.version = approval.value("version", t->descriptor.version);
        pin.deps_digest = deps_hash(t->deps);
        pin.approved_ms = clock->now_ms();
        gateway.pins().pin(std::move(pin));
    }

    for (const json& cap_spec : scenario.capabilities) {
        const std::string tool = cap_spec.at("tool").get<std::string>();
        const std::string server_hint = cap_spec.value("server", "");
        const ScriptedTool* t = find_tool(scenario.servers, server_hint, tool, 0);
        if (!t) throw ConfigError("capability names unknown tool: " + tool);
        std::map<std::string, ParamConstraint> params;
        for (const auto& [key, constraint] :
             cap_spec.value("params", json::object()).items())
            params.emplace(key, ParamConstraint::from_json(constraint));
        const Scope scope = scope_from_name(cap_spec.value("scope", "read"));
        const std::int64_t ttl =
            clock->now_ms() + cap_spec.value("ttl_ms", std::int64_t{3600000});
        gateway.add_capability(issue(authority, "authority",
                                     cap_spec.value("holder", "agent"),
                                     t->descriptor, std::move(params), scope,
                                     ttl));
    }

    ObedientAgent agent(&gateway, clock, scenario.consent_policy);
    agent.run(scenario.script);

    RunResult result;
    result.scenario_id = scenario.id;
    result.vector_id = scenario.vector_id;
    result.is_attack = scenario.attack.has_value();
    result.partial = scenario.partial;
    result.expected_blocked_by = scenario.expected_blocked_by;
    result.layers = layers;
    if (const ThreatVector* tv = find_vector(scenario.vector_id))
        result.category = tv->category;
    else
        result.category = "benign";

    if (scenario.attack) {
        const AttackPredicate& p = *scenario.attack;
        if (p.kind == "needle_received" || p.kind == "tool_called") {
            std::size_t count = 0;
            for (const auto& server : servers) {
                if (!p.server.empty() && server->id() != p.server) continue;
                for (const ReceivedCall& rc : server->received()) {
                    if (!p.tool.empty() && rc.tool != p.tool) continue;
                    if (p.kind == "tool_called" ||
                        rc.params.dump().find(p.needle) != std::string::npos)
                        ++count;
                }
            }
            result.attack_succeeded = count >= p.min_count;
        } else if (p.kind == "message_delivered") {
            std::size_t count = 0;
            for (const std::string& text : agent.delivered_texts())
                if (text.find(p.needle) != std::string::npos) ++count;
            result.attack_succeeded = count >= p.min_count;
        } else {
            throw ConfigError("unknown attack predicate kind: " + p.kind);
        }
    }

    for (const AgentAction& a : agent.log()) {
        if (a.outcome.blocked()) {
            result.blocked = true;
            result.blocking_layer = a.outcome.blocked_by;
            result.reason = a.outcome.reason;
            break;
        }
    }
    if (!result.blocked) {
        // Content neutralization leaves no error outcome; look for the
        // verdicts it left in the trace.
        for (const TraceEvent& e : gateway.trace().events()) {
            for (const auto& [layer, v] : e.verdicts) {
                const bool redaction = v.kind == VerdictKind::Modify &&
                                       v.reason.find("redact") !=
                                           std::string::npos;
                const bool drop = v.kind == VerdictKind::Flag &&
                                  v.reason.find("dropped") !=
                                      std::string::npos;
                if (v.kind == VerdictKind::Deny || redaction || drop) {
                    result.blocked = true;
                    result.blocking_layer = layer;
                    result.reason = v.reason;
                    break;
                }
            }
            if (result.blocked) break;
        }
    }

    result.trace = gateway.trace();
    result.config_used = gateway.config();
    result.pins_used = gateway.pins();
    result.model_used = gateway.model();
    return result;
}

std::string results_csv(const std::vector<RunResult>& results) {
    std::string out = "vector_id,category,outcome,blocking_layer,reason\n";
    for (const RunResult& r : results) {
        std::string outcome;
        if (r.is_attack)
            outcome = r.attack_succeeded ? "succeeded"
                      : r.blocked        ? "blocked"
                                         : "no_effect";
        else
            outcome = r.blocked ? "false_block" : "clean";
        out += (r.vector_id.empty() ? r.scenario_id : r.vector_id) + "," +
               r.category + "," + outcome + "," + r.blocking_layer + "," +
               csv_escape(r.reason) + "\n";
    }
    return out;
}

std::vector<VerificationReport> verify_run(const RunResult& run) {
    const Lattice lattice = lattice_of(run.config_used);
    return verify_all(run.trace, run.pins_used, run.model_used, lattice,
                      run.config_used.domains,
                      run.config_used.declassification,
                      run.config_used.flow_policy);
}

} // namespace mcpgate::harness
