#include "mcpgate/model.hpp"

#include <fstream>
#include <sstream>

#include "mcpgate/crypto.hpp"

namespace mcpgate {

std::string_view scope_name(Scope s) {
    switch (s) {
        case Scope::Read: return "read";
        case Scope::Write: return "write";
        case Scope::Execute: return "execute";
    }
    return "execute";
}

Scope scope_from_name(std::string_view name) {
    if (name == "read") return Scope::Read;
    if (name == "write") return Scope::Write;
    if (name == "execute") return Scope::Execute;
    throw ConfigError("unknown scope '" + std::string(name) + "'");
}

std::string Permission::to_string() const {
    return std::string(scope_name(kind)) + ":" + resource_class;
}

Permission Permission::parse(std::string_view s) {
    auto colon = s.find(':');
    if (colon == std::string_view::npos)
        throw ConfigError("permission must be '<scope>:<resource-class>'");
    Permission p;
    p.kind = scope_from_name(s.substr(0, colon));
    p.resource_class = std::string(s.substr(colon + 1));
    return p;
}

json ToolDescriptor::definition_json() const {
    return json{{"description", description},
                {"name", name},
                {"schema", schema.is_null() ? json::object() : schema}};
}

Digest ToolDescriptor::def_hash() const { return sha256(definition_json().dump()); }

json ToolDescriptor::to_json() const {
    json perms = json::array();
    for (const auto& p : perm) perms.push_back(p.to_string());
    return json{{"name", name},
                {"description", description},
                {"schema", schema.is_null() ? json::object() : schema},
                {"version", version},
                {"perm", perms},
                {"server", server},
                {"label", label}};
}

ToolDescriptor ToolDescriptor::from_json(const json& j) {
    ToolDescriptor t;
    t.name = j.at("name").get<std::string>();
    t.description = j.value("description", std::string());
    t.schema = j.value("schema", json::object());
    t.version = j.value("version", std::string("1.0"));
    for (const auto& p : j.value("perm", json::array()))
        t.perm.push_back(Permission::parse(p.get<std::string>()));
    t.server = j.value("server", std::string());
    t.label = j.value("label", std::string());
    return t;
}

const TrustDomain* SystemModel::domain_of_server(const std::string& server) const {
    for (const auto& d : domains)
        if (d.servers.count(server)) return &d;
    return nullptr;
}

const TrustDomain* SystemModel::domain_by_id(const std::string& id) const {
    for (const auto& d : domains)
        if (d.id == id) return &d;
    return nullptr;
}

const ToolDescriptor* SystemModel::find_tool(const std::string& name) const {
    auto it = tools.find(name);
    return it == tools.end() ? nullptr : &it->second;
}

Digest SystemModel::digest() const {
    json j;
    j["agents"] = agents;
    j["servers"] = servers;
    json tools_j = json::object();
    for (const auto& [name, tool] : tools) tools_j[name] = tool.to_json();
    j["tools"] = tools_j;
    j["resources"] = resources;
    json domains_j = json::array();
    for (const auto& d : domains) {
        domains_j.push_back(json{{"id", d.id},
                                 {"servers", d.servers},
                                 {"tools", d.tools},
                                 {"policy", d.policy},
                                 {"clearance", d.clearance}});
    }
    j["domains"] = domains_j;
    json grants_j = json::object();
    for (const auto& [agent, perms] : static_grants) {
        json arr = json::array();
        for (const auto& p : perms) arr.push_back(p.to_string());
        grants_j[agent] = arr;
    }
    j["static_grants"] = grants_j;
    return sha256(j.dump());
}

json KnowledgeAdd::to_json() const {
    return json{{"digest", to_hex(digest)},
                {"label", label},
                {"origin_server", origin_server},
                {"origin_domain", origin_domain}};
}

KnowledgeAdd KnowledgeAdd::from_json(const json& j) {
    KnowledgeAdd k;
    k.digest = digest_from_hex(j.at("digest").get<std::string>());
    k.label = j.at("label").get<std::string>();
    k.origin_server = j.at("origin_server").get<std::string>();
    k.origin_domain = j.at("origin_domain").get<std::string>();
    return k;
}

json GrantDelta::to_json() const {
    return json{{"revoke", revoke},
                {"agent", agent},
                {"permission", permission.to_string()}};
}

GrantDelta GrantDelta::from_json(const json& j) {
    GrantDelta g;
    g.revoke = j.value("revoke", false);
    g.agent = j.at("agent").get<std::string>();
    g.permission = Permission::parse(j.at("permission").get<std::string>());
    return g;
}

std::string_view verdict_kind_name(VerdictKind k) {
    switch (k) {
        case VerdictKind::Allow: return "allow";
        case VerdictKind::Deny: return "deny";
        case VerdictKind::Modify: return "modify";
        case VerdictKind::Flag: return "flag";
        case VerdictKind::Skip: return "skip";
    }
    return "skip";
}

VerdictKind verdict_kind_from_name(std::string_view name) {
    if (name == "allow") return VerdictKind::Allow;
    if (name == "deny") return VerdictKind::Deny;
    if (name == "modify") return VerdictKind::Modify;
    if (name == "flag") return VerdictKind::Flag;
    if (name == "skip") return VerdictKind::Skip;
    throw ConfigError("unknown verdict kind '" + std::string(name) + "'");
}

json TraceEvent::to_json() const {
    json j;
    j["seq"] = seq;
    j["session"] = session;
    j["ts_ms"] = ts_ms;
    j["action"] = json{{"label", action_label_name(action)},
                       {"method", method},
                       {"tool", tool},
                       {"agent", agent},
                       {"server", server},
                       {"arg_digest", to_hex(arg_digest)}};
    json verdicts_j = json::object();
    for (const auto& [layer, v] : verdicts)
        verdicts_j[layer] =
            json{{"verdict", verdict_kind_name(v.kind)}, {"reason", v.reason}};
    j["verdicts"] = verdicts_j;
    if (tar_def_hash) j["tar_def_hash"] = to_hex(*tar_def_hash);
    json inputs = json::array();
    for (const auto& d : input_digests) inputs.push_back(to_hex(d));
    j["input_digests"] = inputs;
    json knowledge = json::array();
    for (const auto& k : knowledge_added) knowledge.push_back(k.to_json());
    j["knowledge_added"] = knowledge;
    json ex = json::array();
    for (const auto& p : exercised) ex.push_back(p.to_string());
    j["exercised"] = ex;
    json gr = json::array();
    for (const auto& g : grants) gr.push_back(g.to_json());
    j["grants"] = gr;
    j["activated_tools"] = activated_tools;
    if (!tool_defs.empty()) {
        json defs = json::array();
        for (const auto& d : tool_defs) defs.push_back(d.to_json());
        j["tool_defs"] = defs;
    }
    j["pre_digest"] = to_hex(pre_digest);
    j["post_digest"] = to_hex(post_digest);
    return j;
}

TraceEvent TraceEvent::from_json(const json& j) {
    TraceEvent e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.session = j.at("session").get<std::string>();
    e.ts_ms = j.at("ts_ms").get<std::int64_t>();
    const json& a = j.at("action");
    const std::string label = a.at("label").get<std::string>();
    if (label == "disc") e.action = ActionLabel::Discovery;
    else if (label == "inv") e.action = ActionLabel::Invocation;
    else if (label == "read") e.action = ActionLabel::ResourceRead;
    else if (label == "samp") e.action = ActionLabel::Sampling;
    else if (label == "admin") e.action = ActionLabel::Admin;
    else e.action = ActionLabel::Other;
    e.method = a.value("method", std::string());
    e.tool = a.value("tool", std::string());
    e.agent = a.value("agent", std::string());
    e.server = a.value("server", std::string());
    e.arg_digest = digest_from_hex(a.at("arg_digest").get<std::string>());
    for (const auto& [layer, v] : j.value("verdicts", json::object()).items()) {
        e.verdicts[layer] =
            LayerVerdict{verdict_kind_from_name(v.at("verdict").get<std::string>()),
                         v.value("reason", std::string())};
    }
    if (j.contains("tar_def_hash"))
        e.tar_def_hash = digest_from_hex(j["tar_def_hash"].get<std::string>());
    for (const auto& d : j.value("input_digests", json::array()))
        e.input_digests.push_back(digest_from_hex(d.get<std::string>()));
    for (const auto& k : j.value("knowledge_added", json::array()))
        e.knowledge_added.push_back(KnowledgeAdd::from_json(k));
    for (const auto& p : j.value("exercised", json::array()))
        e.exercised.push_back(Permission::parse(p.get<std::string>()));
    for (const auto& g : j.value("grants", json::array()))
        e.grants.push_back(GrantDelta::from_json(g));
    for (const auto& t : j.value("activated_tools", json::array()))
        e.activated_tools.push_back(t.get<std::string>());
    for (const auto& d : j.value("tool_defs", json::array()))
        e.tool_defs.push_back(ToolDescriptor::from_json(d));
    e.pre_digest = digest_from_hex(j.at("pre_digest").get<std::string>());
    e.post_digest = digest_from_hex(j.at("post_digest").get<std::string>());
    return e;
}

void SystemState::connect(const std::string& agent, const std::string& server) {
    connections_.emplace(agent, server);
}

void SystemState::disconnect(const std::string& agent, const std::string& server) {
    connections_.erase({agent, server});
}

bool SystemState::connected(const std::string& agent,
                            const std::string& server) const {
    return connections_.count({agent, server}) > 0;
}

void SystemState::add_knowledge(const std::string& agent,
                                const std::string& server,
                                const KnowledgeAdd& k) {
    knowledge_[agent][server].push_back(k);
}

const std::vector<KnowledgeAdd>* SystemState::knowledge(
    const std::string& agent, const std::string& server) const {
    auto it = knowledge_.find(agent);
    if (it == knowledge_.end()) return nullptr;
    auto jt = it->second.find(server);
    return jt == it->second.end() ? nullptr : &jt->second;
}

const std::map<std::string, std::vector<KnowledgeAdd>>*
SystemState::knowledge_partitions(const std::string& agent) const {
    auto it = knowledge_.find(agent);
    return it == knowledge_.end() ? nullptr : &it->second;
}

void SystemState::grant(const std::string& agent, const Permission& p) {
    permissions_[agent].insert(p);
}

void SystemState::revoke(const std::string& agent, const Permission& p) {
    auto it = permissions_.find(agent);
    if (it != permissions_.end()) it->second.erase(p);
}

const std::set<Permission>& SystemState::capabilities(
    const std::string& agent) const {
    static const std::set<Permission> kEmpty;
    auto it = permissions_.find(agent);
    return it == permissions_.end() ? kEmpty : it->second;
}

void SystemState::activate(const std::string& agent, const std::string& tool) {
    active_[agent].insert(tool);
}

const std::set<std::string>& SystemState::active_tools(
    const std::string& agent) const {
    static const std::set<std::string> kEmpty;
    auto it = active_.find(agent);
    return it == active_.end() ? kEmpty : it->second;
}

std::set<Permission> SystemState::effective_permissions(
    const std::string& agent, const SystemModel& model) const {
    std::set<Permission> declared;
    for (const auto& tool : active_tools(agent)) {
        if (const ToolDescriptor* t = model.find_tool(tool)) {
            declared.insert(t->perm.begin(), t->perm.end());
        }
    }
    std::set<Permission> eff;
    for (const auto& p : capabilities(agent))
        if (declared.count(p)) eff.insert(p);
    return eff;
}

json SystemState::canonical_json() const {
    json j;
    json conns = json::array();
    for (const auto& [a, s] : connections_) conns.push_back({a, s});
    j["connections"] = conns;
    json know = json::object();
    for (const auto& [agent, partitions] : knowledge_) {
        json per_server = json::object();
        for (const auto& [server, entries] : partitions) {
            json arr = json::array();
            for (const auto& k : entries) arr.push_back(k.to_json());
            per_server[server] = arr;
        }
        know[agent] = per_server;
    }
    j["knowledge"] = know;
    json perms = json::object();
    for (const auto& [agent, ps] : permissions_) {
        json arr = json::array();
        for (const auto& p : ps) arr.push_back(p.to_string());
        perms[agent] = arr;
    }
    j["permissions"] = perms;
    json act = json::object();
    for (const auto& [agent, tools] : active_) act[agent] = tools;
    j["active"] = act;
    return j;
}

Digest SystemState::digest() const { return sha256(canonical_json().dump()); }

SystemState SystemState::initial(const SystemModel& model) {
    SystemState s;
    for (const auto& [agent, perms] : model.static_grants)
        for (const auto& p : perms) s.grant(agent, p);
    return s;
}

bool event_allowed(const TraceEvent& event) {
    for (const auto& [layer, verdict] : event.verdicts)
        if (verdict.kind == VerdictKind::Deny) return false;
    return true;
}

void apply_event(SystemState& state, const SystemModel& model,
                 const TraceEvent& event) {
    // Denied actions never happened as far as the state is concerned, so
    // they are exempt from model validation: a denied call may well name a
    // tool the gateway never admitted into the model.
    if (!event_allowed(event)) return;

    if (!event.agent.empty() && !model.agents.count(event.agent))
        throw ModelError("event references unknown agent '" + event.agent + "'");
    if (!event.tool.empty() && !model.tools.count(event.tool))
        throw ModelError("event references unknown tool '" + event.tool + "'");

    if (event.action == ActionLabel::Admin) {
        if (event.method == "initialize" && !event.agent.empty() &&
            !event.server.empty()) {
            state.connect(event.agent, event.server);
        } else if (event.method == "shutdown" && !event.agent.empty() &&
                   !event.server.empty()) {
            state.disconnect(event.agent, event.server);
        }
    }
    for (const auto& g : event.grants) {
        if (g.revoke) state.revoke(g.agent, g.permission);
        else state.grant(g.agent, g.permission);
    }
    for (const auto& t : event.activated_tools) state.activate(event.agent, t);
    for (const auto& k : event.knowledge_added)
        state.add_knowledge(event.agent, k.origin_server, k);
}

SystemState step(const SystemState& state, const SystemModel& model,
                 const TraceEvent& event) {
    SystemState next = state;
    apply_event(next, model, event);
    return next;
}

json TraceHeader::to_json() const {
    return json{{"model_digest", to_hex(model_digest)},
                {"lattice_digest", to_hex(lattice_digest)},
                {"config_digest", to_hex(config_digest)},
                {"session", session},
                {"created_ms", created_ms}};
}

TraceHeader TraceHeader::from_json(const json& j) {
    TraceHeader h;
    h.model_digest = digest_from_hex(j.at("model_digest").get<std::string>());
    h.lattice_digest = digest_from_hex(j.at("lattice_digest").get<std::string>());
    h.config_digest = digest_from_hex(j.at("config_digest").get<std::string>());
    h.session = j.value("session", std::string());
    h.created_ms = j.value("created_ms", std::int64_t{0});
    return h;
}

void Trace::record(TraceEvent event) {
    if (!events_.empty()) {
        const TraceEvent& last = events_.back();
        if (event.seq <= last.seq)
            throw CorruptTraceError("event seq not strictly increasing",
                                    events_.size());
        if (event.pre_digest != last.post_digest)
            throw CorruptTraceError(
                "event pre_digest does not extend the recorded chain",
                events_.size());
    }
    events_.push_back(std::move(event));
}

std::string Trace::serialize() const {
    std::ostringstream out;
    out << header_.to_json().dump() << "\n";
    for (const auto& e : events_) out << e.to_json().dump() << "\n";
    return out.str();
}

void Trace::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open trace file for writing: " + path);
    out << serialize();
}

Trace Trace::parse(std::string_view jsonl) {
    Trace trace;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool have_header = false;
    while (pos < jsonl.size()) {
        std::size_t eol = jsonl.find('\n', pos);
        if (eol == std::string_view::npos) eol = jsonl.size();
        std::string_view line = jsonl.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw CorruptTraceError(
                "trace line " + std::to_string(line_no) + ": " + e.what(), line_no);
        }
        try {
            if (!have_header) {
                trace.header_ = TraceHeader::from_json(j);
                have_header = true;
            } else {
                trace.record(TraceEvent::from_json(j));
            }
        } catch (const CorruptTraceError&) {
            throw;
        } catch (const std::exception& e) {
            throw CorruptTraceError(
                "trace line " + std::to_string(line_no) + ": " + e.what(), line_no);
        }
        ++line_no;
    }
    if (!have_header) throw CorruptTraceError("trace missing header line", 0);
    return trace;
}

Trace Trace::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open trace file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

bool Trace::operator==(const Trace& other) const {
    if (!(header_.to_json() == other.header_.to_json())) return false;
    if (events_.size() != other.events_.size()) return false;
    for (std::size_t i = 0; i < events_.size(); ++i)
        if (!(events_[i].to_json() == other.events_[i].to_json())) return false;
    return true;
}

} // namespace mcpgate
