#include "mcpgate/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mcpgate/crypto.hpp"

namespace mcpgate {

json lattice_decl_to_json(const LatticeDecl& decl) {
    json order = json::array();
    for (const auto& [lo, hi] : decl.order) order.push_back(json::array({lo, hi}));
    return json{{"labels", decl.labels},
                {"order", order},
                {"bottom", decl.bottom},
                {"top", decl.top}};
}

LatticeDecl lattice_decl_from_json(const json& j) {
    LatticeDecl decl;
    decl.labels = j.at("labels").get<std::vector<std::string>>();
    for (const auto& pair : j.at("order"))
        decl.order.emplace_back(pair.at(0).get<std::string>(),
                                pair.at(1).get<std::string>());
    decl.bottom = j.at("bottom").get<std::string>();
    decl.top = j.at("top").get<std::string>();
    return decl;
}

json trust_domain_to_json(const TrustDomain& d) {
    return json{{"id", d.id},
                {"servers", d.servers},
                {"tools", d.tools},
                {"policy", d.policy},
                {"clearance", d.clearance}};
}

TrustDomain trust_domain_from_json(const json& j) {
    TrustDomain d;
    d.id = j.at("id").get<std::string>();
    if (j.contains("servers"))
        d.servers = j.at("servers").get<std::set<std::string>>();
    if (j.contains("tools")) d.tools = j.at("tools").get<std::set<std::string>>();
    d.policy = j.value("policy", std::string());
    d.clearance = j.value("clearance", std::string());
    return d;
}

json UpstreamConfig::to_json() const {
    return json{{"server", server},
                {"transport", transport},
                {"address", address},
                {"public_key_pem", public_key_pem},
                {"domain", domain}};
}

UpstreamConfig UpstreamConfig::from_json(const json& j) {
    UpstreamConfig u;
    u.server = j.at("server").get<std::string>();
    u.transport = j.value("transport", "inproc");
    u.address = j.value("address", std::string());
    if (j.contains("public_key_pem")) {
        u.public_key_pem = j.at("public_key_pem").get<std::string>();
    } else if (j.contains("public_key_file")) {
        const std::string path = j.at("public_key_file").get<std::string>();
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("cannot read public key file: " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        u.public_key_pem = buf.str();
    }
    u.domain = j.at("domain").get<std::string>();
    return u;
}

json PolicyConfig::to_json() const {
    return json{
        {"sanitizer",
         json{{"enabled", sanitizer_enabled},
              {"literals", sanitizer_literals},
              {"regexes", sanitizer_regexes}}},
        {"rate_limit",
         json{{"enabled", rate_limit_enabled},
              {"threshold", rate_threshold},
              {"window_ms", rate_window_ms}}},
        {"consent",
         json{{"enabled", consent_enabled},
              {"high_risk_tools", high_risk_tools},
              {"timeout_ms", consent_timeout_ms}}},
        {"anomaly",
         json{{"enabled", anomaly_enabled},
              {"profile", anomaly_profile_path},
              {"threshold", anomaly_threshold}}}};
}

PolicyConfig PolicyConfig::from_json(const json& j) {
    PolicyConfig p;
    if (j.contains("sanitizer")) {
        const json& s = j.at("sanitizer");
        p.sanitizer_enabled = s.value("enabled", true);
        if (s.contains("literals"))
            p.sanitizer_literals = s.at("literals").get<std::vector<std::string>>();
        if (s.contains("regexes"))
            p.sanitizer_regexes = s.at("regexes").get<std::vector<std::string>>();
    }
    if (j.contains("rate_limit")) {
        const json& r = j.at("rate_limit");
        p.rate_limit_enabled = r.value("enabled", true);
        p.rate_threshold = r.value("threshold", std::size_t{30});
        p.rate_window_ms = r.value("window_ms", std::int64_t{1000});
    }
    if (j.contains("consent")) {
        const json& c = j.at("consent");
        p.consent_enabled = c.value("enabled", true);
        if (c.contains("high_risk_tools"))
            p.high_risk_tools =
                c.at("high_risk_tools").get<std::vector<std::string>>();
        p.consent_timeout_ms = c.value("timeout_ms", std::int64_t{60000});
    }
    if (j.contains("anomaly")) {
        const json& a = j.at("anomaly");
        p.anomaly_enabled = a.value("enabled", false);
        p.anomaly_profile_path = a.value("profile", std::string());
        p.anomaly_threshold = a.value("threshold", 0.05);
    }
    return p;
}

json LayerToggles::to_json() const {
    return json{{"cac", cac},
                {"cta", cta},
                {"ift", ift},
                {"rpe", rpe},
                {"protocol", protocol}};
}

LayerToggles LayerToggles::from_json(const json& j) {
    LayerToggles t;
    t.cac = j.value("cac", true);
    t.cta = j.value("cta", true);
    t.ift = j.value("ift", true);
    t.rpe = j.value("rpe", true);
    t.protocol = j.value("protocol", true);
    return t;
}

LayerToggles LayerToggles::none() {
    return LayerToggles{false, false, false, false, false};
}

LayerToggles LayerToggles::all() { return LayerToggles{}; }

LayerToggles LayerToggles::parse(std::string_view csv) {
    if (csv == "all" || csv.empty()) return all();
    LayerToggles t = none();
    if (csv == "none") return t;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        std::size_t comma = csv.find(',', pos);
        if (comma == std::string_view::npos) comma = csv.size();
        const std::string_view part = csv.substr(pos, comma - pos);
        if (part == "cac") t.cac = true;
        else if (part == "cta") t.cta = true;
        else if (part == "ift") t.ift = true;
        else if (part == "rpe") t.rpe = true;
        else if (part == "protocol") t.protocol = true;
        else if (!part.empty())
            throw ConfigError("unknown layer '" + std::string(part) + "'");
        if (comma == csv.size()) break;
        pos = comma + 1;
    }
    return t;
}

json GatewayConfig::to_json() const {
    json upstreams_json = json::array();
    for (const auto& u : upstreams) upstreams_json.push_back(u.to_json());
    json domains_json = json::array();
    for (const auto& d : domains) domains_json.push_back(trust_domain_to_json(d));
    json caps_json = json::array();
    for (const auto& c : capabilities) caps_json.push_back(c.to_json());
    json declass_json = json::array();
    for (const auto& r : declassification) declass_json.push_back(r.to_json());
    return json{{"agent", agent},
                {"issuer_id", issuer_id},
                {"authority_public_key_pem", authority_public_key_pem},
                {"lattice", lattice_decl_to_json(lattice_decl)},
                {"labels", labels},
                {"default_label", default_label},
                {"domains", domains_json},
                {"upstreams", upstreams_json},
                {"capabilities", caps_json},
                {"capabilities_dir", capabilities_dir},
                {"composition", composition.to_json()},
                {"declassification", declass_json},
                {"flow_policy", flow_policy.to_json()},
                {"policies", policies.to_json()},
                {"layers", layers.to_json()},
                {"strict_mode", strict_mode},
                {"span_threshold", span_threshold},
                {"pins", pins_path},
                {"known_good_deps", known_good_deps},
                {"audit_log", audit_log_path},
                {"trace_dir", trace_dir},
                {"control_bind", control_bind},
                {"control_port", control_port}};
}

GatewayConfig GatewayConfig::from_json(const json& j) {
    GatewayConfig c;
    c.agent = j.value("agent", "agent");
    c.issuer_id = j.value("issuer_id", "authority");
    c.authority_public_key_pem = j.value("authority_public_key_pem", std::string());
    if (j.contains("lattice"))
        c.lattice_decl = lattice_decl_from_json(j.at("lattice"));
    else
        c.lattice_decl = Lattice::default_chain().decl();
    if (j.contains("labels"))
        c.labels = j.at("labels").get<std::map<std::string, std::string>>();
    c.default_label = j.value("default_label", std::string());
    if (j.contains("domains"))
        for (const auto& d : j.at("domains"))
            c.domains.push_back(trust_domain_from_json(d));
    if (j.contains("upstreams"))
        for (const auto& u : j.at("upstreams"))
            c.upstreams.push_back(UpstreamConfig::from_json(u));
    if (j.contains("capabilities"))
        for (const auto& cap : j.at("capabilities"))
            c.capabilities.push_back(Capability::from_json(cap));
    c.capabilities_dir = j.value("capabilities_dir", std::string());
    if (j.contains("composition"))
        c.composition = CompositionPolicy::from_json(j.at("composition"));
    if (j.contains("declassification"))
        for (const auto& r : j.at("declassification"))
            c.declassification.push_back(DeclassificationRule::from_json(r));
    if (j.contains("flow_policy"))
        c.flow_policy = FlowPolicy::from_json(j.at("flow_policy"));
    if (j.contains("policies"))
        c.policies = PolicyConfig::from_json(j.at("policies"));
    if (j.contains("layers")) c.layers = LayerToggles::from_json(j.at("layers"));
    c.strict_mode = j.value("strict_mode", false);
    c.span_threshold = j.value("span_threshold", std::size_t{16});
    c.pins_path = j.value("pins", std::string());
    if (j.contains("known_good_deps"))
        c.known_good_deps =
            j.at("known_good_deps")
                .get<std::map<std::string, std::vector<std::string>>>();
    c.audit_log_path = j.value("audit_log", std::string());
    c.trace_dir = j.value("trace_dir", std::string());
    c.control_bind = j.value("control_bind", "127.0.0.1");
    c.control_port = j.value("control_port", 0);
    return c;
}

GatewayConfig GatewayConfig::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    GatewayConfig c = from_json(j);
    if (!c.capabilities_dir.empty()) {
        namespace fs = std::filesystem;
        const fs::path base = fs::path(path).parent_path() / c.capabilities_dir;
        if (fs::exists(base))
            for (const auto& entry : fs::directory_iterator(base)) {
                if (entry.path().extension() != ".json") continue;
                std::ifstream cap_in(entry.path(), std::ios::binary);
                json cap_json;
                cap_in >> cap_json;
                c.capabilities.push_back(Capability::from_json(cap_json));
            }
    }
    return c;
}

Digest GatewayConfig::digest() const { return sha256(to_json().dump()); }

Lattice lattice_of(const GatewayConfig& config) {
    if (config.lattice_decl.labels.empty()) return Lattice::default_chain();
    return Lattice(config.lattice_decl);
}

SystemModel model_from_config(const GatewayConfig& config,
                              const Lattice& lattice) {
    SystemModel model;
    model.agents.insert(config.agent);
    for (const auto& u : config.upstreams) model.servers.insert(u.server);
    model.domains = config.domains;
    const std::string fallback = config.default_label.empty()
                                     ? lattice.top()
                                     : config.default_label;
    model.labeling = LabelAssignment(config.labels, fallback);
    return model;
}

} // namespace mcpgate
