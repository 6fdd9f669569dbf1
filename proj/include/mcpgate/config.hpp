#ifndef MCPGATE_CONFIG_HPP
#define MCPGATE_CONFIG_HPP

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcpgate/cac.hpp"
#include "mcpgate/ift.hpp"
#include "mcpgate/lattice.hpp"
#include "mcpgate/util.hpp"

namespace mcpgate {

json lattice_decl_to_json(const LatticeDecl& decl);
LatticeDecl lattice_decl_from_json(const json& j);

json trust_domain_to_json(const TrustDomain& d);
TrustDomain trust_domain_from_json(const json& j);

struct UpstreamConfig {
    std::string server;
    std::string transport = "inproc"; // inproc | stdio | http
    std::string address;              // URL (http) or command line (stdio)
    std::string public_key_pem;
    std::string domain;

    json to_json() const;
    static UpstreamConfig from_json(const json& j);
};

struct PolicyConfig {
    bool sanitizer_enabled = true;
    std::vector<std::string> sanitizer_literals; // empty: built-in markers
    std::vector<std::string> sanitizer_regexes;

    bool rate_limit_enabled = true;
    std::size_t rate_threshold = 30;
    std::int64_t rate_window_ms = 1000;

    bool consent_enabled = true;
    std::vector<std::string> high_risk_tools;
    std::int64_t consent_timeout_ms = 60000;

    bool anomaly_enabled = false;
    std::string anomaly_profile_path;
    double anomaly_threshold = 0.05;

    json to_json() const;
    static PolicyConfig from_json(const json& j);
};

/// Enforcement toggles, one per defense layer plus the envelope and
/// lifecycle machinery of the protocol itself.
struct LayerToggles {
    bool cac = true;
    bool cta = true;
    bool ift = true;
    bool rpe = true;
    bool protocol = true;

    bool any() const { return cac || cta || ift || rpe || protocol; }

    json to_json() const;
    static LayerToggles from_json(const json& j);
    static LayerToggles none();
    static LayerToggles all();
    /// Parses "cac,ift" style lists; "none" and "all" accepted.
    static LayerToggles parse(std::string_view csv);
};

struct GatewayConfig {
    std::string agent = "agent";
    std::string issuer_id = "authority";
    std::string authority_public_key_pem;

    LatticeDecl lattice_decl;
    std::map<std::string, std::string> labels; // subject -> label
    std::string default_label;                 // empty: lattice top
    std::vector<TrustDomain> domains;
    std::vector<UpstreamConfig> upstreams;

    std::vector<Capability> capabilities;
    std::string capabilities_dir;

    CompositionPolicy composition;
    std::vector<DeclassificationRule> declassification;
    FlowPolicy flow_policy;
    PolicyConfig policies;
    LayerToggles layers;

    bool strict_mode = false;
    std::size_t span_threshold = 16;

    std::string pins_path;
    std::map<std::string, std::vector<std::string>> known_good_deps;

    std::string audit_log_path;
    std::string trace_dir;
    std::string control_bind = "127.0.0.1";
    int control_port = 0;

    json to_json() const;
    static GatewayConfig from_json(const json& j);
    /// Loads the file and any capability files under capabilities_dir.
    static GatewayConfig load(const std::string& path);

    Digest digest() const;
};

/// Builds the static part of the system model (agents, servers, domains,
/// labeling). Tools join the model as the gateway admits them.
SystemModel model_from_config(const GatewayConfig& config, const Lattice& lattice);

/// Lattice declared by the config, or the default chain when absent.
Lattice lattice_of(const GatewayConfig& config);

} // namespace mcpgate

#endif
