#ifndef MCPGATE_CAC_HPP
#define MCPGATE_CAC_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcpgate/crypto.hpp"
#include "mcpgate/model.hpp"
#include "mcpgate/util.hpp"

namespace mcpgate {

/// Per-key value constraint inside a capability. Exact matches any JSON
/// value; Prefix applies to strings; Range to numbers; Any admits every
/// value of the key.
struct ParamConstraint {
    enum class Kind { Any, Exact, Prefix, Range };

    Kind kind = Kind::Any;
    json exact;
    std::string prefix;
    double min = 0.0;
    double max = 0.0;

    bool admits(const json& value) const;

    json to_json() const;
    static ParamConstraint from_json(const json& j);

    static ParamConstraint any();
    static ParamConstraint exactly(json v);
    static ParamConstraint with_prefix(std::string p);
    static ParamConstraint in_range(double lo, double hi);
};

/// Unforgeable invocation grant: signed binding of (tool, params, scope,
/// ttl, holder) to the issuing authority.
struct Capability {
    std::string tool;
    std::map<std::string, ParamConstraint> params;
    Scope scope = Scope::Read;
    std::int64_t ttl_ms = 0; // absolute expiry
    std::string holder;
    std::string issuer;
    std::vector<std::uint8_t> sig;

    /// Canonical signed encoding of every field except issuer and sig.
    std::vector<std::uint8_t> signing_input() const;
    bool verify(const Keyring& issuers) const;

    json to_json() const;
    static Capability from_json(const json& j);
};

/// Issues a capability after checking the constraint keys against the
/// tool schema. Throws ConfigError when params name keys the schema
/// lacks.
Capability issue(const EcdsaPrivateKey& authority, const std::string& issuer_id,
                 const std::string& agent, const ToolDescriptor& tool,
                 std::map<std::string, ParamConstraint> params, Scope scope,
                 std::int64_t ttl_ms);

struct CacVerdict {
    bool allowed = false;
    int failed_check = 0; // 1..4 when denied
    std::string reason;

    static CacVerdict allow();
    static CacVerdict deny(int check, std::string reason);
};

/// The four-step invocation check. A single capability must pass all four
/// checks; argument coverage is never stitched across capabilities. The
/// deny reason names the first check no candidate survived.
///   1. some capability for the tool verifies and is bound to the agent
///   2. every argument key is constrained and its value admitted
///   3. the required operation kinds fall within the capability scope
///   4. the capability has not expired
CacVerdict check_invocation(const std::vector<Capability>& held,
                            const std::string& agent, const std::string& tool,
                            const json& args, const std::vector<Scope>& required,
                            std::int64_t now_ms, const Keyring& issuers);

/// Operation kinds a call needs its capability scope to cover:
/// resources/read needs read; tools/call needs the kinds in perm(t),
/// or execute when the tool declares none.
std::vector<Scope> required_scopes(Method method, const ToolDescriptor* tool);

/// Scope subsumption: execute covers write covers read.
bool scope_covers(Scope held, Scope required);

enum class CompositionVerdict { Allow, Audit, Deny };

std::string_view composition_verdict_name(CompositionVerdict v);
CompositionVerdict composition_verdict_from_name(std::string_view name);

/// Pairwise sequencing policy ρ. Lookup precedence per pair:
/// exact (prev, next) > (prev, *) > (*, next) > default.
class CompositionPolicy {
public:
    CompositionPolicy() = default;
    explicit CompositionPolicy(CompositionVerdict fallback) : default_(fallback) {}

    void add_rule(const std::string& prev, const std::string& next,
                  CompositionVerdict v);
    CompositionVerdict lookup(const std::string& prev,
                              const std::string& next) const;
    CompositionVerdict default_verdict() const { return default_; }

    json to_json() const;
    static CompositionPolicy from_json(const json& j);

private:
    CompositionVerdict default_ = CompositionVerdict::Allow;
    std::map<std::pair<std::string, std::string>, CompositionVerdict> rules_;
};

struct CompositionResult {
    CompositionVerdict verdict = CompositionVerdict::Allow;
    /// Prior tool that produced the verdict, empty for the default.
    std::string offending_prev;
};

/// Most restrictive ρ(t_i, next) over every t_i already invoked this
/// session (deny > audit > allow). Empty history yields the default.
CompositionResult check_composition(const CompositionPolicy& policy,
                                    const std::vector<std::string>& history,
                                    const std::string& next_tool);

} // namespace mcpgate

#endif
