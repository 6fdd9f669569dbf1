#ifndef MCPGATE_CTA_HPP
#define MCPGATE_CTA_HPP

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcpgate/crypto.hpp"
#include "mcpgate/model.hpp"
#include "mcpgate/util.hpp"

namespace mcpgate {

/// Dotted numeric version, optional pre-release suffix after '-'.
/// Missing components compare as zero; a pre-release sorts below its
/// release ("1.2.0-rc1" < "1.2.0").
struct Version {
    std::vector<int> parts;
    std::string prerelease;

    static Version parse(std::string_view text); // throws ConfigError
    std::string to_string() const;

    std::strong_ordering operator<=>(const Version& other) const;
    bool operator==(const Version& other) const;
};

struct Dependency {
    std::string name;
    std::string version;
    Digest artifact_hash{};

    json to_json() const;
    static Dependency from_json(const json& j);
};

/// Hash of the flattened dependency list, order independent: entries are
/// sorted by (name, version, hash) before hashing.
Digest deps_hash(std::vector<Dependency> deps);

/// Server-signed binding of a tool's definition hash, version, timestamp,
/// and dependency hash.
struct ToolAttestationRecord {
    std::string tool;
    Digest def_hash{};
    std::string version;
    std::int64_t ts_ms = 0;
    Digest deps_digest{};
    std::string signer;
    std::vector<std::uint8_t> sig;

    /// Signed bytes: def_hash ‖ version ‖ be64(ts_ms) ‖ deps_digest.
    std::vector<std::uint8_t> signing_input() const;
    bool verify(const EcdsaPublicKey& key) const;

    json to_json() const;
    static ToolAttestationRecord from_json(const json& j);
};

ToolAttestationRecord attest(const EcdsaPrivateKey& server_key,
                             const std::string& signer_id,
                             const ToolDescriptor& tool,
                             const std::vector<Dependency>& deps,
                             std::int64_t ts_ms);

/// Definition hash, version, and dependency hash frozen at user approval.
struct ApprovalPin {
    std::string tool;
    Digest def_hash{};
    std::string version;
    Digest deps_digest{};
    std::int64_t approved_ms = 0;

    json to_json() const;
    static ApprovalPin from_json(const json& j);
};

class PinStore {
public:
    void pin(ApprovalPin p);
    const ApprovalPin* find(const std::string& tool) const;
    std::size_t size() const { return pins_.size(); }

    json to_json() const;
    static PinStore from_json(const json& j);
    void save(const std::string& path) const;
    static PinStore load(const std::string& path);

private:
    std::map<std::string, ApprovalPin> pins_;
};

struct CtaVerdict {
    bool allowed = false;
    int failed_check = 0; // 1..4; 0 with reason "unapproved tool"
    std::string reason;
    bool audit_flag = false; // set when the dependency check was skipped

    static CtaVerdict allow(bool audit_flag = false);
    static CtaVerdict deny(int check, std::string reason);
};

/// The four-step attestation check against the pinned approval:
///   1. TAR signature verifies under the server key
///   2. def_hash equals the pinned definition hash
///   3. version has not regressed below the pinned version
///   4. deps_digest is on the tool's known-good list
/// An empty known-good list skips check 4 with an audit flag, or denies
/// under strict mode. A missing pin denies as "unapproved tool".
CtaVerdict verify_invocation(const ToolAttestationRecord& tar,
                             const ApprovalPin* pin, const EcdsaPublicKey& key,
                             const std::set<Digest>& known_good_deps,
                             bool strict_mode);

/// Append-only hash chain over attestation records. Genesis is 32 zero
/// bytes; entry_hash = SHA-256(TAR bytes ‖ prev_hash).
class AttestationLog {
public:
    struct Entry {
        std::string tar_encoded; // canonical JSON of the TAR
        Digest prev_hash{};
        Digest entry_hash{};
    };

    void append(const ToolAttestationRecord& tar);
    const std::vector<Entry>& entries() const { return entries_; }
    Digest head() const;

    /// Walks every link; returns the index of the first inconsistent
    /// entry, or nullopt when the chain is intact.
    std::optional<std::size_t> audit() const;

    std::string serialize() const; // JSON-Lines
    static AttestationLog parse(std::string_view jsonl);
    void save(const std::string& path) const;
    static AttestationLog load(const std::string& path);

    std::vector<Entry>& mutable_entries() { return entries_; }

private:
    std::vector<Entry> entries_;
};

} // namespace mcpgate

#endif
