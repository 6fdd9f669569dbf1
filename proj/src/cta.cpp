#include "mcpgate/cta.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace mcpgate {

Version Version::parse(std::string_view text) {
    Version v;
    std::string_view numeric = text;
    if (auto dash = text.find('-'); dash != std::string_view::npos) {
        v.prerelease = std::string(text.substr(dash + 1));
        numeric = text.substr(0, dash);
        if (v.prerelease.empty())
            throw ConfigError("empty pre-release in version '" + std::string(text) + "'");
    }
    if (numeric.empty())
        throw ConfigError("empty version string");
    std::size_t pos = 0;
    while (pos <= numeric.size()) {
        const std::size_t dot = numeric.find('.', pos);
        const std::string_view part =
            numeric.substr(pos, dot == std::string_view::npos ? std::string_view::npos
                                                              : dot - pos);
        int value = 0;
        const auto [ptr, ec] =
            std::from_chars(part.data(), part.data() + part.size(), value);
        if (ec != std::errc{} || ptr != part.data() + part.size() || value < 0)
            throw ConfigError("malformed version component in '" + std::string(text) + "'");
        v.parts.push_back(value);
        if (dot == std::string_view::npos) break;
        pos = dot + 1;
    }
    return v;
}

std::string Version::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += '.';
        out += std::to_string(parts[i]);
    }
    if (!prerelease.empty()) {
        out += '-';
        out += prerelease;
    }
    return out;
}

std::strong_ordering Version::operator<=>(const Version& other) const {
    const std::size_t n = std::max(parts.size(), other.parts.size());
    for (std::size_t i = 0; i < n; ++i) {
        const int a = i < parts.size() ? parts[i] : 0;
        const int b = i < other.parts.size() ? other.parts[i] : 0;
        if (auto c = a <=> b; c != 0) return c;
    }
    // Equal numeric tuples: a pre-release precedes the release.
    const bool a_pre = !prerelease.empty();
    const bool b_pre = !other.prerelease.empty();
    if (a_pre != b_pre) return a_pre ? std::strong_ordering::less
                                     : std::strong_ordering::greater;
    return prerelease <=> other.prerelease;
}

bool Version::operator==(const Version& other) const {
    return (*this <=> other) == 0;
}

json Dependency::to_json() const {
    return json{{"name", name},
                {"version", version},
                {"artifact_sha256", to_hex(artifact_hash)}};
}

Dependency Dependency::from_json(const json& j) {
    Dependency d;
    d.name = j.at("name").get<std::string>();
    d.version = j.at("version").get<std::string>();
    d.artifact_hash = digest_from_hex(j.at("artifact_sha256").get<std::string>());
    return d;
}

Digest deps_hash(std::vector<Dependency> deps) {
    std::vector<std::array<std::string, 3>> flat;
    flat.reserve(deps.size());
    for (const auto& d : deps)
        flat.push_back({d.name, d.version, to_hex(d.artifact_hash)});
    std::sort(flat.begin(), flat.end());
    json canonical = json::array();
    for (const auto& entry : flat)
        canonical.push_back(json::array({entry[0], entry[1], entry[2]}));
    const std::string encoded = canonical.dump();
    return sha256(encoded);
}

std::vector<std::uint8_t> ToolAttestationRecord::signing_input() const {
    std::vector<std::uint8_t> input;
    input.insert(input.end(), def_hash.begin(), def_hash.end());
    input.insert(input.end(), version.begin(), version.end());
    for (int shift = 56; shift >= 0; shift -= 8)
        input.push_back(static_cast<std::uint8_t>(
            (static_cast<std::uint64_t>(ts_ms) >> shift) & 0xff));
    input.insert(input.end(), deps_digest.begin(), deps_digest.end());
    return input;
}

bool ToolAttestationRecord::verify(const EcdsaPublicKey& key) const {
    return key.verify(signing_input(), sig);
}

json ToolAttestationRecord::to_json() const {
    return json{{"tool", tool},
                {"def_sha256", to_hex(def_hash)},
                {"version", version},
                {"ts_ms", ts_ms},
                {"deps_sha256", to_hex(deps_digest)},
                {"signer", signer},
                {"sig_b64", base64_encode(sig)}};
}

ToolAttestationRecord ToolAttestationRecord::from_json(const json& j) {
    ToolAttestationRecord tar;
    tar.tool = j.at("tool").get<std::string>();
    tar.def_hash = digest_from_hex(j.at("def_sha256").get<std::string>());
    tar.version = j.at("version").get<std::string>();
    tar.ts_ms = j.at("ts_ms").get<std::int64_t>();
    tar.deps_digest = digest_from_hex(j.at("deps_sha256").get<std::string>());
    tar.signer = j.at("signer").get<std::string>();
    tar.sig = base64_decode(j.at("sig_b64").get<std::string>());
    return tar;
}

ToolAttestationRecord attest(const EcdsaPrivateKey& server_key,
                             const std::string& signer_id,
                             const ToolDescriptor& tool,
                             const std::vector<Dependency>& deps,
                             std::int64_t ts_ms) {
    ToolAttestationRecord tar;
    tar.tool = tool.name;
    tar.def_hash = tool.def_hash();
    tar.version = tool.version;
    tar.ts_ms = ts_ms;
    tar.deps_digest = deps_hash(deps);
    tar.signer = signer_id;
    tar.sig = server_key.sign(tar.signing_input());
    return tar;
}

json ApprovalPin::to_json() const {
    return json{{"tool", tool},
                {"def_sha256", to_hex(def_hash)},
                {"version", version},
                {"deps_sha256", to_hex(deps_digest)},
                {"approved_ms", approved_ms}};
}

ApprovalPin ApprovalPin::from_json(const json& j) {
    ApprovalPin p;
    p.tool = j.at("tool").get<std::string>();
    p.def_hash = digest_from_hex(j.at("def_sha256").get<std::string>());
    p.version = j.at("version").get<std::string>();
    p.deps_digest = digest_from_hex(j.at("deps_sha256").get<std::string>());
    p.approved_ms = j.at("approved_ms").get<std::int64_t>();
    return p;
}

void PinStore::pin(ApprovalPin p) { pins_[p.tool] = std::move(p); }

const ApprovalPin* PinStore::find(const std::string& tool) const {
    auto it = pins_.find(tool);
    return it == pins_.end() ? nullptr : &it->second;
}

json PinStore::to_json() const {
    json pins = json::array();
    for (const auto& [tool, pin] : pins_) pins.push_back(pin.to_json());
    return json{{"pins", pins}};
}

PinStore PinStore::from_json(const json& j) {
    PinStore store;
    for (const auto& pin : j.at("pins")) store.pin(ApprovalPin::from_json(pin));
    return store;
}

void PinStore::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write pin file: " + path);
    out << to_json().dump(2) << '\n';
}

PinStore PinStore::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read pin file: " + path);
    json j;
    in >> j;
    return from_json(j);
}

CtaVerdict CtaVerdict::allow(bool flag) { return CtaVerdict{true, 0, {}, flag}; }

CtaVerdict CtaVerdict::deny(int check, std::string reason) {
    return CtaVerdict{false, check, std::move(reason), false};
}

CtaVerdict verify_invocation(const ToolAttestationRecord& tar,
                             const ApprovalPin* pin, const EcdsaPublicKey& key,
                             const std::set<Digest>& known_good_deps,
                             bool strict_mode) {
    if (pin == nullptr)
        return CtaVerdict::deny(0, "unapproved tool '" + tar.tool + "'");
    if (!tar.verify(key))
        return CtaVerdict::deny(1, "attestation signature invalid for '" +
                                       tar.tool + "'");
    if (tar.def_hash != pin->def_hash)
        return CtaVerdict::deny(2, "definition hash mismatch for '" + tar.tool +
                                       "' (approved " + to_hex(pin->def_hash) +
                                       ")");
    Version current, approved;
    try {
        current = Version::parse(tar.version);
        approved = Version::parse(pin->version);
    } catch (const ConfigError& e) {
        return CtaVerdict::deny(3, std::string("unparseable version: ") + e.what());
    }
    if (current < approved)
        return CtaVerdict::deny(3, "version regressed for '" + tar.tool + "' (" +
                                       tar.version + " < " + pin->version + ")");
    if (known_good_deps.empty()) {
        if (strict_mode)
            return CtaVerdict::deny(4, "no known-good dependency hashes for '" +
                                           tar.tool + "' (strict mode)");
        return CtaVerdict::allow(/*audit_flag=*/true);
    }
    if (!known_good_deps.contains(tar.deps_digest))
        return CtaVerdict::deny(4, "dependency hash not on the known-good list for '" +
                                       tar.tool + "'");
    return CtaVerdict::allow();
}

Digest AttestationLog::head() const {
    if (entries_.empty()) return Digest{}; // genesis: 32 zero bytes
    return entries_.back().entry_hash;
}

void AttestationLog::append(const ToolAttestationRecord& tar) {
    Entry entry;
    entry.tar_encoded = tar.to_json().dump();
    entry.prev_hash = head();
    std::vector<std::uint8_t> material(entry.tar_encoded.begin(),
                                       entry.tar_encoded.end());
    material.insert(material.end(), entry.prev_hash.begin(), entry.prev_hash.end());
    entry.entry_hash = sha256(material);
    entries_.push_back(std::move(entry));
}

std::optional<std::size_t> AttestationLog::audit() const {
    Digest prev{};
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const Entry& e = entries_[i];
        if (e.prev_hash != prev) return i;
        std::vector<std::uint8_t> material(e.tar_encoded.begin(),
                                           e.tar_encoded.end());
        material.insert(material.end(), e.prev_hash.begin(), e.prev_hash.end());
        if (sha256(material) != e.entry_hash) return i;
        prev = e.entry_hash;
    }
    return std::nullopt;
}

std::string AttestationLog::serialize() const {
    std::string out;
    for (const auto& e : entries_) {
        json line{{"tar", json::parse(e.tar_encoded)},
                  {"prev_hash", to_hex(e.prev_hash)},
                  {"entry_hash", to_hex(e.entry_hash)}};
        out += line.dump();
        out += '\n';
    }
    return out;
}

AttestationLog AttestationLog::parse(std::string_view jsonl) {
    AttestationLog log;
    std::size_t pos = 0;
    while (pos < jsonl.size()) {
        std::size_t end = jsonl.find('\n', pos);
        if (end == std::string_view::npos) end = jsonl.size();
        const std::string_view line = jsonl.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        const json j = json::parse(line);
        Entry e;
        e.tar_encoded = j.at("tar").dump();
        e.prev_hash = digest_from_hex(j.at("prev_hash").get<std::string>());
        e.entry_hash = digest_from_hex(j.at("entry_hash").get<std::string>());
        log.entries_.push_back(std::move(e));
    }
    return log;
}

void AttestationLog::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write attestation log: " + path);
    out << serialize();
}

AttestationLog AttestationLog::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read attestation log: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

} // namespace mcpgate
