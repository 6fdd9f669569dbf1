#include "mcpgate/ift.hpp"

#include <algorithm>
#include <unordered_set>

#include "mcpgate/crypto.hpp"

namespace mcpgate {

json TaintedValue::to_json() const {
    return json{{"value_b64", base64_encode(
                                  std::vector<std::uint8_t>(value.begin(), value.end()))},
                {"sha256", to_hex(digest)},
                {"label", label},
                {"origin_domain", origin_domain},
                {"origin_server", origin_server},
                {"seq", seq}};
}

TaintedValue TaintedValue::from_json(const json& j) {
    TaintedValue t;
    const auto bytes = base64_decode(j.at("value_b64").get<std::string>());
    t.value.assign(bytes.begin(), bytes.end());
    t.digest = digest_from_hex(j.at("sha256").get<std::string>());
    t.label = j.at("label").get<std::string>();
    t.origin_domain = j.at("origin_domain").get<std::string>();
    t.origin_server = j.at("origin_server").get<std::string>();
    t.seq = j.at("seq").get<std::uint64_t>();
    return t;
}

void TaintStore::add(TaintedValue v) {
    // A value re-entering from the same origin refreshes nothing; one
    // record per (digest, origin) suffices for matching.
    for (const auto& existing : values_)
        if (existing.digest == v.digest && existing.origin_server == v.origin_server)
            return;
    values_.push_back(std::move(v));
}

std::vector<const TaintedValue*> TaintStore::from_server(
    const std::string& server) const {
    std::vector<const TaintedValue*> out;
    for (const auto& v : values_)
        if (v.origin_server == server) out.push_back(&v);
    return out;
}

void TaintStore::clear() { values_.clear(); }

namespace {

void collect_string_leaves(const json& node, const std::string& path,
                           std::vector<std::pair<std::string, std::string>>& out) {
    if (node.is_string()) {
        out.emplace_back(path, node.get<std::string>());
    } else if (node.is_object()) {
        for (const auto& [key, value] : node.items())
            collect_string_leaves(value, path + "/" + key, out);
    } else if (node.is_array()) {
        for (std::size_t i = 0; i < node.size(); ++i)
            collect_string_leaves(node[i], path + "/" + std::to_string(i), out);
    }
}

std::uint64_t window_hash(const char* data, std::size_t n) {
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= static_cast<std::uint8_t>(data[i]);
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace

std::vector<TaintedValue> label_response(const json& response_body,
                                         const ToolDescriptor& tool,
                                         const std::string& origin_domain,
                                         const std::vector<std::string>& input_labels,
                                         const Lattice& lattice,
                                         std::uint64_t seq) {
    std::vector<TaintedValue> out;
    if (response_body.is_null()) return out;

    std::string label = tool.label.empty() ? lattice.top() : tool.label;
    for (const auto& input : input_labels) label = lattice.join(label, input);

    auto make = [&](std::string value) {
        TaintedValue t;
        t.digest = sha256(value);
        t.value = std::move(value);
        t.label = label;
        t.origin_domain = origin_domain;
        t.origin_server = tool.server;
        t.seq = seq;
        return t;
    };

    std::vector<std::pair<std::string, std::string>> leaves;
    collect_string_leaves(response_body, "", leaves);
    for (auto& [path, value] : leaves) {
        (void)path;
        out.push_back(make(std::move(value)));
    }
    out.push_back(make(response_body.dump()));
    return out;
}

bool DeclassificationRule::matches(const TaintedValue& taint,
                                   const std::string& target) const {
    if (label != taint.label) return false;
    if (origin_domain != taint.origin_domain) return false;
    if (target_domain != target) return false;
    if (digest_hex && *digest_hex != to_hex(taint.digest)) return false;
    return true;
}

json DeclassificationRule::to_json() const {
    json j{{"label", label},
           {"origin_domain", origin_domain},
           {"target_domain", target_domain},
           {"authorizer", authorizer}};
    if (digest_hex) j["sha256"] = *digest_hex;
    return j;
}

DeclassificationRule DeclassificationRule::from_json(const json& j) {
    DeclassificationRule r;
    r.label = j.at("label").get<std::string>();
    r.origin_domain = j.at("origin_domain").get<std::string>();
    r.target_domain = j.at("target_domain").get<std::string>();
    r.authorizer = j.at("authorizer").get<std::string>();
    if (j.contains("sha256")) r.digest_hex = j.at("sha256").get<std::string>();
    return r;
}

void FlowPolicy::permit(const std::string& from, const std::string& to) {
    if (!permits(from, to)) pairs_.emplace_back(from, to);
}

bool FlowPolicy::permits(const std::string& from, const std::string& to) const {
    return std::find(pairs_.begin(), pairs_.end(), std::make_pair(from, to)) !=
           pairs_.end();
}

json FlowPolicy::to_json() const {
    json out = json::array();
    for (const auto& [from, to] : pairs_) out.push_back(json::array({from, to}));
    return out;
}

FlowPolicy FlowPolicy::from_json(const json& j) {
    FlowPolicy p;
    for (const auto& pair : j)
        p.permit(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
    return p;
}

std::vector<TaintMatch> scan_arguments(const json& args, const TaintStore& store,
                                       std::size_t span_threshold) {
    std::vector<TaintMatch> matches;
    if (store.size() == 0 || args.is_null()) return matches;

    std::vector<std::pair<std::string, std::string>> leaves;
    collect_string_leaves(args, "", leaves);

    // Rolling window set over all argument leaves, then each tainted
    // value is probed window by window; hits are confirmed by a direct
    // substring search to rule out hash collisions.
    std::unordered_set<std::uint64_t> windows;
    if (span_threshold > 0)
        for (const auto& [path, text] : leaves) {
            (void)path;
            if (text.size() < span_threshold) continue;
            for (std::size_t i = 0; i + span_threshold <= text.size(); ++i)
                windows.insert(window_hash(text.data() + i, span_threshold));
        }

    for (const auto& taint : store.values()) {
        const TaintedValue* hit = nullptr;
        std::string hit_path;
        for (const auto& [path, text] : leaves) {
            if (text == taint.value || sha256(text) == taint.digest) {
                hit = &taint;
                hit_path = path;
                break;
            }
        }
        if (hit == nullptr && span_threshold > 0 &&
            taint.value.size() >= span_threshold) {
            for (std::size_t i = 0;
                 hit == nullptr && i + span_threshold <= taint.value.size(); ++i) {
                const std::uint64_t h =
                    window_hash(taint.value.data() + i, span_threshold);
                if (!windows.contains(h)) continue;
                const std::string_view span(taint.value.data() + i, span_threshold);
                for (const auto& [path, text] : leaves)
                    if (text.find(span) != std::string::npos) {
                        hit = &taint;
                        hit_path = path;
                        break;
                    }
            }
        }
        if (hit != nullptr) matches.push_back(TaintMatch{hit, hit_path});
    }
    return matches;
}

IftVerdict check_outflow(const json& args, const TrustDomain& target,
                         const TaintStore& store, const Lattice& lattice,
                         const std::vector<DeclassificationRule>& declass,
                         std::size_t span_threshold) {
    IftVerdict verdict;
    const std::string clearance =
        target.clearance.empty() ? lattice.bottom() : target.clearance;
    for (const auto& match : scan_arguments(args, store, span_threshold)) {
        const TaintedValue& taint = *match.taint;
        if (lattice.can_flow_to(taint.label, clearance)) continue;
        const DeclassificationRule* rule = nullptr;
        for (const auto& r : declass)
            if (r.matches(taint, target.id)) {
                rule = &r;
                break;
            }
        if (rule != nullptr) {
            verdict.audit_notes.push_back(
                "declassified " + to_hex(taint.digest).substr(0, 12) + " (" +
                taint.label + " -> " + target.id + ") by " + rule->authorizer);
            continue;
        }
        verdict.allowed = false;
        verdict.arg_path = match.arg_path;
        verdict.label = taint.label;
        verdict.reason = "argument '" + match.arg_path + "' carries '" +
                         taint.label + "' data above clearance '" + clearance +
                         "' of domain '" + target.id + "'";
        return verdict;
    }
    return verdict;
}

IftVerdict check_context_transfer(const json& args, const std::string& target_server,
                                  const std::string& target_domain,
                                  const TaintStore& store,
                                  const FlowPolicy& policy,
                                  std::size_t span_threshold) {
    IftVerdict verdict;
    for (const auto& match : scan_arguments(args, store, span_threshold)) {
        const TaintedValue& taint = *match.taint;
        if (taint.origin_server == target_server) continue;
        if (policy.permits(taint.origin_domain, target_domain)) {
            verdict.audit_notes.push_back(
                "cross-domain transfer " + taint.origin_domain + " -> " +
                target_domain + " permitted by flow policy");
            continue;
        }
        verdict.allowed = false;
        verdict.arg_path = match.arg_path;
        verdict.label = taint.label;
        verdict.reason = "content from server '" + taint.origin_server +
                         "' reused toward server '" + target_server +
                         "' without a flow-policy pair " + taint.origin_domain +
                         " -> " + target_domain;
        return verdict;
    }
    return verdict;
}

} // namespace mcpgate
