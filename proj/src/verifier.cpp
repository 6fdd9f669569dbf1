#include "mcpgate/verifier.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <set>
#include <unordered_map>

namespace mcpgate {

namespace {

using SteadyClock = std::chrono::steady_clock;

double elapsed_ms(SteadyClock::time_point start) {
    return std::chrono::duration<double, std::milli>(SteadyClock::now() - start)
        .count();
}

void add_violation(VerificationReport& report, std::uint64_t seq,
                   std::string witness) {
    report.holds = false;
    ++report.violation_count;
    if (!report.first) report.first = Violation{seq, std::move(witness)};
}

const TrustDomain* domain_of(const std::vector<TrustDomain>& domains,
                             const std::string& server) {
    for (const auto& d : domains)
        if (std::find(d.servers.begin(), d.servers.end(), server) !=
            d.servers.end())
            return &d;
    return nullptr;
}

struct DigestHash {
    std::size_t operator()(const Digest& d) const {
        std::size_t h;
        static_assert(sizeof(h) <= sizeof(Digest));
        std::copy_n(d.begin(), sizeof(h), reinterpret_cast<std::uint8_t*>(&h));
        return h;
    }
};

bool flow_event(const TraceEvent& e) {
    return e.action == ActionLabel::Invocation ||
           e.action == ActionLabel::ResourceRead ||
           e.action == ActionLabel::Sampling;
}

} // namespace

json VerificationReport::to_json() const {
    json j{{"property", property},
           {"holds", holds},
           {"violation_count", violation_count},
           {"events_checked", events_checked},
           {"wall_ms", wall_ms}};
    if (first)
        j["first_violation"] = json{{"seq", first->seq}, {"witness", first->witness}};
    return j;
}

VerificationReport check_tool_integrity(std::span<const TraceEvent> events,
                                        const PinStore& pins) {
    const auto start = SteadyClock::now();
    VerificationReport report;
    report.property = "tool-integrity";
    for (const TraceEvent& e : events) {
        ++report.events_checked;
        if (e.action != ActionLabel::Invocation || !event_allowed(e)) continue;
        if (!e.tar_def_hash) {
            add_violation(report, e.seq,
                          "unattested invocation of '" + e.tool + "'");
            continue;
        }
        const ApprovalPin* pin = pins.find(e.tool);
        if (pin == nullptr) {
            add_violation(report, e.seq,
                          "no approval pin for tool '" + e.tool + "'");
            continue;
        }
        if (*e.tar_def_hash != pin->def_hash)
            add_violation(report, e.seq,
                          "definition hash of '" + e.tool +
                              "' differs from the approved hash");
    }
    report.wall_ms = elapsed_ms(start);
    return report;
}

VerificationReport check_tool_integrity(const Trace& trace, const PinStore& pins) {
    return check_tool_integrity(std::span(trace.events()), pins);
}

namespace {

struct DatumState {
    std::string label;
    std::string origin_domain;
    std::set<std::string> checked_domains;
};

bool declassified(const std::vector<DeclassificationRule>& declass,
                  const std::string& label, const std::string& origin_domain,
                  const Digest& digest, const std::string& target_domain) {
    TaintedValue probe;
    probe.label = label;
    probe.origin_domain = origin_domain;
    probe.digest = digest;
    for (const auto& rule : declass)
        if (rule.matches(probe, target_domain)) return true;
    return false;
}

} // namespace

VerificationReport check_data_confinement(
    std::span<const TraceEvent> events, const Lattice& lattice,
    const std::vector<TrustDomain>& domains,
    const std::vector<DeclassificationRule>& declass) {
    const auto start = SteadyClock::now();
    VerificationReport report;
    report.property = "data-confinement";

    std::unordered_map<Digest, DatumState, DigestHash> data;
    for (const TraceEvent& e : events) {
        ++report.events_checked;
        // Inputs are judged against knowledge introduced strictly earlier.
        if (flow_event(e) && event_allowed(e) && !e.input_digests.empty()) {
            const TrustDomain* target = nullptr;
            for (const Digest& digest : e.input_digests) {
                auto it = data.find(digest);
                if (it == data.end()) continue; // not tracked: no provenance
                if (target == nullptr) {
                    target = domain_of(domains, e.server);
                    if (target == nullptr)
                        throw ConfigError("event " + std::to_string(e.seq) +
                                          " targets server '" + e.server +
                                          "' outside every configured domain");
                }
                const std::string clearance = target->clearance.empty()
                                                  ? lattice.bottom()
                                                  : target->clearance;
                DatumState& datum = it->second;
                if (!datum.checked_domains.insert(target->id).second)
                    continue; // pair already judged at its first crossing
                if (lattice.can_flow_to(datum.label, clearance)) continue;
                if (declassified(declass, datum.label, datum.origin_domain,
                                 digest, target->id))
                    continue;
                add_violation(report, e.seq,
                              "datum " + to_hex(digest).substr(0, 12) +
                                  " labeled '" + datum.label +
                                  "' crossed into domain '" + target->id +
                                  "' (clearance '" + clearance + "')");
            }
        }
        if (event_allowed(e))
            for (const KnowledgeAdd& k : e.knowledge_added) {
                DatumState state;
                state.label = k.label;
                state.origin_domain = k.origin_domain;
                state.checked_domains.insert(k.origin_domain);
                data.emplace(k.digest, std::move(state));
            }
    }
    report.wall_ms = elapsed_ms(start);
    return report;
}

VerificationReport check_data_confinement(
    const Trace& trace, const Lattice& lattice,
    const std::vector<TrustDomain>& domains,
    const std::vector<DeclassificationRule>& declass) {
    return check_data_confinement(std::span(trace.events()), lattice, domains,
                                  declass);
}

VerificationReport brute_force_confinement_oracle(
    std::span<const TraceEvent> events, const Lattice& lattice,
    const std::vector<TrustDomain>& domains,
    const std::vector<DeclassificationRule>& declass) {
    if (events.size() > kOracleEventBound)
        throw ModelError("oracle refuses traces longer than " +
                         std::to_string(kOracleEventBound) + " events");
    const auto start = SteadyClock::now();
    VerificationReport report;
    report.property = "data-confinement";
    report.events_checked = events.size();

    // Collect every datum introduction, then replay the whole trace once
    // per datum, independently of the single-pass walk above.
    struct Intro {
        Digest digest;
        std::string label;
        std::string origin_domain;
        std::size_t event_index;
    };
    std::vector<Intro> intros;
    for (std::size_t i = 0; i < events.size(); ++i)
        if (event_allowed(events[i]))
            for (const KnowledgeAdd& k : events[i].knowledge_added)
                intros.push_back(Intro{k.digest, k.label, k.origin_domain, i});

    std::vector<std::pair<std::uint64_t, std::string>> violations;
    std::set<std::pair<std::size_t, std::string>> judged; // (intro idx, domain)
    for (std::size_t d = 0; d < intros.size(); ++d) {
        const Intro& intro = intros[d];
        // Earlier introductions of the same digest shadow this one: the
        // single-pass walk keeps the first record it saw.
        bool shadowed = false;
        for (std::size_t prior = 0; prior < d; ++prior)
            if (intros[prior].digest == intro.digest) shadowed = true;
        if (shadowed) continue;

        std::set<std::string> reached{intro.origin_domain};
        for (std::size_t i = intro.event_index + 1; i < events.size(); ++i) {
            const TraceEvent& e = events[i];
            if (!flow_event(e) || !event_allowed(e)) continue;
            if (std::find(e.input_digests.begin(), e.input_digests.end(),
                          intro.digest) == e.input_digests.end())
                continue;
            const TrustDomain* target = domain_of(domains, e.server);
            if (target == nullptr)
                throw ConfigError("event " + std::to_string(e.seq) +
                                  " targets server '" + e.server +
                                  "' outside every configured domain");
            if (!reached.insert(target->id).second) continue;
            const std::string clearance =
                target->clearance.empty() ? lattice.bottom() : target->clearance;
            if (lattice.can_flow_to(intro.label, clearance)) continue;
            if (declassified(declass, intro.label, intro.origin_domain,
                             intro.digest, target->id))
                continue;
            violations.emplace_back(
                e.seq, "datum " + to_hex(intro.digest).substr(0, 12) +
                           " labeled '" + intro.label + "' crossed into domain '" +
                           target->id + "' (clearance '" + clearance + "')");
        }
    }
    std::sort(violations.begin(), violations.end());
    for (auto& [seq, witness] : violations)
        add_violation(report, seq, std::move(witness));
    report.wall_ms = elapsed_ms(start);
    return report;
}

VerificationReport check_privilege_boundedness(std::span<const TraceEvent> events,
                                               const SystemModel& model) {
    const auto start = SteadyClock::now();
    VerificationReport report;
    report.property = "privilege-boundedness";
    // Tools admitted mid-session arrive embedded in discovery events, so the
    // replay model grows as the walk proceeds.
    SystemModel replay_model = model;
    SystemState state = SystemState::initial(replay_model);
    // eff(σ, a) only changes on events that touch grants, activations, or
    // connections, so it is cached between those; per-event work stays
    // constant no matter how many tools the model carries.
    std::map<std::string, std::set<Permission>> eff_cache;
    for (const TraceEvent& e : events) {
        ++report.events_checked;
        if (!e.exercised.empty() && event_allowed(e)) {
            auto cached = eff_cache.find(e.agent);
            if (cached == eff_cache.end())
                cached = eff_cache
                             .emplace(e.agent, state.effective_permissions(
                                                   e.agent, replay_model))
                             .first;
            const std::set<Permission>& eff = cached->second;
            for (const Permission& p : e.exercised)
                if (!eff.contains(p))
                    add_violation(report, e.seq,
                                  "agent '" + e.agent + "' exercised " +
                                      p.to_string() +
                                      " outside eff = cap ∩ ⋃ perm(active)");
        }
        for (const ToolDescriptor& d : e.tool_defs)
            replay_model.tools[d.name] = d;
        const bool mutates_eff = !e.grants.empty() ||
                                 !e.activated_tools.empty() ||
                                 !e.tool_defs.empty() ||
                                 e.action == ActionLabel::Admin;
        apply_event(state, replay_model, e);
        if (mutates_eff && event_allowed(e)) eff_cache.clear();
    }
    report.wall_ms = elapsed_ms(start);
    return report;
}

VerificationReport check_privilege_boundedness(const Trace& trace,
                                               const SystemModel& model) {
    return check_privilege_boundedness(std::span(trace.events()), model);
}

VerificationReport check_context_isolation(std::span<const TraceEvent> events,
                                           const FlowPolicy& policy,
                                           const std::vector<TrustDomain>& domains) {
    const auto start = SteadyClock::now();
    VerificationReport report;
    report.property = "context-isolation";

    // agent -> digest -> origin servers that taught it.
    std::map<std::string, std::unordered_map<Digest, std::set<std::string>,
                                             DigestHash>>
        knowledge;
    std::map<std::string, std::string> server_domain; // from knowledge records

    for (const TraceEvent& e : events) {
        ++report.events_checked;
        if (flow_event(e) && event_allowed(e) && !e.input_digests.empty()) {
            const TrustDomain* target = domain_of(domains, e.server);
            const std::string target_domain = target ? target->id : std::string();
            auto agent_it = knowledge.find(e.agent);
            if (agent_it != knowledge.end()) {
                for (const Digest& digest : e.input_digests) {
                    auto digest_it = agent_it->second.find(digest);
                    if (digest_it == agent_it->second.end()) continue;
                    for (const std::string& origin : digest_it->second) {
                        if (origin == e.server) continue;
                        const auto origin_domain_it = server_domain.find(origin);
                        const std::string origin_domain =
                            origin_domain_it != server_domain.end()
                                ? origin_domain_it->second
                                : std::string();
                        if (policy.permits(origin_domain, target_domain)) continue;
                        add_violation(
                            report, e.seq,
                            "input of call to '" + e.server +
                                "' intersects knowledge learned from '" + origin +
                                "' (no flow-policy pair " + origin_domain +
                                " -> " + target_domain + ")");
                    }
                }
            }
        }
        if (event_allowed(e))
            for (const KnowledgeAdd& k : e.knowledge_added) {
                knowledge[e.agent][k.digest].insert(k.origin_server);
                if (!k.origin_domain.empty())
                    server_domain[k.origin_server] = k.origin_domain;
            }
    }
    report.wall_ms = elapsed_ms(start);
    return report;
}

VerificationReport check_context_isolation(const Trace& trace,
                                           const FlowPolicy& policy,
                                           const std::vector<TrustDomain>& domains) {
    return check_context_isolation(std::span(trace.events()), policy, domains);
}

std::vector<VerificationReport> verify_all(
    const Trace& trace, const PinStore& pins, const SystemModel& model,
    const Lattice& lattice, const std::vector<TrustDomain>& domains,
    const std::vector<DeclassificationRule>& declass, const FlowPolicy& policy) {
    std::vector<VerificationReport> reports;
    reports.push_back(check_tool_integrity(trace, pins));
    reports.push_back(check_data_confinement(trace, lattice, domains, declass));
    reports.push_back(check_privilege_boundedness(trace, model));
    reports.push_back(check_context_isolation(trace, policy, domains));
    return reports;
}

json reports_to_json(const std::vector<VerificationReport>& reports) {
    json out = json::array();
    bool all_hold = true;
    for (const auto& r : reports) {
        out.push_back(r.to_json());
        all_hold = all_hold && r.holds;
    }
    return json{{"properties", out}, {"all_hold", all_hold}};
}

} // namespace mcpgate
