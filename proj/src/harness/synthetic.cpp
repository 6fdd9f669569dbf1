#include "mcpgate/harness/synthetic.hpp"

#include <algorithm>
#include <string>

namespace mcpgate::harness {

namespace {

Digest random_digest(std::mt19937_64& rng) {
    Digest d{};
    for (std::size_t i = 0; i < d.size(); i += 8) {
        const std::uint64_t word = rng();
        for (std::size_t b = 0; b < 8; ++b)
            d[i + b] = static_cast<std::uint8_t>(word >> (8 * b));
    }
    return d;
}

double roll(std::mt19937_64& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

std::size_t pick(std::mt19937_64& rng, std::size_t bound) {
    return std::uniform_int_distribution<std::size_t>(0, bound - 1)(rng);
}

/// Everything known about one introduced datum, mirrored from the event
/// stream so the generator can decide whether re-using it keeps an event
/// legal.
struct DatumInfo {
    Digest digest{};
    std::string label;
    std::string origin_server;
    std::string origin_domain;
};

} // namespace

SyntheticWorld make_world(std::mt19937_64& rng, const SyntheticOptions& opt) {
    SyntheticWorld world;
    world.lattice = Lattice::default_chain();

    const std::vector<std::string> chain = {"public", "internal",
                                            "confidential", "restricted"};
    const std::size_t label_count = std::clamp<std::size_t>(opt.labels, 1, 4);
    world.labels.assign(chain.begin(), chain.begin() + label_count);

    world.model.agents.insert("agent");
    for (std::size_t i = 0; i < opt.domains; ++i) {
        const std::string server = "srv" + std::to_string(i);
        TrustDomain d;
        d.id = "dom" + std::to_string(i);
        d.servers.insert(server);
        d.clearance = world.labels[pick(rng, world.labels.size())];
        world.model.domains.push_back(d);
        world.model.servers.insert(server);
        world.server_names.push_back(server);
    }
    world.model.labeling = LabelAssignment({}, world.labels.back());

    const Scope scopes[] = {Scope::Read, Scope::Write, Scope::Execute};
    for (std::size_t i = 0; i < opt.tools; ++i) {
        ToolDescriptor td;
        td.name = "tool" + std::to_string(i);
        td.description = "synthetic tool #" + std::to_string(i);
        td.schema = json{{"type", "object"}};
        td.version = "1.0.0";
        td.perm.push_back(
            Permission{scopes[i % 3], "res" + std::to_string(i % 7)});
        td.server = world.server_names[i % world.server_names.size()];
        td.label = world.labels[i % world.labels.size()];
        world.model.tools[td.name] = td;
        world.tool_names.push_back(td.name);

        ApprovalPin pin;
        pin.tool = td.name;
        pin.def_hash = td.def_hash();
        pin.version = td.version;
        pin.deps_digest = deps_hash({});
        pin.approved_ms = 1700000000000LL;
        world.pins.pin(std::move(pin));
    }
    world.ungranted_tool = world.tool_names.back();

    for (const auto& from : world.model.domains)
        for (const auto& to : world.model.domains) {
            if (from.id == to.id) continue;
            if (roll(rng) < opt.flow_pair_rate) world.flow.permit(from.id, to.id);
        }

    if (roll(rng) < opt.declass_rate && opt.domains >= 2) {
        DeclassificationRule rule;
        rule.label = world.labels[pick(rng, world.labels.size())];
        rule.origin_domain = world.model.domains[pick(rng, opt.domains)].id;
        rule.target_domain = world.model.domains[pick(rng, opt.domains)].id;
        rule.authorizer = "lead";
        world.declass.push_back(rule);
    }
    return world;
}

std::vector<TraceEvent> make_events(const SyntheticWorld& world,
                                    std::mt19937_64& rng, std::size_t count,
                                    const EventMixOptions& mix) {
    std::vector<TraceEvent> events;
    if (count == 0) return events;
    events.reserve(count);

    const auto domain_of = [&](const std::string& server) -> const TrustDomain* {
        return world.model.domain_of_server(server);
    };
    const auto clearance_of = [&](const TrustDomain& d) -> std::string {
        return d.clearance.empty() ? world.lattice.bottom() : d.clearance;
    };
    const auto declassified = [&](const DatumInfo& datum,
                                  const std::string& target) {
        TaintedValue probe;
        probe.label = datum.label;
        probe.origin_domain = datum.origin_domain;
        probe.digest = datum.digest;
        for (const auto& rule : world.declass)
            if (rule.matches(probe, target)) return true;
        return false;
    };

    std::uint64_t seq = 1;
    const auto base_event = [&](ActionLabel action) {
        TraceEvent e;
        e.seq = seq++;
        e.session = "synthetic";
        e.ts_ms = 1700000000000LL + static_cast<std::int64_t>(10 * e.seq);
        e.action = action;
        e.agent = "agent";
        e.verdicts["cac"] = LayerVerdict{VerdictKind::Allow, ""};
        return e;
    };

    // Single discovery event: every tool active, every permission granted
    // except the designated ungranted tool's.
    {
        TraceEvent e = base_event(ActionLabel::Discovery);
        e.method = "tools/list";
        e.server = world.server_names.front();
        e.arg_digest = random_digest(rng);
        for (const std::string& name : world.tool_names) {
            e.activated_tools.push_back(name);
            if (name == world.ungranted_tool) continue;
            for (const Permission& p : world.model.tools.at(name).perm)
                e.grants.push_back(GrantDelta{false, "agent", p});
        }
        events.push_back(std::move(e));
    }

    std::vector<DatumInfo> pool;
    pool.reserve(count / 2);

    while (events.size() < count) {
        if (roll(rng) < mix.denied_rate) {
            TraceEvent e = base_event(ActionLabel::Invocation);
            const std::string& tool =
                world.tool_names[pick(rng, world.tool_names.size())];
            e.method = "tools/call";
            e.tool = tool;
            e.server = world.model.tools.at(tool).server;
            e.arg_digest = random_digest(rng);
            e.verdicts["cac"] = LayerVerdict{VerdictKind::Deny, "synthetic denial"};
            events.push_back(std::move(e));
            continue;
        }

        const double action_roll = roll(rng);
        TraceEvent e = base_event(action_roll < 0.7 ? ActionLabel::Invocation
                                  : action_roll < 0.85
                                      ? ActionLabel::ResourceRead
                                      : ActionLabel::Sampling);
        std::string datum_label;
        if (e.action == ActionLabel::Invocation) {
            // The ungranted tool sits last; routine events stay off it.
            const std::size_t granted_count = world.tool_names.size() > 1
                                                  ? world.tool_names.size() - 1
                                                  : world.tool_names.size();
            const std::string& tool = world.tool_names[pick(rng, granted_count)];
            e.method = "tools/call";
            e.tool = tool;
            const ToolDescriptor& td = world.model.tools.at(tool);
            e.server = td.server;
            e.exercised = td.perm;
            e.tar_def_hash = td.def_hash();
            datum_label = td.label;
        } else {
            e.method = e.action == ActionLabel::Sampling ? "sampling/createMessage"
                                                         : "resources/read";
            e.server = world.server_names[pick(rng, world.server_names.size())];
            datum_label = world.labels[pick(rng, world.labels.size())];
        }
        e.arg_digest = random_digest(rng);

        const TrustDomain* target = domain_of(e.server);
        const std::string target_clearance = clearance_of(*target);

        const bool violate = roll(rng) < mix.violation_rate;
        bool violated = false;
        if (violate) {
            switch (pick(rng, 5)) {
            case 0: // attestation hash differs from the pin
                if (e.action == ActionLabel::Invocation) {
                    e.tar_def_hash = random_digest(rng);
                    violated = true;
                }
                break;
            case 1: // attestation missing entirely
                if (e.action == ActionLabel::Invocation) {
                    e.tar_def_hash.reset();
                    violated = true;
                }
                break;
            case 2: // exercising the never-granted permission
                if (e.action == ActionLabel::Invocation) {
                    e.tool = world.ungranted_tool;
                    const ToolDescriptor& td = world.model.tools.at(e.tool);
                    e.server = td.server;
                    e.exercised = td.perm;
                    e.tar_def_hash = td.def_hash();
                    violated = true;
                }
                break;
            case 3: { // datum crossing into a domain that cannot hold it
                for (const DatumInfo& datum : pool) {
                    if (datum.origin_domain == target->id) continue;
                    if (world.lattice.can_flow_to(datum.label, target_clearance))
                        continue;
                    if (declassified(datum, target->id)) continue;
                    e.input_digests.push_back(datum.digest);
                    violated = true;
                    break;
                }
                break;
            }
            case 4: { // cross-context input without a permitted flow pair
                for (const DatumInfo& datum : pool) {
                    if (datum.origin_server == e.server) continue;
                    if (world.flow.permits(datum.origin_domain, target->id))
                        continue;
                    e.input_digests.push_back(datum.digest);
                    violated = true;
                    break;
                }
                break;
            }
            }
        }

        if (!violated && !pool.empty() && roll(rng) < mix.input_rate) {
            // Legal inputs only: the datum must clear the target domain and
            // either stay on its origin server or ride a permitted pair.
            for (std::size_t attempt = 0; attempt < 3; ++attempt) {
                const DatumInfo& datum = pool[pick(rng, pool.size())];
                const bool confined =
                    world.lattice.can_flow_to(datum.label, target_clearance) ||
                    declassified(datum, target->id);
                const bool isolated =
                    datum.origin_server == e.server ||
                    world.flow.permits(datum.origin_domain, target->id);
                if (!confined || !isolated) continue;
                if (std::find(e.input_digests.begin(), e.input_digests.end(),
                              datum.digest) == e.input_digests.end())
                    e.input_digests.push_back(datum.digest);
                if (roll(rng) < 0.5) break;
            }
        }

        if (roll(rng) < mix.knowledge_rate) {
            KnowledgeAdd k;
            k.digest = random_digest(rng);
            k.label = datum_label;
            k.origin_server = e.server;
            k.origin_domain = target->id;
            e.knowledge_added.push_back(k);
            pool.push_back(
                DatumInfo{k.digest, k.label, k.origin_server, k.origin_domain});
        }
        events.push_back(std::move(e));
    }
    return events;
}

} // namespace mcpgate::harness
