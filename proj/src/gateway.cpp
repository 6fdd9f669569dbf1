#include "mcpgate/gateway.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <utility>

namespace mcpgate {

namespace {

int verdict_severity(VerdictKind k) {
    switch (k) {
        case VerdictKind::Deny: return 4;
        case VerdictKind::Modify: return 3;
        case VerdictKind::Flag: return 2;
        case VerdictKind::Allow: return 1;
        case VerdictKind::Skip: return 0;
    }
    return 0;
}

/// Keeps the most severe verdict per layer; equal severities append reasons.
void merge_verdict(TraceEvent& event, const std::string& layer, VerdictKind kind,
                   const std::string& reason) {
    auto it = event.verdicts.find(layer);
    if (it == event.verdicts.end()) {
        event.verdicts[layer] = LayerVerdict{kind, reason};
        return;
    }
    if (verdict_severity(kind) > verdict_severity(it->second.kind)) {
        it->second = LayerVerdict{kind, reason};
        return;
    }
    if (verdict_severity(kind) == verdict_severity(it->second.kind) &&
        kind != VerdictKind::Allow && kind != VerdictKind::Skip &&
        !reason.empty() && it->second.reason != reason) {
        it->second.reason += "; " + reason;
    }
}

std::string join_lines(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += "; ";
        out += p;
    }
    return out;
}

} // namespace

json AuditEvent::to_json() const {
    return json{{"ts_ms", ts_ms},     {"session", session},
                {"seq", seq},         {"layer", layer},
                {"verdict", verdict}, {"reason", reason},
                {"subject", subject}, {"payload_sha256", payload_sha256}};
}

Gateway::Gateway(GatewayConfig config, std::shared_ptr<Clock> clock,
                 std::string session_id)
    : config_(std::move(config)),
      clock_(std::move(clock)),
      session_id_(std::move(session_id)),
      key_(EcdsaPrivateKey::generate()),
      lattice_(lattice_of(config_)),
      broker_(config_.policies.consent_timeout_ms) {
    for (const auto& u : config_.upstreams)
        if (!u.public_key_pem.empty())
            server_keys_.add(u.server, EcdsaPublicKey::from_pem(u.public_key_pem));
    if (!config_.authority_public_key_pem.empty())
        authority_keys_.add(config_.issuer_id,
                            EcdsaPublicKey::from_pem(config_.authority_public_key_pem));

    model_ = model_from_config(config_, lattice_);
    state_ = SystemState::initial(model_);
    trace_ = Trace(TraceHeader{model_.digest(), lattice_.digest(),
                               config_.digest(), session_id_,
                               clock_->now_ms()});

    capabilities_ = config_.capabilities;
    composition_ = config_.composition;
    flow_policy_ = config_.flow_policy;

    namespace fs = std::filesystem;
    if (!config_.pins_path.empty() && fs::exists(config_.pins_path))
        pins_ = PinStore::load(config_.pins_path);

    const PolicyConfig& pol = config_.policies;
    if (config_.layers.rpe && pol.sanitizer_enabled) {
        std::vector<std::string> literals = pol.sanitizer_literals.empty()
                                                ? SanitizerAutomaton::default_markers()
                                                : pol.sanitizer_literals;
        sanitizer_ = std::make_unique<SanitizerAutomaton>(std::move(literals),
                                                          pol.sanitizer_regexes);
    }
    if (config_.layers.rpe) {
        if (pol.consent_enabled && !pol.high_risk_tools.empty())
            post_stack_.push(std::make_unique<ConsentGateAutomaton>(
                pol.high_risk_tools, &broker_));
        if (pol.rate_limit_enabled)
            post_stack_.push(std::make_unique<RateLimitAutomaton>(
                pol.rate_threshold, pol.rate_window_ms));
        if (pol.anomaly_enabled) {
            BigramProfile profile;
            if (!pol.anomaly_profile_path.empty() &&
                fs::exists(pol.anomaly_profile_path))
                profile = BigramProfile::load(pol.anomaly_profile_path);
            if (profile.empty())
                audit_.push_back(AuditEvent{
                    clock_->now_ms(), session_id_, 0, "rpe", "flag",
                    "anomaly profile empty or missing; detector is inert",
                    "anomaly_flag", ""});
            post_stack_.push(std::make_unique<AnomalyFlagAutomaton>(
                std::move(profile), pol.anomaly_threshold));
        }
    }
}

void Gateway::register_upstream(std::shared_ptr<Upstream> upstream) {
    upstreams_[upstream->id()] = std::move(upstream);
}

void Gateway::add_capability(Capability cap) {
    capabilities_.push_back(std::move(cap));
}

void Gateway::approve(const ToolDescriptor& tool, const Digest& deps_digest) {
    pins_.pin(ApprovalPin{tool.name, tool.def_hash(), tool.version, deps_digest,
                          clock_->now_ms()});
}

Gateway::UpstreamSession& Gateway::session(const std::string& server) {
    auto it = sessions_.find(server);
    if (it == sessions_.end())
        it = sessions_
                 .emplace(server,
                          UpstreamSession(session_id_, config_.agent, server))
                 .first;
    return it->second;
}

const TrustDomain* Gateway::domain_of(const std::string& server) const {
    for (const auto& d : config_.domains)
        if (d.servers.count(server)) return &d;
    return nullptr;
}

SessionPhase Gateway::phase(const std::string& server) const {
    auto it = sessions_.find(server);
    return it == sessions_.end() ? SessionPhase::Init : it->second.protocol.phase();
}

void Gateway::record_event(TraceEvent event) {
    event.seq = next_seq_++;
    if (event.session.empty()) event.session = session_id_;
    // In transparent configurations a call may name a tool the gateway never
    // saw listed; register a minimal observed descriptor so replay stays
    // total, and embed it for offline replays of the saved trace.
    if (!event.tool.empty() && !model_.tools.count(event.tool)) {
        ToolDescriptor shim;
        shim.name = event.tool;
        shim.version = "0.0.0";
        shim.server = event.server;
        shim.label = model_.labeling.label_of(event.tool);
        model_.tools[shim.name] = shim;
        if (event_allowed(event)) event.tool_defs.push_back(shim);
    }
    event.pre_digest = state_.digest();
    apply_event(state_, model_, event);
    event.post_digest = state_.digest();
    for (const auto& [layer, v] : event.verdicts) {
        if (v.kind == VerdictKind::Allow || v.kind == VerdictKind::Skip) continue;
        audit_.push_back(AuditEvent{event.ts_ms, event.session, event.seq, layer,
                                    std::string(verdict_kind_name(v.kind)),
                                    v.reason,
                                    event.tool.empty() ? event.method : event.tool,
                                    to_hex(event.arg_digest)});
    }
    trace_.record(std::move(event));
}

Gateway::Outcome Gateway::fail(PipelineState& ps, const std::string& layer,
                               int code, const std::string& reason) {
    merge_verdict(ps.event, layer, VerdictKind::Deny, reason);
    record_event(ps.event);
    Outcome o;
    o.status = Outcome::Status::Delivered;
    o.response = McpMessage::error_response(ps.ctx.msg.id, code, reason);
    o.blocked_by = layer;
    o.reason = reason;
    return o;
}

Gateway::Outcome Gateway::client_request(const std::string& server,
                                         const McpMessage& msg) {
    const std::int64_t now = clock_->now_ms();

    PipelineState ps;
    ps.server = server;
    ps.ctx.session = session_id_;
    ps.ctx.agent = config_.agent;
    ps.ctx.server = server;
    ps.ctx.direction = Direction::ClientToServer;
    ps.ctx.label = classify_action(msg);
    ps.ctx.ts_ms = now;
    ps.ctx.msg = msg;

    TraceEvent& e = ps.event;
    e.session = session_id_;
    e.ts_ms = now;
    e.action = ps.ctx.label;
    e.method = msg.method_label();
    e.agent = config_.agent;
    e.server = server;
    e.arg_digest = sha256(msg.params.is_null() ? "null" : msg.params.dump());
    if (ps.ctx.label == ActionLabel::Invocation) {
        ps.ctx.tool = msg.params.is_object() ? msg.params.value("name", "") : "";
        e.tool = ps.ctx.tool;
    }

    auto upstream_it = upstreams_.find(server);
    if (upstream_it == upstreams_.end())
        return fail(ps, "gateway", kErrUpstreamUnavailable,
                    "no upstream registered for server '" + server + "'");
    UpstreamSession& sess = session(server);

    // --- lifecycle -------------------------------------------------------
    const auto violation = sess.protocol.advance(ps.ctx.msg);
    if (violation) {
        if (config_.layers.protocol)
            return fail(ps, "protocol", kErrProtocolViolation, violation->reason);
        merge_verdict(e, "protocol", VerdictKind::Skip,
                      "unenforced: " + violation->reason);
    } else {
        merge_verdict(e, "protocol",
                      config_.layers.protocol ? VerdictKind::Allow
                                              : VerdictKind::Skip,
                      "");
    }

    // --- outbound sanitization (descriptions, arguments) ------------------
    if (sanitizer_) {
        const RpeVerdict v = sanitizer_->step(ps.ctx);
        if (v.kind == RpeVerdict::Kind::Modify)
            merge_verdict(e, "rpe", VerdictKind::Modify, v.reason);
    }

    if (ps.ctx.label == ActionLabel::Invocation) {
        auto dit = sess.tools.find(ps.ctx.tool);
        if (dit != sess.tools.end()) ps.descriptor = dit->second;
    }
    const json args =
        ps.ctx.label == ActionLabel::Invocation
            ? (ps.ctx.msg.params.is_object()
                   ? ps.ctx.msg.params.value("arguments", json::object())
                   : json::object())
            : ps.ctx.msg.params;

    // --- tool integrity (invocations only) --------------------------------
    if (ps.ctx.label == ActionLabel::Invocation) {
        if (!config_.layers.cta) {
            // Record the attestation fact even unenforced, so the saved
            // trace still supports offline integrity verification.
            auto tar_it = sess.tars.find(ps.ctx.tool);
            if (tar_it != sess.tars.end())
                e.tar_def_hash = tar_it->second.def_hash;
            merge_verdict(e, "cta", VerdictKind::Skip, "");
        } else {
            auto tar_it = sess.tars.find(ps.ctx.tool);
            if (tar_it == sess.tars.end())
                return fail(ps, "cta", kErrIntegrityFailure,
                            "no attestation record for tool '" + ps.ctx.tool + "'");
            const ToolAttestationRecord& tar = tar_it->second;
            const EcdsaPublicKey* key = server_keys_.find(tar.signer);
            if (!key)
                return fail(ps, "cta", kErrIntegrityFailure,
                            "attestation signer '" + tar.signer +
                                "' has no registered key");
            std::set<Digest> known_good;
            auto kg_it = config_.known_good_deps.find(ps.ctx.tool);
            if (kg_it != config_.known_good_deps.end())
                for (const std::string& hex : kg_it->second)
                    known_good.insert(digest_from_hex(hex));
            const CtaVerdict v =
                verify_invocation(tar, pins_.find(ps.ctx.tool), *key, known_good,
                                  config_.strict_mode);
            if (!v.allowed)
                return fail(ps, "cta", kErrIntegrityFailure, v.reason);
            e.tar_def_hash = tar.def_hash;
            merge_verdict(e, "cta",
                          v.audit_flag ? VerdictKind::Flag : VerdictKind::Allow,
                          v.audit_flag
                              ? "dependency check skipped: no known-good digests"
                              : "");
        }
    }

    // --- capability check (invocations only) -------------------------------
    if (ps.ctx.label == ActionLabel::Invocation) {
        if (!config_.layers.cac) {
            merge_verdict(e, "cac", VerdictKind::Skip, "");
        } else {
            const std::vector<Scope> required = required_scopes(
                Method::ToolsCall, ps.descriptor ? &*ps.descriptor : nullptr);
            const CacVerdict v =
                check_invocation(capabilities_, config_.agent, ps.ctx.tool, args,
                                 required, now, authority_keys_);
            if (!v.allowed)
                return fail(ps, "cac", kErrCapabilityDenied, v.reason);
            const CompositionResult comp =
                check_composition(composition_, tool_history_, ps.ctx.tool);
            if (comp.verdict == CompositionVerdict::Deny)
                return fail(ps, "cac", kErrCapabilityDenied,
                            "composition policy forbids '" + comp.offending_prev +
                                "' -> '" + ps.ctx.tool + "'");
            if (comp.verdict == CompositionVerdict::Audit)
                merge_verdict(e, "cac", VerdictKind::Flag,
                              "composition '" + comp.offending_prev + "' -> '" +
                                  ps.ctx.tool + "' is audit-listed");
            else
                merge_verdict(e, "cac", VerdictKind::Allow, "");
        }
    }

    // --- information flow (anything that ships arguments outward) ----------
    if (ps.ctx.label == ActionLabel::Invocation ||
        ps.ctx.label == ActionLabel::ResourceRead ||
        ps.ctx.label == ActionLabel::Sampling) {
        // Taint facts are recorded even when enforcement is off, so offline
        // verification of the trace stays possible.
        const auto matches = scan_arguments(args, taints_, config_.span_threshold);
        for (const TaintMatch& m : matches) {
            if (std::find(e.input_digests.begin(), e.input_digests.end(),
                          m.taint->digest) == e.input_digests.end()) {
                e.input_digests.push_back(m.taint->digest);
                ps.input_labels.push_back(m.taint->label);
            }
        }
        if (!config_.layers.ift) {
            merge_verdict(e, "ift", VerdictKind::Skip, "");
        } else if (!matches.empty()) {
            const TrustDomain* dom = domain_of(server);
            if (!dom)
                return fail(ps, "ift", kErrFlowViolation,
                            "server '" + server +
                                "' belongs to no trust domain; outflow refused");
            const IftVerdict out = check_outflow(args, *dom, taints_, lattice_,
                                                 config_.declassification,
                                                 config_.span_threshold);
            if (!out.allowed)
                return fail(ps, "ift", kErrFlowViolation, out.reason);
            const IftVerdict ctx_v = check_context_transfer(
                args, server, dom->id, taints_, flow_policy_,
                config_.span_threshold);
            if (!ctx_v.allowed)
                return fail(ps, "ift", kErrFlowViolation, ctx_v.reason);
            std::vector<std::string> notes = out.audit_notes;
            notes.insert(notes.end(), ctx_v.audit_notes.begin(),
                         ctx_v.audit_notes.end());
            if (!notes.empty())
                merge_verdict(e, "ift", VerdictKind::Flag, join_lines(notes));
            else
                merge_verdict(e, "ift", VerdictKind::Allow, "");
        } else {
            merge_verdict(e, "ift", VerdictKind::Allow, "");
        }
    }

    // --- runtime policies (consent, rate, anomaly) --------------------------
    if (config_.layers.rpe && post_stack_.size() > 0) {
        PolicyStack::Outcome so = post_stack_.enforce(ps.ctx);
        for (const std::string& f : so.flags)
            merge_verdict(e, "rpe", VerdictKind::Flag, f);
        if (so.status == PolicyStack::Outcome::Status::Held) {
            merge_verdict(e, "rpe", VerdictKind::Modify,
                          "invocation of '" + ps.ctx.tool +
                              "' held pending consent " + so.consent_id);
            ps.resume_index = so.resume_index;
            // The hold event documents the rewrite but transfers nothing:
            // flow facts belong to the resolution event.
            TraceEvent hold = e;
            hold.input_digests.clear();
            hold.exercised.clear();
            hold.knowledge_added.clear();
            record_event(hold);
            Outcome o;
            o.status = Outcome::Status::Pending;
            o.response = so.msg; // the consent elicitation
            o.consent_id = so.consent_id;
            const std::string id = so.consent_id;
            held_.emplace(id, std::move(ps));
            return o;
        }
        if (so.status == PolicyStack::Outcome::Status::Suppress) {
            const int code = so.suppressor == "consent_gate"
                                 ? kErrConsentDenied
                                 : kErrPolicySuppressed;
            return fail(ps, "rpe", code, so.reason);
        }
        if (so.modified)
            merge_verdict(e, "rpe", VerdictKind::Modify, "policy rewrite");
        ps.ctx.msg = std::move(so.msg);
    } else if (!config_.layers.rpe) {
        merge_verdict(e, "rpe", VerdictKind::Skip, "");
    }

    return forward_and_deliver(sess, ps);
}

Gateway::Outcome Gateway::forward_and_deliver(UpstreamSession& sess,
                                              PipelineState& ps) {
    TraceEvent& e = ps.event;
    auto upstream_it = upstreams_.find(ps.server);
    if (upstream_it == upstreams_.end())
        return fail(ps, "gateway", kErrUpstreamUnavailable,
                    "no upstream registered for server '" + ps.server + "'");

    const SignedEnvelope sealed =
        seal(ps.ctx.msg, gateway_id_, key_, clock_->now_ms());
    std::optional<SignedEnvelope> resp_env;
    try {
        resp_env = upstream_it->second->handle(sealed);
    } catch (const std::exception& ex) {
        return fail(ps, "gateway", kErrUpstreamUnavailable,
                    std::string("upstream failed: ") + ex.what());
    }

    if (ps.ctx.msg.kind == MessageKind::Notification) {
        record_event(e);
        Outcome o;
        o.status = Outcome::Status::NoResponse;
        return o;
    }
    if (!resp_env)
        return fail(ps, "gateway", kErrUpstreamUnavailable,
                    "upstream returned no response");

    McpMessage resp;
    if (config_.layers.protocol) {
        const OpenResult opened = open(*resp_env, server_keys_,
                                       sess.protocol.nonce_cache(),
                                       clock_->now_ms());
        if (!opened.ok())
            return fail(ps, "protocol", kErrIntegrityFailure,
                        "response envelope rejected: " +
                            std::string(open_error_name(opened.error)));
        resp = parse_message(std::string_view(
            reinterpret_cast<const char*>(opened.payload.data()),
            opened.payload.size()));
    } else {
        resp = parse_message(std::string_view(
            reinterpret_cast<const char*>(resp_env->payload.data()),
            resp_env->payload.size()));
    }

    sess.protocol.advance(resp);

    if (ps.ctx.label == ActionLabel::Discovery &&
        ps.ctx.msg.method == Method::ToolsList && resp.result.is_object())
        ingest_tools_list(sess, ps, resp);

    // Inbound sanitization after integrity checks, before labeling.
    if (sanitizer_ && !resp.result.is_null()) {
        ActionContext rctx;
        rctx.session = session_id_;
        rctx.agent = config_.agent;
        rctx.server = ps.server;
        rctx.direction = Direction::ServerToClient;
        rctx.label = ps.ctx.label;
        rctx.tool = ps.ctx.tool;
        rctx.ts_ms = clock_->now_ms();
        rctx.msg = resp;
        const RpeVerdict v = sanitizer_->step(rctx);
        if (v.kind == RpeVerdict::Kind::Modify) {
            merge_verdict(e, "rpe", VerdictKind::Modify, v.reason);
            resp = std::move(rctx.msg);
        }
    }

    if ((ps.ctx.label == ActionLabel::Invocation ||
         ps.ctx.label == ActionLabel::ResourceRead ||
         ps.ctx.label == ActionLabel::Sampling) &&
        !resp.result.is_null())
        ingest_data_response(sess, ps, resp);

    if (ps.ctx.label == ActionLabel::Invocation) {
        if (ps.descriptor) e.exercised = ps.descriptor->perm;
        tool_history_.push_back(ps.ctx.tool);
    }

    record_event(e);
    Outcome o;
    o.status = Outcome::Status::Delivered;
    o.response = std::move(resp);
    return o;
}

void Gateway::ingest_tools_list(UpstreamSession& sess, PipelineState& ps,
                                McpMessage& resp) {
    if (!resp.result.contains("tools") || !resp.result["tools"].is_array())
        return;
    json kept = json::array();
    std::vector<std::string> notes;
    for (const json& entry : resp.result["tools"]) {
        if (!entry.is_object() || !entry.contains("name")) continue;
        ToolDescriptor td;
        td.name = entry.value("name", "");
        td.description = entry.value("description", "");
        td.schema = entry.value("inputSchema", json::object());
        td.version = entry.value("version", "0.0.0");
        for (const auto& p : entry.value("permissions", json::array()))
            td.perm.push_back(Permission::parse(p.get<std::string>()));
        td.server = ps.server;
        td.label = model_.labeling.label_of(td.name);

        bool keep = true;
        if (entry.contains("attestation")) {
            std::string why;
            try {
                const ToolAttestationRecord tar =
                    ToolAttestationRecord::from_json(entry["attestation"]);
                if (config_.layers.cta) {
                    const EcdsaPublicKey* key = server_keys_.find(tar.signer);
                    if (!key)
                        why = "attestation signer '" + tar.signer +
                              "' has no registered key";
                    else if (tar.tool != td.name)
                        why = "attestation names tool '" + tar.tool + "'";
                    else if (!tar.verify(*key))
                        why = "attestation signature invalid";
                    else if (tar.def_hash != td.def_hash())
                        why = "attestation hash differs from the served definition";
                }
                if (why.empty()) {
                    sess.tars[td.name] = tar;
                    attestation_log_.append(tar);
                }
            } catch (const std::exception& ex) {
                if (config_.layers.cta)
                    why = std::string("attestation unreadable: ") + ex.what();
            }
            if (!why.empty()) {
                keep = false;
                notes.push_back("dropped '" + td.name + "': " + why);
            }
        } else if (config_.layers.cta) {
            notes.push_back("tool '" + td.name + "' published without attestation");
        }

        if (!keep) continue;
        auto known_it = sess.tools.find(td.name);
        const bool changed = known_it == sess.tools.end() ||
                             known_it->second.to_json() != td.to_json();
        sess.tools[td.name] = td;
        model_.tools[td.name] = td;
        sess.protocol.activate_tool(td.name);
        ps.event.activated_tools.push_back(td.name);
        if (changed) ps.event.tool_defs.push_back(td);
        for (const Capability& cap : capabilities_) {
            if (cap.tool != td.name || cap.holder != config_.agent) continue;
            if (!cap.verify(authority_keys_)) continue;
            for (const Permission& p : td.perm)
                if (scope_covers(cap.scope, p.kind))
                    ps.event.grants.push_back(GrantDelta{false, config_.agent, p});
        }
        kept.push_back(entry);
    }
    resp.result["tools"] = std::move(kept);
    if (!notes.empty())
        merge_verdict(ps.event, "cta", VerdictKind::Flag, join_lines(notes));
    else if (config_.layers.cta)
        merge_verdict(ps.event, "cta", VerdictKind::Allow, "");
    else
        merge_verdict(ps.event, "cta", VerdictKind::Skip, "");
}

void Gateway::ingest_data_response(UpstreamSession& sess, PipelineState& ps,
                                   const McpMessage& resp) {
    (void)sess;
    ToolDescriptor td;
    if (ps.descriptor) {
        td = *ps.descriptor;
    } else {
        std::string subject = ps.ctx.tool;
        if (ps.ctx.label == ActionLabel::ResourceRead &&
            ps.ctx.msg.params.is_object())
            subject = ps.ctx.msg.params.value("uri", "");
        td.name = subject.empty() ? ps.ctx.msg.method_label() : subject;
        td.server = ps.server;
        td.label = model_.labeling.label_of(td.name);
    }
    const TrustDomain* dom = domain_of(ps.server);
    const std::string domain_id = dom ? dom->id : "";
    const auto taints = label_response(resp.result, td, domain_id,
                                       ps.input_labels, lattice_, next_seq_);
    for (const TaintedValue& t : taints) {
        taints_.add(t);
        ps.event.knowledge_added.push_back(
            KnowledgeAdd{t.digest, t.label, ps.server, domain_id});
    }
}

std::vector<ConsentBroker::Request> Gateway::pending_consents() {
    return broker_.pending(clock_->now_ms());
}

Gateway::ConsentAnswer Gateway::answer_consent(const std::string& id,
                                               bool approve) {
    const std::int64_t now = clock_->now_ms();
    const ConsentBroker::AnswerResult r = broker_.answer(id, approve, now);
    ConsentAnswer out;
    if (r == ConsentBroker::AnswerResult::NotFound) {
        out.error = "not-found";
        return out;
    }
    if (r == ConsentBroker::AnswerResult::Conflict) {
        // If the hold expired before anyone answered, suppress it now.
        if (held_.count(id) &&
            broker_.state(id, now) == ConsentBroker::State::Expired)
            resolve_consent(id, false, "consent timed out");
        out.error = "conflict";
        return out;
    }
    out.ok = true;
    out.approved = approve;
    if (held_.count(id))
        out.released = resolve_consent(id, approve, "consent denied");
    return out;
}

Gateway::Outcome Gateway::resolve_consent(const std::string& id, bool approve,
                                          const char* denial_reason) {
    auto it = held_.find(id);
    PipelineState ps = std::move(it->second);
    held_.erase(it);
    const std::int64_t now = clock_->now_ms();
    ps.event.ts_ms = now;
    ps.ctx.ts_ms = now;

    if (!approve) {
        const std::string reason = std::string(denial_reason) + " for '" +
                                   ps.ctx.tool + "' (" + id + ")";
        return fail(ps, "rpe", kErrConsentDenied, reason);
    }

    PolicyStack::Outcome so = post_stack_.resume(ps.ctx, ps.resume_index);
    for (const std::string& f : so.flags)
        merge_verdict(ps.event, "rpe", VerdictKind::Flag, f);
    if (so.status != PolicyStack::Outcome::Status::Allow) {
        const std::string reason = so.reason.empty()
                                       ? "suppressed after consent release"
                                       : so.reason;
        return fail(ps, "rpe", kErrPolicySuppressed, reason);
    }
    merge_verdict(ps.event, "rpe", VerdictKind::Modify,
                  "released by consent " + id);
    ps.ctx.msg = std::move(so.msg);
    UpstreamSession& sess = session(ps.server);
    return forward_and_deliver(sess, ps);
}

std::vector<std::pair<std::string, Gateway::Outcome>> Gateway::sweep_consents() {
    const std::int64_t now = clock_->now_ms();
    std::vector<std::pair<std::string, Outcome>> out;
    for (const std::string& id : broker_.sweep(now)) {
        if (!held_.count(id)) continue;
        out.emplace_back(id, resolve_consent(id, false, "consent timed out"));
    }
    return out;
}

void Gateway::flush() {
    namespace fs = std::filesystem;
    if (!config_.trace_dir.empty()) {
        fs::create_directories(config_.trace_dir);
        trace_.save(
            (fs::path(config_.trace_dir) / (session_id_ + ".jsonl")).string());
    }
    if (!config_.audit_log_path.empty()) {
        const fs::path p(config_.audit_log_path);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        std::ofstream outf(p, std::ios::binary | std::ios::trunc);
        for (const AuditEvent& a : audit_) outf << a.to_json().dump() << '\n';
    }
    if (!config_.pins_path.empty()) pins_.save(config_.pins_path);
}

} // namespace mcpgate
