#include <doctest.h>

#include "mcpgate/crypto.hpp"
#include "mcpgate/model.hpp"

using namespace mcpgate;

namespace {

SystemModel tiny_model() {
    SystemModel m;
    m.agents = {"agent"};
    m.servers = {"srv1", "srv2"};
    ToolDescriptor t1;
    t1.name = "read_file";
    t1.description = "Reads a file from disk.";
    t1.schema = json{{"type", "object"},
                     {"properties", json{{"path", json{{"type", "string"}}}}}};
    t1.version = "1.0.0";
    t1.perm = {Permission{Scope::Read, "fs"}};
    t1.server = "srv1";
    t1.label = "internal";
    m.tools[t1.name] = t1;

    ToolDescriptor t2;
    t2.name = "send_email";
    t2.version = "2.0.0";
    t2.perm = {Permission{Scope::Write, "net"}};
    t2.server = "srv2";
    t2.label = "public";
    m.tools[t2.name] = t2;

    m.domains = {TrustDomain{"d1", {"srv1"}, {}, "", "restricted"},
                 TrustDomain{"d2", {"srv2"}, {}, "", "public"}};
    m.labeling = LabelAssignment({}, "restricted");
    return m;
}

TraceEvent allowed_event(std::uint64_t seq, const std::string& tool,
                         const std::string& server) {
    TraceEvent e;
    e.seq = seq;
    e.session = "sess";
    e.ts_ms = 1000 + static_cast<std::int64_t>(seq);
    e.action = ActionLabel::Invocation;
    e.method = "tools/call";
    e.tool = tool;
    e.agent = "agent";
    e.server = server;
    e.verdicts["cac"] = LayerVerdict{VerdictKind::Allow, ""};
    return e;
}

} // namespace

TEST_SUITE("model") {

TEST_CASE("permissions parse and print") {
    const Permission p = Permission::parse("read:fs");
    CHECK(p.kind == Scope::Read);
    CHECK(p.resource_class == "fs");
    CHECK(p.to_string() == "read:fs");
    CHECK(Permission::parse("execute:shell").kind == Scope::Execute);
    CHECK_THROWS_AS((void)Permission::parse("no-colon"), ConfigError);
    CHECK_THROWS_AS((void)Permission::parse("launch:fs"), ConfigError);
}

TEST_CASE("canonical definition hash is stable") {
    // Frozen oracle: SHA-256 over the sorted-key compact dump of
    // {description, name, schema}, computed independently.
    ToolDescriptor t;
    t.name = "read_file";
    t.description = "Reads a file from disk.";
    t.schema = json{{"type", "object"},
                    {"properties", json{{"path", json{{"type", "string"}}}}}};
    CHECK(t.definition_json().dump() ==
          R"({"description":"Reads a file from disk.","name":"read_file",)"
          R"("schema":{"properties":{"path":{"type":"string"}},"type":"object"}})");
    CHECK(to_hex(t.def_hash()) ==
          "623543287d5992c06213bcda85659fa5708aca83304d2e84ea105ad5ed5ff5f4");

    // Version, permissions, server, and label do not affect the hash.
    ToolDescriptor t2 = t;
    t2.version = "9.9.9";
    t2.perm = {Permission{Scope::Execute, "shell"}};
    t2.server = "elsewhere";
    t2.label = "public";
    CHECK(t2.def_hash() == t.def_hash());

    // A null schema canonicalizes to an empty object.
    ToolDescriptor t3;
    t3.name = "t";
    t3.schema = json();
    CHECK(t3.definition_json().dump() ==
          R"({"description":"","name":"t","schema":{}})");
    CHECK(to_hex(t3.def_hash()) ==
          "f2f71a2bf9521738d7030a8b54cf359a4862e62b6c09d63baed502e8076eed77");
}

TEST_CASE("tool descriptor JSON round trip and defaults") {
    ToolDescriptor t;
    t.name = "x";
    t.description = "desc";
    t.schema = json{{"type", "object"}};
    t.version = "1.2.3";
    t.perm = {Permission{Scope::Write, "net"}};
    t.server = "srv1";
    t.label = "internal";
    const ToolDescriptor back = ToolDescriptor::from_json(t.to_json());
    CHECK(back.to_json() == t.to_json());
    CHECK(back.def_hash() == t.def_hash());

    const ToolDescriptor bare =
        ToolDescriptor::from_json(json{{"name", "y"}});
    CHECK(bare.version == "1.0");
}

TEST_CASE("effective permissions are the capability and tool-permission meet") {
    const SystemModel m = tiny_model();
    SystemState s = SystemState::initial(m);

    // No active tools: eff is empty even with grants.
    s.grant("agent", Permission{Scope::Read, "fs"});
    CHECK(s.effective_permissions("agent", m).empty());

    // Activation exposes only granted tool permissions.
    s.activate("agent", "read_file");
    s.activate("agent", "send_email");
    const auto eff = s.effective_permissions("agent", m);
    CHECK(eff == std::set<Permission>{Permission{Scope::Read, "fs"}});

    // Granting the second tool's permission widens eff.
    s.grant("agent", Permission{Scope::Write, "net"});
    CHECK(s.effective_permissions("agent", m).size() == 2);

    // Revocation narrows it again.
    s.revoke("agent", Permission{Scope::Read, "fs"});
    CHECK(s.effective_permissions("agent", m) ==
          std::set<Permission>{Permission{Scope::Write, "net"}});
}

TEST_CASE("static grants seed the initial state") {
    SystemModel m = tiny_model();
    m.static_grants["agent"] = {Permission{Scope::Read, "fs"}};
    const SystemState s = SystemState::initial(m);
    CHECK(s.capabilities("agent") ==
          std::set<Permission>{Permission{Scope::Read, "fs"}});
}

TEST_CASE("apply_event mutates state only for allowed events") {
    const SystemModel m = tiny_model();
    SystemState s = SystemState::initial(m);

    TraceEvent denied = allowed_event(1, "read_file", "srv1");
    denied.verdicts["cac"] = LayerVerdict{VerdictKind::Deny, "refused"};
    denied.grants.push_back(
        GrantDelta{false, "agent", Permission{Scope::Read, "fs"}});
    const Digest before = s.digest();
    apply_event(s, m, denied);
    CHECK(s.digest() == before); // denied events are no-ops

    TraceEvent ok = allowed_event(2, "read_file", "srv1");
    ok.grants.push_back(
        GrantDelta{false, "agent", Permission{Scope::Read, "fs"}});
    ok.activated_tools.push_back("read_file");
    ok.knowledge_added.push_back(
        KnowledgeAdd{sha256(std::string_view("datum")), "internal", "srv1", "d1"});
    apply_event(s, m, ok);
    CHECK(s.digest() != before);
    CHECK(s.capabilities("agent").size() == 1);
    CHECK(s.active_tools("agent").count("read_file") == 1);
    REQUIRE(s.knowledge("agent", "srv1") != nullptr);
    CHECK(s.knowledge("agent", "srv1")->size() == 1);
    CHECK(s.knowledge("agent", "srv2") == nullptr);
}

TEST_CASE("apply_event rejects references outside the model") {
    const SystemModel m = tiny_model();
    SystemState s = SystemState::initial(m);
    TraceEvent e = allowed_event(1, "ghost_tool", "srv1");
    CHECK_THROWS_AS(apply_event(s, m, e), ModelError);
}

TEST_CASE("admin actions drive connections") {
    const SystemModel m = tiny_model();
    SystemState s = SystemState::initial(m);

    TraceEvent init = allowed_event(1, "", "srv1");
    init.action = ActionLabel::Admin;
    init.method = "initialize";
    apply_event(s, m, init);
    CHECK(s.connected("agent", "srv1"));

    TraceEvent down = allowed_event(2, "", "srv1");
    down.action = ActionLabel::Admin;
    down.method = "shutdown";
    apply_event(s, m, down);
    CHECK_FALSE(s.connected("agent", "srv1"));
}

TEST_CASE("event allowed means no layer denied") {
    TraceEvent e = allowed_event(1, "read_file", "srv1");
    CHECK(event_allowed(e));
    e.verdicts["ift"] = LayerVerdict{VerdictKind::Flag, "note"};
    CHECK(event_allowed(e));
    e.verdicts["rpe"] = LayerVerdict{VerdictKind::Deny, "blocked"};
    CHECK_FALSE(event_allowed(e));
}

TEST_CASE("trace events round trip through JSON") {
    TraceEvent e = allowed_event(3, "read_file", "srv1");
    e.arg_digest = sha256(std::string_view("args"));
    e.tar_def_hash = sha256(std::string_view("def"));
    e.input_digests = {sha256(std::string_view("in"))};
    e.knowledge_added = {
        KnowledgeAdd{sha256(std::string_view("k")), "internal", "srv1", "d1"}};
    e.exercised = {Permission{Scope::Read, "fs"}};
    e.grants = {GrantDelta{true, "agent", Permission{Scope::Write, "net"}}};
    e.activated_tools = {"read_file"};
    ToolDescriptor td;
    td.name = "read_file";
    td.server = "srv1";
    e.tool_defs = {td};
    e.pre_digest = sha256(std::string_view("pre"));
    e.post_digest = sha256(std::string_view("post"));

    const TraceEvent back = TraceEvent::from_json(e.to_json());
    CHECK(back.to_json() == e.to_json());
    CHECK(back.tar_def_hash.has_value());
    CHECK(back.grants[0].revoke);

    TraceEvent bare = allowed_event(4, "", "srv1");
    const TraceEvent bare_back = TraceEvent::from_json(bare.to_json());
    CHECK_FALSE(bare_back.tar_def_hash.has_value());
}

TEST_CASE("trace recording enforces the chain") {
    const SystemModel m = tiny_model();
    SystemState s = SystemState::initial(m);
    Trace trace{TraceHeader{m.digest(), Digest{}, Digest{}, "sess", 0}};

    TraceEvent e1 = allowed_event(1, "read_file", "srv1");
    e1.pre_digest = s.digest();
    apply_event(s, m, e1);
    e1.post_digest = s.digest();
    trace.record(e1);

    SUBCASE("sequence numbers must increase") {
        TraceEvent e2 = allowed_event(1, "read_file", "srv1");
        e2.pre_digest = e1.post_digest;
        e2.post_digest = e1.post_digest;
        CHECK_THROWS_AS(trace.record(e2), CorruptTraceError);
        try {
            trace.record(e2);
        } catch (const CorruptTraceError& err) {
            CHECK(err.first_break == 1);
        }
    }

    SUBCASE("the digest chain must connect") {
        TraceEvent e2 = allowed_event(2, "read_file", "srv1");
        e2.pre_digest = sha256(std::string_view("wrong"));
        e2.post_digest = e2.pre_digest;
        CHECK_THROWS_AS(trace.record(e2), CorruptTraceError);
    }

    SUBCASE("a well-formed successor appends") {
        TraceEvent e2 = allowed_event(2, "send_email", "srv2");
        e2.pre_digest = s.digest();
        apply_event(s, m, e2);
        e2.post_digest = s.digest();
        trace.record(e2);
        CHECK(trace.events().size() == 2);
    }
}

TEST_CASE("trace serialization round trips") {
    const SystemModel m = tiny_model();
    SystemState s = SystemState::initial(m);
    Trace trace{TraceHeader{m.digest(), Digest{}, Digest{}, "sess", 77}};
    TraceEvent e1 = allowed_event(1, "read_file", "srv1");
    e1.pre_digest = s.digest();
    apply_event(s, m, e1);
    e1.post_digest = s.digest();
    trace.record(e1);

    const Trace back = Trace::parse(trace.serialize());
    CHECK(back == trace);
    CHECK(back.header().session == "sess");
    CHECK(back.header().created_ms == 77);
}

TEST_CASE("trace parsing fails closed") {
    CHECK_THROWS_AS((void)Trace::parse(""), CorruptTraceError);
    CHECK_THROWS_AS((void)Trace::parse("this is not json\n"), CorruptTraceError);

    // A corrupted second line reports where the chain broke.
    const SystemModel m = tiny_model();
    SystemState s = SystemState::initial(m);
    Trace trace{TraceHeader{m.digest(), Digest{}, Digest{}, "sess", 0}};
    TraceEvent e1 = allowed_event(1, "read_file", "srv1");
    e1.pre_digest = s.digest();
    apply_event(s, m, e1);
    e1.post_digest = s.digest();
    trace.record(e1);
    std::string text = trace.serialize();
    text += "{\"broken\":true}\n";
    CHECK_THROWS_AS((void)Trace::parse(text), CorruptTraceError);
}

TEST_CASE("state digest is order-insensitive for identical contents") {
    const SystemModel m = tiny_model();
    SystemState a = SystemState::initial(m);
    SystemState b = SystemState::initial(m);
    a.grant("agent", Permission{Scope::Read, "fs"});
    a.grant("agent", Permission{Scope::Write, "net"});
    b.grant("agent", Permission{Scope::Write, "net"});
    b.grant("agent", Permission{Scope::Read, "fs"});
    CHECK(a.digest() == b.digest());
}

} // TEST_SUITE
