#include <doctest.h>

#include <random>

#include "mcpgate/cac.hpp"

using namespace mcpgate;

namespace {

ToolDescriptor read_file_tool() {
    ToolDescriptor t;
    t.name = "read_file";
    t.description = "Reads a file from disk.";
    t.schema = json{{"type", "object"},
                    {"properties", json{{"path", json{{"type", "string"}}},
                                        {"limit", json{{"type", "number"}}}}}};
    t.version = "1.0.0";
    t.perm = {Permission{Scope::Read, "fs"}};
    t.server = "srv1";
    return t;
}

struct Authority {
    EcdsaPrivateKey key = EcdsaPrivateKey::generate();
    Keyring ring;
    Authority() { ring.add("authority", key.public_key()); }
};

} // namespace

TEST_SUITE("cac") {

TEST_CASE("parameter constraints admit exactly their declared values") {
    CHECK(ParamConstraint::any().admits(json("anything")));
    CHECK(ParamConstraint::any().admits(json(nullptr)));

    const auto exact = ParamConstraint::exactly(json(42));
    CHECK(exact.admits(json(42)));
    CHECK_FALSE(exact.admits(json(43)));
    CHECK_FALSE(exact.admits(json("42")));

    const auto prefix = ParamConstraint::with_prefix("/safe/");
    CHECK(prefix.admits(json("/safe/readme.txt")));
    CHECK(prefix.admits(json("/safe/")));
    CHECK_FALSE(prefix.admits(json("/etc/passwd")));
    CHECK_FALSE(prefix.admits(json(7))); // non-string never matches a prefix

    const auto range = ParamConstraint::in_range(1.0, 10.0);
    CHECK(range.admits(json(1.0)));    // bounds are inclusive
    CHECK(range.admits(json(10)));
    CHECK(range.admits(json(5.5)));
    CHECK_FALSE(range.admits(json(0.99)));
    CHECK_FALSE(range.admits(json("5"))); // non-number never matches a range

    const ParamConstraint back =
        ParamConstraint::from_json(range.to_json());
    CHECK(back.admits(json(10.0)));
    CHECK_FALSE(back.admits(json(10.01)));
}

TEST_CASE("issue binds constraints to schema keys only") {
    const Authority auth;
    const ToolDescriptor tool = read_file_tool();

    const Capability cap =
        issue(auth.key, "authority", "agent", tool,
              {{"path", ParamConstraint::with_prefix("/safe/")}}, Scope::Read,
              2000);
    CHECK(cap.tool == "read_file");
    CHECK(cap.holder == "agent");
    CHECK(cap.issuer == "authority");
    CHECK(cap.verify(auth.ring));

    CHECK_THROWS_AS((void)issue(auth.key, "authority", "agent", tool,
                                {{"ghost", ParamConstraint::any()}}, Scope::Read,
                                2000),
                    ConfigError);
    try {
        (void)issue(auth.key, "authority", "agent", tool,
                    {{"ghost", ParamConstraint::any()}}, Scope::Read, 2000);
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()) ==
              "capability param 'ghost' absent from schema of tool 'read_file'");
    }
}

TEST_CASE("capability signing input is the canonical sorted encoding") {
    // Frozen oracle: compact JSON of {holder, params, scope, tool, ttl_ms},
    // computed independently.
    Capability cap;
    cap.tool = "read_file";
    cap.holder = "agent";
    cap.scope = Scope::Read;
    cap.ttl_ms = 1700003600000LL;
    cap.params = {{"path", ParamConstraint::with_prefix("/safe/")}};
    const auto input = cap.signing_input();
    const std::string encoded(input.begin(), input.end());
    CHECK(encoded ==
          R"({"holder":"agent","params":{"path":{"kind":"prefix",)"
          R"("value":"/safe/"}},"scope":"read","tool":"read_file",)"
          R"("ttl_ms":1700003600000})");
}

TEST_CASE("capability verification is unforgeable") {
    const Authority auth;
    const Capability cap =
        issue(auth.key, "authority", "agent", read_file_tool(), {}, Scope::Read,
              2000);
    CHECK(cap.verify(auth.ring));

    Capability forged = cap;
    forged.holder = "attacker";
    CHECK_FALSE(forged.verify(auth.ring)); // signature no longer covers it

    Capability wrong_issuer = cap;
    wrong_issuer.issuer = "nobody";
    CHECK_FALSE(wrong_issuer.verify(auth.ring));

    const Capability back = Capability::from_json(cap.to_json());
    CHECK(back.verify(auth.ring));
}

TEST_CASE("the four invocation checks fail progressively") {
    const Authority auth;
    const ToolDescriptor tool = read_file_tool();
    const Capability cap =
        issue(auth.key, "authority", "agent", tool,
              {{"path", ParamConstraint::with_prefix("/safe/")}}, Scope::Read,
              2000);
    const std::vector<Capability> held = {cap};
    const std::vector<Scope> needs_read = {Scope::Read};

    SUBCASE("check 1: a valid capability bound to the agent") {
        const CacVerdict none = check_invocation({}, "agent", "read_file",
                                                 json{{"path", "/safe/x"}},
                                                 needs_read, 1000, auth.ring);
        CHECK_FALSE(none.allowed);
        CHECK(none.failed_check == 1);
        CHECK(none.reason == "no valid capability for tool 'read_file'");

        const CacVerdict other = check_invocation(held, "other", "read_file",
                                                  json{{"path", "/safe/x"}},
                                                  needs_read, 1000, auth.ring);
        CHECK(other.failed_check == 1);

        Capability tampered = cap;
        tampered.ttl_ms += 1;
        const CacVerdict bad_sig = check_invocation(
            {tampered}, "agent", "read_file", json{{"path", "/safe/x"}},
            needs_read, 1000, auth.ring);
        CHECK(bad_sig.failed_check == 1);
    }

    SUBCASE("check 2: every argument covered and admitted") {
        const CacVerdict escape = check_invocation(
            held, "agent", "read_file", json{{"path", "/etc/passwd"}},
            needs_read, 1000, auth.ring);
        CHECK_FALSE(escape.allowed);
        CHECK(escape.failed_check == 2);
        CHECK(escape.reason ==
              "arguments exceed capability params for 'read_file'");

        // An argument key with no constraint at all is uncovered.
        const CacVerdict extra = check_invocation(
            held, "agent", "read_file",
            json{{"path", "/safe/x"}, {"limit", 5}}, needs_read, 1000,
            auth.ring);
        CHECK(extra.failed_check == 2);

        // Null arguments are trivially covered; non-objects are not.
        CHECK(check_invocation(held, "agent", "read_file", json(),
                               needs_read, 1000, auth.ring)
                  .allowed);
        CHECK(check_invocation(held, "agent", "read_file", json::array(),
                               needs_read, 1000, auth.ring)
                  .failed_check == 2);
    }

    SUBCASE("check 3: required operation kinds within scope") {
        const CacVerdict write = check_invocation(
            held, "agent", "read_file", json{{"path", "/safe/x"}},
            {Scope::Write}, 1000, auth.ring);
        CHECK_FALSE(write.allowed);
        CHECK(write.failed_check == 3);
        CHECK(write.reason ==
              "operation outside capability scope for 'read_file'");
    }

    SUBCASE("check 4: expiry is inclusive at the deadline") {
        const CacVerdict live = check_invocation(
            held, "agent", "read_file", json{{"path", "/safe/x"}}, needs_read,
            1999, auth.ring);
        CHECK(live.allowed);

        const CacVerdict expired = check_invocation(
            held, "agent", "read_file", json{{"path", "/safe/x"}}, needs_read,
            2000, auth.ring);
        CHECK_FALSE(expired.allowed);
        CHECK(expired.failed_check == 4);
        CHECK(expired.reason == "capability expired for 'read_file'");
    }

    SUBCASE("a single capability must pass all four checks alone") {
        // cap2 covers the argument but is expired; cap covers the ttl but
        // not the argument. No stitching: the call is denied.
        const Capability cap2 =
            issue(auth.key, "authority", "agent", tool,
                  {{"path", ParamConstraint::any()}}, Scope::Read, 500);
        const CacVerdict v = check_invocation(
            {cap, cap2}, "agent", "read_file", json{{"path", "/etc/passwd"}},
            needs_read, 1000, auth.ring);
        CHECK_FALSE(v.allowed);

        // A second capability that alone satisfies everything admits it.
        const Capability cap3 =
            issue(auth.key, "authority", "agent", tool,
                  {{"path", ParamConstraint::any()}}, Scope::Read, 5000);
        CHECK(check_invocation({cap, cap3}, "agent", "read_file",
                               json{{"path", "/etc/passwd"}}, needs_read, 1000,
                               auth.ring)
                  .allowed);
    }
}

TEST_CASE("required scopes derive from the method and tool") {
    const ToolDescriptor tool = read_file_tool();
    CHECK(required_scopes(Method::ResourcesRead, nullptr) ==
          std::vector<Scope>{Scope::Read});
    CHECK(required_scopes(Method::ToolsCall, &tool) ==
          std::vector<Scope>{Scope::Read});
    CHECK(required_scopes(Method::ToolsList, &tool).empty());

    ToolDescriptor silent = tool;
    silent.perm.clear();
    CHECK(required_scopes(Method::ToolsCall, &silent) ==
          std::vector<Scope>{Scope::Execute});
    CHECK(required_scopes(Method::ToolsCall, nullptr) ==
          std::vector<Scope>{Scope::Execute});
}

TEST_CASE("scope subsumption: execute covers write covers read") {
    CHECK(scope_covers(Scope::Read, Scope::Read));
    CHECK_FALSE(scope_covers(Scope::Read, Scope::Write));
    CHECK_FALSE(scope_covers(Scope::Read, Scope::Execute));
    CHECK(scope_covers(Scope::Write, Scope::Read));
    CHECK(scope_covers(Scope::Write, Scope::Write));
    CHECK_FALSE(scope_covers(Scope::Write, Scope::Execute));
    CHECK(scope_covers(Scope::Execute, Scope::Read));
    CHECK(scope_covers(Scope::Execute, Scope::Write));
    CHECK(scope_covers(Scope::Execute, Scope::Execute));
}

TEST_CASE("composition lookup precedence") {
    CompositionPolicy p(CompositionVerdict::Allow);
    p.add_rule("read_file", "send_email", CompositionVerdict::Deny);
    p.add_rule("read_file", "*", CompositionVerdict::Audit);
    p.add_rule("*", "send_email", CompositionVerdict::Allow);

    // Exact beats both wildcards.
    CHECK(p.lookup("read_file", "send_email") == CompositionVerdict::Deny);
    // (prev, *) beats (*, next).
    CHECK(p.lookup("read_file", "other") == CompositionVerdict::Audit);
    // (*, next) beats the default.
    CHECK(p.lookup("list_dir", "send_email") == CompositionVerdict::Allow);
    // Default covers the rest.
    CHECK(p.lookup("a", "b") == CompositionVerdict::Allow);

    const CompositionPolicy back = CompositionPolicy::from_json(p.to_json());
    CHECK(back.lookup("read_file", "send_email") == CompositionVerdict::Deny);
    CHECK(back.default_verdict() == CompositionVerdict::Allow);
}

TEST_CASE("composition over a history takes the most restrictive verdict") {
    CompositionPolicy p(CompositionVerdict::Allow);
    p.add_rule("read_file", "send_email", CompositionVerdict::Deny);
    p.add_rule("list_dir", "send_email", CompositionVerdict::Audit);

    CHECK(check_composition(p, {}, "send_email").verdict ==
          CompositionVerdict::Allow); // empty history: the default

    const CompositionResult audit =
        check_composition(p, {"list_dir"}, "send_email");
    CHECK(audit.verdict == CompositionVerdict::Audit);
    CHECK(audit.offending_prev == "list_dir");

    const CompositionResult deny =
        check_composition(p, {"list_dir", "read_file"}, "send_email");
    CHECK(deny.verdict == CompositionVerdict::Deny);
    CHECK(deny.offending_prev == "read_file");
}

TEST_CASE("composition agrees with a direct recomputation on random inputs") {
    std::mt19937_64 rng(7);
    const std::vector<std::string> tools = {"a", "b", "c", "d"};
    const CompositionVerdict verdicts[] = {CompositionVerdict::Allow,
                                           CompositionVerdict::Audit,
                                           CompositionVerdict::Deny};
    const auto severity = [](CompositionVerdict v) {
        return v == CompositionVerdict::Deny    ? 2
               : v == CompositionVerdict::Audit ? 1
                                                : 0;
    };
    for (int trial = 0; trial < 200; ++trial) {
        CompositionPolicy p(verdicts[rng() % 3]);
        const int rules = static_cast<int>(rng() % 6);
        for (int i = 0; i < rules; ++i) {
            const std::string prev = rng() % 4 == 0 ? "*" : tools[rng() % 4];
            const std::string next = rng() % 4 == 0 ? "*" : tools[rng() % 4];
            p.add_rule(prev, next, verdicts[rng() % 3]);
        }
        std::vector<std::string> history;
        const int hist_len = static_cast<int>(rng() % 5);
        for (int i = 0; i < hist_len; ++i) history.push_back(tools[rng() % 4]);
        const std::string next = tools[rng() % 4];

        int expect = history.empty() ? severity(p.default_verdict()) : 0;
        for (const auto& prev : history)
            expect = std::max(expect, severity(p.lookup(prev, next)));

        CHECK(severity(check_composition(p, history, next).verdict) == expect);
    }
}

TEST_CASE("composition verdict names round trip") {
    CHECK(composition_verdict_name(CompositionVerdict::Allow) == "allow");
    CHECK(composition_verdict_name(CompositionVerdict::Audit) == "audit");
    CHECK(composition_verdict_name(CompositionVerdict::Deny) == "deny");
    CHECK(composition_verdict_from_name("audit") == CompositionVerdict::Audit);
    CHECK_THROWS_AS((void)composition_verdict_from_name("block"), ConfigError);
}

} // TEST_SUITE
