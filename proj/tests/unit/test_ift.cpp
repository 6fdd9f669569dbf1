#include <doctest.h>

#include "mcpgate/crypto.hpp"
#include "mcpgate/ift.hpp"

using namespace mcpgate;

namespace {

TaintedValue taint_of(const std::string& value, const std::string& label,
                      const std::string& domain, const std::string& server,
                      std::uint64_t seq = 1) {
    TaintedValue t;
    t.value = value;
    t.digest = sha256(value);
    t.label = label;
    t.origin_domain = domain;
    t.origin_server = server;
    t.seq = seq;
    return t;
}

const std::size_t kSpan = 16;

} // namespace

TEST_SUITE("ift") {

TEST_CASE("taint store deduplicates by digest and origin server") {
    TaintStore store;
    store.add(taint_of("secret token", "restricted", "d1", "srv1"));
    store.add(taint_of("secret token", "restricted", "d1", "srv1"));
    CHECK(store.size() == 1);

    store.add(taint_of("secret token", "restricted", "d1", "srv2"));
    CHECK(store.size() == 2);

    CHECK(store.from_server("srv1").size() == 1);
    CHECK(store.from_server("srv2").size() == 1);
    CHECK(store.from_server("srv3").empty());
    store.clear();
    CHECK(store.size() == 0);
}

TEST_CASE("response labeling joins tool and input labels, never downgrades") {
    const Lattice lattice = Lattice::default_chain();
    ToolDescriptor tool;
    tool.name = "query_db";
    tool.label = "confidential";
    tool.server = "srv1";

    const json body = json{
        {"content", json::array({json{{"type", "text"},
                                      {"text", "row1"}}})},
        {"count", 1}};

    SUBCASE("label is the tool label when inputs are lower") {
        const auto taints =
            label_response(body, tool, "d1", {"internal"}, lattice, 9);
        REQUIRE_FALSE(taints.empty());
        for (const auto& t : taints) {
            CHECK(t.label == "confidential");
            CHECK(t.origin_domain == "d1");
            CHECK(t.origin_server == "srv1");
            CHECK(t.seq == 9);
            CHECK(lattice.can_flow_to("internal", t.label)); // no downgrade
        }
    }

    SUBCASE("a higher input label dominates the tool label") {
        const auto taints =
            label_response(body, tool, "d1", {"restricted"}, lattice, 9);
        REQUIRE_FALSE(taints.empty());
        for (const auto& t : taints) CHECK(t.label == "restricted");
    }

    SUBCASE("every string leaf and the whole body are recorded") {
        const auto taints = label_response(body, tool, "d1", {}, lattice, 9);
        bool leaf = false, whole = false;
        for (const auto& t : taints) {
            if (t.value == "row1") leaf = true;
            if (t.value == body.dump()) whole = true;
        }
        CHECK(leaf);
        CHECK(whole);
    }
}

TEST_CASE("argument scanning finds exact and embedded reuse") {
    TaintStore store;
    const std::string secret = "API_KEY=sk-123456789012345678"; // > 16 bytes
    store.add(taint_of(secret, "restricted", "d1", "srv1"));

    SUBCASE("verbatim value reuse matches") {
        const auto matches =
            scan_arguments(json{{"query", secret}}, store, kSpan);
        REQUIRE(matches.size() == 1);
        CHECK(matches[0].arg_path == "/query");
        CHECK(matches[0].taint->label == "restricted");
    }

    SUBCASE("a partial span inside a longer argument matches") {
        const auto matches = scan_arguments(
            json{{"body", "please log " + secret + " for me"}}, store, kSpan);
        REQUIRE(matches.size() == 1);
        CHECK(matches[0].arg_path == "/body");
    }

    SUBCASE("nested leaves carry JSON-pointer paths") {
        const auto matches = scan_arguments(
            json{{"outer", json{{"inner", json::array({secret})}}}}, store,
            kSpan);
        REQUIRE(matches.size() == 1);
        CHECK(matches[0].arg_path == "/outer/inner/0");
    }

    SUBCASE("unrelated arguments do not match") {
        CHECK(scan_arguments(json{{"query", "weather in paris"}}, store, kSpan)
                  .empty());
    }
}

TEST_CASE("values below the span threshold match only verbatim") {
    TaintStore store;
    const std::string short_secret = "pin-4491"; // 8 bytes < threshold
    store.add(taint_of(short_secret, "restricted", "d1", "srv1"));

    CHECK(scan_arguments(json{{"q", short_secret}}, store, kSpan).size() == 1);
    CHECK(scan_arguments(json{{"q", "the " + short_secret + " leaked"}}, store,
                         kSpan)
              .empty());
}

TEST_CASE("outflow requires label within clearance or a declassification") {
    const Lattice lattice = Lattice::default_chain();
    TaintStore store;
    const std::string secret = "customer list: alice, bob, carol";
    store.add(taint_of(secret, "restricted", "d1", "srv1"));

    TrustDomain low{"d2", {"srv2"}, {}, "", "internal"};

    SUBCASE("a restricted datum may not reach an internal domain") {
        const IftVerdict v = check_outflow(json{{"payload", secret}}, low,
                                           store, lattice, {}, kSpan);
        CHECK_FALSE(v.allowed);
        CHECK(v.arg_path == "/payload");
        CHECK(v.label == "restricted");
        CHECK(v.reason ==
              "argument '/payload' carries 'restricted' data above clearance "
              "'internal' of domain 'd2'");
    }

    SUBCASE("a datum within clearance flows freely") {
        TaintStore low_store;
        low_store.add(taint_of(secret, "internal", "d1", "srv1"));
        CHECK(check_outflow(json{{"payload", secret}}, low, low_store, lattice,
                            {}, kSpan)
                  .allowed);
    }

    SUBCASE("an empty clearance means the lattice bottom") {
        TrustDomain blank{"d3", {"srv3"}, {}, "", ""};
        TaintStore pub;
        pub.add(taint_of(secret, "public", "d1", "srv1"));
        CHECK(check_outflow(json{{"p", secret}}, blank, pub, lattice, {}, kSpan)
                  .allowed);
        const IftVerdict v = check_outflow(json{{"p", secret}}, blank, store,
                                           lattice, {}, kSpan);
        CHECK_FALSE(v.allowed);
    }

    SUBCASE("a matching declassification rule authorizes the flow") {
        DeclassificationRule rule;
        rule.label = "restricted";
        rule.origin_domain = "d1";
        rule.target_domain = "d2";
        rule.authorizer = "lead";
        const IftVerdict v = check_outflow(json{{"payload", secret}}, low,
                                           store, lattice, {rule}, kSpan);
        CHECK(v.allowed);
        REQUIRE(v.audit_notes.size() == 1);
        CHECK(v.audit_notes[0] ==
              "declassified " + to_hex(sha256(secret)).substr(0, 12) +
                  " (restricted -> d2) by lead");
    }

    SUBCASE("a digest-scoped rule covers only that datum") {
        DeclassificationRule rule;
        rule.label = "restricted";
        rule.origin_domain = "d1";
        rule.target_domain = "d2";
        rule.authorizer = "lead";
        rule.digest_hex = to_hex(sha256(std::string_view("other datum")));
        const IftVerdict v = check_outflow(json{{"payload", secret}}, low,
                                           store, lattice, {rule}, kSpan);
        CHECK_FALSE(v.allowed);
    }

    SUBCASE("rules for other targets do not apply") {
        DeclassificationRule rule;
        rule.label = "restricted";
        rule.origin_domain = "d1";
        rule.target_domain = "d9";
        rule.authorizer = "lead";
        CHECK_FALSE(check_outflow(json{{"payload", secret}}, low, store,
                                  lattice, {rule}, kSpan)
                        .allowed);
    }
}

TEST_CASE("context transfers need a flow-policy pair across servers") {
    TaintStore store;
    const std::string brief = "project brief: launch on tuesday";
    store.add(taint_of(brief, "internal", "d1", "srv1"));

    FlowPolicy policy;

    SUBCASE("reuse toward the origin server is always fine") {
        CHECK(check_context_transfer(json{{"text", brief}}, "srv1", "d1", store,
                                     policy, kSpan)
                  .allowed);
    }

    SUBCASE("reuse toward another server needs the domain pair") {
        const IftVerdict v = check_context_transfer(
            json{{"text", brief}}, "srv2", "d2", store, policy, kSpan);
        CHECK_FALSE(v.allowed);
        CHECK(v.reason ==
              "content from server 'srv1' reused toward server 'srv2' without "
              "a flow-policy pair d1 -> d2");
    }

    SUBCASE("a permitted pair allows the transfer and leaves a note") {
        FlowPolicy open_policy;
        open_policy.permit("d1", "d2");
        const IftVerdict v = check_context_transfer(
            json{{"text", brief}}, "srv2", "d2", store, open_policy, kSpan);
        CHECK(v.allowed);
        REQUIRE_FALSE(v.audit_notes.empty());
        CHECK(v.audit_notes[0] ==
              "cross-domain transfer d1 -> d2 permitted by flow policy");
    }

    SUBCASE("the pair is directional") {
        FlowPolicy reverse;
        reverse.permit("d2", "d1");
        CHECK_FALSE(check_context_transfer(json{{"text", brief}}, "srv2", "d2",
                                           store, reverse, kSpan)
                        .allowed);
    }
}

TEST_CASE("flow policy and declassification rules round trip through JSON") {
    FlowPolicy policy;
    policy.permit("d1", "d2");
    const FlowPolicy back = FlowPolicy::from_json(policy.to_json());
    CHECK(back.permits("d1", "d2"));
    CHECK_FALSE(back.permits("d2", "d1"));

    DeclassificationRule rule;
    rule.label = "restricted";
    rule.origin_domain = "d1";
    rule.target_domain = "d2";
    rule.authorizer = "lead";
    rule.digest_hex = to_hex(sha256(std::string_view("x")));
    const DeclassificationRule rback =
        DeclassificationRule::from_json(rule.to_json());
    CHECK(rback.label == "restricted");
    CHECK(rback.digest_hex == rule.digest_hex);

    DeclassificationRule plain;
    plain.label = "internal";
    plain.origin_domain = "d1";
    plain.target_domain = "d2";
    plain.authorizer = "lead";
    const DeclassificationRule pback =
        DeclassificationRule::from_json(plain.to_json());
    CHECK_FALSE(pback.digest_hex.has_value());
}

} // TEST_SUITE
