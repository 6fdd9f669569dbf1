#include <doctest.h>

#include <algorithm>

#include "mcpgate/lattice.hpp"

using namespace mcpgate;

namespace {

LatticeDecl diamond() {
    LatticeDecl d;
    d.labels = {"low", "a", "b", "high"};
    d.order = {{"low", "a"}, {"low", "b"}, {"a", "high"}, {"b", "high"}};
    d.bottom = "low";
    d.top = "high";
    return d;
}

bool has_issue(const LatticeReport& r, LatticeIssue::Kind kind) {
    return std::any_of(r.issues.begin(), r.issues.end(),
                       [&](const LatticeIssue& i) { return i.kind == kind; });
}

} // namespace

TEST_SUITE("lattice") {

TEST_CASE("default chain is public <= internal <= confidential <= restricted") {
    const Lattice l = Lattice::default_chain();
    CHECK(l.labels() == std::vector<std::string>{"public", "internal",
                                                 "confidential", "restricted"});
    CHECK(l.bottom() == "public");
    CHECK(l.top() == "restricted");
    CHECK(l.can_flow_to("public", "restricted"));
    CHECK(l.can_flow_to("internal", "confidential"));
    CHECK_FALSE(l.can_flow_to("restricted", "public"));
    CHECK_FALSE(l.can_flow_to("confidential", "internal"));
    CHECK(l.join("internal", "confidential") == "confidential");
    CHECK(l.join("public", "public") == "public");
    CHECK(l.join("restricted", "public") == "restricted");
}

TEST_CASE("diamond joins resolve to the least upper bound") {
    const Lattice l{diamond()};
    CHECK(l.can_flow_to("low", "a"));
    CHECK(l.can_flow_to("a", "high"));
    CHECK(l.can_flow_to("low", "high")); // transitive closure
    CHECK_FALSE(l.can_flow_to("a", "b"));
    CHECK_FALSE(l.can_flow_to("b", "a"));
    CHECK(l.join("a", "b") == "high");
    CHECK(l.join("a", "low") == "a");
    CHECK(l.join("a", "a") == "a");
}

TEST_CASE("validation reports each broken axiom") {
    SUBCASE("duplicate label") {
        LatticeDecl d = diamond();
        d.labels.push_back("a");
        CHECK(has_issue(validate_lattice(d), LatticeIssue::Kind::DuplicateLabel));
    }
    SUBCASE("unknown label in the order") {
        LatticeDecl d = diamond();
        d.order.push_back({"a", "phantom"});
        CHECK(has_issue(validate_lattice(d), LatticeIssue::Kind::UnknownLabel));
    }
    SUBCASE("cycle between distinct labels") {
        LatticeDecl d = diamond();
        d.order.push_back({"high", "low"});
        const LatticeReport r = validate_lattice(d);
        CHECK(has_issue(r, LatticeIssue::Kind::AntisymmetryViolation));
    }
    SUBCASE("bottom must reach every label") {
        LatticeDecl d;
        d.labels = {"bot", "island", "top"};
        d.order = {{"bot", "top"}, {"island", "top"}};
        d.bottom = "bot";
        d.top = "top";
        CHECK(has_issue(validate_lattice(d), LatticeIssue::Kind::MissingBottom));
    }
    SUBCASE("every label must reach top") {
        LatticeDecl d;
        d.labels = {"bot", "stray", "top"};
        d.order = {{"bot", "stray"}, {"bot", "top"}};
        d.bottom = "bot";
        d.top = "top";
        CHECK(has_issue(validate_lattice(d), LatticeIssue::Kind::MissingTop));
    }
    SUBCASE("pair without a least upper bound") {
        // a and b share two minimal upper bounds x, y: no join.
        LatticeDecl d;
        d.labels = {"bot", "a", "b", "x", "y", "top"};
        d.order = {{"bot", "a"}, {"bot", "b"}, {"a", "x"}, {"b", "x"},
                   {"a", "y"}, {"b", "y"}, {"x", "top"}, {"y", "top"}};
        d.bottom = "bot";
        d.top = "top";
        const LatticeReport r = validate_lattice(d);
        REQUIRE(has_issue(r, LatticeIssue::Kind::MissingJoin));
        bool found = false;
        for (const auto& i : r.issues)
            if (i.kind == LatticeIssue::Kind::MissingJoin &&
                i.detail == "no join for ('a', 'b')")
                found = true;
        CHECK(found);
    }
    SUBCASE("valid diamond has no issues") {
        CHECK(validate_lattice(diamond()).ok());
    }
}

TEST_CASE("construction fails closed on an invalid declaration") {
    LatticeDecl d = diamond();
    d.order.push_back({"high", "low"});
    CHECK_THROWS_AS(Lattice{d}, ConfigError);
    try {
        Lattice l{d};
        (void)l;
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).rfind("invalid lattice: ", 0) == 0);
    }
}

TEST_CASE("digest is deterministic and declaration-sensitive") {
    CHECK(Lattice::default_chain().digest() == Lattice::default_chain().digest());
    CHECK(Lattice::default_chain().digest() != Lattice{diamond()}.digest());
}

TEST_CASE("domain validation catches overlaps and orphan tools") {
    TrustDomain d1{"d1", {"srv1"}, {"t1"}, "", "internal"};
    TrustDomain d2{"d2", {"srv1"}, {}, "", "public"};
    const std::set<std::string> servers = {"srv1", "srv2"};
    const std::map<std::string, std::string> tool_servers = {{"t1", "srv2"}};

    const auto problems = validate_domains({d1, d2}, servers, tool_servers);
    CHECK(problems.size() >= 3); // overlap, orphan tool, uncovered srv2
    CHECK(validate_domains(
              {TrustDomain{"d1", {"srv1", "srv2"}, {}, "", "internal"}},
              servers, {})
              .empty());
}

TEST_CASE("label assignment defaults to the most restrictive label") {
    LabelAssignment def;
    CHECK(def.label_of("anything") == "restricted");

    LabelAssignment labels({{"t1", "public"}}, "internal");
    CHECK(labels.label_of("t1") == "public");
    CHECK(labels.label_of("t2") == "internal");
    labels.assign("t2", "confidential");
    CHECK(labels.label_of("t2") == "confidential");
}

} // TEST_SUITE
