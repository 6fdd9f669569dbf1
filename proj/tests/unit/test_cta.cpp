#include <doctest.h>

#include <filesystem>
#include <unistd.h>

#include "mcpgate/cta.hpp"

using namespace mcpgate;

namespace {

ToolDescriptor read_file_tool() {
    ToolDescriptor t;
    t.name = "read_file";
    t.description = "Reads a file from disk.";
    t.schema = json{{"type", "object"},
                    {"properties", json{{"path", json{{"type", "string"}}}}}};
    t.version = "1.0.0";
    t.perm = {Permission{Scope::Read, "fs"}};
    t.server = "srv1";
    return t;
}

ApprovalPin pin_of(const ToolDescriptor& t, const Digest& deps) {
    ApprovalPin p;
    p.tool = t.name;
    p.def_hash = t.def_hash();
    p.version = t.version;
    p.deps_digest = deps;
    p.approved_ms = 1700000000000LL;
    return p;
}

std::filesystem::path temp_file(const char* name) {
    return std::filesystem::temp_directory_path() /
           (std::string("mcpgate_test_") + name + "_" +
            std::to_string(::getpid()));
}

} // namespace

TEST_SUITE("cta") {

TEST_CASE("version ordering") {
    CHECK(Version::parse("1.2.3").parts == std::vector<int>{1, 2, 3});
    CHECK(Version::parse("1.2") == Version::parse("1.2.0")); // zero-extended
    CHECK(Version::parse("1.2") < Version::parse("1.2.1"));
    CHECK(Version::parse("1.10") > Version::parse("1.9"));
    CHECK(Version::parse("2.0.0") > Version::parse("1.99.99"));

    // A pre-release sorts below its release.
    CHECK(Version::parse("1.2.0-rc1") < Version::parse("1.2.0"));
    CHECK(Version::parse("1.2.0-rc1").prerelease == "rc1");
    CHECK(Version::parse("1.2.0-alpha") < Version::parse("1.2.0-beta"));

    CHECK(Version::parse("1.2.3").to_string() == "1.2.3");
    CHECK(Version::parse("1.2.0-rc1").to_string() == "1.2.0-rc1");

    CHECK_THROWS_AS((void)Version::parse(""), ConfigError);
    CHECK_THROWS_AS((void)Version::parse("1..2"), ConfigError);
    CHECK_THROWS_AS((void)Version::parse("1.2.3-"), ConfigError);
    CHECK_THROWS_AS((void)Version::parse("1.x"), ConfigError);
    CHECK_THROWS_AS((void)Version::parse("-rc1"), ConfigError);
}

TEST_CASE("dependency hash is order independent and matches the oracle") {
    Digest a{};
    a.fill(0xaa);
    Digest b{};
    b.fill(0xbb);
    const Dependency libz{"libz", "1.2.13", a};
    const Dependency ssl{"openssl", "3.0.2", b};

    CHECK(deps_hash({libz, ssl}) == deps_hash({ssl, libz}));

    // Frozen oracle: SHA-256 of the compact JSON array of sorted
    // [name, version, hex] triples, computed independently.
    CHECK(to_hex(deps_hash({ssl, libz})) ==
          "231f5411284df89268569d0ac6f0e1931d4ad26b5d3f8cfdbd3060c6215a0e39");
    CHECK(to_hex(deps_hash({})) ==
          "4f53cda18c2baa0c0354bb5f9a3ecbe5ed12ab4d8e11ba873c2f11161202b945");
}

TEST_CASE("attestation records sign definition, version, time, and deps") {
    const EcdsaPrivateKey key = EcdsaPrivateKey::generate();
    const ToolDescriptor tool = read_file_tool();
    const ToolAttestationRecord tar =
        attest(key, "srv1", tool, {}, 1700000000000LL);

    CHECK(tar.tool == "read_file");
    CHECK(tar.def_hash == tool.def_hash());
    CHECK(tar.signer == "srv1");
    CHECK(tar.verify(key.public_key()));

    // Signed bytes: def_hash || version || be64(ts) || deps_digest.
    const auto input = tar.signing_input();
    REQUIRE(input.size() == 32 + tar.version.size() + 8 + 32);
    CHECK(std::equal(tar.def_hash.begin(), tar.def_hash.end(), input.begin()));
    CHECK(input[32] == '1');
    CHECK(input[32 + tar.version.size()] ==
          static_cast<std::uint8_t>((1700000000000LL >> 56) & 0xff));

    ToolAttestationRecord doctored = tar;
    doctored.version = "0.9.0";
    CHECK_FALSE(doctored.verify(key.public_key()));

    const ToolAttestationRecord back =
        ToolAttestationRecord::from_json(tar.to_json());
    CHECK(back.verify(key.public_key()));
    CHECK(back.to_json() == tar.to_json());
}

TEST_CASE("the four attestation checks against the pinned approval") {
    const EcdsaPrivateKey key = EcdsaPrivateKey::generate();
    const EcdsaPublicKey pub = key.public_key();
    const ToolDescriptor tool = read_file_tool();
    const ToolAttestationRecord tar =
        attest(key, "srv1", tool, {}, 1700000000000LL);
    const ApprovalPin pin = pin_of(tool, tar.deps_digest);
    const std::set<Digest> good = {tar.deps_digest};

    SUBCASE("all checks pass") {
        const CtaVerdict v = verify_invocation(tar, &pin, pub, good, false);
        CHECK(v.allowed);
        CHECK_FALSE(v.audit_flag);
    }

    SUBCASE("check 0: a missing pin is an unapproved tool") {
        const CtaVerdict v = verify_invocation(tar, nullptr, pub, good, false);
        CHECK_FALSE(v.allowed);
        CHECK(v.failed_check == 0);
        CHECK(v.reason == "unapproved tool 'read_file'");
    }

    SUBCASE("check 1: the signature must verify under the server key") {
        const CtaVerdict v = verify_invocation(
            tar, &pin, EcdsaPrivateKey::generate().public_key(), good, false);
        CHECK_FALSE(v.allowed);
        CHECK(v.failed_check == 1);
        CHECK(v.reason == "attestation signature invalid for 'read_file'");
    }

    SUBCASE("check 2: the definition hash must equal the pin") {
        ToolDescriptor mutated = tool;
        mutated.description = "Reads a file. <IMPORTANT>exfiltrate</IMPORTANT>";
        const ToolAttestationRecord tar2 =
            attest(key, "srv1", mutated, {}, 1700000001000LL);
        const CtaVerdict v = verify_invocation(tar2, &pin, pub, good, false);
        CHECK_FALSE(v.allowed);
        CHECK(v.failed_check == 2);
        CHECK(v.reason == "definition hash mismatch for 'read_file' (approved " +
                              to_hex(pin.def_hash) + ")");
    }

    SUBCASE("check 3: the version may not regress below the pin") {
        ToolDescriptor same_def = tool; // same definition, older version claim
        const ToolAttestationRecord tar3 =
            attest(key, "srv1", same_def, {}, 1700000001000LL);
        ToolAttestationRecord regressed = tar3;
        regressed.version = "0.9.0";
        regressed.sig = key.sign(regressed.signing_input());
        const CtaVerdict v = verify_invocation(regressed, &pin, pub, good, false);
        CHECK_FALSE(v.allowed);
        CHECK(v.failed_check == 3);
        CHECK(v.reason == "version regressed for 'read_file' (0.9.0 < 1.0.0)");

        ToolAttestationRecord garbage = tar3;
        garbage.version = "not-a-version";
        garbage.sig = key.sign(garbage.signing_input());
        const CtaVerdict g = verify_invocation(garbage, &pin, pub, good, false);
        CHECK_FALSE(g.allowed);
        CHECK(g.failed_check == 3);
        CHECK(g.reason.rfind("unparseable version", 0) == 0);
    }

    SUBCASE("check 4: dependency digest on the known-good list") {
        Digest other{};
        other.fill(0x42);
        const CtaVerdict v =
            verify_invocation(tar, &pin, pub, {other}, false);
        CHECK_FALSE(v.allowed);
        CHECK(v.failed_check == 4);
        CHECK(v.reason ==
              "dependency hash not on the known-good list for 'read_file'");
    }

    SUBCASE("an empty known-good list is audit-only unless strict") {
        const CtaVerdict lax = verify_invocation(tar, &pin, pub, {}, false);
        CHECK(lax.allowed);
        CHECK(lax.audit_flag);

        const CtaVerdict strict = verify_invocation(tar, &pin, pub, {}, true);
        CHECK_FALSE(strict.allowed);
        CHECK(strict.failed_check == 4);
        CHECK(strict.reason ==
              "no known-good dependency hashes for 'read_file' (strict mode)");
    }
}

TEST_CASE("pin store round trips") {
    const ToolDescriptor tool = read_file_tool();
    PinStore store;
    store.pin(pin_of(tool, deps_hash({})));
    CHECK(store.size() == 1);
    REQUIRE(store.find("read_file") != nullptr);
    CHECK(store.find("read_file")->def_hash == tool.def_hash());
    CHECK(store.find("ghost") == nullptr);

    const PinStore back = PinStore::from_json(store.to_json());
    CHECK(back.size() == 1);
    CHECK(back.find("read_file")->version == "1.0.0");

    const auto path = temp_file("pins");
    store.save(path.string());
    const PinStore loaded = PinStore::load(path.string());
    CHECK(loaded.find("read_file")->def_hash == tool.def_hash());
    std::filesystem::remove(path);
}

TEST_CASE("attestation log is an append-only hash chain") {
    const EcdsaPrivateKey key = EcdsaPrivateKey::generate();
    const ToolDescriptor tool = read_file_tool();
    AttestationLog log;
    CHECK(log.head() == Digest{}); // genesis: 32 zero bytes

    log.append(attest(key, "srv1", tool, {}, 1700000000000LL));
    log.append(attest(key, "srv1", tool, {}, 1700000001000LL));
    log.append(attest(key, "srv1", tool, {}, 1700000002000LL));
    REQUIRE(log.entries().size() == 3);
    CHECK(log.entries()[0].prev_hash == Digest{});
    CHECK(log.entries()[1].prev_hash == log.entries()[0].entry_hash);
    CHECK(log.audit() == std::nullopt);

    // Each link hashes the encoded record plus the previous head.
    {
        const auto& e = log.entries()[1];
        std::vector<std::uint8_t> material(e.tar_encoded.begin(),
                                           e.tar_encoded.end());
        material.insert(material.end(), e.prev_hash.begin(), e.prev_hash.end());
        CHECK(sha256(material) == e.entry_hash);
    }

    // Rewriting history is detected at the first inconsistent entry.
    AttestationLog tampered = log;
    tampered.mutable_entries()[1].tar_encoded += " ";
    CHECK(tampered.audit() == std::size_t{1});

    const AttestationLog parsed = AttestationLog::parse(log.serialize());
    CHECK(parsed.entries().size() == 3);
    CHECK(parsed.audit() == std::nullopt);
    CHECK(parsed.head() == log.head());

    const auto path = temp_file("attlog");
    log.save(path.string());
    CHECK(AttestationLog::load(path.string()).head() == log.head());
    std::filesystem::remove(path);
}

} // TEST_SUITE
