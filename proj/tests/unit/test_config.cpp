#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "mcpgate/config.hpp"
#include "mcpgate/crypto.hpp"

using namespace mcpgate;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mcpgate-config-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int n = 0;
        return n;
    }
};

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
}

} // namespace

TEST_SUITE("config") {

TEST_CASE("layer toggles parse comma lists with none and all shortcuts") {
    SUBCASE("all and the empty string enable everything") {
        for (const auto csv : {"all", ""}) {
            const LayerToggles t = LayerToggles::parse(csv);
            CHECK(t.cac);
            CHECK(t.cta);
            CHECK(t.ift);
            CHECK(t.rpe);
            CHECK(t.protocol);
        }
    }

    SUBCASE("none disables everything") {
        const LayerToggles t = LayerToggles::parse("none");
        CHECK_FALSE(t.any());
    }

    SUBCASE("a list enables exactly the named layers") {
        const LayerToggles t = LayerToggles::parse("cac,ift");
        CHECK(t.cac);
        CHECK(t.ift);
        CHECK_FALSE(t.cta);
        CHECK_FALSE(t.rpe);
        CHECK_FALSE(t.protocol);
        CHECK(t.any());

        const LayerToggles p = LayerToggles::parse("protocol");
        CHECK(p.protocol);
        CHECK_FALSE(p.cac);
    }

    SUBCASE("unknown names are configuration errors") {
        CHECK_THROWS_WITH_AS(LayerToggles::parse("cac,xyz"),
                             "unknown layer 'xyz'", ConfigError);
    }

    SUBCASE("stray commas are tolerated") {
        const LayerToggles t = LayerToggles::parse("cac,");
        CHECK(t.cac);
        CHECK_FALSE(t.cta);
    }

    SUBCASE("toggles round trip through JSON") {
        LayerToggles t = LayerToggles::none();
        t.rpe = true;
        const LayerToggles back = LayerToggles::from_json(t.to_json());
        CHECK(back.rpe);
        CHECK_FALSE(back.cac);
        CHECK_FALSE(back.protocol);
    }
}

TEST_CASE("policy knobs default sensibly and round trip") {
    const PolicyConfig def = PolicyConfig::from_json(json::object());
    CHECK(def.sanitizer_enabled);
    CHECK(def.rate_limit_enabled);
    CHECK(def.rate_threshold == 30);
    CHECK(def.rate_window_ms == 1000);
    CHECK(def.consent_enabled);
    CHECK(def.high_risk_tools.empty());
    CHECK(def.consent_timeout_ms == 60000);
    CHECK_FALSE(def.anomaly_enabled);
    CHECK(def.anomaly_threshold == doctest::Approx(0.05));

    PolicyConfig custom;
    custom.sanitizer_enabled = false;
    custom.sanitizer_regexes = {"curl +http"};
    custom.rate_threshold = 5;
    custom.rate_window_ms = 250;
    custom.high_risk_tools = {"send_email", "delete_file"};
    custom.consent_timeout_ms = 1234;
    custom.anomaly_enabled = true;
    custom.anomaly_profile_path = "/tmp/profile.json";
    custom.anomaly_threshold = 0.2;

    const PolicyConfig back = PolicyConfig::from_json(custom.to_json());
    CHECK_FALSE(back.sanitizer_enabled);
    CHECK(back.sanitizer_regexes == custom.sanitizer_regexes);
    CHECK(back.rate_threshold == 5);
    CHECK(back.rate_window_ms == 250);
    CHECK(back.high_risk_tools == custom.high_risk_tools);
    CHECK(back.consent_timeout_ms == 1234);
    CHECK(back.anomaly_enabled);
    CHECK(back.anomaly_profile_path == "/tmp/profile.json");
    CHECK(back.anomaly_threshold == doctest::Approx(0.2));
}

TEST_CASE("gateway config round trips and its digest tracks content") {
    GatewayConfig c;
    c.agent = "agent";
    c.issuer_id = "authority";
    c.domains.push_back(TrustDomain{"d1", {"srv1"}, {}, "", "internal"});
    UpstreamConfig up;
    up.server = "srv1";
    up.transport = "inproc";
    up.domain = "d1";
    c.upstreams.push_back(up);
    c.flow_policy.permit("d1", "d2");
    c.strict_mode = true;
    c.span_threshold = 24;
    c.layers = LayerToggles::parse("cac,cta");

    const GatewayConfig back = GatewayConfig::from_json(c.to_json());
    CHECK(back.agent == "agent");
    REQUIRE(back.domains.size() == 1);
    CHECK(back.domains[0].clearance == "internal");
    REQUIRE(back.upstreams.size() == 1);
    CHECK(back.upstreams[0].server == "srv1");
    CHECK(back.flow_policy.permits("d1", "d2"));
    CHECK(back.strict_mode);
    CHECK(back.span_threshold == 24);
    CHECK(back.layers.cac);
    CHECK_FALSE(back.layers.ift);

    CHECK(back.digest() == c.digest());
    GatewayConfig changed = c;
    changed.strict_mode = false;
    CHECK(changed.digest() != c.digest());
}

TEST_CASE("loading resolves capability files relative to the config") {
    TempDir dir;
    const EcdsaPrivateKey authority = EcdsaPrivateKey::generate();

    ToolDescriptor tool;
    tool.name = "read_file";
    tool.server = "srv1";
    tool.schema = json{{"type", "object"},
                       {"properties", json{{"path", json{{"type", "string"}}}}}};
    Capability cap =
        issue(authority, "authority", "agent", tool,
              {{"path", ParamConstraint::with_prefix("/safe/")}}, Scope::Read,
              1700003600000);

    fs::create_directories(dir.path / "caps");
    write_file(dir.path / "caps" / "read.json", cap.to_json().dump(2));
    write_file(dir.path / "caps" / "ignored.txt", "not a capability");

    json config_json = GatewayConfig{}.to_json();
    config_json["capabilities_dir"] = "caps";
    write_file(dir.path / "gateway.json", config_json.dump(2));

    const GatewayConfig loaded =
        GatewayConfig::load((dir.path / "gateway.json").string());
    REQUIRE(loaded.capabilities.size() == 1);
    CHECK(loaded.capabilities[0].tool == "read_file");
    CHECK(loaded.capabilities[0].holder == "agent");
    Keyring issuers;
    issuers.add("authority", authority.public_key());
    CHECK(loaded.capabilities[0].verify(issuers));

    SUBCASE("a missing config file is reported") {
        CHECK_THROWS_AS(GatewayConfig::load((dir.path / "ghost.json").string()),
                        ConfigError);
    }

    SUBCASE("unparseable config content is reported with the path") {
        write_file(dir.path / "broken.json", "{ not json");
        try {
            GatewayConfig::load((dir.path / "broken.json").string());
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("config parse error in") == 0);
        }
    }
}

TEST_CASE("upstream public keys load inline or from a file") {
    const EcdsaPrivateKey key = EcdsaPrivateKey::generate();
    const std::string pem = key.public_key().to_pem();

    SUBCASE("inline pem wins") {
        const UpstreamConfig u = UpstreamConfig::from_json(
            json{{"server", "srv1"}, {"domain", "d1"}, {"public_key_pem", pem}});
        CHECK(u.public_key_pem == pem);
        CHECK(u.transport == "inproc");
    }

    SUBCASE("a key file is read in full") {
        TempDir dir;
        write_file(dir.path / "srv1.pem", pem);
        const UpstreamConfig u = UpstreamConfig::from_json(
            json{{"server", "srv1"},
                 {"domain", "d1"},
                 {"public_key_file", (dir.path / "srv1.pem").string()}});
        CHECK(u.public_key_pem == pem);
    }

    SUBCASE("a missing key file is a configuration error") {
        CHECK_THROWS_AS(
            UpstreamConfig::from_json(json{{"server", "srv1"},
                                           {"domain", "d1"},
                                           {"public_key_file", "/no/such.pem"}}),
            ConfigError);
    }
}

TEST_CASE("the static model mirrors agents, servers, domains, and labels") {
    GatewayConfig c;
    c.agent = "agent";
    UpstreamConfig u1, u2;
    u1.server = "srv1";
    u1.domain = "d1";
    u2.server = "srv2";
    u2.domain = "d2";
    c.upstreams = {u1, u2};
    c.domains = {TrustDomain{"d1", {"srv1"}, {}, "", "internal"},
                 TrustDomain{"d2", {"srv2"}, {}, "", "public"}};
    c.labels = {{"srv1", "confidential"}};

    const Lattice lattice = lattice_of(c);
    CHECK(lattice.top() == "restricted"); // no declaration: default chain

    SUBCASE("an empty default label falls back to the lattice top") {
        const SystemModel model = model_from_config(c, lattice);
        CHECK(model.agents == std::set<std::string>{"agent"});
        CHECK(model.servers == std::set<std::string>{"srv1", "srv2"});
        REQUIRE(model.domains.size() == 2);
        CHECK(model.labeling.label_of("srv1") == "confidential");
        CHECK(model.labeling.label_of("srv2") == "restricted");
    }

    SUBCASE("an explicit default label applies to unlisted subjects") {
        c.default_label = "public";
        const SystemModel model = model_from_config(c, lattice);
        CHECK(model.labeling.label_of("srv1") == "confidential");
        CHECK(model.labeling.label_of("srv2") == "public");
    }

    SUBCASE("a declared lattice replaces the default chain") {
        c.lattice_decl.labels = {"low", "high"};
        c.lattice_decl.order = {{"low", "high"}};
        c.lattice_decl.bottom = "low";
        c.lattice_decl.top = "high";
        const Lattice custom = lattice_of(c);
        CHECK(custom.top() == "high");
        CHECK(custom.bottom() == "low");
    }
}

} // TEST_SUITE
