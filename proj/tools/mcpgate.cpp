// Command-line entry points for the gateway: an HTTP serving mode, offline
// trace verification, the scripted attack/benign campaign runner, threat
// coverage reporting, a verifier micro-benchmark, and key generation.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>

#include "mcpgate/config.hpp"
#include "mcpgate/crypto.hpp"
#include "mcpgate/gateway.hpp"
#include "mcpgate/harness/campaign.hpp"
#include "mcpgate/harness/registry.hpp"
#include "mcpgate/harness/scripted_server.hpp"
#include "mcpgate/harness/synthetic.hpp"
#include "mcpgate/verifier.hpp"

namespace {

using namespace mcpgate;
using namespace mcpgate::harness;

// ---------------------------------------------------------------- shared

json outcome_to_json(const Gateway::Outcome& o) {
    json j;
    switch (o.status) {
    case Gateway::Outcome::Status::Delivered: j["status"] = "delivered"; break;
    case Gateway::Outcome::Status::Pending: j["status"] = "pending"; break;
    case Gateway::Outcome::Status::NoResponse: j["status"] = "no-response"; break;
    }
    if (o.status != Gateway::Outcome::Status::NoResponse)
        j["response"] = o.response.to_json();
    if (!o.consent_id.empty()) j["consent_id"] = o.consent_id;
    if (o.blocked()) {
        j["blocked_by"] = o.blocked_by;
        j["reason"] = o.reason;
    }
    return j;
}

int write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::cerr << "cannot write " << path << "\n";
        return 1;
    }
    out << body;
    return 0;
}

// ------------------------------------------------------------- verify cmd

int cmd_verify(const std::string& trace_path, const std::string& config_path,
               const std::string& pins_path, const std::string& report_path) {
    const GatewayConfig config = GatewayConfig::load(config_path);
    const Lattice lattice = lattice_of(config);
    const SystemModel model = model_from_config(config, lattice);
    PinStore pins;
    if (!pins_path.empty())
        pins = PinStore::load(pins_path);
    else if (!config.pins_path.empty() &&
             std::filesystem::exists(config.pins_path))
        pins = PinStore::load(config.pins_path);

    const Trace trace = Trace::load(trace_path);
    const auto reports = verify_all(trace, pins, model, lattice, config.domains,
                                    config.declassification, config.flow_policy);
    const json out = reports_to_json(reports);
    if (!report_path.empty() && write_file(report_path, out.dump(2) + "\n") != 0)
        return 1;

    bool all_hold = true;
    for (const auto& r : reports) {
        std::cout << (r.holds ? "HOLDS    " : "VIOLATED ") << r.property << " ("
                  << r.events_checked << " events, " << r.violation_count
                  << " violations)";
        if (r.first)
            std::cout << " first at seq " << r.first->seq << ": "
                      << r.first->witness;
        std::cout << "\n";
        all_hold = all_hold && r.holds;
    }
    return all_hold ? 0 : 2;
}

// ----------------------------------------------------------- campaign cmd

void save_run_trace(const RunResult& run, const std::string& dir) {
    std::filesystem::create_directories(dir);
    run.trace.save(dir + "/" + run.scenario_id + ".jsonl");
}

int run_campaign(const std::string& attacks_dir, const std::string& benign_dir,
                 const LayerToggles& layers, bool duality, bool verify,
                 const std::string& out_csv, const std::string& trace_dir) {
    std::vector<RunResult> results;
    int failures = 0;

    const auto note = [&](const RunResult& r, const char* mode) {
        std::cout << "[" << mode << "] " << r.scenario_id;
        if (r.is_attack)
            std::cout << (r.attack_succeeded ? "  attack SUCCEEDED"
                                             : "  attack stopped");
        if (r.blocked)
            std::cout << "  blocked by " << r.blocking_layer << " (" << r.reason
                      << ")";
        std::cout << "\n";
    };

    if (!attacks_dir.empty()) {
        for (const Scenario& s : load_scenarios(attacks_dir)) {
            RunResult enforced = run_scenario(s, layers);
            note(enforced, "enforced");
            if (enforced.attack_succeeded) ++failures;
            if (!trace_dir.empty()) save_run_trace(enforced, trace_dir);
            if (verify)
                for (const auto& r : verify_run(enforced))
                    if (!r.holds) {
                        std::cout << "    property " << r.property
                                  << " VIOLATED on enforced trace\n";
                        ++failures;
                    }
            if (duality && !s.expected_blocked_by.empty()) {
                LayerToggles dual = layers;
                if (s.expected_blocked_by == "cac") dual.cac = false;
                else if (s.expected_blocked_by == "cta") dual.cta = false;
                else if (s.expected_blocked_by == "ift") dual.ift = false;
                else if (s.expected_blocked_by == "rpe") dual.rpe = false;
                else if (s.expected_blocked_by == "protocol") dual.protocol = false;
                RunResult open_run = run_scenario(s, dual);
                note(open_run, "dual    ");
                if (s.attack && !open_run.attack_succeeded && !s.partial)
                    ++failures;
                results.push_back(open_run);
            }
            results.push_back(std::move(enforced));
        }
    }
    if (!benign_dir.empty()) {
        for (const Scenario& s : load_scenarios(benign_dir)) {
            RunResult r = run_scenario(s, layers);
            note(r, "benign  ");
            if (r.blocked) ++failures;
            if (!trace_dir.empty()) save_run_trace(r, trace_dir);
            results.push_back(std::move(r));
        }
    }

    if (!out_csv.empty() && write_file(out_csv, results_csv(results)) != 0)
        return 1;
    std::cout << results.size() << " runs, " << failures << " failures\n";
    return failures == 0 ? 0 : 2;
}

// --------------------------------------------------------------- demo cmd

int cmd_demo(const std::string& scenario_path, const LayerToggles& layers,
             bool verbose) {
    const Scenario scenario = Scenario::load(scenario_path);
    const RunResult run = run_scenario(scenario, layers);

    std::cout << "scenario " << run.scenario_id << "\n";
    if (run.is_attack)
        std::cout << "attack " << (run.attack_succeeded ? "SUCCEEDED" : "stopped")
                  << "\n";
    if (run.blocked)
        std::cout << "blocked by " << run.blocking_layer << ": " << run.reason
                  << "\n";
    if (verbose) {
        std::cout << "--- trace ---\n" << run.trace.serialize();
        std::cout << "--- verification ---\n";
        for (const auto& r : verify_run(run))
            std::cout << (r.holds ? "HOLDS    " : "VIOLATED ") << r.property
                      << "\n";
    }
    return run.is_attack && run.attack_succeeded ? 2 : 0;
}

// -------------------------------------------------------------- bench cmd

int cmd_bench(std::size_t events, std::size_t tools, std::size_t reps) {
    std::mt19937_64 rng(42);
    SyntheticOptions opt;
    opt.tools = tools;
    SyntheticWorld world = make_world(rng, opt);
    EventMixOptions mix;
    mix.violation_rate = 0.01;
    const std::vector<TraceEvent> evs = make_events(world, rng, events, mix);
    const std::span<const TraceEvent> span(evs);

    double best_ms = 0.0;
    for (std::size_t i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        auto a = check_tool_integrity(span, world.pins);
        auto b = check_data_confinement(span, world.lattice, world.model.domains,
                                        world.declass);
        auto c = check_privilege_boundedness(span, world.model);
        auto d = check_context_isolation(span, world.flow, world.model.domains);
        const double ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
        if (i == 0 || ms < best_ms) best_ms = ms;
        if (i == 0)
            std::cout << "violations: tool-integrity " << a.violation_count
                      << ", data-confinement " << b.violation_count
                      << ", privilege-boundedness " << c.violation_count
                      << ", context-isolation " << d.violation_count << "\n";
    }
    std::cout << events << " events, " << tools << " tools: " << best_ms
              << " ms (best of " << reps << "), "
              << best_ms * 1000.0 / static_cast<double>(events)
              << " us/event\n";
    return 0;
}

// -------------------------------------------------------------- serve cmd

class HttpUpstream : public Upstream {
public:
    HttpUpstream(std::string id, std::string address)
        : id_(std::move(id)), address_(std::move(address)) {}

    std::string id() const override { return id_; }

    std::optional<SignedEnvelope> handle(const SignedEnvelope& request) override {
        httplib::Client client(address_);
        client.set_read_timeout(30, 0);
        auto res =
            client.Post("/envelope", request.to_json().dump(), "application/json");
        if (!res || res->status == 204 || res->body.empty()) return std::nullopt;
        return SignedEnvelope::from_json(json::parse(res->body));
    }

private:
    std::string id_;
    std::string address_;
};

int cmd_serve(const std::string& config_path, std::string bind, int port) {
    GatewayConfig config = GatewayConfig::load(config_path);
    if (bind.empty()) bind = config.control_bind;
    if (port == 0) port = config.control_port != 0 ? config.control_port : 8088;

    auto clock = std::make_shared<SystemClock>();
    Gateway gateway(config, clock);
    for (const auto& up : config.upstreams) {
        if (up.transport == "http") {
            gateway.register_upstream(
                std::make_shared<HttpUpstream>(up.server, up.address));
        } else {
            std::cerr << "upstream '" << up.server << "' uses transport '"
                      << up.transport << "'; only 'http' works in serve mode\n";
            return 1;
        }
    }

    std::mutex gate_mutex;
    httplib::Server http;

    http.Post(R"(/rpc/([^/]+))", [&](const httplib::Request& req,
                                     httplib::Response& res) {
        try {
            const McpMessage msg = parse_message(req.body);
            std::lock_guard<std::mutex> lock(gate_mutex);
            const auto outcome = gateway.client_request(req.matches[1], msg);
            res.set_content(outcome_to_json(outcome).dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
        }
    });
    http.Get("/consents", [&](const httplib::Request&, httplib::Response& res) {
        std::lock_guard<std::mutex> lock(gate_mutex);
        json out = json::array();
        for (const auto& c : gateway.pending_consents())
            out.push_back(json{{"id", c.id},
                               {"tool", c.tool},
                               {"summary", c.summary},
                               {"created_ms", c.created_ms}});
        res.set_content(out.dump(), "application/json");
    });
    http.Post(R"(/consents/([^/]+))", [&](const httplib::Request& req,
                                          httplib::Response& res) {
        try {
            const bool approve = json::parse(req.body).value("approve", false);
            std::lock_guard<std::mutex> lock(gate_mutex);
            const auto answer = gateway.answer_consent(req.matches[1], approve);
            json out{{"ok", answer.ok}, {"approved", answer.approved}};
            if (!answer.error.empty()) out["error"] = answer.error;
            if (answer.released)
                out["released"] = outcome_to_json(*answer.released);
            res.set_content(out.dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
        }
    });
    http.Post("/sweep", [&](const httplib::Request&, httplib::Response& res) {
        std::lock_guard<std::mutex> lock(gate_mutex);
        json out = json::array();
        for (auto& [id, outcome] : gateway.sweep_consents())
            out.push_back(json{{"id", id}, {"outcome", outcome_to_json(outcome)}});
        res.set_content(out.dump(), "application/json");
    });
    http.Get("/audit", [&](const httplib::Request&, httplib::Response& res) {
        std::lock_guard<std::mutex> lock(gate_mutex);
        json out = json::array();
        for (const auto& e : gateway.audit()) out.push_back(e.to_json());
        res.set_content(out.dump(), "application/json");
    });
    http.Post("/flush", [&](const httplib::Request&, httplib::Response& res) {
        std::lock_guard<std::mutex> lock(gate_mutex);
        gateway.flush();
        res.set_content("{\"ok\":true}", "application/json");
    });
    http.Get("/health", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"ok\":true}", "application/json");
    });

    std::cout << "gateway listening on " << bind << ":" << port << "\n";
    if (!http.listen(bind, port)) {
        std::cerr << "cannot bind " << bind << ":" << port << "\n";
        return 1;
    }
    return 0;
}

int cmd_serve_upstream(const std::string& scenario_path,
                       const std::string& server_id, const std::string& bind,
                       int port) {
    const Scenario scenario = Scenario::load(scenario_path);
    const ServerSpec* spec = nullptr;
    for (const auto& s : scenario.servers)
        if (server_id.empty() || s.id == server_id) {
            spec = &s;
            break;
        }
    if (spec == nullptr) {
        std::cerr << "scenario has no server '" << server_id << "'\n";
        return 1;
    }
    auto clock = std::make_shared<SystemClock>();
    ScriptedServer server(*spec, clock);
    std::cout << "serving '" << server.id() << "'; public key:\n"
              << server.public_key_pem();

    std::mutex mutex;
    httplib::Server http;
    http.Post("/envelope", [&](const httplib::Request& req,
                               httplib::Response& res) {
        try {
            const auto env = SignedEnvelope::from_json(json::parse(req.body));
            std::lock_guard<std::mutex> lock(mutex);
            const auto reply = server.handle(env);
            if (!reply) {
                res.status = 204;
                return;
            }
            res.set_content(reply->to_json().dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
        }
    });
    std::cout << "upstream listening on " << bind << ":" << port << "\n";
    if (!http.listen(bind, port)) {
        std::cerr << "cannot bind " << bind << ":" << port << "\n";
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"MCP security gateway: capability, attestation, flow, and "
                 "policy enforcement with verifiable traces"};
    app.require_subcommand(1);

    // coverage
    auto* coverage = app.add_subcommand(
        "coverage", "Print the threat registry coverage table");
    bool coverage_csv = false;
    coverage->add_flag("--csv", coverage_csv,
                       "Print the raw registry as CSV instead");

    // campaign
    auto* campaign = app.add_subcommand(
        "campaign", "Run scripted attack/benign scenarios through the gateway");
    std::string attacks_dir;
    std::string benign_dir;
    std::string layers_csv = "all";
    std::string out_csv;
    std::string trace_dir;
    bool duality = false;
    bool verify_traces = false;
    campaign->add_option("--attacks", attacks_dir, "Attack scenario directory");
    campaign->add_option("--benign", benign_dir, "Benign scenario directory");
    campaign->add_option("--layers", layers_csv,
                         "Enabled layers: all, none, or csv of "
                         "cac,cta,ift,rpe,protocol");
    campaign->add_flag("--duality", duality,
                       "Re-run each attack with its expected layer disabled");
    campaign->add_flag("--verify", verify_traces,
                       "Run the offline property checks on every trace");
    campaign->add_option("--out", out_csv, "Write results CSV here");
    campaign->add_option("--trace-dir", trace_dir, "Persist traces here");

    // demo
    auto* demo =
        app.add_subcommand("demo", "Run one scenario file and print the outcome");
    std::string scenario_path;
    std::string demo_layers = "all";
    bool demo_verbose = false;
    demo->add_option("--scenario", scenario_path, "Scenario JSON file")
        ->required();
    demo->add_option("--layers", demo_layers, "Enabled layers");
    demo->add_flag("--verbose", demo_verbose, "Dump trace and verification");

    // verify
    auto* verify = app.add_subcommand(
        "verify", "Check the security properties of a recorded trace");
    std::string trace_path;
    std::string config_path;
    std::string pins_path;
    std::string report_path;
    verify->add_option("--trace", trace_path, "Trace JSON-lines file")
        ->required();
    verify->add_option("--config", config_path, "Gateway config JSON")
        ->required();
    verify->add_option("--pins", pins_path, "Approval pin store JSON");
    verify->add_option("--report", report_path, "Write the JSON report here");

    // serve
    auto* serve =
        app.add_subcommand("serve", "Run the gateway as an HTTP service");
    std::string serve_config;
    std::string serve_bind;
    int serve_port = 0;
    serve->add_option("--config", serve_config, "Gateway config JSON")
        ->required();
    serve->add_option("--bind", serve_bind, "Bind address");
    serve->add_option("--port", serve_port, "Listen port");

    // serve-upstream
    auto* upstream = app.add_subcommand(
        "serve-upstream", "Host a scripted scenario server over HTTP");
    std::string up_scenario;
    std::string up_server;
    std::string up_bind = "127.0.0.1";
    int up_port = 8090;
    upstream->add_option("--scenario", up_scenario, "Scenario JSON file")
        ->required();
    upstream->add_option("--server", up_server,
                         "Server id within the scenario (default: first)");
    upstream->add_option("--bind", up_bind, "Bind address");
    upstream->add_option("--port", up_port, "Listen port");

    // bench
    auto* bench = app.add_subcommand(
        "bench", "Time the offline property checks on a synthetic trace");
    std::size_t bench_events = 100000;
    std::size_t bench_tools = 8;
    std::size_t bench_reps = 3;
    bench->add_option("--events", bench_events, "Trace length");
    bench->add_option("--tools", bench_tools, "Tool count in the model");
    bench->add_option("--reps", bench_reps, "Repetitions (best is reported)");

    // keygen
    auto* keygen =
        app.add_subcommand("keygen", "Generate an ECDSA P-256 signing key");
    std::string key_out = "gateway-key.pem";
    std::string pub_out;
    keygen->add_option("--out", key_out, "Private key PEM path");
    keygen->add_option("--pub", pub_out, "Public key PEM path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (coverage->parsed()) {
            if (coverage_csv)
                std::cout << registry_csv();
            else
                std::cout << compute_coverage().render();
            return 0;
        }
        if (campaign->parsed())
            return run_campaign(attacks_dir, benign_dir,
                                LayerToggles::parse(layers_csv), duality,
                                verify_traces, out_csv, trace_dir);
        if (demo->parsed())
            return cmd_demo(scenario_path, LayerToggles::parse(demo_layers),
                            demo_verbose);
        if (verify->parsed())
            return cmd_verify(trace_path, config_path, pins_path, report_path);
        if (serve->parsed()) return cmd_serve(serve_config, serve_bind, serve_port);
        if (upstream->parsed())
            return cmd_serve_upstream(up_scenario, up_server, up_bind, up_port);
        if (bench->parsed()) return cmd_bench(bench_events, bench_tools, bench_reps);
        if (keygen->parsed()) {
            const EcdsaPrivateKey key = EcdsaPrivateKey::generate();
            if (write_file(key_out, key.to_pem()) != 0) return 1;
            if (!pub_out.empty() &&
                write_file(pub_out, key.public_key().to_pem()) != 0)
                return 1;
            std::cout << "wrote " << key_out;
            if (!pub_out.empty()) std::cout << " and " << pub_out;
            std::cout << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
