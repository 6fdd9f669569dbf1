#ifndef MCPGATE_HARNESS_SYNTHETIC_HPP
#define MCPGATE_HARNESS_SYNTHETIC_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "mcpgate/config.hpp"
#include "mcpgate/cta.hpp"
#include "mcpgate/ift.hpp"
#include "mcpgate/model.hpp"
#include "mcpgate/verifier.hpp"

namespace mcpgate::harness {

/// Self-contained random world for verifier benchmarks and differential
/// tests: a model with pinned tools spread over trust domains plus the
/// policy inputs the offline checks consume.
struct SyntheticWorld {
    SystemModel model;
    Lattice lattice = Lattice::default_chain();
    PinStore pins;
    FlowPolicy flow;
    std::vector<DeclassificationRule> declass;
    std::vector<std::string> tool_names;
    std::vector<std::string> server_names;
    std::vector<std::string> labels;
    /// Tool activated but never granted; exercising its permission is the
    /// canonical privilege violation.
    std::string ungranted_tool;
};

struct SyntheticOptions {
    std::size_t tools = 8;
    std::size_t domains = 3;
    std::size_t labels = 4;       // 1..4, prefix of the default chain
    double flow_pair_rate = 0.35; // chance an ordered domain pair is permitted
    double declass_rate = 0.25;   // chance the world carries one rule
};

SyntheticWorld make_world(std::mt19937_64& rng, const SyntheticOptions& opt);

struct EventMixOptions {
    double violation_rate = 0.0; // chance an event is built to break a property
    double knowledge_rate = 0.5; // chance a flow event introduces a datum
    double input_rate = 0.6;     // chance a flow event consumes known data
    double denied_rate = 0.02;   // events recorded with a deny verdict
};

/// Event vector without the digest chain; any prefix span is a valid input
/// for the span-based property checks. The first event is a discovery that
/// activates every tool and grants all permissions except the ungranted
/// tool's.
std::vector<TraceEvent> make_events(const SyntheticWorld& world,
                                    std::mt19937_64& rng, std::size_t count,
                                    const EventMixOptions& mix);

} // namespace mcpgate::harness

#endif
