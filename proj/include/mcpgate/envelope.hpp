#ifndef MCPGATE_ENVELOPE_HPP
#define MCPGATE_ENVELOPE_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcpgate/crypto.hpp"
#include "mcpgate/protocol.hpp"
#include "mcpgate/util.hpp"

namespace mcpgate {

/// Message wrapper carrying a signature over
/// SHA-256(payload || nonce || big-endian-8-byte ts).
struct SignedEnvelope {
    std::vector<std::uint8_t> payload;
    Nonce nonce{};
    std::int64_t ts_ms = 0;
    std::string signer;
    std::vector<std::uint8_t> signature; // DER

    nlohmann::json to_json() const;
    static SignedEnvelope from_json(const nlohmann::json& j);

    /// Bytes the signature covers.
    std::vector<std::uint8_t> signing_input() const;
};

enum class OpenError { None, UnknownSigner, Tamper, Replay, Stale };

std::string_view open_error_name(OpenError e);

struct OpenResult {
    OpenError error = OpenError::None;
    std::vector<std::uint8_t> payload; // valid when error == None
    bool ok() const { return error == OpenError::None; }
};

inline constexpr std::int64_t kClockSkewMs = 120 * 1000;

SignedEnvelope seal(std::span<const std::uint8_t> payload,
                    const std::string& signer, const EcdsaPrivateKey& key,
                    std::int64_t now_ms);
SignedEnvelope seal(const McpMessage& msg, const std::string& signer,
                    const EcdsaPrivateKey& key, std::int64_t now_ms);

/// Verifies signature, timestamp window (±kClockSkewMs) and nonce
/// freshness; records the nonce on success.
OpenResult open(const SignedEnvelope& env, const Keyring& keys,
                NonceCache& cache, std::int64_t now_ms);

} // namespace mcpgate

#endif
