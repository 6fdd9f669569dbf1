#include "mcpgate/envelope.hpp"

#include <cstring>

namespace mcpgate {

std::string_view open_error_name(OpenError e) {
    switch (e) {
        case OpenError::None: return "none";
        case OpenError::UnknownSigner: return "unknown-signer";
        case OpenError::Tamper: return "tamper";
        case OpenError::Replay: return "replay";
        case OpenError::Stale: return "stale";
    }
    return "none";
}

std::vector<std::uint8_t> SignedEnvelope::signing_input() const {
    std::vector<std::uint8_t> input;
    input.reserve(payload.size() + nonce.size() + 8);
    input.insert(input.end(), payload.begin(), payload.end());
    input.insert(input.end(), nonce.begin(), nonce.end());
    for (int shift = 56; shift >= 0; shift -= 8)
        input.push_back(static_cast<std::uint8_t>((ts_ms >> shift) & 0xff));
    return input;
}

nlohmann::json SignedEnvelope::to_json() const {
    return nlohmann::json{{"payload_b64", base64_encode(payload)},
                          {"nonce_hex", to_hex(nonce)},
                          {"ts_ms", ts_ms},
                          {"signer", signer},
                          {"sig_b64", base64_encode(signature)}};
}

SignedEnvelope SignedEnvelope::from_json(const nlohmann::json& j) {
    SignedEnvelope env;
    env.payload = base64_decode(j.at("payload_b64").get<std::string>());
    env.nonce = nonce_from_hex(j.at("nonce_hex").get<std::string>());
    env.ts_ms = j.at("ts_ms").get<std::int64_t>();
    env.signer = j.at("signer").get<std::string>();
    env.signature = base64_decode(j.at("sig_b64").get<std::string>());
    return env;
}

SignedEnvelope seal(std::span<const std::uint8_t> payload,
                    const std::string& signer, const EcdsaPrivateKey& key,
                    std::int64_t now_ms) {
    SignedEnvelope env;
    env.payload.assign(payload.begin(), payload.end());
    env.nonce = random_nonce();
    env.ts_ms = now_ms;
    env.signer = signer;
    env.signature = key.sign(env.signing_input());
    return env;
}

SignedEnvelope seal(const McpMessage& msg, const std::string& signer,
                    const EcdsaPrivateKey& key, std::int64_t now_ms) {
    std::string bytes = msg.serialize();
    return seal(std::span<const std::uint8_t>(
                    reinterpret_cast<const std::uint8_t*>(bytes.data()),
                    bytes.size()),
                signer, key, now_ms);
}

OpenResult open(const SignedEnvelope& env, const Keyring& keys,
                NonceCache& cache, std::int64_t now_ms) {
    OpenResult res;
    const EcdsaPublicKey* key = keys.find(env.signer);
    if (!key) {
        res.error = OpenError::UnknownSigner;
        return res;
    }
    if (!key->verify(env.signing_input(), env.signature)) {
        res.error = OpenError::Tamper;
        return res;
    }
    if (env.ts_ms < now_ms - kClockSkewMs || env.ts_ms > now_ms + kClockSkewMs) {
        res.error = OpenError::Stale;
        return res;
    }
    if (!cache.check_and_insert(env.nonce, env.ts_ms)) {
        res.error = OpenError::Replay;
        return res;
    }
    res.payload = env.payload;
    return res;
}

} // namespace mcpgate
