#include "mcpgate/util.hpp"

#include <chrono>
#include <cstring>

#include <openssl/evp.h>

namespace mcpgate {

namespace {
constexpr char kHexDigits[] = "0123456789abcdef";

int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}
} // namespace

std::string to_hex(const std::uint8_t* data, std::size_t len) {
    std::string out;
    out.reserve(len * 2);
    for (std::size_t i = 0; i < len; ++i) {
        out.push_back(kHexDigits[data[i] >> 4]);
        out.push_back(kHexDigits[data[i] & 0x0f]);
    }
    return out;
}

std::string to_hex(const Digest& d) { return to_hex(d.data(), d.size()); }
std::string to_hex(const Nonce& n) { return to_hex(n.data(), n.size()); }

std::vector<std::uint8_t> from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) throw ConfigError("hex string has odd length");
    std::vector<std::uint8_t> out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = hex_nibble(hex[2 * i]);
        int lo = hex_nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw ConfigError("invalid hex digit");
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

Digest digest_from_hex(std::string_view hex) {
    auto bytes = from_hex(hex);
    if (bytes.size() != 32) throw ConfigError("digest must be 32 bytes");
    Digest d;
    std::memcpy(d.data(), bytes.data(), 32);
    return d;
}

Nonce nonce_from_hex(std::string_view hex) {
    auto bytes = from_hex(hex);
    if (bytes.size() != 16) throw ConfigError("nonce must be 16 bytes");
    Nonce n;
    std::memcpy(n.data(), bytes.data(), 16);
    return n;
}

std::string base64_encode(const std::uint8_t* data, std::size_t len) {
    std::string out;
    out.resize(4 * ((len + 2) / 3) + 1);
    int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data,
                            static_cast<int>(len));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::string base64_encode(const std::vector<std::uint8_t>& data) {
    return base64_encode(data.data(), data.size());
}

std::vector<std::uint8_t> base64_decode(std::string_view b64) {
    if (b64.empty()) return {};
    if (b64.size() % 4 != 0) throw ConfigError("base64 length not a multiple of 4");
    std::vector<std::uint8_t> out(3 * (b64.size() / 4));
    int n = EVP_DecodeBlock(out.data(),
                            reinterpret_cast<const unsigned char*>(b64.data()),
                            static_cast<int>(b64.size()));
    if (n < 0) throw ConfigError("invalid base64 input");
    // EVP_DecodeBlock does not strip padding.
    std::size_t pad = 0;
    if (b64.size() >= 1 && b64[b64.size() - 1] == '=') ++pad;
    if (b64.size() >= 2 && b64[b64.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

std::int64_t SystemClock::now_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

} // namespace mcpgate
