#ifndef MCPGATE_UTIL_HPP
#define MCPGATE_UTIL_HPP

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mcpgate {

using Digest = std::array<std::uint8_t, 32>;
using Nonce = std::array<std::uint8_t, 16>;

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct CryptoError : std::runtime_error {
    explicit CryptoError(const std::string& what) : std::runtime_error(what) {}
};

struct ModelError : std::runtime_error {
    explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

std::string to_hex(const std::uint8_t* data, std::size_t len);
std::string to_hex(const Digest& d);
std::string to_hex(const Nonce& n);
std::vector<std::uint8_t> from_hex(std::string_view hex);
Digest digest_from_hex(std::string_view hex);
Nonce nonce_from_hex(std::string_view hex);

std::string base64_encode(const std::uint8_t* data, std::size_t len);
std::string base64_encode(const std::vector<std::uint8_t>& data);
std::vector<std::uint8_t> base64_decode(std::string_view b64);

/// Monotone wall-clock abstraction so tests and campaigns can run on a
/// scripted clock.
class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() const = 0;
};

class SystemClock final : public Clock {
public:
    std::int64_t now_ms() const override;
};

class ManualClock final : public Clock {
public:
    explicit ManualClock(std::int64_t start_ms = 0) : now_(start_ms) {}
    std::int64_t now_ms() const override { return now_; }
    void set(std::int64_t t) { now_ = t; }
    void advance(std::int64_t delta_ms) { now_ += delta_ms; }

private:
    std::int64_t now_;
};

} // namespace mcpgate

#endif
