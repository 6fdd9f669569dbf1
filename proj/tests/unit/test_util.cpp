#include <doctest.h>

#include "mcpgate/util.hpp"

using namespace mcpgate;

TEST_SUITE("util") {

TEST_CASE("hex round trip") {
    Digest d{};
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<std::uint8_t>(i);
    const std::string hex = to_hex(d);
    CHECK(hex.size() == 64);
    CHECK(hex.substr(0, 8) == "00010203");
    CHECK(digest_from_hex(hex) == d);

    Nonce n{};
    n[0] = 0xde;
    n[15] = 0xad;
    CHECK(nonce_from_hex(to_hex(n)) == n);
}

TEST_CASE("hex rejects malformed input") {
    CHECK_THROWS_AS((void)from_hex("0"), ConfigError);       // odd length
    CHECK_THROWS_AS((void)from_hex("zz"), ConfigError);      // non-hex digit
    CHECK_THROWS_AS((void)digest_from_hex("abcd"), ConfigError); // wrong size
    CHECK_THROWS_AS((void)nonce_from_hex(std::string(64, 'a')), ConfigError);
}

TEST_CASE("base64 matches RFC 4648 vectors") {
    const auto enc = [](std::string_view s) {
        return base64_encode(reinterpret_cast<const std::uint8_t*>(s.data()),
                             s.size());
    };
    CHECK(enc("") == "");
    CHECK(enc("f") == "Zg==");
    CHECK(enc("fo") == "Zm8=");
    CHECK(enc("foo") == "Zm9v");
    CHECK(enc("foob") == "Zm9vYg==");
    CHECK(enc("fooba") == "Zm9vYmE=");
    CHECK(enc("foobar") == "Zm9vYmFy");

    const std::vector<std::uint8_t> bytes = {0x00, 0xff, 0x10, 0x80, 0x7f};
    CHECK(base64_decode(base64_encode(bytes)) == bytes);
}

TEST_CASE("manual clock is scriptable") {
    ManualClock clock(100);
    CHECK(clock.now_ms() == 100);
    clock.advance(40);
    CHECK(clock.now_ms() == 140);
    clock.set(7);
    CHECK(clock.now_ms() == 7);
}

TEST_CASE("system clock is monotone enough to order successive reads") {
    SystemClock clock;
    const std::int64_t a = clock.now_ms();
    const std::int64_t b = clock.now_ms();
    CHECK(b >= a);
    CHECK(a > 1600000000000LL); // sanity: after Sep 2020
}

} // TEST_SUITE
