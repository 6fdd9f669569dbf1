#ifndef MCPGATE_CRYPTO_HPP
#define MCPGATE_CRYPTO_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mcpgate/util.hpp"

typedef struct evp_pkey_st EVP_PKEY;

namespace mcpgate {

Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(std::string_view data);

void random_bytes(std::uint8_t* out, std::size_t len);
Nonce random_nonce();

/// ECDSA P-256 public key. Copyable handle over a shared EVP_PKEY.
class EcdsaPublicKey {
public:
    EcdsaPublicKey() = default;

    bool verify(std::span<const std::uint8_t> msg,
                std::span<const std::uint8_t> der_sig) const;

    std::string to_pem() const;
    static EcdsaPublicKey from_pem(const std::string& pem);

    bool valid() const { return static_cast<bool>(pkey_); }

private:
    friend class EcdsaPrivateKey;
    std::shared_ptr<EVP_PKEY> pkey_;
};

/// ECDSA P-256 signing key. Signatures are DER-encoded; the message is
/// hashed with SHA-256 inside the signing operation.
class EcdsaPrivateKey {
public:
    EcdsaPrivateKey() = default;

    static EcdsaPrivateKey generate();

    std::vector<std::uint8_t> sign(std::span<const std::uint8_t> msg) const;
    EcdsaPublicKey public_key() const;

    std::string to_pem() const;
    static EcdsaPrivateKey from_pem(const std::string& pem);

    bool valid() const { return static_cast<bool>(pkey_); }

private:
    std::shared_ptr<EVP_PKEY> pkey_;
};

/// Registered verification keys, indexed by signer id.
class Keyring {
public:
    void add(const std::string& signer, EcdsaPublicKey key);
    const EcdsaPublicKey* find(const std::string& signer) const;

private:
    std::map<std::string, EcdsaPublicKey> keys_;
};

} // namespace mcpgate

#endif
