#include "mcpgate/crypto.hpp"

#include <openssl/bio.h>
#include <openssl/ec.h>
#include <openssl/err.h>
#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/rand.h>

namespace mcpgate {

namespace {

[[noreturn]] void throw_openssl(const char* op) {
    unsigned long code = ERR_get_error();
    char buf[256];
    ERR_error_string_n(code, buf, sizeof(buf));
    throw CryptoError(std::string(op) + ": " + buf);
}

std::shared_ptr<EVP_PKEY> wrap(EVP_PKEY* raw) {
    return std::shared_ptr<EVP_PKEY>(raw, EVP_PKEY_free);
}

struct BioDeleter {
    void operator()(BIO* b) const { BIO_free(b); }
};
using BioPtr = std::unique_ptr<BIO, BioDeleter>;

struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

std::string bio_to_string(BIO* bio) {
    char* data = nullptr;
    long len = BIO_get_mem_data(bio, &data);
    return std::string(data, static_cast<std::size_t>(len));
}

} // namespace

Digest sha256(std::span<const std::uint8_t> data) {
    Digest out{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(),
                   nullptr) != 1 ||
        len != out.size()) {
        throw_openssl("sha256");
    }
    return out;
}

Digest sha256(std::string_view data) {
    return sha256(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

void random_bytes(std::uint8_t* out, std::size_t len) {
    if (RAND_bytes(out, static_cast<int>(len)) != 1) throw_openssl("RAND_bytes");
}

Nonce random_nonce() {
    Nonce n;
    random_bytes(n.data(), n.size());
    return n;
}

EcdsaPrivateKey EcdsaPrivateKey::generate() {
    EVP_PKEY* raw = EVP_EC_gen("P-256");
    if (!raw) throw_openssl("EVP_EC_gen");
    EcdsaPrivateKey key;
    key.pkey_ = wrap(raw);
    return key;
}

std::vector<std::uint8_t> EcdsaPrivateKey::sign(
    std::span<const std::uint8_t> msg) const {
    if (!pkey_) throw CryptoError("sign: no private key loaded");
    MdCtxPtr ctx(EVP_MD_CTX_new());
    if (!ctx) throw_openssl("EVP_MD_CTX_new");
    if (EVP_DigestSignInit(ctx.get(), nullptr, EVP_sha256(), nullptr,
                           pkey_.get()) != 1) {
        throw_openssl("EVP_DigestSignInit");
    }
    std::size_t sig_len = 0;
    if (EVP_DigestSign(ctx.get(), nullptr, &sig_len, msg.data(), msg.size()) != 1)
        throw_openssl("EVP_DigestSign(size)");
    std::vector<std::uint8_t> sig(sig_len);
    if (EVP_DigestSign(ctx.get(), sig.data(), &sig_len, msg.data(), msg.size()) != 1)
        throw_openssl("EVP_DigestSign");
    sig.resize(sig_len);
    return sig;
}

EcdsaPublicKey EcdsaPrivateKey::public_key() const {
    if (!pkey_) throw CryptoError("public_key: no private key loaded");
    // Round-trip through PEM to strip the private part.
    BioPtr bio(BIO_new(BIO_s_mem()));
    if (!bio || PEM_write_bio_PUBKEY(bio.get(), pkey_.get()) != 1)
        throw_openssl("PEM_write_bio_PUBKEY");
    return EcdsaPublicKey::from_pem(bio_to_string(bio.get()));
}

std::string EcdsaPrivateKey::to_pem() const {
    if (!pkey_) throw CryptoError("to_pem: no private key loaded");
    BioPtr bio(BIO_new(BIO_s_mem()));
    if (!bio || PEM_write_bio_PrivateKey(bio.get(), pkey_.get(), nullptr, nullptr,
                                         0, nullptr, nullptr) != 1) {
        throw_openssl("PEM_write_bio_PrivateKey");
    }
    return bio_to_string(bio.get());
}

EcdsaPrivateKey EcdsaPrivateKey::from_pem(const std::string& pem) {
    BioPtr bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
    if (!bio) throw_openssl("BIO_new_mem_buf");
    EVP_PKEY* raw = PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr);
    if (!raw) throw_openssl("PEM_read_bio_PrivateKey");
    EcdsaPrivateKey key;
    key.pkey_ = wrap(raw);
    return key;
}

bool EcdsaPublicKey::verify(std::span<const std::uint8_t> msg,
                            std::span<const std::uint8_t> der_sig) const {
    if (!pkey_) return false;
    MdCtxPtr ctx(EVP_MD_CTX_new());
    if (!ctx) return false;
    if (EVP_DigestVerifyInit(ctx.get(), nullptr, EVP_sha256(), nullptr,
                             pkey_.get()) != 1) {
        return false;
    }
    int rc = EVP_DigestVerify(ctx.get(), der_sig.data(), der_sig.size(),
                              msg.data(), msg.size());
    if (rc != 1) ERR_clear_error();
    return rc == 1;
}

std::string EcdsaPublicKey::to_pem() const {
    if (!pkey_) throw CryptoError("to_pem: no public key loaded");
    BioPtr bio(BIO_new(BIO_s_mem()));
    if (!bio || PEM_write_bio_PUBKEY(bio.get(), pkey_.get()) != 1)
        throw_openssl("PEM_write_bio_PUBKEY");
    return bio_to_string(bio.get());
}

EcdsaPublicKey EcdsaPublicKey::from_pem(const std::string& pem) {
    BioPtr bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
    if (!bio) throw_openssl("BIO_new_mem_buf");
    EVP_PKEY* raw = PEM_read_bio_PUBKEY(bio.get(), nullptr, nullptr, nullptr);
    if (!raw) throw_openssl("PEM_read_bio_PUBKEY");
    EcdsaPublicKey key;
    key.pkey_ = wrap(raw);
    return key;
}

void Keyring::add(const std::string& signer, EcdsaPublicKey key) {
    keys_[signer] = std::move(key);
}

const EcdsaPublicKey* Keyring::find(const std::string& signer) const {
    auto it = keys_.find(signer);
    return it == keys_.end() ? nullptr : &it->second;
}

} // namespace mcpgate
